use crate::diagnostic::{ParseDiagnostic, Position};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    Colon,
    Semi,
    Dot,
    Arrow,
    BiArrow,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::BiArrow => "`<->`".into(),
            TokenKind::Eof => "end of file".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub start: Position,
    pub end: Position,
}

struct Cursor<'s> {
    chars: std::iter::Peekable<std::str::Chars<'s>>,
    pos: Position,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else if c != '\r' {
            self.pos.col += 1;
        }
        Some(c)
    }
}

/// Splits source text into tokens. Lexical errors (P001) are collected and the
/// offending characters skipped, so the token stream always ends with `Eof`.
pub fn tokenize(source: &str, file: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        pos: Position { line: 1, col: 1 },
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        let start = cur.pos;
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let kind = match c {
            '/' => {
                cur.bump();
                match cur.peek() {
                    Some('/') => {
                        while cur.peek().is_some_and(|c| c != '\n') {
                            cur.bump();
                        }
                        continue;
                    }
                    Some('*') => {
                        cur.bump();
                        let mut closed = false;
                        while let Some(c) = cur.bump() {
                            if c == '*' && cur.peek() == Some('/') {
                                cur.bump();
                                closed = true;
                                break;
                            }
                        }
                        if !closed {
                            diags.push(ParseDiagnostic::error(
                                "P001",
                                "unterminated block comment",
                                file,
                                start,
                                cur.pos,
                            ));
                        }
                        continue;
                    }
                    _ => {
                        diags.push(ParseDiagnostic::error("P001", "unexpected character `/`", file, start, cur.pos));
                        continue;
                    }
                }
            }
            '"' => {
                cur.bump();
                let mut text = String::new();
                let mut closed = false;
                while let Some(c) = cur.bump() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match cur.bump() {
                            Some('"') => text.push('"'),
                            Some('\\') => text.push('\\'),
                            other => {
                                let shown = other.map(String::from).unwrap_or_default();
                                diags.push(ParseDiagnostic::error(
                                    "P001",
                                    format!("invalid escape `\\{shown}` in string"),
                                    file,
                                    start,
                                    cur.pos,
                                ));
                            }
                        },
                        '\n' => break,
                        c => text.push(c),
                    }
                }
                if !closed {
                    diags.push(ParseDiagnostic::error("P001", "unterminated string literal", file, start, cur.pos));
                }
                TokenKind::Str(text)
            }
            '{' => {
                cur.bump();
                TokenKind::LBrace
            }
            '}' => {
                cur.bump();
                TokenKind::RBrace
            }
            ':' => {
                cur.bump();
                TokenKind::Colon
            }
            ';' => {
                cur.bump();
                TokenKind::Semi
            }
            '.' => {
                cur.bump();
                TokenKind::Dot
            }
            '-' => {
                cur.bump();
                if cur.peek() == Some('>') {
                    cur.bump();
                    TokenKind::Arrow
                } else {
                    diags.push(ParseDiagnostic::error("P001", "unexpected character `-`", file, start, cur.pos));
                    continue;
                }
            }
            '<' => {
                cur.bump();
                if cur.peek() == Some('-') {
                    cur.bump();
                    if cur.peek() == Some('>') {
                        cur.bump();
                        TokenKind::BiArrow
                    } else {
                        diags.push(ParseDiagnostic::error("P001", "expected `<->`", file, start, cur.pos));
                        continue;
                    }
                } else {
                    diags.push(ParseDiagnostic::error("P001", "unexpected character `<`", file, start, cur.pos));
                    continue;
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        text.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(text)
            }
            other => {
                cur.bump();
                diags.push(ParseDiagnostic::error(
                    "P001",
                    format!("unexpected character `{}`", other.escape_debug()),
                    file,
                    start,
                    cur.pos,
                ));
                continue;
            }
        };
        tokens.push(Token {
            kind,
            start,
            end: cur.pos,
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        start: cur.pos,
        end: cur.pos,
    });
    (tokens, diags)
}
