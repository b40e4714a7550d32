//! Diagnostic types shared by the parser and the validator.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// 1-based line/column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Position {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceSpan {
    pub file: String,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    pub fn new(file: &str, start: Position, end: Position) -> Self {
        let end = end.max(start);
        SourceSpan {
            file: file.to_string(),
            start_line: start.line,
            start_col: start.col,
            end_line: end.line,
            end_col: end.col,
        }
    }

    pub fn start(&self) -> Position {
        Position {
            line: self.start_line,
            col: self.start_col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start_line, self.start_col)
    }
}

/// A parser finding. Codes: P001 lexical, P010 syntax, P020 unknown
/// stereotype keyword, P100 dangling reference, P101 duplicate identifier,
/// P102 reference to the wrong kind of entity, P103 requirement stereotype
/// misuse, P104 membership cycle, P200 reversed mirror (auto-corrected).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl ParseDiagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, file: &str, start: Position, end: Position) -> Self {
        ParseDiagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span: SourceSpan::new(file, start, end),
        }
    }

    pub fn at(severity: Severity, code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        ParseDiagnostic {
            severity,
            code,
            message: message.into(),
            span,
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} [{}] {}", self.severity, self.code, self.span, self.message)
    }
}
