use std::io::{IsTerminal, Write};

use serde::Serialize;
use serde_json::{Map, Value};
use spsys_core::validate::RuleDiagnostic;
use spsys_core::{ParseDiagnostic, Severity, SourceSpan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    ValidationError,
    ParseError,
    UsageError,
    StrictFailure,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::ValidationError => 1,
            Status::ParseError => 2,
            Status::UsageError => 3,
            Status::StrictFailure => 4,
        }
    }
}

/// Parse and rule diagnostics in one shape.
#[derive(Clone, Debug, Serialize)]
pub struct Diag {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<SourceSpan>,
    #[serde(skip)]
    pub line: String,
}

impl From<&ParseDiagnostic> for Diag {
    fn from(d: &ParseDiagnostic) -> Self {
        Diag {
            severity: d.severity,
            code: d.code.to_string(),
            message: d.message.clone(),
            subject: None,
            span: Some(d.span.clone()),
            line: d.to_string(),
        }
    }
}

impl From<&RuleDiagnostic> for Diag {
    fn from(d: &RuleDiagnostic) -> Self {
        Diag {
            severity: d.severity,
            code: d.code.to_string(),
            message: d.message.clone(),
            subject: Some(d.subject.to_string()),
            span: None,
            line: d.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Envelope {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub status: Status,
    pub model_name: Option<String>,
    pub input_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub diagnostics: Vec<Diag>,
    #[serde(flatten)]
    pub payload: Map<String, Value>,
}

/// Everything a command produced, before it is written out.
#[derive(Debug)]
pub struct Output {
    pub envelope: Envelope,
    pub text: String,
}

impl Output {
    pub fn new(command: &'static str) -> Self {
        Output {
            envelope: Envelope {
                tool_version: env!("CARGO_PKG_VERSION"),
                command,
                status: Status::Ok,
                model_name: None,
                input_digest: None,
                error: None,
                diagnostics: Vec::new(),
                payload: Map::new(),
            },
            text: String::new(),
        }
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("payload serializes");
        self.envelope.payload.insert(key.to_string(), value);
    }

    pub fn has_warnings(&self) -> bool {
        self.envelope.diagnostics.iter().any(|d| d.severity == Severity::Warning)
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.envelope).expect("envelope serializes");
        s.push('\n');
        s
    }
}

pub fn color_enabled(no_color_flag: bool) -> bool {
    let env_off = std::env::var("SPSYS_NO_COLOR").is_ok_and(|v| v == "1");
    !no_color_flag && !env_off && std::io::stderr().is_terminal()
}

pub fn write_diagnostics(out: &Output, color: bool) {
    let mut err = std::io::stderr().lock();
    for d in &out.envelope.diagnostics {
        let line = match (color, d.severity) {
            (true, Severity::Error) => format!("\x1b[31m{}\x1b[0m", d.line),
            (true, Severity::Warning) => format!("\x1b[33m{}\x1b[0m", d.line),
            _ => d.line.clone(),
        };
        let _ = writeln!(err, "{line}");
    }
    if let Some(e) = &out.envelope.error {
        let _ = if color {
            writeln!(err, "\x1b[31merror: {e}\x1b[0m")
        } else {
            writeln!(err, "error: {e}")
        };
    }
}
