use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

/// Significant digits for report numbers without `--precise`.
pub const REPORT_DIGITS: usize = 6;
/// Spectra keep more digits than the rest of a report.
pub const SPECTRUM_DIGITS: usize = 15;
const SPECTRUM_KEYS: [&str; 2] = ["eigenvalues", "eigenvalues_by_k"];

#[derive(Debug)]
pub enum CliError {
    /// Bad input: flags, files, or values the library rejects. Exit code 1.
    Validation { kind: String, message: String },
    /// A numerical routine failed on valid input. Exit code 2.
    Numeric { kind: String, message: String },
}

impl CliError {
    pub fn invalid(kind: &str, message: impl Into<String>) -> Self {
        CliError::Validation { kind: kind.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Numeric { .. } => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Validation { kind, message } | CliError::Numeric { kind, message } => (kind, message),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": self.exit_code() } })
    }
}

impl From<markov_conc::Error> for CliError {
    fn from(e: markov_conc::Error) -> Self {
        let (kind, message) = (e.kind().to_string(), e.to_string());
        if e.is_validation() {
            CliError::Validation { kind, message }
        } else {
            CliError::Numeric { kind, message }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Round every floating-point number in `value`; integers are left alone.
pub fn round_value(value: Value, digits: usize) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            Number::from_f64(round_sig(x, digits)).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(|v| round_value(v, digits)).collect()),
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| {
                    let d = if SPECTRUM_KEYS.contains(&k.as_str()) { digits.max(SPECTRUM_DIGITS) } else { digits };
                    (k, round_value(v, d))
                })
                .collect::<Map<_, _>>(),
        ),
        other => other,
    }
}

pub fn render<T: Serialize>(report: &T, precise: bool) -> CliResult<String> {
    let value = serde_json::to_value(report).map_err(|e| CliError::invalid("Serialize", e.to_string()))?;
    let value = if precise { value } else { round_value(value, REPORT_DIGITS) };
    serde_json::to_string_pretty(&value).map_err(|e| CliError::invalid("Serialize", e.to_string()))
}

/// Print to stdout, or write to `out` when given.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| CliError::invalid("Io", format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::invalid("Io", e.to_string())),
                _ => Ok(()),
            }
        }
    }
}
