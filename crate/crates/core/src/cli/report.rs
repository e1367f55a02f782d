use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, ErrorKind};

/// JSON schema every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

/// Outcome of one command. The JSON and the human rendering are produced
/// from the same `Value`, so they agree on every number.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    /// Flags and inputs as given, tolerances included.
    pub args: Value,
    /// SHA-256 over the bytes of all input files, in argument order.
    pub input_digest: Option<String>,
    pub results: Value,
    pub timings_ms: Map<String, Value>,
    pub pass: bool,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Input => 2,
        ErrorKind::Verification => 3,
        ErrorKind::Numerical => 4,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Input => "input",
        ErrorKind::Verification => "verification",
        ErrorKind::Numerical => "numerical",
    }
}

impl Report {
    pub fn new(command: &str, args: Value) -> Self {
        Self {
            command: command.to_string(),
            args,
            input_digest: None,
            results: Value::Object(Map::new()),
            timings_ms: Map::new(),
            pass: true,
            exit_code: 0,
            error: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("serializable result");
        if let Value::Object(m) = &mut self.results {
            m.insert(key.to_string(), v);
        }
    }

    pub fn time(&mut self, key: &str, ms: f64) {
        self.timings_ms.insert(key.to_string(), json!(ms));
    }

    /// Marks a failed check that is not an error of the command itself.
    pub fn fail(&mut self, code: i32) {
        self.pass = false;
        self.exit_code = code;
    }

    pub fn with_error(mut self, e: &Error) -> Self {
        let kind = e.kind();
        self.pass = false;
        self.exit_code = exit_code(kind);
        self.error = Some(json!({ "kind": kind_name(kind), "message": e.to_string() }));
        self
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable report")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    pub fn render_human(&self) -> String {
        let v = self.to_json();
        let mut out = String::new();
        out.push_str(&format!(
            "{}: {}\n",
            self.command,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        for key in ["input_digest", "args", "results", "timings_ms", "error"] {
            match &v[key] {
                Value::Null => {}
                other => render(&mut out, key, other, 0),
            }
        }
        out.push_str(&format!("exit code: {}\n", self.exit_code));
        out
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_object() && is_flat_row(x)),
        _ => false,
    }
}

fn is_flat_row(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_array() && !x.is_object()),
        _ => true,
    }
}

fn render(out: &mut String, key: &str, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(m) => {
            out.push_str(&format!("{pad}{key}:\n"));
            for (k, x) in m {
                render(out, k, x, depth + 1);
            }
        }
        Value::Array(a) if a.iter().all(|x| x.is_array()) && is_flat(v) && !a.is_empty() => {
            // matrices one row per line
            out.push_str(&format!("{pad}{key}:\n"));
            for row in a {
                out.push_str(&format!("{pad}  {row}\n"));
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object()) => {
            out.push_str(&format!("{pad}{key}:\n"));
            for (i, x) in a.iter().enumerate() {
                render(out, &format!("[{i}]"), x, depth + 1);
            }
        }
        Value::String(s) => out.push_str(&format!("{pad}{key}: {s}\n")),
        other => out.push_str(&format!("{pad}{key}: {other}\n")),
    }
}
