use serde::Serialize;
use serde_json::Value;

#[derive(Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

/// One line of output: what ran, with what, what came out and whether it passed.
#[derive(Serialize, Debug)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub status: Status,
    /// All checks in this report passed (always false on error).
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn ok(command: &str, inputs: Value, outputs: Value, passed: bool, wall_time: f64) -> Self {
        Self { command: command.into(), inputs, outputs, status: Status::Ok, passed, error: None, wall_time }
    }

    pub fn error(command: &str, inputs: Value, message: String, wall_time: f64) -> Self {
        Self {
            command: command.into(),
            inputs,
            outputs: Value::Null,
            status: Status::Error,
            passed: false,
            error: Some(message),
            wall_time,
        }
    }
}
