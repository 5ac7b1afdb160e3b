//! Machine-readable run reports. Everything that depends only on the command
//! line and the seed lives in `payload`; timing sits outside it.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::problem::FORMAT_VERSION;

pub const TOOL: &str = "vvicert";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name, as given.
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_hash: Option<String>,
    pub seed: u64,
    pub payload: Value,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(
        command: Vec<String>,
        problem_hash: Option<String>,
        seed: u64,
        payload: Value,
    ) -> Self {
        Report {
            tool: TOOL.into(),
            version: FORMAT_VERSION.into(),
            command,
            problem_hash,
            seed,
            payload,
            wall_clock_seconds: 0.0,
        }
    }

    /// The echoed command with the recorded seed pinned.
    pub fn replay_args(&self) -> Vec<String> {
        let mut args = Vec::with_capacity(self.command.len() + 2);
        let mut it = self.command.iter();
        while let Some(a) = it.next() {
            if a == "--seed" {
                it.next();
            } else if !a.starts_with("--seed=") {
                args.push(a.clone());
            }
        }
        args.push("--seed".into());
        args.push(self.seed.to_string());
        args
    }

    pub fn payload_text(&self) -> String {
        serde_json::to_string(&self.payload).expect("payload serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
