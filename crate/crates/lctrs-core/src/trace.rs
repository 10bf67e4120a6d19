//! Newline-delimited JSON traces of rewrite steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::StepRecord;

/// One step, serialized with pretty-printed terms so traces are stable
/// and diffable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub mode: String,
    pub rule_id: String,
    pub position: Vec<usize>,
    pub matcher: BTreeMap<String, String>,
    pub input: String,
    pub output: String,
    pub gate: String,
}

impl TraceLine {
    pub fn from_step(step: &StepRecord) -> TraceLine {
        TraceLine {
            mode: step.redex.mode.to_string(),
            rule_id: step.redex.rule_id.clone(),
            position: step.redex.position.0.clone(),
            matcher: step
                .redex
                .matcher
                .iter()
                .map(|(v, t)| (v.name.clone(), t.to_string()))
                .collect(),
            input: step.input.to_string(),
            output: step.output.to_string(),
            gate: step.redex.gate.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace lines serialize")
    }

    pub fn from_json(line: &str) -> Result<TraceLine, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Renders steps as newline-delimited JSON.
pub fn render_trace<'a>(steps: impl IntoIterator<Item = &'a StepRecord>) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str(&TraceLine::from_step(step).to_json());
        out.push('\n');
    }
    out
}
