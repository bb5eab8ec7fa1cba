use serde::{Deserialize, Serialize};

/// A computed error functional with a disclosure of how the supremum was taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub class: String,
    pub notes: String,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, value: f64, class: impl Into<String>, notes: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            class: class.into(),
            notes: notes.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
