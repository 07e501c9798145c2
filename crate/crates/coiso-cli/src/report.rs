//! The JSON report and its text rendering.

use std::collections::BTreeMap;

use coiso::connection::Classification;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA: &str = "coiso-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketRow {
    pub point: Vec<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_part: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintEntry {
    pub label: String,
    pub max_abs: f64,
    pub is_constraint: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub model: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_dim: Option<usize>,
    pub residuals: BTreeMap<String, f64>,
    /// A number, or the string `"inf"`.
    pub tubular_radius: Option<Value>,
    pub brackets: Vec<BracketRow>,
    pub constraints: Vec<ConstraintEntry>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
    pub stages: Vec<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            model: cfg.model.name().to_string(),
            config: cfg.clone(),
            generated_at: None,
            classification: None,
            kernel_dim: None,
            residuals: BTreeMap::new(),
            tubular_radius: None,
            brackets: Vec::new(),
            constraints: Vec::new(),
            details: BTreeMap::new(),
            stages: Vec::new(),
            failure_stage: None,
            error: None,
            pass: false,
        }
    }

    pub fn stage(&mut self, name: &str, pass: bool) {
        self.stages.push(Stage { name: name.to_string(), pass });
    }

    pub fn residual(&mut self, name: &str, v: f64) {
        self.residuals.insert(name.to_string(), v);
    }

    pub fn detail(&mut self, name: &str, v: impl Serialize) {
        self.details.insert(name.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Short text summary rendered from the JSON value.
pub fn render(json: &str) -> String {
    let v: Value = match serde_json::from_str(json) {
        Ok(v) => v,
        Err(_) => return String::new(),
    };
    let mut out = String::new();
    let field = |k: &str| v.get(k).filter(|x| !x.is_null()).map(|x| x.to_string().trim_matches('"').to_string());
    for k in ["command", "model", "classification", "kernel_dim", "tubular_radius", "failure_stage", "error", "pass"] {
        if let Some(val) = field(k) {
            out.push_str(&format!("{k:>15}: {val}\n"));
        }
    }
    if let Some(Value::Object(m)) = v.get("residuals") {
        for (k, val) in m {
            out.push_str(&format!("{:>15}: {val}\n", k));
        }
    }
    out
}
