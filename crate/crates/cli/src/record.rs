use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub diagnostics: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    /// Set when the run stopped early; the outputs written so far are kept.
    pub partial: bool,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            diagnostics: serde_json::Value::Null,
            verdicts: Vec::new(),
            pass: false,
            partial: false,
            error: None,
            files: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn finish(&mut self) {
        self.pass = self.error.is_none() && self.verdicts.iter().all(|v| v.pass);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// The JSON with the wall time zeroed, for determinism comparisons.
    pub fn stable_json(&self) -> String {
        let mut r = self.clone();
        r.wall_time_s = 0.0;
        r.to_json()
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            out.push_str(&format!(
                "{} {}: {}\n",
                if v.pass { "PASS" } else { "FAIL" },
                v.name,
                v.detail
            ));
        }
        if let Some(e) = &self.error {
            out.push_str(&format!("ERROR {e}\n"));
        }
        out
    }
}
