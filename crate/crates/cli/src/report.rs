use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

/// Summary of one run: machine-readable fields plus the lines shown on stdout.
#[derive(Debug, Default)]
pub struct Report {
    pub json: Map<String, Value>,
    pub text: String,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.json.insert("command".into(), Value::from(command));
        r
    }

    /// Records `value` under `key` and prints it as one line.
    pub fn field(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("report values serialise");
        let shown = match &v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let _ = writeln!(self.text, "{key}: {shown}");
        self.json.insert(key.into(), v);
        self
    }

    /// Records `value` without printing it.
    pub fn quiet(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.json
            .insert(key.into(), serde_json::to_value(value).expect("report values serialise"));
        self
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.json)?;
        fs::write(dir.join("report.json"), json + "\n").context("writing report.json")?;
        fs::write(dir.join("report.txt"), &self.text).context("writing report.txt")?;
        Ok(())
    }
}
