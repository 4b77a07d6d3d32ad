use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::checks::CheckResult;
use crate::error::{LabError, LabResult};

/// Outcome of one subcommand: the resolved configuration, scalar results,
/// emitted files and the per-check verdicts.
#[derive(Debug, Clone, Serialize, Default)]
pub struct ExperimentReport {
    pub command: String,
    pub config_echo: Value,
    pub outcome: BTreeMap<String, Value>,
    pub artifact_paths: Vec<PathBuf>,
    pub pass_fail: Vec<CheckResult>,
}

impl ExperimentReport {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), config_echo: Value::Null, ..Self::default() }
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.outcome.insert(key.into(), v);
    }

    pub fn check(&mut self, result: CheckResult) {
        debug_assert!(self.pass_fail.iter().all(|c| c.name != result.name), "duplicate check {}", result.name);
        self.pass_fail.push(result);
    }

    pub fn artifact(&mut self, path: PathBuf) {
        self.artifact_paths.push(path);
    }

    pub fn all_pass(&self) -> bool {
        self.pass_fail.iter().all(|c| c.pass)
    }

    /// Fixed-width table of the outcome values and the checks.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "piezo-lab {}", self.command);
        if !self.outcome.is_empty() {
            let width = self.outcome.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, v) in &self.outcome {
                let _ = writeln!(out, "  {k:<width$}  {}", render(v));
            }
        }
        if !self.pass_fail.is_empty() {
            let name_w = self.pass_fail.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
            let tol_w = self.pass_fail.iter().map(|c| c.tolerance.len()).max().unwrap_or(9).max(9);
            let _ = writeln!(out, "{:<name_w$}  {:>12}  {:<tol_w$}  {:<4}  detail", "check", "measured", "tolerance", "pass");
            for c in &self.pass_fail {
                let _ = writeln!(
                    out,
                    "{:<name_w$}  {:>12.4e}  {:<tol_w$}  {:<4}  {}",
                    c.name,
                    c.measured,
                    c.tolerance,
                    if c.pass { "yes" } else { "NO" },
                    c.detail
                );
            }
        }
        for p in &self.artifact_paths {
            let _ = writeln!(out, "wrote {}", p.display());
        }
        out
    }

    /// Writes `summary.txt` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> LabResult<()> {
        let txt = dir.join("summary.txt");
        std::fs::write(&txt, self.table()).map_err(|source| LabError::Output { path: txt, source })?;
        let json = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&json, text).map_err(|source| LabError::Output { path: json, source })?;
        Ok(())
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.6e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
