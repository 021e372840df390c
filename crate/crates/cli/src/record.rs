//! Run records and their on-disk form.
//!
//! CSV: header row, one row per grid node or sweep point, 17 significant
//! digits, LF line endings. JSON: one object with sorted keys and shortest
//! round-trip numbers. Timings stay in memory so files are reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::{Command, ExperimentConfig};
use crate::EmitError;

pub const PROFILE_HEADER: [&str; 4] = ["t", "phi", "phi_t", "residual"];
pub const SWEEP_HEADER: [&str; 3] = ["eps", "r_eps", "value"];

/// Artifact version recorded in every run.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// A numeric table written as one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn profile(name: &str, t: &[f64], phi: &[f64], phi_t: &[f64], residual: &[f64]) -> Self {
        let rows = (0..t.len()).map(|i| vec![t[i], phi[i], phi_t[i], residual[i]]).collect();
        Table { name: name.into(), header: PROFILE_HEADER.to_vec(), rows }
    }

    pub fn sweep(name: &str, points: &[(f64, f64, f64)]) -> Self {
        let rows = points.iter().map(|&(e, r, v)| vec![e, r, v]).collect();
        Table { name: name.into(), header: SWEEP_HEADER.to_vec(), rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_csv(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits in scientific notation.
pub fn format_csv(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub command: Command,
    pub version: String,
    pub config: ExperimentConfig,
    pub outputs: Map<String, Value>,
    pub assertions: BTreeMap<String, bool>,
    pub tables: Vec<Table>,
    /// Wall-clock seconds per stage; never written to disk.
    pub timings: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunRecord {
            command: config.command,
            version: VERSION.into(),
            config: config.clone(),
            outputs: Map::new(),
            assertions: BTreeMap::new(),
            tables: Vec::new(),
            timings: BTreeMap::new(),
            error: None,
        }
    }

    /// Diagnostic record for a run that failed numerically.
    pub fn failure(config: &ExperimentConfig, error: &solitonforge::Error) -> Self {
        let mut r = Self::new(config);
        r.error = Some(error.to_string());
        r
    }

    pub fn output(&mut self, key: &str, value: impl Into<Value>) {
        self.outputs.insert(key.into(), value.into());
    }

    pub fn assert(&mut self, key: &str, ok: bool) {
        self.assertions.insert(key.into(), ok);
    }

    pub fn all_pass(&self) -> bool {
        self.error.is_none() && self.assertions.values().all(|&v| v)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("all_pass".into(), self.all_pass().into());
        obj.insert(
            "assertions".into(),
            Value::Object(self.assertions.iter().map(|(k, v)| (k.clone(), Value::Bool(*v))).collect()),
        );
        obj.insert("command".into(), self.command.name().into());
        obj.insert("config".into(), serde_json::to_value(self.config.to_file()).expect("config serializes"));
        if let Some(e) = &self.error {
            obj.insert("error".into(), e.clone().into());
        }
        obj.insert("outputs".into(), Value::Object(self.outputs.clone()));
        obj.insert("version".into(), self.version.clone().into());
        Value::Object(obj)
    }

    /// File name and contents of everything [`emit`] writes.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut json = serde_json::to_string_pretty(&self.to_json()).expect("record serializes");
        json.push('\n');
        let mut out = vec![("record.json".to_string(), json)];
        out.extend(self.tables.iter().map(|t| (format!("{}.csv", t.name), t.to_csv())));
        out
    }
}

/// Writes the record into `dir` (created if missing); returns the paths.
pub fn emit(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError { path: dir.display().to_string(), source })?;
    let mut paths = Vec::new();
    for (name, contents) in record.files() {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|source| EmitError { path: path.display().to_string(), source })?;
        paths.push(path);
    }
    Ok(paths)
}

/// `f64` as JSON; non-finite values become `null`.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;

    #[test]
    fn csv_layout() {
        let t = Table::sweep("s", &[(1e-3, 0.01, 1.5), (1e-4, 0.002, f64::NAN)]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[0], "eps,r_eps,value");
        assert_eq!(lines[1], "1.0000000000000000e-3,1.0000000000000000e-2,1.5000000000000000e0");
        assert!(lines[2].ends_with("NaN"));
        assert_eq!(lines[3], "");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn csv_values_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, 6.02214076e23, -7.5e-12] {
            let back: f64 = format_csv(v).parse().unwrap();
            assert_eq!(back, v);
        }
    }

    #[test]
    fn json_keys_are_sorted_and_numbers_shortest() {
        let cfg = ExperimentConfig::resolve(Command::Cao, ConfigFile::default()).unwrap();
        let mut r = RunRecord::new(&cfg);
        r.output("zeta", 0.1);
        r.output("alpha", num(f64::INFINITY));
        r.assert("b", true);
        r.assert("a", false);
        let text = serde_json::to_string(&r.to_json()).unwrap();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(text.contains("\"zeta\":0.1"));
        assert!(text.contains("\"alpha\":null"));
        assert!(text.starts_with("{\"all_pass\":false,\"assertions\":{\"a\":false,\"b\":true}"));
    }
}
