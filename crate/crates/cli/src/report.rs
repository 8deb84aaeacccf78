//! Report schema and artifact writing.
//!
//! Every JSON report is an object with these top-level fields:
//!
//! | field | content |
//! |---|---|
//! | `schema_version` | always `1` |
//! | `command` | subcommand name |
//! | `toolkit_version` | crate version |
//! | `inputs` | the merged config entries, output directory excluded |
//! | `params` | normal-form `(a, b, c)` |
//! | `conversion` | classical input and its conversion, or `null` |
//! | `seed` | seed of every randomized step |
//! | `integrator` | integrator settings |
//! | `status` | `ok` or `diagnostics_fail` |
//! | `diagnostics` | human-readable notes, one per failed check |
//! | `results` | command-specific payload |
//!
//! Objects are written with sorted keys, so equal reports are equal bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rossler_knots::dynamics::{Conversion, IntegratorConfig};
use rossler_knots::Params;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    DiagnosticsFail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub toolkit_version: String,
    pub inputs: BTreeMap<String, String>,
    pub params: Params,
    pub conversion: Option<Conversion>,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub status: Status,
    pub diagnostics: Vec<String>,
    pub results: Value,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig, results: Value, diagnostics: Vec<String>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: cfg.entries.clone(),
            params: cfg.params,
            conversion: cfg.conversion,
            seed: cfg.seed,
            integrator: cfg.integrator,
            status: if diagnostics.is_empty() {
                Status::Ok
            } else {
                Status::DiagnosticsFail
            },
            diagnostics,
            results,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        // through Value so that object keys come out sorted
        let v = serde_json::to_value(self).map_err(|e| CliError::Numerical(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let r: Report =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("not a report: {e}")))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Report::from_json(&text)
    }
}

/// Converts any serializable value to JSON; non-finite floats become `null`.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// A number with 17 significant digits, or an empty field when not finite.
pub fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_str(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Everything one command writes.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub report: Report,
    pub csv: Option<Csv>,
    pub svg: Option<String>,
}

impl Artifacts {
    pub fn report(report: Report) -> Self {
        Artifacts {
            report,
            csv: None,
            svg: None,
        }
    }

    /// Writes `<name>.json` and, when present, `<name>.csv` and `<name>.svg` into `dir`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<Vec<PathBuf>, CliError> {
        let json = self.report.to_json()?;
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let mut files = vec![(dir.join(format!("{name}.json")), json)];
        if let Some(csv) = &self.csv {
            files.push((dir.join(format!("{name}.csv")), csv.render()));
        }
        if let Some(svg) = &self.svg {
            files.push((dir.join(format!("{name}.svg")), svg.clone()));
        }
        let mut paths = Vec::new();
        for (path, text) in files {
            std::fs::write(&path, text)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_formatting() {
        assert_eq!(csv_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(csv_f64(f64::NAN), "");
        assert_eq!(csv_str("torus(2,5)"), "\"torus(2,5)\"");
        assert_eq!(csv_str("plain"), "plain");
        let mut c = Csv::new(&["x", "y"]);
        assert_eq!(c.render(), "x,y\n");
        c.push(vec!["1".into(), "2".into()]);
        assert_eq!(c.render(), "x,y\n1,2\n");
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig::new(Default::default(), &[]).unwrap();
        let r = Report::new(
            "analyze",
            &cfg,
            json!({"x": 0.1 + 0.2, "nested": {"z": 1, "a": [1e-300, -2.5]}, "gap": f64::NAN}),
            vec!["note".into()],
        );
        let text = r.to_json().unwrap();
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.status, Status::DiagnosticsFail);
    }
}
