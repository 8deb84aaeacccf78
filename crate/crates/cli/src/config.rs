//! `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;

use rossler_knots::dynamics::{convert_classical, ClassicalParams, Conversion, IntegratorConfig};
use rossler_knots::Params;

use crate::CliError;

/// Keys every command accepts.
pub const COMMON_KEYS: &[&str] = &[
    "a",
    "b",
    "c",
    "classical_a",
    "classical_b",
    "classical_c",
    "tol",
    "t_max",
    "escape_radius",
    "seed",
    "h",
];

/// The classical parameters used when none are given.
pub const DEFAULT_CLASSICAL: ClassicalParams = ClassicalParams {
    A: 0.2,
    B: 0.2,
    C: 5.7,
};

/// Parses the text format. Duplicate keys and malformed lines are errors.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key {k}", n + 1)));
        }
    }
    Ok(out)
}

pub fn read_entries(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_entries(&text)
}

/// Validated configuration shared by all commands, plus the raw entries for the
/// command-specific keys.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: Params,
    pub conversion: Option<Conversion>,
    pub integrator: IntegratorConfig,
    pub t_max: f64,
    pub seed: u64,
    pub h: f64,
    pub entries: BTreeMap<String, String>,
}

fn parse_f64(entries: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, CliError> {
    entries
        .get(key)
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("{key}: not a finite number: {v}")))
        })
        .transpose()
}

impl RunConfig {
    /// Validates `entries` against the common keys plus `extra`.
    pub fn new(entries: BTreeMap<String, String>, extra: &[&str]) -> Result<Self, CliError> {
        for k in entries.keys() {
            if !COMMON_KEYS.contains(&k.as_str()) && !extra.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key: {k}")));
            }
        }
        let normal = ["a", "b", "c"].map(|k| parse_f64(&entries, k));
        let classical = ["classical_a", "classical_b", "classical_c"].map(|k| parse_f64(&entries, k));
        let normal: Vec<Option<f64>> = normal.into_iter().collect::<Result<_, _>>()?;
        let classical: Vec<Option<f64>> = classical.into_iter().collect::<Result<_, _>>()?;
        let n_normal = normal.iter().flatten().count();
        let n_classical = classical.iter().flatten().count();
        let (params, conversion) = match (n_normal, n_classical) {
            (3, 0) => (
                Params::new(normal[0].unwrap(), normal[1].unwrap(), normal[2].unwrap())
                    .map_err(|e| CliError::Config(e.to_string()))?,
                None,
            ),
            (0, 3) | (0, 0) => {
                let cp = if n_classical == 3 {
                    ClassicalParams {
                        A: classical[0].unwrap(),
                        B: classical[1].unwrap(),
                        C: classical[2].unwrap(),
                    }
                } else {
                    DEFAULT_CLASSICAL
                };
                let conv = convert_classical(cp).map_err(|e| CliError::Config(e.to_string()))?;
                (conv.params, Some(conv))
            }
            (0, _) => return Err(CliError::Config("classical_a, classical_b, classical_c must be given together".into())),
            (_, 0) => return Err(CliError::Config("a, b, c must be given together".into())),
            _ => return Err(CliError::Config("give either a, b, c or classical_a, classical_b, classical_c".into())),
        };
        let mut integrator = IntegratorConfig::default();
        if let Some(t) = parse_f64(&entries, "tol")? {
            integrator.tol = t;
        }
        if let Some(r) = parse_f64(&entries, "escape_radius")? {
            integrator.escape_radius = r;
        }
        integrator
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let t_max = parse_f64(&entries, "t_max")?.unwrap_or(200.0);
        if !(t_max > 0.0) {
            return Err(CliError::Config("t_max must be positive".into()));
        }
        let h = parse_f64(&entries, "h")?.unwrap_or(1e-6);
        if !(1e-7..=1e-4).contains(&h) {
            return Err(CliError::Config("h must lie in [1e-7, 1e-4]".into()));
        }
        let seed = match entries.get("seed") {
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("seed: not an unsigned integer: {v}")))?,
            None => 0,
        };
        Ok(RunConfig {
            params,
            conversion,
            integrator,
            t_max,
            seed,
            h,
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(parse_f64(&self.entries, key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("{key}: not a non-negative integer: {v}"))),
            None => Ok(default),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some("false") | Some("no") | Some("0") => Ok(false),
            Some(v) => Err(CliError::Config(format!("{key}: expected true or false, got {v}"))),
            None => Ok(default),
        }
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| CliError::Config(format!("{key}: bad number {s:?}")))
                    })
                    .collect()
            })
            .transpose()
    }
}
