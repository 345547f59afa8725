//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "graph":   { "n": 100, "p": 0.3, "seed": 1 },
//!   "problem": { "d1": 3, "d": 2, "r": 0.05, "box": [1, 10], "seed": 2 },
//!   "sched":   { "alpha": { "a": 0.1, "c": 1, "e": 0.9 }, "beta": { "a": 0.1, "c": 1, "e": 0.6 },
//!                "eta": { "a": 0.1, "c": 1, "e": 0.6 }, "gamma": 0.8 },
//!   "noise":   { "sigma2_pull": 25, "sigma2_push": 25, "growth_pull": 0, "growth_push": 0 },
//!   "algorithm": "vra_gt",
//!   "iterations": 20000,
//!   "seeds": 20
//! }
//! ```
//!
//! `graph` may instead be `{ "file": "edges.txt" }` and `problem`
//! `{ "file": "ridge.txt" }`. `sweep` maps dotted keys to lists of values.

use crate::schedules::ScheduleSet;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GraphSpec {
    File {
        file: PathBuf,
    },
    RingPlusRandom {
        n: usize,
        p: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_box() -> (f64, f64) {
    (1.0, 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ProblemSpec {
    File {
        file: PathBuf,
    },
    Ridge {
        d1: usize,
        d: usize,
        r: f64,
        #[serde(rename = "box", default = "default_box")]
        bounds: (f64, f64),
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma2_pull: f64,
    pub sigma2_push: f64,
    #[serde(default)]
    pub growth_pull: f64,
    #[serde(default)]
    pub growth_push: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    VraGt,
    RPushPull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RPushPullSpec {
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl Default for RPushPullSpec {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            beta: 0.01,
            alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn values(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Count(1)
    }
}

fn default_record_every() -> u64 {
    10
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub problem: ProblemSpec,
    #[serde(default = "ScheduleSet::benchmark_default")]
    pub sched: ScheduleSet,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub r_push_pull: RPushPullSpec,
    pub iterations: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub seeds: SeedSpec,
    /// Base for the per-run master seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<Value>>,
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::InvalidConfiguration(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::InvalidConfiguration(e.to_string()))?;
        Self::from_value(v)
    }

    /// Reads a config file; relative `file` paths resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfiguration(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        if let GraphSpec::File { file } = &mut self.graph {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        if let ProblemSpec::File { file } = &mut self.problem {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfiguration("iterations must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfiguration("record_every must be >= 1".into()));
        }
        if self.seeds.values().is_empty() {
            return Err(Error::InvalidConfiguration("seed list is empty".into()));
        }
        self.sched
            .check()
            .map_err(|e| Error::InvalidConfiguration(e.to_string()))?;
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Sets a dotted key such as `noise.sigma2_pull` inside a JSON object.
pub fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (idx, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            Error::InvalidConfiguration(format!("sweep key {key:?}: {part:?} is not inside an object"))
        })?;
        if idx + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::InvalidConfiguration("empty sweep key".into()))
}

/// One config per cell of the cartesian product over `sweep`, with a
/// directory-safe cell label.
pub fn expand_sweep(cfg: &ExperimentConfig) -> Result<Vec<(String, ExperimentConfig)>> {
    let mut base = cfg.to_value();
    base.as_object_mut().expect("object").remove("sweep");
    let mut cells: Vec<(Vec<String>, Value)> = vec![(Vec::new(), base)];
    for (key, values) in &cfg.sweep {
        if values.is_empty() {
            return Err(Error::InvalidConfiguration(format!("sweep key {key:?} has no values")));
        }
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for (label, v) in &cells {
            for val in values {
                let mut v = v.clone();
                set_dotted(&mut v, key, val.clone())?;
                let mut label = label.clone();
                let shown = match val {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                label.push(format!("{key}={shown}"));
                next.push((label, v));
            }
        }
        cells = next;
    }
    cells
        .into_iter()
        .map(|(label, v)| {
            let name = if label.is_empty() {
                "base".to_string()
            } else {
                label.join(",")
            };
            let name: String = name
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || "=.,_-".contains(c) {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            Ok((name, ExperimentConfig::from_value(v)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "graph": { "n": 4, "p": 0.0 },
            "problem": { "d1": 3, "d": 2, "r": 0.05 },
            "noise": { "sigma2_pull": 1, "sigma2_push": 1 },
            "iterations": 100
        })
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_value(minimal()).unwrap();
        assert_eq!(cfg.sched, ScheduleSet::benchmark_default());
        assert_eq!(cfg.algorithm, Algorithm::VraGt);
        assert_eq!(cfg.record_every, 10);
        assert_eq!(cfg.seeds.values(), vec![0]);
        assert!(matches!(
            cfg.problem,
            ProblemSpec::Ridge {
                bounds: (1.0, 10.0),
                ..
            }
        ));
    }

    #[test]
    fn missing_required_field_is_config_error() {
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("noise");
        assert!(matches!(
            ExperimentConfig::from_value(v),
            Err(Error::InvalidConfiguration(_))
        ));
        let mut v = minimal();
        v["iterations"] = json!(0);
        assert!(ExperimentConfig::from_value(v).is_err());
        let mut v = minimal();
        v["bogus"] = json!(1);
        assert!(ExperimentConfig::from_value(v).is_err());
    }

    #[test]
    fn file_specs_parse() {
        let mut v = minimal();
        v["graph"] = json!({ "file": "g.txt" });
        v["problem"] = json!({ "file": "p.txt" });
        let cfg = ExperimentConfig::from_value(v).unwrap();
        assert!(matches!(cfg.graph, GraphSpec::File { .. }));
        assert!(matches!(cfg.problem, ProblemSpec::File { .. }));
    }

    #[test]
    fn sweep_expands_cartesian_product() {
        let mut v = minimal();
        v["sweep"] = json!({ "noise.sigma2_pull": [1, 25, 50], "sched.gamma": [0.5, 0.8] });
        let cfg = ExperimentConfig::from_value(v).unwrap();
        let cells = expand_sweep(&cfg).unwrap();
        assert_eq!(cells.len(), 6);
        let (name, cell) = &cells[5];
        assert_eq!(name, "noise.sigma2_pull=50,sched.gamma=0.8");
        assert_eq!(cell.noise.sigma2_pull, 50.0);
        assert_eq!(cell.sched.gamma, 0.8);
        assert!(cell.sweep.is_empty());
    }

    #[test]
    fn sweep_rejects_bad_values() {
        let mut v = minimal();
        v["sweep"] = json!({ "iterations": [0] });
        let cfg = ExperimentConfig::from_value(v).unwrap();
        assert!(expand_sweep(&cfg).is_err());
    }
}
