//! Experiment description and its JSON loader.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{ConfigLoadError, WorldConfig};
use crate::icl::IclConfig;
use crate::ppo::PpoConfig;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Icl,
    Ppo,
    Nearest,
    RoundRobin,
    MaxAoi,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Icl,
        PolicyKind::Ppo,
        PolicyKind::Nearest,
        PolicyKind::RoundRobin,
        PolicyKind::MaxAoi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Icl => "icl",
            PolicyKind::Ppo => "ppo",
            PolicyKind::Nearest => "nearest",
            PolicyKind::RoundRobin => "roundrobin",
            PolicyKind::MaxAoi => "maxaoi",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected icl, ppo, nearest, roundrobin or maxaoi)"))
    }
}

/// Seeds used when a spec lists none: one run for `run`, ten for sweeps.
pub const DEFAULT_RUN_SEEDS: [u64; 1] = [0];
pub const DEFAULT_SWEEP_SEEDS: usize = 10;
pub const DEFAULT_SENSOR_COUNTS: [usize; 3] = [5, 10, 15];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub world: WorldConfig,
    pub policy: PolicyKind,
    /// Policies compared by a sensor-count sweep.
    pub policies: Vec<PolicyKind>,
    pub sensor_counts: Vec<usize>,
    pub icl: IclConfig,
    pub ppo: PpoConfig,
    /// Trained network for the `ppo` policy.
    pub ppo_params: Option<PathBuf>,
    /// Empty means the command's default seeds.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            world: WorldConfig::default(),
            policy: PolicyKind::Icl,
            policies: vec![PolicyKind::Icl, PolicyKind::Nearest],
            sensor_counts: DEFAULT_SENSOR_COUNTS.to_vec(),
            icl: IclConfig::default(),
            ppo: PpoConfig::default(),
            ppo_params: None,
            seeds: Vec::new(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Top-level keys that belong to the experiment rather than the world.
const EXPERIMENT_KEYS: [&str; 8] = [
    "policy",
    "policies",
    "sensor_counts",
    "icl",
    "ppo",
    "ppo_params",
    "seeds",
    "out_dir",
];

/// Line and column (1-based) of the first `"key"` in `text`.
fn locate_key(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(at) => {
            let before = &text[..at];
            let line = before.matches('\n').count() + 1;
            let column = at - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
            (line, column)
        }
        None => (0, 0),
    }
}

fn field_error(text: &str, key: &str, err: serde_json::Error) -> ConfigLoadError {
    let (line, column) = locate_key(text, key);
    ConfigLoadError::Parse {
        line,
        column,
        message: format!("`{key}`: {err}"),
    }
}

fn take<T: serde::de::DeserializeOwned>(
    text: &str,
    map: &mut Map<String, Value>,
    key: &str,
) -> Result<Option<T>, ConfigLoadError> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| field_error(text, key, e)),
    }
}

impl ExperimentSpec {
    /// World keys sit at the top level next to the experiment keys; absent
    /// fields take their defaults and unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, ConfigLoadError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigLoadError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let Value::Object(mut map) = value else {
            return Err(ConfigLoadError::Parse {
                line: 1,
                column: 1,
                message: "top level must be a JSON object".into(),
            });
        };
        let d = ExperimentSpec::default();
        let spec = ExperimentSpec {
            policy: take(text, &mut map, "policy")?.unwrap_or(d.policy),
            policies: take(text, &mut map, "policies")?.unwrap_or(d.policies),
            sensor_counts: take(text, &mut map, "sensor_counts")?.unwrap_or(d.sensor_counts),
            icl: take(text, &mut map, "icl")?.unwrap_or(d.icl),
            ppo: take(text, &mut map, "ppo")?.unwrap_or(d.ppo),
            ppo_params: take(text, &mut map, "ppo_params")?.unwrap_or(d.ppo_params),
            seeds: take(text, &mut map, "seeds")?.unwrap_or(d.seeds),
            out_dir: take(text, &mut map, "out_dir")?.unwrap_or(d.out_dir),
            world: WorldConfig::default(),
        };
        debug_assert!(EXPERIMENT_KEYS.iter().all(|k| !map.contains_key(*k)));
        let world: WorldConfig = serde_json::from_value(Value::Object(map.clone())).map_err(|e| {
            let msg = e.to_string();
            let key = msg
                .split('`')
                .nth(1)
                .filter(|k| map.contains_key(*k))
                .unwrap_or_default()
                .to_string();
            field_error(text, &key, e)
        })?;
        Ok(ExperimentSpec { world, ..spec })
    }

    pub fn validate(self) -> Result<Self, HarnessError> {
        let world = self.world.clone().validate().map_err(ConfigLoadError::from)?;
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(HarnessError::Invalid(format!("seed {dup} is listed twice")));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Invalid("policies must not be empty".into()));
        }
        if self.sensor_counts.is_empty() || self.sensor_counts.contains(&0) {
            return Err(HarnessError::Invalid("sensor_counts must be non-empty and positive".into()));
        }
        self.icl.validate()?;
        self.ppo.validate()?;
        Ok(ExperimentSpec { world, ..self })
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            DEFAULT_RUN_SEEDS.to_vec()
        } else {
            self.seeds.clone()
        }
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..DEFAULT_SWEEP_SEEDS as u64).collect()
        } else {
            self.seeds.clone()
        }
    }
}

/// Reads and validates an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentSpec, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = ExperimentSpec::from_json(&text).map_err(|source| HarnessError::Load {
        path: path.to_path_buf(),
        source,
    })?;
    spec.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let s = ExperimentSpec::from_json("{}").unwrap();
        assert_eq!(s, ExperimentSpec::default());
        assert_eq!(s.world.n_sensors, 10);
        assert_eq!(s.world.n_steps, 30);
        assert_eq!(s.world.area_size_m, 100.0);
        assert_eq!(s.world.v_max_mps, 15.0);
    }

    #[test]
    fn world_keys_at_top_level() {
        let s = ExperimentSpec::from_json(r#"{"n_sensors": 15, "policy": "maxaoi", "seeds": [1, 2]}"#).unwrap();
        assert_eq!(s.world.n_sensors, 15);
        assert_eq!(s.policy, PolicyKind::MaxAoi);
        assert_eq!(s.seeds, vec![1, 2]);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn misspelled_key_reported_with_line() {
        let err = ExperimentSpec::from_json("{\n  \"policy\": \"nearest\",\n  \"n_sensor\": 5\n}").unwrap_err();
        match err {
            ConfigLoadError::Parse { line, column, message } => {
                assert_eq!((line, column), (3, 3));
                assert!(message.contains("unknown field `n_sensor`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match ExperimentSpec::from_json("{\n \"seeds\": [1,, 2]\n}").unwrap_err() {
            ConfigLoadError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_unknown_key_rejected() {
        let err = ExperimentSpec::from_json(r#"{"icl": {"tempreature": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("tempreature"), "{err}");
        assert!(ExperimentSpec::from_json(r#"{"policy": "greedy"}"#).is_err());
    }

    #[test]
    fn validation() {
        let dup = ExperimentSpec {
            seeds: vec![3, 4, 3],
            ..Default::default()
        };
        assert!(dup.validate().unwrap_err().to_string().contains("seed 3"));
        let mut bad = ExperimentSpec::default();
        bad.world.v_max_mps = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn policy_labels_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.label().parse::<PolicyKind>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
    }
}
