//! JSON run configuration with dotted-key overrides.

use std::collections::BTreeMap;
use std::path::Path;

use lcc_core::sim::{BaselineMode, CavController, HeterogeneitySpec, Perturbation, ScenarioConfig};
use lcc_core::stability::{FrequencyGrid, GainAxis};
use lcc_core::{DriverParams, FeedbackGains, SystemVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Every config key with its unit and default, for `--help`.
pub const CONFIG_KEYS: &str = "\
CONFIG KEYS (JSON; nested keys are dotted for --set):
  schema_version                 config schema version [1]
  variant                        general | cf | fd | ccc [general]
  m                              HDVs ahead of the CAV [0]
  n                              HDVs behind the CAV [2]
  v_star                         equilibrium velocity, m/s [15]
  dt                             integration step, s [0.01]
  driver.alpha                   OVM headway gain, 1/s [0.6]
  driver.beta                    OVM relative-velocity gain, 1/s [0.9]
  driver.v_max                   maximum desired velocity, m/s [30]
  driver.s_st                    standstill spacing, m [5]
  driver.s_go                    free-flow spacing, m [35]
  driver.delay                   reaction delay, s [0]
  rank_tol                       relative rank tolerance [1e-8]
  measured_vehicle               vehicle k whose velocity the CAV measures [none]
  energy.n_min, energy.n_max     follower counts swept by `energy` [1, 5]
  energy.t_list                  Gramian horizons, s [[10, 20, 30]]
  gains.<id>.mu, gains.<id>.k    spacing gain 1/s², velocity gain 1/s [{}]
  grid.omega_min, grid.omega_max frequency range, rad/s [0.01, 100]
  grid.points                    log-spaced frequencies [1000]
  scan.axis1, scan.axis2         {coord: {vehicle, kind: mu|k}, min, max, points}
  sim.head                       head vehicle present [variant cf/general/ccc: true]
  sim.horizon                    simulated time, s [60]
  sim.perturbation.kind          none | head_sinusoid | follower_brake [none]
  sim.perturbation.amplitude     head sinusoid amplitude, m/s
  sim.perturbation.period        head sinusoid period, s
  sim.perturbation.vehicle       braking HDV id
  sim.perturbation.decel         forced acceleration, m/s²
  sim.perturbation.duration      brake duration, s
  sim.perturbation.start         perturbation start, s
  sim.mode                       hdv_baseline | explicit_linear [hdv_baseline]
  sim.heterogeneity              {alpha_jitter 1/s, beta_jitter 1/s, s_go_jitter m,
                                  delay_base s, delay_jitter s} [none]
  sim.hdv_overrides.<id>         per-vehicle driver parameters [{}]
  sim.seed                       heterogeneity seed [0]
  sim.window                     metric window [t_a, t_b], s [[20, 40]]
";

fn d_schema() -> u32 {
    SCHEMA_VERSION
}
fn d_n() -> usize {
    2
}
fn d_v_star() -> f64 {
    15.0
}
fn d_dt() -> f64 {
    0.01
}
fn d_rank_tol() -> f64 {
    lcc_core::analysis::DEFAULT_RANK_TOL
}
fn d_horizon() -> f64 {
    60.0
}
fn d_window() -> (f64, f64) {
    (20.0, 40.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub t_list: Vec<f64>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 5,
            t_list: vec![10.0, 20.0, 30.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub axis1: GainAxis,
    pub axis2: GainAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub head: Option<bool>,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub mode: BaselineMode,
    #[serde(default)]
    pub heterogeneity: Option<HeterogeneitySpec>,
    #[serde(default)]
    pub hdv_overrides: BTreeMap<i32, DriverParams>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_window")]
    pub window: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            head: None,
            horizon: d_horizon(),
            perturbation: Perturbation::None,
            mode: BaselineMode::HdvBaseline,
            heterogeneity: None,
            hdv_overrides: BTreeMap::new(),
            seed: 0,
            window: d_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "d_schema")]
    pub schema_version: u32,
    #[serde(default = "default_variant")]
    pub variant: SystemVariant,
    #[serde(default)]
    pub m: usize,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_v_star")]
    pub v_star: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default)]
    pub driver: DriverParams,
    #[serde(default = "d_rank_tol")]
    pub rank_tol: f64,
    #[serde(default)]
    pub measured_vehicle: Option<i32>,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub gains: FeedbackGains,
    #[serde(default)]
    pub grid: FrequencyGrid,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_variant() -> SystemVariant {
    SystemVariant::GeneralLcc
}

impl Default for Config {
    fn default() -> Self {
        Config::from_value(Value::Object(Default::default())).expect("empty config parses")
    }
}

impl Config {
    pub fn from_value(v: Value) -> Result<Self, CliError> {
        let cfg: Config = serde_path_to_error::deserialize(v).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "at `schema_version`: unsupported version {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Scenario for `simulate`, assembled from the shared keys and `sim`.
    pub fn scenario(&self) -> ScenarioConfig {
        let head = self.sim.head.unwrap_or(self.variant != SystemVariant::FdLcc);
        ScenarioConfig {
            m: self.m,
            n: self.n,
            head,
            v_star: self.v_star,
            horizon: self.sim.horizon,
            dt: self.dt,
            perturbation: self.sim.perturbation,
            hdv_params: self.driver,
            hdv_overrides: self.sim.hdv_overrides.clone(),
            heterogeneity: self.sim.heterogeneity,
            controller: CavController {
                gains: self.gains.clone(),
                mode: self.sim.mode,
            },
            seed: self.sim.seed,
        }
    }
}

/// Reads a JSON file (or starts from `{}`) and applies `key=value` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Config, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    Config::from_value(doc)
}

/// Sets a dotted key; the value is parsed as JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            other => {
                if other.is_null() {
                    *other = Value::Object(Default::default());
                    other.as_object_mut().expect("just set")
                } else {
                    return Err(CliError::Config(format!(
                        "at `{}`: cannot set a field inside a non-object",
                        parts[..i].join(".")
                    )));
                }
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = Config::from_value(serde_json::json!({"variant": "fd", "n": 2})).unwrap();
        assert_eq!(cfg.variant, SystemVariant::FdLcc);
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.v_star, 15.0);
        assert_eq!(cfg.driver, DriverParams::default());
        assert!(!cfg.scenario().head);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::from_value(serde_json::json!({"driver": {"alpha": 0.6, "gamma": 1}})).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("driver") && msg.contains("gamma"), "{msg}");
    }

    #[test]
    fn overrides() {
        let mut doc = serde_json::json!({"n": 2});
        apply_override(&mut doc, "driver.alpha=0.7").unwrap();
        apply_override(&mut doc, "gains.-2.mu=1").unwrap();
        apply_override(&mut doc, "gains.-2.k=-1").unwrap();
        apply_override(&mut doc, "variant=ccc").unwrap();
        let cfg = Config::from_value(doc).unwrap();
        assert_eq!(cfg.driver.alpha, 0.7);
        assert_eq!(cfg.gains.get(-2).mu, 1.0);
        assert_eq!(cfg.variant, SystemVariant::Ccc);
        let mut doc = serde_json::json!({"n": 2});
        assert!(apply_override(&mut doc, "n.x=1").is_err());
        assert!(apply_override(&mut doc, "novalue").is_err());
    }

    #[test]
    fn schema_version_checked() {
        assert!(Config::from_value(serde_json::json!({"schema_version": 2})).is_err());
    }

    #[test]
    fn round_trip() {
        let doc = serde_json::json!({
            "variant": "general", "m": 2, "n": 2,
            "gains": {"-2": {"mu": 1, "k": -1}, "-1": {"mu": 1, "k": -1}, "1": {"mu": -1, "k": -1}, "2": {"mu": -1, "k": -1}},
            "sim": {"perturbation": {"kind": "head_sinusoid", "amplitude": 2, "period": 10, "start": 20}},
            "scan": {"axis1": {"coord": {"vehicle": 1, "kind": "mu"}, "min": -1, "max": 1, "points": 3},
                     "axis2": {"coord": {"vehicle": 1, "kind": "k"}, "min": -1, "max": 1, "points": 3}}
        });
        let cfg = Config::from_value(doc).unwrap();
        assert_eq!(cfg.gains, lcc_core::scenarios::GainCase::D.gains());
        let back = Config::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(Config::from_value(serde_json::to_value(Config::default()).unwrap()).unwrap(), Config::default());
    }
}
