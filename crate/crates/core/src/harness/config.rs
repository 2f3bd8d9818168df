use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::ExplorationParams;
use crate::error::{Error, Result};
use crate::mdp::{load_mdp, random_mdp, BehaviorPolicy, MdpFile, MdpModel, RandomMdpSpec};
use crate::sa::{geometric_checkpoints, validate_checkpoints, StepSchedule};
use crate::seeding::replication_rng;

/// Where the MDP of an experiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpSource {
    /// Path to an MDP JSON file, relative to the config file.
    File(PathBuf),
    Inline(MdpFile),
    Generator { spec: RandomMdpSpec, seed: u64 },
}

impl MdpSource {
    pub fn resolve(&self) -> Result<(MdpModel, BehaviorPolicy)> {
        match self {
            MdpSource::File(path) => load_mdp(path),
            MdpSource::Inline(file) => file.clone().into_model(),
            MdpSource::Generator { spec, seed } => random_mdp(spec, &mut replication_rng(*seed, 0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CompliantKind {
    TheoremCompliant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompliantSchedule {
    kind: CompliantKind,
    /// Multiplier on the minimal `h`.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// A concrete schedule, or the rescaled-linear schedule derived from the
/// MDP's exploration constants: `h = scale * 2 / (sigma (1 - gamma))`,
/// `t0 = max(4h, tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "serde_json::Value")]
pub enum ScheduleSpec {
    TheoremCompliant(CompliantSchedule),
    Fixed(StepSchedule),
}

impl TryFrom<serde_json::Value> for ScheduleSpec {
    type Error = String;

    fn try_from(value: serde_json::Value) -> std::result::Result<Self, String> {
        let compliant = value.get("kind").and_then(|k| k.as_str()) == Some("theorem_compliant");
        let parsed = if compliant {
            serde_json::from_value(value).map(ScheduleSpec::TheoremCompliant)
        } else {
            serde_json::from_value(value).map(ScheduleSpec::Fixed)
        };
        parsed.map_err(|e| e.to_string())
    }
}

impl ScheduleSpec {
    pub fn theorem_compliant(scale: f64) -> Self {
        ScheduleSpec::TheoremCompliant(CompliantSchedule {
            kind: CompliantKind::TheoremCompliant,
            scale,
        })
    }

    pub fn resolve(&self, params: &ExplorationParams, gamma: f64) -> Result<StepSchedule> {
        match self {
            ScheduleSpec::TheoremCompliant(c) => {
                StepSchedule::theorem_compliant_scaled(params.sigma, gamma, params.tau, c.scale)
            }
            ScheduleSpec::Fixed(s) => {
                s.validate()?;
                Ok(*s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    /// Powers of two, plus the horizon.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckpointSpec {
    Named(CheckpointKind),
    List(Vec<u64>),
}

impl Default for CheckpointSpec {
    fn default() -> Self {
        CheckpointSpec::Named(CheckpointKind::Geometric)
    }
}

impl CheckpointSpec {
    pub fn resolve(&self, horizon: u64) -> Result<Vec<u64>> {
        let cps = match self {
            CheckpointSpec::Named(CheckpointKind::Geometric) => geometric_checkpoints(horizon),
            CheckpointSpec::List(list) => list.clone(),
        };
        validate_checkpoints(&cps, horizon)?;
        Ok(cps)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Async,
    Sync,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    pub schedule: ScheduleSpec,
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(default)]
    pub checkpoints: CheckpointSpec,
    #[serde(default = "one_replication")]
    pub replications: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Confidence level of the bound overlay.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Output path prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one_replication() -> u64 {
    1
}

fn default_delta() -> f64 {
    0.05
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn rebase(source: &mut MdpSource, dir: Option<&Path>) {
    if let (MdpSource::File(p), Some(dir)) = (source, dir) {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; a relative MDP file path is taken relative to
    /// the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config: ExperimentConfig = read_json(path)?;
        rebase(&mut config.mdp, path.parent());
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::input("replications must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::input(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        self.checkpoints.resolve(self.horizon)?;
        if let ScheduleSpec::Fixed(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// One base experiment run under several schedules on the same seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Its `schedule` field is ignored.
    pub base: ExperimentConfig,
    pub schedules: Vec<ScheduleSpec>,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config: SweepConfig = read_json(path)?;
        rebase(&mut config.base.mdp, path.parent());
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedules.is_empty() {
            return Err(Error::input("a sweep needs at least one schedule"));
        }
        self.base.validate()?;
        for s in &self.schedules {
            if let ScheduleSpec::Fixed(s) = s {
                s.validate()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "mdp": {"generator": {"spec": {"n_states": 3, "n_actions": 2, "gamma": 0.8, "r_bar": 1, "mix_eps": 0.4}, "seed": 7}},
        "schedule": {"kind": "theorem_compliant"},
        "T": 1000
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(c.replications, 1);
        assert_eq!(c.mode, Mode::Async);
        assert_eq!(c.checkpoints, CheckpointSpec::default());
        assert_eq!(c.schedule, ScheduleSpec::theorem_compliant(1.0));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"T\": 1000", "\"T\": 1000, \"horizon\": 5");
        assert!(serde_json::from_str::<ExperimentConfig>(&text).is_err());
        let text = MINIMAL.replace("\"kind\": \"theorem_compliant\"", "\"kind\": \"theorem_compliant\", \"h\": 2");
        assert!(serde_json::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn schedule_and_checkpoint_forms() {
        let s: ScheduleSpec = serde_json::from_str(r#"{"kind":"linear"}"#).unwrap();
        assert_eq!(s, ScheduleSpec::Fixed(StepSchedule::Linear));
        let s: ScheduleSpec = serde_json::from_str(r#"{"kind":"theorem_compliant","scale":0.5}"#).unwrap();
        assert_eq!(s, ScheduleSpec::theorem_compliant(0.5));
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"theorem_compliant","scale":0.5}"#);
        assert!(serde_json::from_str::<ScheduleSpec>(r#"{"kind":"bogus"}"#).is_err());

        let c: CheckpointSpec = serde_json::from_str(r#""geometric""#).unwrap();
        assert_eq!(c.resolve(5).unwrap(), vec![1, 2, 4, 5]);
        let c: CheckpointSpec = serde_json::from_str("[10, 20]").unwrap();
        assert!(c.resolve(15).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        c.replications = 0;
        assert!(c.validate().is_err());
        c.replications = 1;
        c.horizon = 0;
        assert!(c.validate().is_err());
        c.horizon = 10;
        c.delta = 1.5;
        assert!(c.validate().is_err());
    }
}
