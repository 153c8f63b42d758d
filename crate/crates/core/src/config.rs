//! Scenario configuration: the versioned JSON document that fully describes
//! one experiment, minus the seed-dependent draws.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot::SpontaneousFault;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Global-positioning foraging.
    Gpf,
    /// Local-positioning foraging over an ad-hoc network.
    Lpf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArenaKind {
    Empty,
    Constrained,
}

/// A scalar that is either fixed or drawn uniformly from a range at setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Draw {
    Fixed(f64),
    Range([f64; 2]),
}

impl Draw {
    /// Resolve with a uniform (0,1) sample.
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            Draw::Fixed(v) => v,
            Draw::Range([lo, hi]) => lo + u * (hi - lo),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Draw::Range([lo, hi]) = *self {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name}: range [{lo}, {hi}] is inverted")));
            }
        }
        Ok(())
    }
}

fn default_gradual_init() -> Draw {
    Draw::Range([0.9, 1.0])
}

fn default_static_init() -> Draw {
    Draw::Range([0.75, 1.0])
}

fn default_step_time() -> f64 {
    300.0
}

fn default_step_factor() -> f64 {
    2.0 / 3.0
}

/// Per-robot fault schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultSchedule {
    /// Perfect hardware for the whole run.
    None,
    /// Static coefficients drawn once from [lo, hi], no degradation.
    StaticRange { lo: f64, hi: f64 },
    /// Stochastic gradual degradation: each coefficient decrements by 0.01
    /// per second with the given per-second probability.
    Gradual {
        #[serde(default = "default_gradual_init")]
        d_init: Draw,
        p_left: Draw,
        p_right: Draw,
        p_sensor: Draw,
    },
    /// Spontaneous complete failure injected at time `t`.
    Spontaneous {
        fault: SpontaneousFault,
        #[serde(default)]
        t: f64,
        #[serde(default = "default_static_init")]
        d_init: Draw,
    },
    /// Instant drop of all coefficients to `factor` of their initial values
    /// at time `t`.
    StepChange {
        #[serde(default = "default_step_time")]
        t: f64,
        #[serde(default = "default_step_factor")]
        factor: f64,
        #[serde(default = "default_static_init")]
        d_init: Draw,
    },
}

/// Either one schedule per robot, or a default with per-index overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaultPlan {
    PerRobot(Vec<FaultSchedule>),
    Uniform {
        default: FaultSchedule,
        #[serde(default)]
        overrides: BTreeMap<String, FaultSchedule>,
    },
}

impl FaultPlan {
    pub fn schedule_for(&self, robot: usize) -> &FaultSchedule {
        match self {
            FaultPlan::PerRobot(v) => &v[robot],
            FaultPlan::Uniform { default, overrides } => {
                overrides.get(&robot.to_string()).unwrap_or(default)
            }
        }
    }
}

/// How faults are detected during the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DetectionMode {
    /// Ground-truth detector: a robot is faulty once any coefficient drops
    /// below `d0`.
    Oracle { d0: f64 },
    /// The population-dynamics model runs online at the given order, with
    /// labelled repertoires loaded from the given files for orders >= 1.
    Aapd {
        order: u32,
        #[serde(default)]
        y_motor: Option<PathBuf>,
        #[serde(default)]
        y_sensor: Option<PathBuf>,
    },
    /// No online detection; the log is recorded for offline assessment.
    Offline,
}

/// What happens to a robot when a fault is detected online.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineAction {
    /// Restore the affected coefficients in place, immediately.
    InstantReset,
    /// Switch the controller to return mode; repair happens at the base.
    ReturnToBase,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_duration() -> f64 {
    900.0
}

fn default_action() -> OnlineAction {
    OnlineAction::ReturnToBase
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub n_robots: usize,
    pub algorithm: Algorithm,
    pub arena: ArenaKind,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    /// Maximum power capacity; `null` means an unlimited budget.
    pub p_max: Option<f64>,
    pub fault_schedules: FaultPlan,
    pub detection: DetectionMode,
    #[serde(default = "default_action")]
    pub online_action: OnlineAction,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub replicates: usize,
}

fn default_one() -> usize {
    1
}

impl ScenarioConfig {
    /// Total simulation ticks at the 6 Hz clock.
    pub fn ticks(&self) -> u64 {
        (self.duration_s * 6.0).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {}", self.version)));
        }
        if !(2..=20).contains(&self.n_robots) {
            return Err(Error::Config(format!(
                "n_robots must be between 2 and 20, got {}",
                self.n_robots
            )));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if let Some(p) = self.p_max {
            if !(p > 0.0) {
                return Err(Error::Config("p_max must be positive or null".into()));
            }
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        match &self.fault_schedules {
            FaultPlan::PerRobot(v) if v.len() != self.n_robots => {
                return Err(Error::Config(format!(
                    "fault_schedules lists {} robots but n_robots is {}",
                    v.len(),
                    self.n_robots
                )));
            }
            FaultPlan::Uniform { overrides, .. } => {
                for key in overrides.keys() {
                    match key.parse::<usize>() {
                        Ok(i) if i < self.n_robots => {}
                        _ => {
                            return Err(Error::Config(format!(
                                "fault schedule override for invalid robot index {key}"
                            )));
                        }
                    }
                }
            }
            _ => {}
        }
        for r in 0..self.n_robots {
            match self.fault_schedules.schedule_for(r) {
                FaultSchedule::StaticRange { lo, hi } => {
                    if !(lo <= hi) || *lo < 0.0 || *hi > 1.0 {
                        return Err(Error::Config(format!(
                            "static range [{lo}, {hi}] outside [0, 1]"
                        )));
                    }
                }
                FaultSchedule::Gradual { d_init, p_left, p_right, p_sensor } => {
                    d_init.validate("d_init")?;
                    p_left.validate("p_left")?;
                    p_right.validate("p_right")?;
                    p_sensor.validate("p_sensor")?;
                }
                FaultSchedule::Spontaneous { d_init, t, .. } => {
                    d_init.validate("d_init")?;
                    if *t < 0.0 {
                        return Err(Error::Config("spontaneous fault time must be >= 0".into()));
                    }
                }
                FaultSchedule::StepChange { d_init, factor, .. } => {
                    d_init.validate("d_init")?;
                    if !(0.0..=1.0).contains(factor) {
                        return Err(Error::Config("step change factor must lie in [0, 1]".into()));
                    }
                }
                FaultSchedule::None => {}
            }
        }
        match &self.detection {
            DetectionMode::Oracle { d0 } => {
                if !(*d0 > 0.0 && *d0 < 1.0) {
                    return Err(Error::Config(format!("oracle d0 must lie in (0, 1), got {d0}")));
                }
            }
            DetectionMode::Aapd { order, y_motor, y_sensor } => {
                if *order == 0 && (y_motor.is_some() || y_sensor.is_some()) {
                    return Err(Error::Config(
                        "order 0 runs with empty repertoires; remove y paths".into(),
                    ));
                }
                if *order > 0 && y_motor.is_none() && y_sensor.is_none() {
                    return Err(Error::Config(format!(
                        "order {order} needs at least one labelled repertoire file"
                    )));
                }
            }
            DetectionMode::Offline => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "n_robots": 10,
            "algorithm": "gpf",
            "arena": "empty",
            "p_max": null,
            "fault_schedules": {"default": {"kind": "none"}},
            "detection": {"mode": "offline"}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_json(&minimal_json()).unwrap();
        assert_eq!(cfg.duration_s, 900.0);
        assert_eq!(cfg.ticks(), 5400);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.replicates, 1);
        assert_eq!(cfg.online_action, OnlineAction::ReturnToBase);
        assert!(cfg.p_max.is_none());
    }

    #[test]
    fn per_robot_plan_must_cover_all_robots() {
        let json = r#"{
            "n_robots": 3,
            "algorithm": "gpf",
            "arena": "empty",
            "p_max": 1.0,
            "fault_schedules": [{"kind": "none"}, {"kind": "none"}],
            "detection": {"mode": "offline"}
        }"#;
        assert!(ScenarioConfig::from_json(json).is_err());
    }

    #[test]
    fn override_plan_resolves_by_index() {
        let json = r#"{
            "n_robots": 4,
            "algorithm": "gpf",
            "arena": "empty",
            "p_max": null,
            "fault_schedules": {
                "default": {"kind": "static_range", "lo": 0.75, "hi": 1.0},
                "overrides": {"0": {"kind": "gradual", "p_left": [0.01, 0.15], "p_right": [0.01, 0.15], "p_sensor": 0.0}}
            },
            "detection": {"mode": "offline"}
        }"#;
        let cfg = ScenarioConfig::from_json(json).unwrap();
        assert!(matches!(cfg.fault_schedules.schedule_for(0), FaultSchedule::Gradual { .. }));
        assert!(matches!(
            cfg.fault_schedules.schedule_for(1),
            FaultSchedule::StaticRange { .. }
        ));
    }

    #[test]
    fn oracle_threshold_is_validated() {
        let json = minimal_json().replace(
            r#""detection": {"mode": "offline"}"#,
            r#""detection": {"mode": "oracle", "d0": 1.5}"#,
        );
        assert!(ScenarioConfig::from_json(&json).is_err());
    }

    #[test]
    fn aapd_order_and_repertoires_must_agree() {
        let json = minimal_json().replace(
            r#""detection": {"mode": "offline"}"#,
            r#""detection": {"mode": "aapd", "order": 1}"#,
        );
        assert!(ScenarioConfig::from_json(&json).is_err());
        let json = minimal_json().replace(
            r#""detection": {"mode": "offline"}"#,
            r#""detection": {"mode": "aapd", "order": 0}"#,
        );
        assert!(ScenarioConfig::from_json(&json).is_ok());
    }

    #[test]
    fn config_round_trips() {
        let cfg = ScenarioConfig::from_json(&minimal_json()).unwrap();
        let json = cfg.to_json().unwrap();
        let back = ScenarioConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn draw_sampling() {
        assert_eq!(Draw::Fixed(0.3).sample(0.99), 0.3);
        let d = Draw::Range([0.5, 1.0]);
        assert_eq!(d.sample(0.0), 0.5);
        assert_eq!(d.sample(1.0), 1.0);
        assert_eq!(d.sample(0.5), 0.75);
    }
}
