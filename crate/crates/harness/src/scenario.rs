//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "empty_field_drive"
//! duration_s = 4.0
//! seed = 7
//!
//! [vision]
//! rate_hz = 60.0
//! latency_s = 0.1
//!
//! [[robots]]
//! id = 0
//! start = { position = [0.0, 0.0] }
//! target = { kind = "follow_trajectory", point = [3.0, 0.0] }
//!
//! [[obstacles]]
//! kind = "static_disc"
//! center = [1.5, 0.0]
//! radius = 0.2
//!
//! [[referee]]
//! t = 0.0
//! command = "FORCE_START"
//! stage = "FIRST_HALF"
//! ```
//!
//! Robots take either a single `target` or a timed `script` of targets.
//! Without a `[[referee]]` section the game starts in normal play.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sslm_core::navigation::{NavGains, NavTarget};
use sslm_core::refparser::{Command, ConstraintDefaults, Stage, Team};
use sslm_core::worldmodel::FieldGeometry;
use sslm_core::{MotionLimits, Obstacle, RobotState, Vec2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("bad value for {var}: {value:?}")]
    Override { var: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    pub rate_hz: f64,
    pub latency_s: f64,
    /// Weight of the latency-compensated vision estimate when fused with
    /// odometry on frame arrival.
    pub trust: f64,
}

impl Default for VisionConfig {
    fn default() -> Self {
        VisionConfig {
            rate_hz: 60.0,
            latency_s: 0.1,
            trust: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedTarget {
    pub t: f64,
    pub target: NavTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub id: u32,
    pub start: RobotState,
    #[serde(default)]
    pub target: Option<NavTarget>,
    #[serde(default)]
    pub script: Vec<TimedTarget>,
    #[serde(default)]
    pub limits: MotionLimits,
    #[serde(default)]
    pub goalkeeper: bool,
}

impl RobotSpec {
    /// The target script, with a lone `target` treated as active from t = 0.
    pub fn timeline(&self) -> Vec<TimedTarget> {
        let mut out = Vec::with_capacity(self.script.len() + 1);
        if let Some(target) = self.target {
            out.push(TimedTarget { t: 0.0, target });
        }
        out.extend(self.script.iter().copied());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefereeStep {
    pub t: f64,
    pub command: Command,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallKick {
    pub t: f64,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub position: Vec2,
    #[serde(default)]
    pub kick: Option<BallKick>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoulConfig {
    /// Closing speed above which overlapping discs count as a crash, m/s.
    pub crash_speed: f64,
    /// Minimum time between two events of the same kind for the same robots, s.
    pub debounce_s: f64,
    /// Distance to the opponent defense area counted as an invasion, m.
    pub defense_margin: f64,
}

impl Default for FoulConfig {
    fn default() -> Self {
        FoulConfig {
            crash_speed: 1.5,
            debounce_s: 1.0,
            defense_margin: 0.0,
        }
    }
}

/// How robots see each other when planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeammateConfig {
    /// Extrapolation horizon for teammates listed earlier, s.
    pub horizon: f64,
    /// Extrapolation horizon for teammates listed later, s.
    pub yield_horizon: f64,
    /// Extra radius added to teammates on top of the usual inflation, m.
    pub margin: f64,
}

impl Default for TeammateConfig {
    fn default() -> Self {
        TeammateConfig {
            horizon: 1.0,
            yield_horizon: 0.3,
            margin: 0.0,
        }
    }
}

fn default_dt() -> f64 {
    0.005
}

fn default_team() -> Team {
    Team::Blue
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_team")]
    pub team: Team,
    #[serde(default)]
    pub field: FieldGeometry,
    #[serde(default)]
    pub vision: VisionConfig,
    #[serde(default)]
    pub gains: NavGains,
    #[serde(default)]
    pub rules: ConstraintDefaults,
    #[serde(default)]
    pub fouls: FoulConfig,
    #[serde(default)]
    pub teammates: TeammateConfig,
    #[serde(default)]
    pub odometry: bool,
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub referee: Vec<RefereeStep>,
    #[serde(default)]
    pub ball: Option<BallSpec>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::new(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ScenarioError::Parse {
                field,
                message: e.into_inner().message().trim().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return invalid(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.vision.rate_hz.is_finite() && self.vision.rate_hz > 0.0) {
            return invalid(format!("vision.rate_hz must be positive, got {}", self.vision.rate_hz));
        }
        if !(self.vision.latency_s.is_finite() && self.vision.latency_s >= 0.0) {
            return invalid(format!(
                "vision.latency_s must be non-negative, got {}",
                self.vision.latency_s
            ));
        }
        if !(0.0..=1.0).contains(&self.vision.trust) {
            return invalid(format!("vision.trust must lie in [0, 1], got {}", self.vision.trust));
        }
        self.field
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("field: {e}")))?;
        if self.robots.is_empty() {
            return invalid("at least one robot is required".into());
        }
        let mut ids = HashSet::new();
        for (i, robot) in self.robots.iter().enumerate() {
            if !ids.insert(robot.id) {
                return invalid(format!("duplicate robot id {}", robot.id));
            }
            robot
                .limits
                .validate()
                .map_err(|e| ScenarioError::Invalid(format!("robots[{i}].limits: {e}")))?;
            if !robot.start.is_finite() {
                return invalid(format!("robots[{i}].start is not finite"));
            }
            let timeline = robot.timeline();
            if timeline.is_empty() {
                return invalid(format!("robots[{i}] needs a target or a script"));
            }
            if timeline.windows(2).any(|w| w[1].t < w[0].t) {
                return invalid(format!("robots[{i}].script times must be non-decreasing"));
            }
        }
        for (i, obstacle) in self.obstacles.iter().enumerate() {
            obstacle
                .validate()
                .map_err(|e| ScenarioError::Invalid(format!("obstacles[{i}]: {e}")))?;
        }
        if self.referee.windows(2).any(|w| w[1].t < w[0].t) {
            return invalid("referee times must be non-decreasing".into());
        }
        Ok(())
    }

    /// Applies `SSLM_*` overrides read through `lookup`.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ScenarioError> {
        let get = |var: &str| -> Result<Option<f64>, ScenarioError> {
            match lookup(var) {
                None => Ok(None),
                Some(value) => match value.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(ScenarioError::Override {
                        var: var.to_string(),
                        value,
                    }),
                },
            }
        };
        type LimitField = fn(&mut MotionLimits) -> &mut f64;
        let limit_vars: [(&str, LimitField); 4] = [
            ("SSLM_V_MAX", |l| &mut l.v_max),
            ("SSLM_A_MAX", |l| &mut l.a_max),
            ("SSLM_OMEGA_MAX", |l| &mut l.omega_max),
            ("SSLM_ALPHA_MAX", |l| &mut l.alpha_max),
        ];
        for (var, field) in limit_vars {
            if let Some(v) = get(var)? {
                for robot in &mut self.robots {
                    *field(&mut robot.limits) = v;
                }
            }
        }
        type GainField = fn(&mut NavGains) -> &mut f64;
        let gain_vars: [(&str, GainField); 4] = [
            ("SSLM_K_OMEGA", |g| &mut g.k_omega),
            ("SSLM_D_SLOW", |g| &mut g.d_slow),
            ("SSLM_K_P", |g| &mut g.k_p),
            ("SSLM_K_RADIAL", |g| &mut g.k_radial),
        ];
        for (var, field) in gain_vars {
            if let Some(v) = get(var)? {
                *field(&mut self.gains) = v;
            }
        }
        if let Some(v) = get("SSLM_VISION_LATENCY")? {
            self.vision.latency_s = v;
        }
        if let Some(v) = get("SSLM_VISION_RATE")? {
            self.vision.rate_hz = v;
        }
        if let Some(v) = get("SSLM_CRASH_SPEED")? {
            self.fouls.crash_speed = v;
        }
        self.validate()
    }
}

/// Names of every recognised override variable.
pub const OVERRIDE_VARS: [&str; 11] = [
    "SSLM_V_MAX",
    "SSLM_A_MAX",
    "SSLM_OMEGA_MAX",
    "SSLM_ALPHA_MAX",
    "SSLM_K_OMEGA",
    "SSLM_D_SLOW",
    "SSLM_K_P",
    "SSLM_K_RADIAL",
    "SSLM_VISION_LATENCY",
    "SSLM_VISION_RATE",
    "SSLM_CRASH_SPEED",
];
