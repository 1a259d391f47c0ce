//! Current-state estimation from stale vision frames.
//!
//! A vision frame shows where the robot was at capture time. Replaying the
//! body-frame velocity commands sent since then (zero-order hold, closed-form
//! arcs) brings that state up to the present. Between frames the robot
//! dead-reckons from wheel encoders, with heading rate taken from the gyro.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};
use thiserror::Error;

use crate::worldmodel::{wrap_angle, RobotState, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("wheel configuration is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("wheel configuration: {0}")]
    BadWheelConfig(&'static str),
    #[error("line {line}: {message}")]
    Log { line: usize, message: String },
}

/// Body-frame twist: (vx, vy) in m/s, omega in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyTwist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl BodyTwist {
    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        BodyTwist { vx, vy, omega }
    }

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandLogEntry {
    pub t_sent: f64,
    pub body_velocity: BodyTwist,
}

/// Bounded, time-ordered ring of sent commands.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandLog {
    entries: VecDeque<CommandLogEntry>,
    capacity: usize,
}

impl Default for CommandLog {
    fn default() -> Self {
        // 1.28 s at 200 Hz
        CommandLog::with_capacity(256)
    }
}

impl CommandLog {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        CommandLog {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Appends a command. Out-of-order timestamps are clamped to the last one.
    pub fn push(&mut self, t_sent: f64, body_velocity: BodyTwist) {
        let t_sent = match self.entries.back() {
            Some(last) if t_sent < last.t_sent => last.t_sent,
            _ => t_sent,
        };
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(CommandLogEntry { t_sent, body_velocity });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &CommandLogEntry> {
        self.entries.iter()
    }

    pub fn last(&self) -> Option<&CommandLogEntry> {
        self.entries.back()
    }

    /// Plain-text dump, one `t_sent vx vy omega` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let b = e.body_velocity;
            let _ = writeln!(out, "{} {} {} {}", e.t_sent, b.vx, b.vy, b.omega);
        }
        out
    }
}

impl FromStr for CommandLog {
    type Err = EstimatorError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| EstimatorError::Log { line: i + 1, message };
            let values: Vec<f64> = content
                .split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad number `{f}`"))))
                .collect::<Result<_, _>>()?;
            if values.len() != 4 {
                return Err(err(format!(
                    "expected `t_sent vx vy omega`, got {} fields",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(err("non-finite value".into()));
            }
            if let Some(&(prev, _)) = entries.last() {
                if values[0] < prev {
                    return Err(err(format!("t_sent {} goes backwards", values[0])));
                }
            }
            entries.push((values[0], BodyTwist::new(values[1], values[2], values[3])));
        }
        let mut log = CommandLog::with_capacity(entries.len().max(256));
        for (t, twist) in entries {
            log.push(t, twist);
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisionFrame {
    pub t_capture: f64,
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Option<Vec2>,
}

/// `(sin φ / φ, (1 - cos φ) / φ)` with a series near zero.
fn arc_factors(phi: f64) -> (f64, f64) {
    if phi.abs() < 1e-4 {
        let p2 = phi * phi;
        (1.0 - p2 / 6.0 + p2 * p2 / 120.0, phi / 2.0 - phi * p2 / 24.0)
    } else {
        (phi.sin() / phi, (1.0 - phi.cos()) / phi)
    }
}

/// World displacement and heading change from holding a body twist for `dt`
/// starting at `heading`.
pub fn integrate_twist(heading: f64, twist: BodyTwist, dt: f64) -> (Vec2, f64) {
    let phi = twist.omega * dt;
    let (s, c) = arc_factors(phi);
    // Body-frame displacement of a constant-curvature arc.
    let body = Vec2::new(dt * (twist.vx * s - twist.vy * c), dt * (twist.vx * c + twist.vy * s));
    (body.rotated(heading), phi)
}

/// Brings a vision frame up to `now` by replaying the commands sent since
/// capture. The entry active at capture time is clipped to the window.
pub fn predict_current_state(frame: &VisionFrame, log: &CommandLog, now: f64) -> RobotState {
    let mut position = frame.position;
    let mut heading = frame.heading;
    let window_start = frame.t_capture;
    let now = now.max(window_start);

    if log.is_empty() {
        let velocity = frame.velocity.unwrap_or(Vec2::ZERO);
        return RobotState {
            position: position + velocity * (now - window_start),
            velocity,
            heading: wrap_angle(heading),
            angular_velocity: 0.0,
        };
    }

    let entries: Vec<&CommandLogEntry> = log.iter().collect();
    let mut active: Option<BodyTwist> = None;
    for (i, entry) in entries.iter().enumerate() {
        let begin = entry.t_sent.max(window_start);
        let end = entries.get(i + 1).map_or(now, |next| next.t_sent).min(now);
        if entry.t_sent <= now {
            active = Some(entry.body_velocity);
        }
        if end <= begin {
            continue;
        }
        let (dp, dtheta) = integrate_twist(heading, entry.body_velocity, end - begin);
        position += dp;
        heading += dtheta;
    }

    // Before the first command arrives the robot coasts on the frame velocity.
    if let Some(first) = entries.first() {
        if first.t_sent > window_start {
            let coast = first.t_sent.min(now) - window_start;
            position += frame.velocity.unwrap_or(Vec2::ZERO) * coast;
        }
    }

    let heading = wrap_angle(heading);
    match active {
        Some(twist) => RobotState {
            position,
            velocity: twist.linear().rotated(heading),
            heading,
            angular_velocity: twist.omega,
        },
        None => RobotState {
            position,
            velocity: frame.velocity.unwrap_or(Vec2::ZERO),
            heading,
            angular_velocity: 0.0,
        },
    }
}

/// Four-wheel omni layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelConfig {
    /// Angular positions of the wheels around the robot center, measured CCW
    /// from the forward axis. Each wheel drives tangentially.
    pub wheel_angles: [f64; 4],
    pub wheel_radius: f64,
    /// Center-to-wheel-contact distance.
    pub robot_radius: f64,
    /// Wheel revolutions per motor revolution (18:60 → 0.3).
    pub gear_ratio: f64,
    jacobian: Matrix4x3<f64>,
    pseudo_inverse: nalgebra::Matrix3x4<f64>,
}

impl WheelConfig {
    pub fn new(
        wheel_angles: [f64; 4],
        wheel_radius: f64,
        robot_radius: f64,
        gear_ratio: f64,
    ) -> Result<Self, EstimatorError> {
        if !(wheel_radius > 0.0 && robot_radius > 0.0 && gear_ratio > 0.0) {
            return Err(EstimatorError::BadWheelConfig("radii and gear ratio must be positive"));
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if wrap_angle(wheel_angles[i] - wheel_angles[j]).abs() < 1e-9 {
                    return Err(EstimatorError::BadWheelConfig("wheel angles must be distinct"));
                }
            }
        }
        let jacobian = Matrix4x3::from_fn(|r, c| {
            let phi = wheel_angles[r];
            match c {
                0 => -phi.sin(),
                1 => phi.cos(),
                _ => robot_radius,
            }
        });
        let svd = jacobian.svd(false, false);
        let smallest = svd.singular_values.min();
        if smallest < 1e-9 {
            return Err(EstimatorError::RankDeficient(smallest));
        }
        let jt = jacobian.transpose();
        let normal: Matrix3<f64> = jt * jacobian;
        let inv = normal.try_inverse().ok_or(EstimatorError::RankDeficient(smallest))?;
        Ok(WheelConfig {
            wheel_angles,
            wheel_radius,
            robot_radius,
            gear_ratio,
            jacobian,
            pseudo_inverse: inv * jt,
        })
    }

    /// Rim speeds (m/s) for a body twist.
    pub fn rim_speeds(&self, twist: BodyTwist) -> [f64; 4] {
        let u = self.jacobian * Vector3::new(twist.vx, twist.vy, twist.omega);
        [u[0], u[1], u[2], u[3]]
    }

    /// Motor shaft speeds (rad/s) for a body twist.
    pub fn motor_speeds(&self, twist: BodyTwist) -> [f64; 4] {
        self.rim_speeds(twist)
            .map(|u| u / (self.wheel_radius * self.gear_ratio))
    }

    /// Least-squares body twist from motor shaft speeds.
    pub fn twist_from_motor_speeds(&self, motor_speeds: [f64; 4]) -> BodyTwist {
        let k = self.wheel_radius * self.gear_ratio;
        let u = Vector4::from_iterator(motor_speeds.iter().map(|w| w * k));
        let t = self.pseudo_inverse * u;
        BodyTwist::new(t[0], t[1], t[2])
    }
}

impl Default for WheelConfig {
    fn default() -> Self {
        let deg = |d: f64| d.to_radians();
        WheelConfig::new(
            [deg(30.0), deg(135.0), deg(225.0), deg(330.0)],
            0.027,
            0.081,
            18.0 / 60.0,
        )
        .expect("default wheel layout has full rank")
    }
}

/// Advances the pose from encoder readings. Translation comes from the wheel
/// pseudo-inverse; the turn rate is the gyro's.
pub fn odometry_step(
    prev: &RobotState,
    motor_speeds: [f64; 4],
    gyro_omega: f64,
    dt: f64,
    cfg: &WheelConfig,
) -> RobotState {
    let encoder = cfg.twist_from_motor_speeds(motor_speeds);
    let twist = BodyTwist::new(encoder.vx, encoder.vy, gyro_omega);
    let (dp, dtheta) = integrate_twist(prev.heading, twist, dt);
    let heading = wrap_angle(prev.heading + dtheta);
    RobotState {
        position: prev.position + dp,
        velocity: twist.linear().rotated(heading),
        heading,
        angular_velocity: gyro_omega,
    }
}

/// Convex blend; `trust = 1` keeps `vision`, `trust = 0` keeps `odometry`.
pub fn blend_states(vision: &RobotState, odometry: &RobotState, trust: f64) -> RobotState {
    let w = trust.clamp(0.0, 1.0);
    if w == 1.0 {
        return *vision;
    }
    if w == 0.0 {
        return *odometry;
    }
    RobotState {
        position: odometry.position.lerp(vision.position, w),
        velocity: odometry.velocity.lerp(vision.velocity, w),
        heading: wrap_angle(odometry.heading + w * wrap_angle(vision.heading - odometry.heading)),
        angular_velocity: odometry.angular_velocity + w * (vision.angular_velocity - odometry.angular_velocity),
    }
}

/// Blend applied when a vision frame arrives.
pub fn fuse_on_vision(
    frame: &VisionFrame,
    log: &CommandLog,
    now: f64,
    odometry: &RobotState,
    trust: f64,
) -> RobotState {
    let predicted = predict_current_state(frame, log, now);
    blend_states(&predicted, odometry, trust)
}
