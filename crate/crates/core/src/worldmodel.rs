//! Geometry primitives and the robot / field / obstacle data model.
//!
//! World frame: x runs along the field length toward the opponent goal,
//! y points left, angles are counter-clockwise. The field is centred on the
//! origin.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radius of the robot envelope used for inflation and crash checks.
pub const ROBOT_RADIUS: f64 = 0.09;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0} must be strictly positive, got {1}")]
    NotPositive(&'static str, f64),
    #[error("rectangle min {min} must be below max {max} on both axes")]
    EmptyRect { min: Vec2, max: Vec2 },
    #[error("defense area {depth} x {width} does not fit inside a {length} x {field_width} field")]
    DefenseAreaOutsideField {
        depth: f64,
        width: f64,
        length: f64,
        field_width: f64,
    },
}

/// Planar vector in meters (or m/s, m/s² depending on context).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(x: f64, y: f64) -> Result<Self, WorldError> {
        if x.is_finite() && y.is_finite() {
            Ok(Vec2 { x, y })
        } else {
            Err(WorldError::NonFinite("Vec2"))
        }
    }

    pub fn from_polar(length: f64, angle: f64) -> Self {
        Vec2::new(length * angle.cos(), length * angle.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Unit vector in the same direction, or zero for the zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            Vec2::ZERO
        }
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Scales the vector down so its norm does not exceed `max_norm`.
    pub fn clamp_norm(self, max_norm: f64) -> Vec2 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self * (max_norm / n)
        } else {
            self
        }
    }

    pub fn lerp(self, other: Vec2, w: f64) -> Vec2 {
        self + (other - self) * w
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl TryFrom<[f64; 2]> for Vec2 {
    type Error = WorldError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Vec2::try_new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = angle - two_pi * ((angle + PI) / two_pi).floor();
    // floor puts us in [-π, π); fold the lower end over.
    if a <= -PI {
        a += two_pi;
    }
    if a > PI {
        a -= two_pi;
    }
    a
}

/// Planar pose and velocity of a single robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    /// World-frame velocity.
    #[serde(default)]
    pub velocity: Vec2,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub angular_velocity: f64,
}

impl RobotState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        RobotState {
            position,
            velocity: Vec2::ZERO,
            heading: wrap_angle(heading),
            angular_velocity: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.heading.is_finite()
            && self.angular_velocity.is_finite()
    }
}

/// Translational and rotational limits of a robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionLimits {
    pub v_max: f64,
    pub a_max: f64,
    pub omega_max: f64,
    pub alpha_max: f64,
}

impl Default for MotionLimits {
    fn default() -> Self {
        MotionLimits {
            v_max: 2.0,
            a_max: 3.0,
            omega_max: 6.0,
            alpha_max: 20.0,
        }
    }
}

impl MotionLimits {
    pub fn validate(&self) -> Result<(), WorldError> {
        for (name, value) in [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("omega_max", self.omega_max),
            ("alpha_max", self.alpha_max),
        ] {
            if !value.is_finite() {
                return Err(WorldError::NonFinite(name));
            }
            if value <= 0.0 {
                return Err(WorldError::NotPositive(name, value));
            }
        }
        Ok(())
    }

    /// Copy with the translational speed capped; the cap must be positive.
    pub fn with_speed_cap(mut self, cap: Option<f64>) -> Self {
        if let Some(cap) = cap {
            if cap > 0.0 {
                self.v_max = self.v_max.min(cap);
            }
        }
        self
    }
}

/// Shapes the planner must keep clear of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    StaticDisc {
        center: Vec2,
        radius: f64,
    },
    /// Disc moving at constant velocity until `horizon`, then frozen.
    MovingDisc {
        center: Vec2,
        radius: f64,
        velocity: Vec2,
        #[serde(default = "default_horizon")]
        horizon: f64,
    },
    Rect {
        min: Vec2,
        max: Vec2,
    },
    KeepOutDisc {
        center: Vec2,
        radius: f64,
        #[serde(default = "default_active")]
        active: bool,
    },
}

fn default_horizon() -> f64 {
    1.0
}

fn default_active() -> bool {
    true
}

impl Obstacle {
    pub fn validate(&self) -> Result<(), WorldError> {
        match *self {
            Obstacle::StaticDisc { center, radius } | Obstacle::KeepOutDisc { center, radius, .. } => {
                check_finite_vec(center, "obstacle center")?;
                check_positive(radius, "obstacle radius")
            }
            Obstacle::MovingDisc {
                center,
                radius,
                velocity,
                horizon,
            } => {
                check_finite_vec(center, "obstacle center")?;
                check_finite_vec(velocity, "obstacle velocity")?;
                if !horizon.is_finite() || horizon < 0.0 {
                    return Err(WorldError::NotPositive("obstacle horizon", horizon));
                }
                check_positive(radius, "obstacle radius")
            }
            Obstacle::Rect { min, max } => {
                check_finite_vec(min, "rect min")?;
                check_finite_vec(max, "rect max")?;
                if min.x < max.x && min.y < max.y {
                    Ok(())
                } else {
                    Err(WorldError::EmptyRect { min, max })
                }
            }
        }
    }

    /// Center of a disc-shaped obstacle at time `t`; `None` for rectangles.
    pub fn center_at(&self, t: f64) -> Option<Vec2> {
        match *self {
            Obstacle::StaticDisc { center, .. } | Obstacle::KeepOutDisc { center, .. } => Some(center),
            Obstacle::MovingDisc {
                center,
                velocity,
                horizon,
                ..
            } => Some(center + velocity * t.clamp(0.0, horizon)),
            Obstacle::Rect { .. } => None,
        }
    }

    /// The same obstacle with its time origin moved `dt` seconds forward.
    pub fn advanced(&self, dt: f64) -> Obstacle {
        match *self {
            Obstacle::MovingDisc {
                center,
                radius,
                velocity,
                horizon,
            } => {
                let dt = dt.max(0.0);
                Obstacle::MovingDisc {
                    center: center + velocity * dt.min(horizon),
                    radius,
                    velocity,
                    horizon: (horizon - dt).max(0.0),
                }
            }
            other => other,
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, Obstacle::KeepOutDisc { active: false, .. })
    }
}

fn check_finite_vec(v: Vec2, what: &'static str) -> Result<(), WorldError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(WorldError::NonFinite(what))
    }
}

fn check_positive(v: f64, what: &'static str) -> Result<(), WorldError> {
    if !v.is_finite() {
        Err(WorldError::NonFinite(what))
    } else if v <= 0.0 {
        Err(WorldError::NotPositive(what, v))
    } else {
        Ok(())
    }
}

/// Signed clearance from `p` to the obstacle's shape at time `t` (negative inside).
///
/// Inactive keep-outs are infinitely far away.
pub fn distance_to_obstacle(p: Vec2, obs: &Obstacle, t: f64) -> f64 {
    match *obs {
        Obstacle::StaticDisc { center, radius } => p.distance(center) - radius,
        Obstacle::MovingDisc {
            center,
            radius,
            velocity,
            horizon,
        } => p.distance(center + velocity * t.clamp(0.0, horizon)) - radius,
        Obstacle::KeepOutDisc { center, radius, active } => {
            if active {
                p.distance(center) - radius
            } else {
                f64::INFINITY
            }
        }
        Obstacle::Rect { min, max } => {
            let center = (min + max) * 0.5;
            let half = (max - min) * 0.5;
            let qx = (p.x - center.x).abs() - half.x;
            let qy = (p.y - center.y).abs() - half.y;
            let outside = qx.max(0.0).hypot(qy.max(0.0));
            let inside = qx.max(qy).min(0.0);
            outside + inside
        }
    }
}

/// Grows the obstacle by `margin` on every side, keeping its shape tag.
pub fn inflate(obs: &Obstacle, margin: f64) -> Obstacle {
    debug_assert!(margin >= 0.0);
    match *obs {
        Obstacle::StaticDisc { center, radius } => Obstacle::StaticDisc {
            center,
            radius: radius + margin,
        },
        Obstacle::MovingDisc {
            center,
            radius,
            velocity,
            horizon,
        } => Obstacle::MovingDisc {
            center,
            radius: radius + margin,
            velocity,
            horizon,
        },
        Obstacle::Rect { min, max } => Obstacle::Rect {
            min: min - Vec2::new(margin, margin),
            max: max + Vec2::new(margin, margin),
        },
        Obstacle::KeepOutDisc { center, radius, active } => Obstacle::KeepOutDisc {
            center,
            radius: radius + margin,
            active,
        },
    }
}

/// Side of the field a defense area belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSide {
    Own,
    Opponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldGeometry {
    pub length: f64,
    pub width: f64,
    pub defense_area_depth: f64,
    pub defense_area_width: f64,
    pub boundary_margin: f64,
}

impl Default for FieldGeometry {
    fn default() -> Self {
        FieldGeometry {
            length: 9.0,
            width: 6.0,
            defense_area_depth: 1.0,
            defense_area_width: 2.0,
            boundary_margin: 0.3,
        }
    }
}

impl FieldGeometry {
    pub fn validate(&self) -> Result<(), WorldError> {
        check_positive(self.length, "field length")?;
        check_positive(self.width, "field width")?;
        check_positive(self.defense_area_depth, "defense area depth")?;
        check_positive(self.defense_area_width, "defense area width")?;
        check_positive(self.boundary_margin, "boundary margin")?;
        if self.defense_area_depth * 2.0 >= self.length || self.defense_area_width >= self.width {
            return Err(WorldError::DefenseAreaOutsideField {
                depth: self.defense_area_depth,
                width: self.defense_area_width,
                length: self.length,
                field_width: self.width,
            });
        }
        Ok(())
    }

    pub fn defense_area(&self, side: FieldSide) -> Obstacle {
        let half_len = self.length / 2.0;
        let half_w = self.defense_area_width / 2.0;
        match side {
            FieldSide::Opponent => Obstacle::Rect {
                min: Vec2::new(half_len - self.defense_area_depth, -half_w),
                max: Vec2::new(half_len, half_w),
            },
            FieldSide::Own => Obstacle::Rect {
                min: Vec2::new(-half_len, -half_w),
                max: Vec2::new(-half_len + self.defense_area_depth, half_w),
            },
        }
    }

    /// Clamps a point into the playable area shrunk by `boundary_margin`.
    pub fn clamp_to_field(&self, p: Vec2) -> Vec2 {
        let hx = (self.length / 2.0 - self.boundary_margin).max(0.0);
        let hy = (self.width / 2.0 - self.boundary_margin).max(0.0);
        Vec2::new(p.x.clamp(-hx, hx), p.y.clamp(-hy, hy))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.length / 2.0 && p.y.abs() <= self.width / 2.0
    }
}
