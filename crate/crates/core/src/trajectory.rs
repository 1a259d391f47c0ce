//! Time-optimal bang-bang profiles.
//!
//! A [`Profile1D`] drives one axis from an arbitrary start state to rest at a
//! target using only `±a_max` and an optional cruise at `v_max`. Two such
//! profiles are synchronised into a [`Trajectory2D`] by splitting the planar
//! limits between the axes with an angle `alpha`: x gets `cos(alpha)`, y gets
//! `sin(alpha)`. A [`Trajectory`] chains several 2D pieces, which is how the
//! planner expresses detours through an intermediate point.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::worldmodel::{MotionLimits, RobotState, Vec2};

/// Largest admissible `|Tx - Ty|` after synchronisation.
pub const SYNC_TOLERANCE: f64 = 1e-3;
/// Iteration cap of the split-angle bisection.
pub const SYNC_MAX_ITERATIONS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("{0} must be strictly positive, got {1}")]
    NotPositive(&'static str, f64),
}

/// One constant-acceleration piece of a 1D profile.
///
/// `t_end` is measured from the start of the profile; the piece starts where
/// the previous one ended (or at 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment1D {
    pub t_end: f64,
    pub x0: f64,
    pub v0: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample1D {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Rest-terminated bang-bang profile for a single axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    segments: Vec<Segment1D>,
    total_time: f64,
    start: f64,
    target: f64,
}

impl Profile1D {
    /// A profile that stays at `x` forever.
    pub fn stationary(x: f64) -> Self {
        Profile1D {
            segments: Vec::new(),
            total_time: 0.0,
            start: x,
            target: x,
        }
    }

    /// Full-effort braking from `v0` to rest with deceleration magnitude `decel`.
    pub fn braking(x0: f64, v0: f64, decel: f64) -> Self {
        let mut b = Builder::new(x0, v0);
        if v0 != 0.0 && decel > 0.0 {
            b.push(v0.abs() / decel, -v0.signum() * decel);
        }
        b.finish(None)
    }

    pub fn segments(&self) -> &[Segment1D] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Closed-form state at `t`; past the end the profile rests on target.
    pub fn sample(&self, t: f64) -> Sample1D {
        if t >= self.total_time {
            return Sample1D {
                position: self.target,
                velocity: 0.0,
                acceleration: 0.0,
            };
        }
        let t = t.max(0.0);
        let mut t_begin = 0.0;
        for seg in &self.segments {
            if t < seg.t_end {
                let tau = t - t_begin;
                return Sample1D {
                    position: seg.x0 + seg.v0 * tau + 0.5 * seg.a * tau * tau,
                    velocity: seg.v0 + seg.a * tau,
                    acceleration: seg.a,
                };
            }
            t_begin = seg.t_end;
        }
        Sample1D {
            position: self.target,
            velocity: 0.0,
            acceleration: 0.0,
        }
    }
}

struct Builder {
    t: f64,
    x: f64,
    v: f64,
    start: f64,
    segments: Vec<Segment1D>,
}

impl Builder {
    fn new(x0: f64, v0: f64) -> Self {
        Builder {
            t: 0.0,
            x: x0,
            v: v0,
            start: x0,
            segments: Vec::with_capacity(4),
        }
    }

    fn push(&mut self, duration: f64, a: f64) {
        if duration <= 0.0 {
            return;
        }
        self.t += duration;
        self.segments.push(Segment1D {
            t_end: self.t,
            x0: self.x,
            v0: self.v,
            a,
        });
        self.x += self.v * duration + 0.5 * a * duration * duration;
        self.v += a * duration;
    }

    fn finish(self, target: Option<f64>) -> Profile1D {
        Profile1D {
            total_time: self.t,
            start: self.start,
            target: target.unwrap_or(self.x),
            segments: self.segments,
        }
    }
}

fn validate_1d(x0: f64, v0: f64, target: f64, v_max: f64, a_max: f64) -> Result<(), TrajectoryError> {
    if !x0.is_finite() {
        return Err(TrajectoryError::NonFinite("x0"));
    }
    if !v0.is_finite() {
        return Err(TrajectoryError::NonFinite("v0"));
    }
    if !target.is_finite() {
        return Err(TrajectoryError::NonFinite("target"));
    }
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(TrajectoryError::NotPositive("v_max", v_max));
    }
    if !(a_max.is_finite() && a_max > 0.0) {
        return Err(TrajectoryError::NotPositive("a_max", a_max));
    }
    Ok(())
}

/// The phase durations of the time-optimal profile, signed accelerations
/// included. Shared by [`plan_1d`] and the allocation-free [`time_1d`].
fn phases(x0: f64, v0: f64, target: f64, v_max: f64, a_max: f64, mut emit: impl FnMut(f64, f64)) {
    let mut x = x0;
    let mut v = v0;
    let dx = target - x;
    if dx == 0.0 && v == 0.0 {
        return;
    }

    // Moving away, or unable to stop before the target: brake to rest first.
    let stop_dist = v * v.abs() / (2.0 * a_max);
    if v != 0.0 && (v * dx < 0.0 || stop_dist.abs() > dx.abs()) {
        emit(v.abs() / a_max, -v.signum() * a_max);
        x += stop_dist;
        v = 0.0;
    }

    let d = (target - x).abs();
    if d == 0.0 {
        return;
    }
    let s = (target - x).signum();
    let mut u = v.abs();

    if u > v_max {
        emit((u - v_max) / a_max, -s * a_max);
        let covered = (u * u - v_max * v_max) / (2.0 * a_max);
        x += s * covered;
        u = v_max;
    }

    let d = (target - x).abs();
    let peak = ((2.0 * a_max * d + u * u) / 2.0).sqrt().max(u);
    if peak <= v_max {
        emit((peak - u) / a_max, s * a_max);
        emit(peak / a_max, -s * a_max);
    } else {
        let accel_dist = (v_max * v_max - u * u) / (2.0 * a_max);
        let decel_dist = v_max * v_max / (2.0 * a_max);
        let cruise = (d - accel_dist - decel_dist).max(0.0);
        emit((v_max - u) / a_max, s * a_max);
        emit(cruise / v_max, 0.0);
        emit(v_max / a_max, -s * a_max);
    }
}

/// Time-optimal rest-terminated profile from `(x0, v0)` to `target`.
pub fn plan_1d(x0: f64, v0: f64, target: f64, v_max: f64, a_max: f64) -> Result<Profile1D, TrajectoryError> {
    validate_1d(x0, v0, target, v_max, a_max)?;
    let mut b = Builder::new(x0, v0);
    phases(x0, v0, target, v_max, a_max, |dt, a| b.push(dt, a));
    Ok(b.finish(Some(target)))
}

/// Duration of [`plan_1d`] without building the segments. Inputs are not
/// validated; a zero limit yields infinity unless the axis is already settled.
pub fn time_1d(x0: f64, v0: f64, target: f64, v_max: f64, a_max: f64) -> f64 {
    if target == x0 && v0 == 0.0 {
        return 0.0;
    }
    if v_max <= 0.0 || a_max <= 0.0 {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    phases(x0, v0, target, v_max, a_max, |dt, _| {
        if dt > 0.0 {
            total += dt
        }
    });
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample2D {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

/// Two synchronised 1D profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory2D {
    pub x_profile: Profile1D,
    pub y_profile: Profile1D,
    /// Split angle: x used `cos(alpha)` of the limits, y `sin(alpha)`.
    pub alpha: f64,
    pub total_time: f64,
}

impl Trajectory2D {
    pub fn stationary(p: Vec2) -> Self {
        Trajectory2D {
            x_profile: Profile1D::stationary(p.x),
            y_profile: Profile1D::stationary(p.y),
            alpha: 0.0,
            total_time: 0.0,
        }
    }

    /// Straight-line braking along the velocity direction at `a_max`.
    pub fn braking(start: Vec2, velocity: Vec2, a_max: f64) -> Self {
        let dir = velocity.normalized();
        let x_profile = Profile1D::braking(start.x, velocity.x, a_max * dir.x.abs());
        let y_profile = Profile1D::braking(start.y, velocity.y, a_max * dir.y.abs());
        let total_time = x_profile.total_time().max(y_profile.total_time());
        Trajectory2D {
            x_profile,
            y_profile,
            alpha: dir.y.abs().atan2(dir.x.abs()),
            total_time,
        }
    }

    pub fn sample(&self, t: f64) -> Sample2D {
        let sx = self.x_profile.sample(t);
        let sy = self.y_profile.sample(t);
        Sample2D {
            position: Vec2::new(sx.position, sy.position),
            velocity: Vec2::new(sx.velocity, sy.velocity),
            acceleration: Vec2::new(sx.acceleration, sy.acceleration),
        }
    }

    pub fn end_position(&self) -> Vec2 {
        Vec2::new(self.x_profile.target(), self.y_profile.target())
    }
}

/// Per-axis durations for split angle `alpha`.
pub fn axis_times(start: Vec2, velocity: Vec2, target: Vec2, limits: &MotionLimits, alpha: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    let tx = time_1d(start.x, velocity.x, target.x, limits.v_max * c, limits.a_max * c);
    let ty = time_1d(start.y, velocity.y, target.y, limits.v_max * s, limits.a_max * s);
    (tx, ty)
}

/// Bisection on the split angle so both axes finish together.
///
/// Stops after [`SYNC_MAX_ITERATIONS`] or once `|Tx - Ty| <= SYNC_TOLERANCE`;
/// among equally good angles the smaller one wins.
pub fn synchronize_alpha(start: Vec2, velocity: Vec2, target: Vec2, limits: &MotionLimits) -> f64 {
    let x_settled = start.x == target.x && velocity.x == 0.0;
    let y_settled = start.y == target.y && velocity.y == 0.0;
    if y_settled {
        return 0.0;
    }
    if x_settled {
        return FRAC_PI_2;
    }

    let (mut lo, mut hi) = (0.0, FRAC_PI_2);
    let mut best = (f64::INFINITY, FRAC_PI_2 / 2.0);
    for _ in 0..SYNC_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let (tx, ty) = axis_times(start, velocity, target, limits, mid);
        let gap = (tx - ty).abs();
        if gap < best.0 || (gap == best.0 && mid < best.1) {
            best = (gap, mid);
        }
        if gap <= SYNC_TOLERANCE {
            break;
        }
        // More alpha shrinks the x budget, so a slow x axis needs less.
        if tx > ty {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    best.1
}

/// Synchronised planar trajectory from `start` to rest at `target`.
pub fn plan_2d_synchronized(
    start: &RobotState,
    target: Vec2,
    limits: &MotionLimits,
) -> Result<Trajectory2D, TrajectoryError> {
    if !start.position.is_finite() || !start.velocity.is_finite() {
        return Err(TrajectoryError::NonFinite("start state"));
    }
    if !target.is_finite() {
        return Err(TrajectoryError::NonFinite("target"));
    }
    if !(limits.v_max.is_finite() && limits.v_max > 0.0) {
        return Err(TrajectoryError::NotPositive("v_max", limits.v_max));
    }
    if !(limits.a_max.is_finite() && limits.a_max > 0.0) {
        return Err(TrajectoryError::NotPositive("a_max", limits.a_max));
    }
    let p = start.position;
    let v = start.velocity;
    let alpha = synchronize_alpha(p, v, target, limits);
    let (s, c) = alpha.sin_cos();
    let axis = |x0: f64, v0: f64, xt: f64, share: f64| {
        if x0 == xt && v0 == 0.0 {
            Ok(Profile1D::stationary(x0))
        } else {
            plan_1d(x0, v0, xt, limits.v_max * share, limits.a_max * share)
        }
    };
    let x_profile = axis(p.x, v.x, target.x, c)?;
    let y_profile = axis(p.y, v.y, target.y, s)?;
    let total_time = x_profile.total_time().max(y_profile.total_time());
    Ok(Trajectory2D {
        x_profile,
        y_profile,
        alpha,
        total_time,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    start_time: f64,
    duration: f64,
    traj: Trajectory2D,
}

/// Sequence of 2D pieces, each cut at a switch time and continued by the next.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pieces: Vec<Piece>,
    total_time: f64,
}

impl From<Trajectory2D> for Trajectory {
    fn from(traj: Trajectory2D) -> Self {
        Trajectory::single(traj)
    }
}

impl Trajectory {
    pub fn single(traj: Trajectory2D) -> Self {
        let total_time = traj.total_time;
        Trajectory {
            pieces: vec![Piece {
                start_time: 0.0,
                duration: total_time,
                traj,
            }],
            total_time,
        }
    }

    /// Keeps the first `switch_time` seconds of the current trajectory and
    /// continues with `next`, which must start from the state sampled there.
    pub fn then(mut self, switch_time: f64, next: Trajectory2D) -> Self {
        let last = self.pieces.last_mut().expect("trajectory has at least one piece");
        let cut = switch_time.clamp(last.start_time, last.start_time + last.duration);
        last.duration = cut - last.start_time;
        let duration = next.total_time;
        self.pieces.push(Piece {
            start_time: cut,
            duration,
            traj: next,
        });
        self.total_time = cut + duration;
        self
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// The 2D pieces with their start times on this trajectory's clock.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, &Trajectory2D)> {
        self.pieces.iter().map(|p| (p.start_time, &p.traj))
    }

    pub fn sample(&self, t: f64) -> Sample2D {
        let last = self.pieces.len() - 1;
        for (i, piece) in self.pieces.iter().enumerate() {
            if i == last || t < piece.start_time + piece.duration {
                let local = (t - piece.start_time).max(0.0);
                return piece.traj.sample(local);
            }
        }
        unreachable!("the last piece always matches")
    }

    pub fn end_position(&self) -> Vec2 {
        self.pieces.last().map(|p| p.traj.end_position()).unwrap_or_default()
    }
}
