//! Low-level movement primitives: rotate on self, drive to point, rotate in
//! point, plus feedforward tracking of planner trajectories. Each turns the
//! current state into a body-frame [`VelocityCommand`] for one tick.

use serde::{Deserialize, Serialize};

use crate::estimator::BodyTwist;
use crate::planner::PlanResult;
use crate::worldmodel::{wrap_angle, MotionLimits, RobotState, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityCommand {
    /// Robot-frame velocity, m/s.
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub kick: bool,
    pub dribble: bool,
}

impl VelocityCommand {
    pub fn stop() -> Self {
        VelocityCommand::default()
    }

    fn from_world(world_velocity: Vec2, heading: f64, omega: f64) -> Self {
        let body = world_velocity.rotated(-heading);
        VelocityCommand {
            vx: body.x,
            vy: body.y,
            omega,
            ..VelocityCommand::default()
        }
    }

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    /// World-frame velocity for a robot at `heading`.
    pub fn world_velocity(&self, heading: f64) -> Vec2 {
        self.linear().rotated(heading)
    }

    pub fn twist(&self) -> BodyTwist {
        BodyTwist::new(self.vx, self.vy, self.omega)
    }

    /// Scales into the limits: planar speed ≤ v_max, |ω| ≤ ω_max.
    pub fn clamped(mut self, limits: &MotionLimits) -> Self {
        let v = self.linear().clamp_norm(limits.v_max);
        self.vx = v.x;
        self.vy = v.y;
        self.omega = self.omega.clamp(-limits.omega_max, limits.omega_max);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavGains {
    /// Heading gain, 1/s.
    pub k_omega: f64,
    /// Distance below which drive-to-point slows down, m.
    pub d_slow: f64,
    /// Position gain when following trajectories, 1/s.
    pub k_p: f64,
    /// Radial gain of rotate-in-point, 1/s.
    pub k_radial: f64,
}

impl Default for NavGains {
    fn default() -> Self {
        NavGains {
            k_omega: 4.0,
            d_slow: 0.5,
            k_p: 2.0,
            k_radial: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NavTarget {
    RotateOnSelf {
        orientation: f64,
    },
    DriveToPoint {
        point: Vec2,
        #[serde(default)]
        orientation: f64,
    },
    RotateInPoint {
        pivot: Vec2,
        radius: f64,
        tangential_speed: f64,
    },
    FollowTrajectory {
        point: Vec2,
        #[serde(default)]
        orientation: f64,
    },
}

fn heading_rate(heading: f64, target_heading: f64, limits: &MotionLimits, gains: &NavGains) -> f64 {
    (gains.k_omega * wrap_angle(target_heading - heading)).clamp(-limits.omega_max, limits.omega_max)
}

/// Turns in place toward `target_heading`.
pub fn rotate_on_self(
    state: &RobotState,
    target_heading: f64,
    limits: &MotionLimits,
    gains: &NavGains,
) -> VelocityCommand {
    VelocityCommand {
        omega: heading_rate(state.heading, target_heading, limits, gains),
        ..VelocityCommand::default()
    }
}

/// Straight-line drive with orientation correction: translation is gated by
/// `max(0, cos(heading error))` and slowed inside `d_slow` of the target.
pub fn drive_to_point(
    state: &RobotState,
    target: Vec2,
    target_heading: f64,
    limits: &MotionLimits,
    gains: &NavGains,
) -> VelocityCommand {
    let omega = heading_rate(state.heading, target_heading, limits, gains);
    let to_target = target - state.position;
    let dist = to_target.norm();
    if dist == 0.0 {
        return VelocityCommand {
            omega,
            ..VelocityCommand::default()
        };
    }
    let error = wrap_angle(target_heading - state.heading);
    let speed = limits.v_max * error.cos().max(0.0) * (dist / gains.d_slow).min(1.0);
    VelocityCommand::from_world(to_target * (speed / dist), state.heading, omega).clamped(limits)
}

/// Orbit around `pivot` at `radius`, facing the pivot. Positive
/// `tangential_speed` orbits counter-clockwise.
pub fn rotate_in_point(
    state: &RobotState,
    pivot: Vec2,
    radius: f64,
    tangential_speed: f64,
    limits: &MotionLimits,
    gains: &NavGains,
) -> VelocityCommand {
    let offset = state.position - pivot;
    let dist = offset.norm();
    let facing = (pivot - state.position).angle();
    if dist < 1e-6 {
        return rotate_on_self(state, state.heading, limits, gains);
    }
    let radial = offset / dist;
    let tangent = radial.perp();
    let velocity = tangent * tangential_speed + radial * (gains.k_radial * (radius - dist));
    let omega = tangential_speed / dist + gains.k_omega * wrap_angle(facing - state.heading);
    VelocityCommand::from_world(velocity, state.heading, omega).clamped(limits)
}

/// Feedforward velocity of `plan` at `t_since_plan` plus a proportional pull
/// toward the sampled position. Past the end: hold the final position.
pub fn follow_trajectory(
    state: &RobotState,
    plan: &PlanResult,
    t_since_plan: f64,
    target_heading: f64,
    limits: &MotionLimits,
    gains: &NavGains,
) -> VelocityCommand {
    let omega = heading_rate(state.heading, target_heading, limits, gains);
    let world = if t_since_plan > plan.total_time {
        (plan.trajectory.end_position() - state.position) * gains.k_p
    } else {
        let reference = plan.trajectory.sample(t_since_plan);
        reference.velocity + (reference.position - state.position) * gains.k_p
    };
    VelocityCommand::from_world(world, state.heading, omega).clamped(limits)
}

/// Dispatches a [`NavTarget`]. `FollowTrajectory` needs a plan; without one it
/// falls back to drive-to-point.
pub fn command_for(
    target: &NavTarget,
    state: &RobotState,
    plan: Option<(&PlanResult, f64)>,
    limits: &MotionLimits,
    gains: &NavGains,
) -> VelocityCommand {
    match *target {
        NavTarget::RotateOnSelf { orientation } => rotate_on_self(state, orientation, limits, gains),
        NavTarget::DriveToPoint { point, orientation } => drive_to_point(state, point, orientation, limits, gains),
        NavTarget::RotateInPoint {
            pivot,
            radius,
            tangential_speed,
        } => rotate_in_point(state, pivot, radius, tangential_speed, limits, gains),
        NavTarget::FollowTrajectory { point, orientation } => match plan {
            Some((plan, t)) => follow_trajectory(state, plan, t, orientation, limits, gains),
            None => drive_to_point(state, point, orientation, limits, gains),
        },
    }
}
