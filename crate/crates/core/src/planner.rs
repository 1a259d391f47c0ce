//! Obstacle-aware trajectory search.
//!
//! Candidates are tried in a fixed order: the direct trajectory, the movement
//! reset (brake to rest, then go), the previous tick's intermediate point and
//! jitter around it, and finally a constellation of intermediate points in
//! rings around the robot. Every candidate is collision-checked against
//! time-parameterised obstacles and scored by its duration plus a penalty for
//! the time left after the first predicted contact.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::refparser::GameConstraints;
use crate::trajectory::{plan_2d_synchronized, Trajectory, Trajectory2D, TrajectoryError};
use crate::worldmodel::{
    distance_to_obstacle, inflate, FieldGeometry, FieldSide, MotionLimits, Obstacle, RobotState, Vec2, ROBOT_RADIUS,
};

/// Extra clearance on top of the robot radius when inflating obstacles.
pub const SAFETY_MARGIN: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid request: {0}")]
    Trajectory(#[from] TrajectoryError),
    #[error("invalid search config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Ascending ring radii of the constellation, meters.
    pub constellation_radii: Vec<f64>,
    /// Points per ring.
    pub constellation_angles: usize,
    /// Jittered copies of the previous intermediate point.
    pub warm_start_points: usize,
    pub warm_start_jitter: f64,
    pub check_dt: f64,
    /// Seconds of cost per second of trajectory left after first contact.
    pub collision_penalty: f64,
    pub max_candidates: usize,
    /// The first leg hands over to the second once it is this close to the
    /// intermediate point.
    pub switch_radius: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            constellation_radii: vec![0.3, 0.7, 1.2, 2.0],
            constellation_angles: 16,
            warm_start_points: 8,
            warm_start_jitter: 0.1,
            check_dt: 0.025,
            collision_penalty: 5.0,
            max_candidates: 128,
            switch_radius: 0.1,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.check_dt.is_finite() && self.check_dt > 0.0) {
            return Err(PlanError::Config("check_dt must be positive"));
        }
        if self.constellation_radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(PlanError::Config("constellation radii must be positive"));
        }
        if self.constellation_radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PlanError::Config("constellation radii must ascend"));
        }
        if !(self.collision_penalty.is_finite() && self.collision_penalty >= 0.0) {
            return Err(PlanError::Config("collision_penalty must be non-negative"));
        }
        if !(self.switch_radius.is_finite() && self.switch_radius >= 0.0) {
            return Err(PlanError::Config("switch_radius must be non-negative"));
        }
        Ok(())
    }

    /// Candidates the search can examine before touching the constellation.
    pub fn warm_start_budget(&self) -> usize {
        3 + self.warm_start_points
    }
}

/// One planning query. Obstacles must already be inflated by the robot
/// radius (see [`prepare_obstacles`]).
#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    pub start: RobotState,
    pub target: Vec2,
    pub limits: MotionLimits,
    pub obstacles: &'a [Obstacle],
    pub previous: Option<&'a PlanResult>,
    pub constraints: GameConstraints,
}

impl<'a> PlanRequest<'a> {
    pub fn new(start: RobotState, target: Vec2, limits: MotionLimits, obstacles: &'a [Obstacle]) -> Self {
        PlanRequest {
            start,
            target,
            limits,
            obstacles,
            previous: None,
            constraints: GameConstraints::default(),
        }
    }

    pub fn with_previous(mut self, previous: Option<&'a PlanResult>) -> Self {
        self.previous = previous;
        self
    }

    pub fn with_constraints(mut self, constraints: GameConstraints) -> Self {
        self.constraints = constraints;
        self
    }

    /// Pulls the target inside the field minus its boundary margin.
    pub fn clamped_to(mut self, field: &FieldGeometry) -> Self {
        self.target = field.clamp_to_field(self.target);
        self
    }

    fn effective_limits(&self) -> MotionLimits {
        self.limits.with_speed_cap(self.constraints.speed_cap)
    }

    fn halted(&self) -> bool {
        matches!(self.constraints.speed_cap, Some(cap) if cap <= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Direct,
    Reset,
    WarmStart,
    Constellation,
    /// Speed cap of zero: brake in place.
    Halt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub intermediate: Option<Vec2>,
    /// First predicted contact on the trajectory clock; `None` means clean.
    pub collision_time: Option<f64>,
    pub total_time: f64,
    pub score: f64,
    pub kind: CandidateKind,
    pub candidates_examined: usize,
}

impl PlanResult {
    pub fn is_clean(&self) -> bool {
        self.collision_time.is_none()
    }
}

/// Inflates raw obstacles by the robot radius plus [`SAFETY_MARGIN`].
pub fn prepare_obstacles(raw: &[Obstacle]) -> Vec<Obstacle> {
    prepare_obstacles_with(raw, ROBOT_RADIUS + SAFETY_MARGIN)
}

pub fn prepare_obstacles_with(raw: &[Obstacle], margin: f64) -> Vec<Obstacle> {
    raw.iter()
        .filter(|o| o.is_active())
        .map(|o| inflate(o, margin))
        .collect()
}

/// Rule-driven keep-outs (not yet inflated): defense areas for field players
/// and the ball keep-out disc when the game state asks for one.
pub fn game_obstacles(
    field: &FieldGeometry,
    constraints: &GameConstraints,
    ball: Option<Vec2>,
    goalkeeper: bool,
) -> Vec<Obstacle> {
    let mut out = Vec::new();
    if constraints.defense_keepout_active {
        out.push(field.defense_area(FieldSide::Opponent));
        if !goalkeeper {
            out.push(field.defense_area(FieldSide::Own));
        }
    }
    if let (Some(radius), Some(center)) = (constraints.ball_keepout, ball) {
        out.push(Obstacle::KeepOutDisc {
            center,
            radius,
            active: true,
        });
    }
    out
}

/// Earliest sample `t ∈ {0, dt, 2dt, …, T}` with negative clearance against
/// any obstacle evaluated at that same `t`.
pub fn first_collision(traj: &Trajectory, obstacles: &[Obstacle], check_dt: f64) -> Option<(f64, usize)> {
    Checker::new(obstacles, check_dt, None).first_collision(traj)
}

/// Collision checker that tolerates obstacles the robot starts inside until
/// it has left them once.
struct Checker<'a> {
    obstacles: &'a [Obstacle],
    dt: f64,
    escaping: Vec<bool>,
}

impl<'a> Checker<'a> {
    fn new(obstacles: &'a [Obstacle], dt: f64, start: Option<Vec2>) -> Self {
        let escaping = match start {
            Some(p) => obstacles
                .iter()
                .map(|o| distance_to_obstacle(p, o, 0.0) < 0.0)
                .collect(),
            None => vec![false; obstacles.len()],
        };
        Checker {
            obstacles,
            dt,
            escaping,
        }
    }

    fn first_collision(&self, traj: &Trajectory) -> Option<(f64, usize)> {
        let total = traj.total_time();
        let steps = (total / self.dt).ceil() as usize;
        let mut escaping = self.escaping.clone();
        for k in 0..=steps {
            let t = (k as f64 * self.dt).min(total);
            let p = traj.sample(t).position;
            for (i, obs) in self.obstacles.iter().enumerate() {
                let d = distance_to_obstacle(p, obs, t);
                if escaping[i] {
                    if d >= 0.0 {
                        escaping[i] = false;
                    }
                    continue;
                }
                if d < 0.0 {
                    return Some((t, i));
                }
            }
        }
        None
    }
}

fn score_of(total_time: f64, collision_time: Option<f64>, penalty: f64) -> f64 {
    match collision_time {
        Some(tc) => total_time + penalty * (total_time - tc),
        None => total_time,
    }
}

struct Search<'r, 'a> {
    req: &'r PlanRequest<'a>,
    cfg: &'r SearchConfig,
    limits: MotionLimits,
    checker: Checker<'a>,
    examined: usize,
    best: Option<PlanResult>,
}

impl<'r, 'a> Search<'r, 'a> {
    fn evaluate(&mut self, trajectory: Trajectory, intermediate: Option<Vec2>, kind: CandidateKind) -> PlanResult {
        self.examined += 1;
        let collision_time = self.checker.first_collision(&trajectory).map(|(t, _)| t);
        let total_time = trajectory.total_time();
        let candidate = PlanResult {
            score: score_of(total_time, collision_time, self.cfg.collision_penalty),
            trajectory,
            intermediate,
            collision_time,
            total_time,
            kind,
            candidates_examined: 0,
        };
        let better = match &self.best {
            Some(b) => candidate.score < b.score,
            None => true,
        };
        if better {
            self.best = Some(candidate.clone());
        }
        candidate
    }

    fn budget_left(&self) -> bool {
        self.examined < self.cfg.max_candidates
    }

    fn via(&mut self, point: Vec2, kind: CandidateKind) -> Result<PlanResult, PlanError> {
        let traj = via_point(&self.req.start, point, self.req.target, &self.limits, self.cfg)?;
        Ok(self.evaluate(traj, Some(point), kind))
    }

    fn finish(self) -> PlanResult {
        let mut best = self.best.expect("at least one candidate evaluated");
        best.candidates_examined = self.examined;
        best
    }
}

/// Two-leg trajectory through `point`: the second leg starts from the first
/// leg's state at the first check instant within `switch_radius` of `point`.
pub fn via_point(
    start: &RobotState,
    point: Vec2,
    target: Vec2,
    limits: &MotionLimits,
    cfg: &SearchConfig,
) -> Result<Trajectory, TrajectoryError> {
    let first = plan_2d_synchronized(start, point, limits)?;
    let total = first.total_time;
    let steps = (total / cfg.check_dt).ceil() as usize;
    let mut switch = total;
    for k in 0..=steps {
        let t = (k as f64 * cfg.check_dt).min(total);
        if first.sample(t).position.distance(point) <= cfg.switch_radius {
            switch = t;
            break;
        }
    }
    let at = first.sample(switch);
    let handover = RobotState {
        position: at.position,
        velocity: at.velocity,
        ..*start
    };
    let second = plan_2d_synchronized(&handover, target, limits)?;
    Ok(Trajectory::single(first).then(switch, second))
}

fn reset_trajectory(start: &RobotState, target: Vec2, limits: &MotionLimits) -> Result<Trajectory, TrajectoryError> {
    if start.velocity == Vec2::ZERO {
        return Ok(Trajectory::single(plan_2d_synchronized(start, target, limits)?));
    }
    let brake = Trajectory2D::braking(start.position, start.velocity, limits.a_max);
    let rest = RobotState {
        position: brake.end_position(),
        velocity: Vec2::ZERO,
        ..*start
    };
    let go = plan_2d_synchronized(&rest, target, limits)?;
    let switch = brake.total_time;
    Ok(Trajectory::single(brake).then(switch, go))
}

/// Movement reset: brake the current velocity to rest at `a_max`, then a
/// rest-to-rest trajectory to the target. Scored like any other candidate.
pub fn reset_candidate(req: &PlanRequest<'_>, cfg: &SearchConfig) -> Result<PlanResult, PlanError> {
    let limits = req.effective_limits();
    let traj = reset_trajectory(&req.start, req.target, &limits)?;
    let checker = Checker::new(req.obstacles, cfg.check_dt, Some(req.start.position));
    let collision_time = checker.first_collision(&traj).map(|(t, _)| t);
    let total_time = traj.total_time();
    Ok(PlanResult {
        score: score_of(total_time, collision_time, cfg.collision_penalty),
        trajectory: traj,
        intermediate: None,
        collision_time,
        total_time,
        kind: CandidateKind::Reset,
        candidates_examined: 1,
    })
}

/// Best collision-checked trajectory for this tick. Deterministic in
/// `(req, cfg)`; the jitter RNG is seeded from `cfg.seed`.
pub fn plan(req: &PlanRequest<'_>, cfg: &SearchConfig) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    if !req.start.is_finite() {
        return Err(TrajectoryError::NonFinite("start state").into());
    }
    if !req.target.is_finite() {
        return Err(TrajectoryError::NonFinite("target").into());
    }

    if req.halted() {
        let traj = Trajectory::single(Trajectory2D::braking(
            req.start.position,
            req.start.velocity,
            req.limits.a_max,
        ));
        let total_time = traj.total_time();
        return Ok(PlanResult {
            trajectory: traj,
            intermediate: None,
            collision_time: None,
            total_time,
            score: total_time,
            kind: CandidateKind::Halt,
            candidates_examined: 1,
        });
    }

    let limits = req.effective_limits();
    let mut search = Search {
        req,
        cfg,
        limits,
        checker: Checker::new(req.obstacles, cfg.check_dt, Some(req.start.position)),
        examined: 0,
        best: None,
    };

    let direct = Trajectory::single(plan_2d_synchronized(&req.start, req.target, &limits)?);
    let direct = search.evaluate(direct, None, CandidateKind::Direct);
    let reset = reset_trajectory(&req.start, req.target, &limits)?;
    let reset = search.evaluate(reset, None, CandidateKind::Reset);
    if direct.is_clean() {
        return Ok(search.finish());
    }

    if let Some(prev) = req.previous.and_then(|p| p.intermediate) {
        let warm = search.via(prev, CandidateKind::WarmStart)?;
        if warm.is_clean() {
            return Ok(search.finish());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.warm_start_points {
            if !search.budget_left() {
                break;
            }
            let r = cfg.warm_start_jitter * rng.gen::<f64>().sqrt();
            let theta = rng.gen::<f64>() * TAU;
            search.via(prev + Vec2::from_polar(r, theta), CandidateKind::WarmStart)?;
        }
    }

    let origin = req.start.position;
    'rings: for &radius in &cfg.constellation_radii {
        for k in 0..cfg.constellation_angles {
            if !search.budget_left() {
                break 'rings;
            }
            let theta = TAU * k as f64 / cfg.constellation_angles as f64;
            search.via(origin + Vec2::from_polar(radius, theta), CandidateKind::Constellation)?;
        }
    }

    let best = search.best.as_ref().expect("candidates evaluated");
    if best.collision_time == Some(0.0) {
        // Everything collides immediately; hand back the reset for the caller.
        let mut reset = reset;
        reset.candidates_examined = search.examined;
        return Ok(reset);
    }
    Ok(search.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn limits(v: f64, a: f64) -> MotionLimits {
        MotionLimits {
            v_max: v,
            a_max: a,
            ..MotionLimits::default()
        }
    }

    #[test]
    fn empty_scene_returns_direct() {
        let start = RobotState::at_rest(Vec2::ZERO, 0.0);
        let lim = limits(2.0, 3.0);
        let req = PlanRequest::new(start, Vec2::new(2.0, 1.0), lim, &[]);
        let res = plan(&req, &SearchConfig::default()).unwrap();
        let direct = plan_2d_synchronized(&start, Vec2::new(2.0, 1.0), &lim).unwrap();
        assert_eq!(res.kind, CandidateKind::Direct);
        assert!(res.intermediate.is_none());
        assert!(res.is_clean());
        assert_eq!(res.total_time, direct.total_time);
        assert_eq!(res.trajectory, Trajectory::single(direct));
    }

    #[test]
    fn far_obstacle_has_no_collision() {
        let traj = Trajectory::single(
            plan_2d_synchronized(
                &RobotState::at_rest(Vec2::ZERO, 0.0),
                Vec2::new(2.0, 0.0),
                &limits(2.0, 2.0),
            )
            .unwrap(),
        );
        let obs = [Obstacle::StaticDisc {
            center: Vec2::new(1.0, 5.0),
            radius: 0.29,
        }];
        assert_eq!(first_collision(&traj, &obs, 0.01), None);
    }

    #[test]
    fn halt_cap_brakes_in_place() {
        let start = RobotState {
            velocity: Vec2::new(1.0, 0.0),
            ..RobotState::at_rest(Vec2::ZERO, 0.0)
        };
        let constraints = GameConstraints {
            speed_cap: Some(0.0),
            ..GameConstraints::default()
        };
        let req = PlanRequest::new(start, Vec2::new(3.0, 0.0), limits(2.0, 2.0), &[]).with_constraints(constraints);
        let res = plan(&req, &SearchConfig::default()).unwrap();
        assert_eq!(res.kind, CandidateKind::Halt);
        assert_abs_diff_eq!(res.total_time, 0.5);
        assert_abs_diff_eq!(res.trajectory.end_position().x, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn speed_cap_limits_planned_speed() {
        let start = RobotState::at_rest(Vec2::ZERO, 0.0);
        let constraints = GameConstraints {
            speed_cap: Some(1.5),
            ..GameConstraints::default()
        };
        let req = PlanRequest::new(start, Vec2::new(4.0, 0.0), limits(3.0, 3.0), &[]).with_constraints(constraints);
        let res = plan(&req, &SearchConfig::default()).unwrap();
        let peak = (0..400)
            .map(|k| res.trajectory.sample(k as f64 * 0.01).velocity.norm())
            .fold(0.0, f64::max);
        assert!(peak <= 1.5 + 1e-9, "peak {peak}");
    }

    #[test]
    fn start_inside_obstacle_escapes() {
        let obs = prepare_obstacles(&[Obstacle::StaticDisc {
            center: Vec2::new(0.05, 0.0),
            radius: 0.09,
        }]);
        let start = RobotState::at_rest(Vec2::ZERO, 0.0);
        let req = PlanRequest::new(start, Vec2::new(-2.0, 0.0), limits(2.0, 3.0), &obs);
        let res = plan(&req, &SearchConfig::default()).unwrap();
        assert!(res.is_clean());
        assert_eq!(res.kind, CandidateKind::Direct);
    }

    #[test]
    fn game_obstacles_respect_goalkeeper() {
        let field = FieldGeometry::default();
        let c = GameConstraints {
            ball_keepout: Some(0.5),
            defense_keepout_active: true,
            ..GameConstraints::default()
        };
        assert_eq!(game_obstacles(&field, &c, Some(Vec2::ZERO), false).len(), 3);
        assert_eq!(game_obstacles(&field, &c, Some(Vec2::ZERO), true).len(), 2);
        assert_eq!(game_obstacles(&field, &c, None, true).len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SearchConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.constellation_radii = vec![0.7, 0.3];
        assert!(cfg.validate().is_err());
        cfg = SearchConfig {
            check_dt: 0.0,
            ..SearchConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
