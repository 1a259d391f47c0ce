//! Fixed-step kinematic simulator and the closed-loop pipeline around it.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sslm_core::estimator::{
    fuse_on_vision, odometry_step, predict_current_state, BodyTwist, CommandLog, VisionFrame, WheelConfig,
};
use sslm_core::navigation::{command_for, NavGains, NavTarget, VelocityCommand};
use sslm_core::planner::{game_obstacles, plan, prepare_obstacles, PlanRequest, PlanResult, SearchConfig};
use sslm_core::refparser::{
    constraints_with, parse, Command, ConstraintDefaults, GameConstraints, GameStateLeaf, RefereeInput, Stage, Team,
};
use sslm_core::worldmodel::{distance_to_obstacle, wrap_angle, FieldGeometry, ROBOT_RADIUS};
use sslm_core::{MotionLimits, Obstacle, RobotState, Vec2};

use crate::fouls::{FoulCounters, FoulEvent, FoulMonitor, FoulScene, RobotSnapshot};
use crate::metrics::LatencyStats;
use crate::scenario::{BallKick, FoulConfig, RefereeStep, Scenario, TeammateConfig, TimedTarget, VisionConfig};

/// Ball displacement from its restart spot that counts as "moved", m.
pub const BALL_MOVED_DISTANCE: f64 = 0.05;
/// Completion requires the robot within this distance of its final target, m.
pub const ARRIVAL_TOLERANCE: f64 = 0.02;
/// ... and slower than this, m/s.
pub const ARRIVAL_SPEED: f64 = 0.1;
/// Completion tolerance for pure rotations, rad.
pub const HEADING_TOLERANCE: f64 = 0.02;
/// Encoder counts per motor revolution used for simulated odometry.
pub const ENCODER_CPT: f64 = 1024.0;
/// Sub-samples per tick for clearance checks.
pub const CLEARANCE_SUBSTEPS: usize = 10;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct ActivePlan {
    result: PlanResult,
    planned_at: f64,
    target_index: usize,
}

/// One of our robots: ground truth, what the software believes, and metrics.
#[derive(Debug, Clone)]
pub struct SimRobot {
    pub id: u32,
    pub goalkeeper: bool,
    pub limits: MotionLimits,
    pub truth: RobotState,
    pub command: VelocityCommand,
    pub log: CommandLog,
    /// State fed to the planner and navigation.
    pub estimate: RobotState,
    pub latest_frame: VisionFrame,
    in_flight: VecDeque<(f64, VisionFrame)>,
    odometry: RobotState,
    plan: Option<ActivePlan>,
    timeline: Vec<TimedTarget>,
    pub min_clearance: f64,
    pub max_speed: f64,
    pub completion_time: Option<f64>,
    pub estimator_max_error: f64,
    pub plans: u64,
    candidates: u64,
}

impl SimRobot {
    fn active_target(&self, t: f64) -> Option<(usize, NavTarget)> {
        self.timeline
            .iter()
            .enumerate()
            .rev()
            .find(|(_, e)| e.t <= t + TIME_EPS)
            .map(|(i, e)| (i, e.target))
    }

    pub fn plan(&self) -> Option<&PlanResult> {
        self.plan.as_ref().map(|p| &p.result)
    }

    fn arrived(&self, t: f64) -> bool {
        let Some((index, target)) = self.active_target(t) else {
            return false;
        };
        if index + 1 != self.timeline.len() {
            return false;
        }
        let slow = self.truth.velocity.norm() < ARRIVAL_SPEED;
        match target {
            NavTarget::DriveToPoint { point, .. } | NavTarget::FollowTrajectory { point, .. } => {
                slow && self.truth.position.distance(point) < ARRIVAL_TOLERANCE
            }
            NavTarget::RotateOnSelf { orientation } => {
                slow && wrap_angle(orientation - self.truth.heading).abs() < HEADING_TOLERANCE
            }
            NavTarget::RotateInPoint { .. } => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Everything the simulator advances. `time` is the instant of the current
/// ground truth.
#[derive(Debug, Clone)]
pub struct World {
    pub time: f64,
    pub tick: u64,
    pub dt: f64,
    pub field: FieldGeometry,
    /// Scenario obstacles with their time origin at 0.
    pub obstacles: Vec<Obstacle>,
    pub robots: Vec<SimRobot>,
    pub ball: Option<Ball>,
    pub leaf: GameStateLeaf,
    pub constraints: GameConstraints,
    pub fouls: FoulMonitor,
    pub leaf_timeline: Vec<(f64, GameStateLeaf)>,
    pub latencies: Vec<Duration>,
    ball_kick: Option<BallKick>,
    restart_ball: Option<Vec2>,
    referee: Vec<RefereeStep>,
    referee_cursor: usize,
    referee_state: (Command, Stage),
    team: Team,
    vision: VisionConfig,
    frames_emitted: u64,
    gains: NavGains,
    rules: ConstraintDefaults,
    foul_cfg: FoulConfig,
    use_odometry: bool,
    pub teammates: TeammateConfig,
    wheels: WheelConfig,
    search: SearchConfig,
    measure_latency: bool,
}

impl World {
    pub fn new(scenario: &Scenario) -> Self {
        let robots = scenario
            .robots
            .iter()
            .map(|spec| {
                let truth = spec.start;
                let frame = capture(&truth, 0.0);
                SimRobot {
                    id: spec.id,
                    goalkeeper: spec.goalkeeper,
                    limits: spec.limits,
                    truth,
                    command: VelocityCommand::stop(),
                    log: CommandLog::default(),
                    estimate: truth,
                    latest_frame: frame,
                    in_flight: VecDeque::new(),
                    odometry: truth,
                    plan: None,
                    timeline: spec.timeline(),
                    min_clearance: f64::INFINITY,
                    max_speed: truth.velocity.norm(),
                    completion_time: None,
                    estimator_max_error: 0.0,
                    plans: 0,
                    candidates: 0,
                }
            })
            .collect();
        let referee = if scenario.referee.is_empty() {
            vec![RefereeStep {
                t: 0.0,
                command: Command::ForceStart,
                stage: Stage::FirstHalf,
            }]
        } else {
            scenario.referee.clone()
        };
        let ball = scenario.ball.map(|b| Ball {
            position: b.position,
            velocity: Vec2::ZERO,
        });
        World {
            time: 0.0,
            tick: 0,
            dt: scenario.dt,
            field: scenario.field,
            obstacles: scenario.obstacles.clone(),
            robots,
            ball,
            leaf: GameStateLeaf::Halt,
            constraints: constraints_with(GameStateLeaf::Halt, &scenario.rules),
            fouls: FoulMonitor::default(),
            leaf_timeline: Vec::new(),
            latencies: Vec::new(),
            ball_kick: scenario.ball.and_then(|b| b.kick),
            restart_ball: ball.map(|b| b.position),
            referee,
            referee_cursor: 0,
            referee_state: (Command::Halt, Stage::FirstHalfPre),
            team: scenario.team,
            vision: scenario.vision,
            frames_emitted: 0,
            gains: scenario.gains,
            rules: scenario.rules,
            foul_cfg: scenario.fouls,
            use_odometry: scenario.odometry,
            teammates: scenario.teammates,
            wheels: WheelConfig::default(),
            search: SearchConfig {
                seed: scenario.seed,
                ..SearchConfig::default()
            },
            measure_latency: false,
        }
    }

    /// Advances the physics by `dt`: velocity slews toward the command at no
    /// more than `a_max`, positions integrate exactly under that constant
    /// acceleration, and vision frames are captured at the configured rate.
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0, "step needs dt > 0");
        let t0 = self.time;
        let motion: Vec<(Vec2, Vec2, Vec2)> = self
            .robots
            .iter()
            .map(|r| {
                let desired = r.command.world_velocity(r.truth.heading);
                let dv = (desired - r.truth.velocity).clamp_norm(r.limits.a_max * dt);
                (r.truth.position, r.truth.velocity, dv / dt)
            })
            .collect();
        self.track_clearance(t0, dt, &motion);

        for (robot, &(p0, v0, accel)) in self.robots.iter_mut().zip(&motion) {
            let v1 = v0 + accel * dt;
            robot.truth.position = p0 + (v0 + v1) * (0.5 * dt);
            robot.truth.velocity = v1;
            let w0 = robot.truth.angular_velocity;
            let dw = (robot.command.omega - w0).clamp(-robot.limits.alpha_max * dt, robot.limits.alpha_max * dt);
            let w1 = w0 + dw;
            robot.truth.heading = wrap_angle(robot.truth.heading + 0.5 * (w0 + w1) * dt);
            robot.truth.angular_velocity = w1;
            robot.max_speed = robot.max_speed.max(v1.norm());
            if self.use_odometry {
                let motors = quantize(self.wheels.motor_speeds(body_twist(&robot.truth)), dt);
                robot.odometry = odometry_step(&robot.odometry, motors, w1, dt, &self.wheels);
            }
        }

        if let Some(ball) = &mut self.ball {
            if let Some(kick) = self.ball_kick {
                if kick.t >= t0 && kick.t < t0 + dt {
                    ball.velocity = kick.velocity;
                }
            }
            ball.position += ball.velocity * dt;
            if !self.field.contains(ball.position) {
                let half = Vec2::new(self.field.length / 2.0, self.field.width / 2.0);
                ball.position = Vec2::new(
                    ball.position.x.clamp(-half.x, half.x),
                    ball.position.y.clamp(-half.y, half.y),
                );
                ball.velocity = Vec2::ZERO;
            }
        }

        self.tick += 1;
        self.time = t0 + dt;
        let due = (self.time * self.vision.rate_hz + TIME_EPS).floor() as u64;
        if due > self.frames_emitted {
            self.frames_emitted = due;
            let deliver = self.time + self.vision.latency_s;
            for robot in &mut self.robots {
                robot.in_flight.push_back((deliver, capture(&robot.truth, self.time)));
            }
        }
        for robot in &mut self.robots {
            if robot.completion_time.is_none() && robot.arrived(self.time) {
                robot.completion_time = Some(self.time);
            }
        }
    }

    fn track_clearance(&mut self, t0: f64, dt: f64, motion: &[(Vec2, Vec2, Vec2)]) {
        let physical: Vec<&Obstacle> = self
            .obstacles
            .iter()
            .filter(|o| !matches!(o, Obstacle::KeepOutDisc { .. }))
            .collect();
        let mut positions = vec![Vec2::ZERO; motion.len()];
        for k in 1..=CLEARANCE_SUBSTEPS {
            let s = dt * k as f64 / CLEARANCE_SUBSTEPS as f64;
            for (p, &(p0, v0, a)) in positions.iter_mut().zip(motion) {
                *p = p0 + v0 * s + a * (0.5 * s * s);
            }
            for (i, robot) in self.robots.iter_mut().enumerate() {
                let mut c = f64::INFINITY;
                for obs in &physical {
                    c = c.min(distance_to_obstacle(positions[i], obs, t0 + s) - ROBOT_RADIUS);
                }
                for (j, q) in positions.iter().enumerate() {
                    if j != i {
                        c = c.min(positions[i].distance(*q) - 2.0 * ROBOT_RADIUS);
                    }
                }
                robot.min_clearance = robot.min_clearance.min(c);
            }
        }
    }

    /// Referee parse, perception, planning and navigation for the current
    /// instant; leaves a fresh command on every robot.
    pub fn control(&mut self) {
        let t = self.time;
        self.update_referee(t);
        let constraints = self.constraints;

        let mut needs_plan = vec![false; self.robots.len()];
        for (robot, needs) in self.robots.iter_mut().zip(needs_plan.iter_mut()) {
            let mut fresh = false;
            while robot
                .in_flight
                .front()
                .is_some_and(|(deliver, _)| *deliver <= t + TIME_EPS)
            {
                robot.latest_frame = robot.in_flight.pop_front().expect("front exists").1;
                fresh = true;
            }
            let predicted = predict_current_state(&robot.latest_frame, &robot.log, t);
            let err = predicted.position.distance(robot.truth.position);
            robot.estimator_max_error = robot.estimator_max_error.max(err);
            robot.estimate = if self.use_odometry {
                if fresh {
                    robot.odometry =
                        fuse_on_vision(&robot.latest_frame, &robot.log, t, &robot.odometry, self.vision.trust);
                }
                robot.odometry
            } else {
                predicted
            };
            if let Some((index, NavTarget::FollowTrajectory { .. })) = robot.active_target(t) {
                let stale = robot.plan.as_ref().is_none_or(|p| p.target_index != index);
                *needs = fresh || stale;
            }
        }

        let results: Vec<Option<(PlanResult, usize, Duration)>> = needs_plan
            .par_iter()
            .enumerate()
            .map(|(i, &needs)| if needs { self.replan(i) } else { None })
            .collect();
        let measure = self.measure_latency;

        for (robot, result) in self.robots.iter_mut().zip(results) {
            if let Some((result, target_index, elapsed)) = result {
                robot.plans += 1;
                robot.candidates += result.candidates_examined as u64;
                if measure {
                    self.latencies.push(elapsed);
                }
                robot.plan = Some(ActivePlan {
                    result,
                    planned_at: t,
                    target_index,
                });
            }
        }

        let limits_cap = constraints.speed_cap;
        // the command takes effect over the next tick; navigation sees the
        // state and the reference at that instant
        let lead = self.dt;
        for robot in &mut self.robots {
            let command = match (self.leaf, robot.active_target(t)) {
                (GameStateLeaf::Halt, _) | (_, None) => VelocityCommand::stop(),
                (_, Some((_, target))) => {
                    let limits = robot.limits.with_speed_cap(limits_cap);
                    let plan = robot.plan.as_ref().map(|p| (&p.result, t - p.planned_at + lead));
                    command_for(&target, &projected(&robot.estimate, lead), plan, &limits, &self.gains)
                }
            };
            robot.command = command;
            robot.log.push(t, command.twist());
        }

        detect_fouls(self, self.leaf);
    }

    /// Inflated obstacles robot `index` plans against right now: scenario
    /// obstacles, teammates and rule keep-outs.
    pub fn planning_obstacles(&self, index: usize) -> Vec<Obstacle> {
        let t = self.time;
        let mut raw: Vec<Obstacle> = self.obstacles.iter().map(|o| o.advanced(t)).collect();
        raw.extend(
            self.robots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != index)
                .map(|(j, other)| Obstacle::MovingDisc {
                    center: other.estimate.position,
                    radius: ROBOT_RADIUS + self.teammates.margin,
                    velocity: other.estimate.velocity,
                    horizon: if j < index {
                        self.teammates.horizon
                    } else {
                        self.teammates.yield_horizon
                    },
                }),
        );
        let ball = self.ball.map(|b| b.position);
        raw.extend(game_obstacles(
            &self.field,
            &self.constraints,
            ball,
            self.robots[index].goalkeeper,
        ));
        prepare_obstacles(&raw)
    }

    fn replan(&self, index: usize) -> Option<(PlanResult, usize, Duration)> {
        let t = self.time;
        let robot = &self.robots[index];
        let (target_index, target) = robot.active_target(t)?;
        let NavTarget::FollowTrajectory { point, .. } = target else {
            return None;
        };
        let obstacles = self.planning_obstacles(index);
        let previous = robot
            .plan
            .as_ref()
            .filter(|p| p.target_index == target_index)
            .map(|p| &p.result);
        let req = PlanRequest::new(robot.estimate, point, robot.limits, &obstacles)
            .with_previous(previous)
            .with_constraints(self.constraints)
            .clamped_to(&self.field);
        let cfg = self.search_config(index);
        let started = self.measure_latency.then(Instant::now);
        let result = plan(&req, &cfg).ok()?;
        let elapsed = started.map_or(Duration::ZERO, |s| s.elapsed());
        Some((result, target_index, elapsed))
    }

    pub fn search_config(&self, index: usize) -> SearchConfig {
        SearchConfig {
            seed: self.search.seed ^ u64::from(self.robots[index].id).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            ..self.search.clone()
        }
    }

    fn update_referee(&mut self, t: f64) {
        while self.referee_cursor < self.referee.len() && self.referee[self.referee_cursor].t <= t + TIME_EPS {
            let step = self.referee[self.referee_cursor];
            if (step.command, step.stage) != self.referee_state {
                self.restart_ball = self.ball.map(|b| b.position);
            }
            self.referee_state = (step.command, step.stage);
            self.referee_cursor += 1;
        }
        let ball_moved = match (self.ball, self.restart_ball) {
            (Some(b), Some(r)) => b.position.distance(r) > BALL_MOVED_DISTANCE,
            _ => false,
        };
        let input = RefereeInput {
            command: self.referee_state.0,
            stage: self.referee_state.1,
            ball_moved,
            we_are: self.team,
        };
        let leaf = parse(&input, self.leaf);
        if self.leaf_timeline.is_empty() || leaf != self.leaf {
            self.leaf_timeline.push((t, leaf));
        }
        self.leaf = leaf;
        self.constraints = constraints_with(leaf, &self.rules);
    }

    /// One full tick: control at the current instant, then physics.
    pub fn advance(&mut self) {
        self.control();
        self.step(self.dt);
    }

    pub fn snapshot(&self) -> Vec<RobotSnapshot> {
        self.robots
            .iter()
            .map(|r| RobotSnapshot {
                id: r.id,
                position: r.truth.position,
                velocity: r.truth.velocity,
                goalkeeper: r.goalkeeper,
            })
            .collect()
    }

    fn trace_line(&self, out: &mut String) {
        for r in &self.robots {
            let _ = writeln!(
                out,
                "{:.3} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {}",
                self.time,
                r.id,
                r.truth.position.x,
                r.truth.position.y,
                r.truth.heading,
                r.truth.velocity.x,
                r.truth.velocity.y,
                r.truth.angular_velocity,
                r.estimate.position.x,
                r.estimate.position.y,
                r.command.vx,
                r.command.vy,
                r.command.omega,
                self.leaf,
            );
        }
    }
}

/// Rule check on the current ground truth; new events are also recorded in
/// `world.fouls`.
pub fn detect_fouls(world: &mut World, leaf: GameStateLeaf) -> Vec<FoulEvent> {
    let robots = world.snapshot();
    let scene = FoulScene {
        t: world.time,
        robots: &robots,
        obstacles: &world.obstacles,
        ball: world.ball.map(|b| b.position),
        field: &world.field,
        leaf,
        constraints: constraints_with(leaf, &world.rules),
    };
    world.fouls.detect(&scene, &world.foul_cfg)
}

fn projected(state: &RobotState, lead: f64) -> RobotState {
    RobotState {
        position: state.position + state.velocity * lead,
        heading: wrap_angle(state.heading + state.angular_velocity * lead),
        ..*state
    }
}

fn capture(truth: &RobotState, t: f64) -> VisionFrame {
    VisionFrame {
        t_capture: t,
        position: truth.position,
        heading: truth.heading,
        velocity: Some(truth.velocity),
    }
}

/// Body-frame twist of the true motion, as the wheels see it.
fn body_twist(truth: &RobotState) -> BodyTwist {
    let v = truth.velocity.rotated(-truth.heading);
    BodyTwist::new(v.x, v.y, truth.angular_velocity)
}

/// Rounds motor speeds to whole encoder counts per tick.
fn quantize(motor_speeds: [f64; 4], dt: f64) -> [f64; 4] {
    let per_count = std::f64::consts::TAU / ENCODER_CPT / dt;
    motor_speeds.map(|w| (w / per_count).round() * per_count)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    pub trace: bool,
    /// Records wall-clock planner latency (not deterministic).
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReport {
    pub id: u32,
    pub completion_time: Option<f64>,
    pub min_clearance: Option<f64>,
    pub max_speed: f64,
    pub final_position: Vec2,
    pub final_heading: f64,
    pub estimator_max_error: f64,
    pub plans: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSummary {
    pub calls: u64,
    pub mean_candidates: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<LatencyStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafChange {
    pub t: f64,
    pub leaf: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub dt: f64,
    pub ticks: u64,
    pub robots: Vec<RobotReport>,
    pub min_clearance: Option<f64>,
    pub fouls: FoulCounters,
    pub foul_events: Vec<FoulEvent>,
    pub leaf_timeline: Vec<LeafChange>,
    pub planner: PlannerSummary,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SimReport,
    pub trace: String,
    pub world: World,
}

pub const TRACE_HEADER: &str = "# t id x y heading vx vy omega est_x est_y cmd_vx cmd_vy cmd_omega leaf";

pub fn run(scenario: &Scenario) -> SimReport {
    run_with(scenario, &RunOptions::default()).report
}

pub fn run_with(scenario: &Scenario, opts: &RunOptions) -> RunOutput {
    let mut scenario = scenario.clone();
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    let mut world = World::new(&scenario);
    world.measure_latency = opts.timing;
    let ticks = (scenario.duration_s / scenario.dt).round().max(1.0) as u64;
    let mut trace = String::new();
    if opts.trace {
        trace.push_str(TRACE_HEADER);
        trace.push('\n');
    }
    for _ in 0..ticks {
        world.control();
        if opts.trace {
            world.trace_line(&mut trace);
        }
        world.step(world.dt);
    }
    let report = summarize(&scenario, &world, ticks);
    RunOutput { report, trace, world }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn summarize(scenario: &Scenario, world: &World, ticks: u64) -> SimReport {
    let robots: Vec<RobotReport> = world
        .robots
        .iter()
        .map(|r| RobotReport {
            id: r.id,
            completion_time: r.completion_time,
            min_clearance: finite(r.min_clearance),
            max_speed: r.max_speed,
            final_position: r.truth.position,
            final_heading: r.truth.heading,
            estimator_max_error: r.estimator_max_error,
            plans: r.plans,
        })
        .collect();
    let calls: u64 = world.robots.iter().map(|r| r.plans).sum();
    let candidates: u64 = world.robots.iter().map(|r| r.candidates).sum();
    SimReport {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        dt: scenario.dt,
        ticks,
        min_clearance: finite(
            world
                .robots
                .iter()
                .map(|r| r.min_clearance)
                .fold(f64::INFINITY, f64::min),
        ),
        fouls: world.fouls.counters,
        foul_events: world.fouls.events.clone(),
        leaf_timeline: world
            .leaf_timeline
            .iter()
            .map(|(t, leaf)| LeafChange {
                t: *t,
                leaf: leaf.to_string(),
            })
            .collect(),
        planner: PlannerSummary {
            calls,
            mean_candidates: if calls == 0 {
                0.0
            } else {
                candidates as f64 / calls as f64
            },
            latency_ms: LatencyStats::from_durations(&world.latencies),
        },
        robots,
    }
}
