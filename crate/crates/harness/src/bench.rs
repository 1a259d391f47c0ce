//! Planner latency benchmark over random cluttered scenes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sslm_core::planner::{plan, prepare_obstacles, PlanRequest, SearchConfig};
use sslm_core::worldmodel::ROBOT_RADIUS;
use sslm_core::{MotionLimits, Obstacle, RobotState, Vec2};

use crate::metrics::LatencyStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub obstacles: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            obstacles: 15,
            iters: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub obstacles: usize,
    pub iters: usize,
    pub latency_ms: LatencyStats,
    pub clean_fraction: f64,
    pub mean_candidates: f64,
}

/// Start state, target and raw (uninflated) obstacles of one planning query.
#[derive(Debug, Clone)]
pub struct BenchScene {
    pub start: RobotState,
    pub target: Vec2,
    pub obstacles: Vec<Obstacle>,
}

fn field_point(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(rng.gen_range(-4.2..4.2), rng.gen_range(-2.7..2.7))
}

/// A robot-sized clutter of static and moving discs, none of which covers the
/// start or the target.
pub fn random_scene(rng: &mut ChaCha8Rng, obstacles: usize) -> BenchScene {
    let position = field_point(rng);
    let mut target = field_point(rng);
    while target.distance(position) < 1.0 {
        target = field_point(rng);
    }
    let speed = rng.gen_range(0.0..1.5);
    let start = RobotState {
        position,
        velocity: Vec2::from_polar(speed, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
        heading: 0.0,
        angular_velocity: 0.0,
    };
    let mut out = Vec::with_capacity(obstacles);
    while out.len() < obstacles {
        let center = field_point(rng);
        if center.distance(position) < 0.4 || center.distance(target) < 0.4 {
            continue;
        }
        if rng.gen_bool(1.0 / 3.0) {
            out.push(Obstacle::MovingDisc {
                center,
                radius: ROBOT_RADIUS,
                velocity: Vec2::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(-3.2..3.2)),
                horizon: 1.0,
            });
        } else {
            out.push(Obstacle::StaticDisc {
                center,
                radius: ROBOT_RADIUS,
            });
        }
    }
    BenchScene {
        start,
        target,
        obstacles: out,
    }
}

/// Times `iters` cold planning queries. Scene generation and obstacle
/// inflation happen outside the timed region.
pub fn run_bench(cfg: &BenchConfig) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let search = SearchConfig {
        seed: cfg.seed,
        ..SearchConfig::default()
    };
    let limits = MotionLimits::default();
    let mut samples = Vec::with_capacity(cfg.iters);
    let mut clean = 0usize;
    let mut candidates = 0usize;
    for _ in 0..cfg.iters {
        let scene = random_scene(&mut rng, cfg.obstacles);
        let prepared = prepare_obstacles(&scene.obstacles);
        let req = PlanRequest::new(scene.start, scene.target, limits, &prepared);
        let started = Instant::now();
        let result = plan(&req, &search);
        samples.push(started.elapsed());
        let result = result.expect("random scenes are finite");
        clean += usize::from(result.is_clean());
        candidates += result.candidates_examined;
    }
    let n = cfg.iters.max(1) as f64;
    BenchReport {
        obstacles: cfg.obstacles,
        iters: cfg.iters,
        latency_ms: LatencyStats::from_durations(&samples).unwrap_or(LatencyStats {
            samples: 0,
            mean: 0.0,
            median: 0.0,
            p95: 0.0,
            p99: 0.0,
            max: 0.0,
        }),
        clean_fraction: clean as f64 / n,
        mean_candidates: candidates as f64 / n,
    }
}
