//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each and exits non-zero if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sslm_core::estimator::{BodyTwist, WheelConfig};
use sslm_core::refparser::{parse, Command, GameStateLeaf, RefereeInput, RefereeLog, Stage, Team};
use sslm_core::trajectory::{plan_1d, plan_2d_synchronized};
use sslm_core::{MotionLimits, RobotState, Vec2};
use sslm_harness::bench::{run_bench, BenchConfig};
use sslm_harness::{run_with, RunOptions, Scenario, World};

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(workspace().join("scenarios"))
        .expect("scenarios directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn planner_latency() -> Outcome {
    let report = run_bench(&BenchConfig {
        obstacles: 15,
        iters: 10_000,
        seed: 0,
    });
    let l = report.latency_ms;
    check(
        l.samples == 10_000 && l.median < 1.0 && l.p99 < 5.0,
        format!(
            "median {:.4} ms, p99 {:.4} ms over {} plans",
            l.median, l.p99, l.samples
        ),
    )
}

fn random_1d(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64, f64) {
    let v_max = rng.gen_range(0.2..4.0);
    let a_max = rng.gen_range(0.2..6.0);
    let x0 = rng.gen_range(-5.0..5.0);
    let v0 = rng.gen_range(-1.5..1.5) * v_max;
    let target = rng.gen_range(-5.0..5.0);
    (x0, v0, target, v_max, a_max)
}

fn one_d_optimality() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d);
    let mut worst_closed = 0.0f64;
    for _ in 0..10_000 {
        let (x0, v0, xt, vm, am) = random_1d(&mut rng);
        let t = plan_1d(x0, v0, xt, vm, am).map_err(|e| e.to_string())?.total_time();
        worst_closed = worst_closed.max((t - oracles::bang_bang_time(x0, v0, xt, vm, am)).abs());
    }
    let mut worst_numeric = 0.0f64;
    for _ in 0..100 {
        let (x0, v0, xt, vm, am) = random_1d(&mut rng);
        let t = plan_1d(x0, v0, xt, vm, am).map_err(|e| e.to_string())?.total_time();
        worst_numeric = worst_numeric.max((t - oracles::integrate_switching_law(x0, v0, xt, vm, am, 1e-5)).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst_closed <= 1e-9 && worst_numeric <= 1e-4 && secs < 10.0,
        format!("closed-form err {worst_closed:.2e}, integration err {worst_numeric:.2e}, {secs:.2} s"),
    )
}

fn two_d_synchronization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x2d);
    let (mut worst_sync, mut worst_end, mut worst_excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..1_000 {
        let limits = MotionLimits {
            v_max: rng.gen_range(0.5..4.0),
            a_max: rng.gen_range(0.5..6.0),
            ..MotionLimits::default()
        };
        let start = RobotState {
            position: Vec2::new(rng.gen_range(-4.5..4.5), rng.gen_range(-3.0..3.0)),
            velocity: Vec2::from_polar(rng.gen_range(0.0..1.0) * limits.v_max, rng.gen_range(-3.2..3.2)),
            heading: 0.0,
            angular_velocity: 0.0,
        };
        let target = Vec2::new(rng.gen_range(-4.5..4.5), rng.gen_range(-3.0..3.0));
        let traj = plan_2d_synchronized(&start, target, &limits).map_err(|e| e.to_string())?;
        worst_sync = worst_sync.max((traj.x_profile.total_time() - traj.y_profile.total_time()).abs());
        worst_end = worst_end.max(traj.sample(traj.total_time).position.distance(target));
        let (s, c) = traj.alpha.sin_cos();
        // an axis may start faster than its share; it is then bounded by its own start speed
        let vx_cap = (limits.v_max * c).max(start.velocity.x.abs());
        let vy_cap = (limits.v_max * s).max(start.velocity.y.abs());
        for k in 0..=400 {
            let p = traj.sample(traj.total_time * k as f64 / 400.0);
            worst_excess = worst_excess
                .max(p.velocity.x.abs() - vx_cap)
                .max(p.velocity.y.abs() - vy_cap)
                .max(p.acceleration.x.abs() - limits.a_max * c)
                .max(p.acceleration.y.abs() - limits.a_max * s);
        }
    }
    check(
        worst_sync <= 1e-3 && worst_end < 1e-6 && worst_excess <= 1e-9,
        format!("|Tx-Ty| {worst_sync:.2e} s, endpoint {worst_end:.2e} m, limit excess {worst_excess:.2e}"),
    )
}

fn safety_suite() -> Outcome {
    let files = scenario_files();
    let mut failures = Vec::new();
    let mut lowest = f64::INFINITY;
    for path in &files {
        let sc = Scenario::load(path).map_err(|e| e.to_string())?;
        let report = run_with(&sc, &RunOptions::default()).report;
        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if report.fouls.total() > 0 {
            failures.push(format!("{name}: {} fouls", report.fouls.total()));
        }
        for (spec, robot) in sc.robots.iter().zip(&report.robots) {
            let tolerance = -spec.limits.v_max * sc.dt / 10.0;
            if let Some(c) = robot.min_clearance {
                lowest = lowest.min(c);
                if c < tolerance {
                    failures.push(format!("{name}: robot {} clearance {c:.4}", robot.id));
                }
            }
        }
    }
    check(
        files.len() == 20 && failures.is_empty(),
        if failures.is_empty() {
            format!("{} scenarios, 0 fouls, min clearance {lowest:.4} m", files.len())
        } else {
            format!("{} scenarios: {}", files.len(), failures.join("; "))
        },
    )
}

/// Runs the scenario tick by tick and returns (completion time, worst
/// per-tick estimator position error).
fn drive(sc: &Scenario) -> (Option<f64>, f64) {
    let mut world = World::new(sc);
    let ticks = (sc.duration_s / sc.dt).round() as u64;
    let mut worst = 0.0f64;
    for _ in 0..ticks {
        world.control();
        for r in &world.robots {
            worst = worst.max(r.estimate.position.distance(r.truth.position));
        }
        world.step(world.dt);
    }
    (world.robots[0].completion_time, worst)
}

fn latency_compensation() -> Outcome {
    let mut sc = Scenario::load(workspace().join("scenarios/01_empty_field_drive.toml")).map_err(|e| e.to_string())?;
    sc.vision.latency_s = 0.1;
    let (delayed, err_delayed) = drive(&sc);
    sc.vision.latency_s = 0.0;
    let (prompt, err_prompt) = drive(&sc);
    let (Some(delayed), Some(prompt)) = (delayed, prompt) else {
        return Err(format!("drive did not complete: {delayed:?} vs {prompt:?}"));
    };
    let ratio = delayed / prompt;
    let worst = err_delayed.max(err_prompt);
    check(
        (ratio - 1.0).abs() <= 0.1 && worst < 0.01,
        format!(
            "completion {delayed:.3} s vs {prompt:.3} s (ratio {ratio:.4}), max estimator error {:.2} mm",
            worst * 1e3
        ),
    )
}

fn referee_parser() -> Outcome {
    let mut inputs = 0usize;
    for command in Command::all() {
        for stage in Stage::ALL {
            for ball_moved in [false, true] {
                for we_are in Team::ALL {
                    for previous in GameStateLeaf::all() {
                        let input = RefereeInput {
                            command,
                            stage,
                            ball_moved,
                            we_are,
                        };
                        let leaf = parse(&input, previous);
                        if !GameStateLeaf::all().contains(&leaf) {
                            return Err(format!("{input:?} from {previous} gave unlisted {leaf:?}"));
                        }
                        let halted = parse(
                            &RefereeInput {
                                command: Command::Halt,
                                ..input
                            },
                            previous,
                        );
                        if halted != GameStateLeaf::Halt {
                            return Err(format!("HALT in {stage} from {previous} gave {halted}"));
                        }
                        inputs += 1;
                    }
                }
            }
        }
    }
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let log: RefereeLog = fs::read_to_string(data.join("half_game.log"))
        .map_err(|e| e.to_string())?
        .parse()
        .map_err(|e: sslm_core::refparser::RefParseError| e.to_string())?;
    let rendered: String = log
        .leaf_timeline()
        .iter()
        .map(|(t, leaf)| format!("{t:.3} {leaf}\n"))
        .collect();
    let golden = fs::read_to_string(data.join("half_game.timeline")).map_err(|e| e.to_string())?;
    check(
        rendered == golden,
        format!(
            "{inputs} inputs total with halt dominance, golden timeline of {} events matches",
            log.events.len()
        ),
    )
}

fn odometry_round_trip() -> Outcome {
    let cfg = WheelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let twist = BodyTwist::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-10.0..10.0),
        );
        let back = cfg.twist_from_motor_speeds(cfg.motor_speeds(twist));
        worst = worst
            .max((back.vx - twist.vx).abs())
            .max((back.vy - twist.vy).abs())
            .max((back.omega - twist.omega).abs());
    }
    let mut drift = 0.0f64;
    for _ in 0..1_000 {
        let t = cfg.twist_from_motor_speeds([rng.gen_range(-500.0..500.0); 4]);
        drift = drift.max(t.vx.abs()).max(t.vy.abs());
    }
    check(
        worst <= 1e-9 && drift <= 1e-12,
        format!("round-trip err {worst:.2e}, equal-speed translation {drift:.2e}"),
    )
}

fn determinism() -> Outcome {
    let opts = RunOptions {
        seed: None,
        trace: true,
        timing: false,
    };
    let files = scenario_files();
    for path in &files {
        let sc = Scenario::load(path).map_err(|e| e.to_string())?;
        let a = run_with(&sc, &opts);
        let b = run_with(&sc, &opts);
        if a.report.to_json() != b.report.to_json() || a.trace != b.trace {
            return Err(format!("{} differs between runs", path.display()));
        }
    }
    Ok(format!(
        "{} scenarios re-run with identical report and trace bytes",
        files.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("planner latency", planner_latency),
        ("1D optimality", one_d_optimality),
        ("2D synchronization", two_d_synchronization),
        ("safety suite", safety_suite),
        ("latency compensation", latency_compensation),
        ("referee parser", referee_parser),
        ("odometry round trip", odometry_round_trip),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
