use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sslm_core::estimator::{odometry_step, predict_current_state, BodyTwist, CommandLog, VisionFrame, WheelConfig};
use sslm_core::{RobotState, Vec2};

#[test]
fn odometry_recovers_random_twists() {
    let cfg = WheelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let twist = BodyTwist::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-10.0..10.0),
        );
        let back = cfg.twist_from_motor_speeds(cfg.motor_speeds(twist));
        assert!((back.vx - twist.vx).abs() < 1e-9);
        assert!((back.vy - twist.vy).abs() < 1e-9);
        assert!((back.omega - twist.omega).abs() < 1e-9);
    }
}

#[test]
fn odometry_step_follows_a_commanded_arc() {
    // drive a quarter circle of radius 1 in 200 steps
    let cfg = WheelConfig::default();
    let twist = BodyTwist::new(1.0, 0.0, 1.0);
    let motors = cfg.motor_speeds(twist);
    let mut s = RobotState::at_rest(Vec2::ZERO, 0.0);
    let dt = (PI / 2.0) / 200.0;
    for _ in 0..200 {
        s = odometry_step(&s, motors, 1.0, dt, &cfg);
    }
    assert!((s.position - Vec2::new(1.0, 1.0)).norm() < 1e-9);
    assert!((s.heading - PI / 2.0).abs() < 1e-9);
}

fn frame(t: f64, x: f64, y: f64, heading: f64) -> VisionFrame {
    VisionFrame {
        t_capture: t,
        position: Vec2::new(x, y),
        heading,
        velocity: None,
    }
}

proptest! {
    #[test]
    fn replay_is_additive_under_splitting(
        vx in -2.0..2.0f64, vy in -2.0..2.0f64, w in -6.0..6.0f64,
        heading in -3.0..3.0f64, k in 1usize..20, window in 0.01..0.3f64,
    ) {
        let mut whole = CommandLog::default();
        whole.push(0.0, BodyTwist::new(vx, vy, w));
        let mut split = CommandLog::default();
        for i in 0..k {
            split.push(window * i as f64 / k as f64, BodyTwist::new(vx, vy, w));
        }
        let f = frame(0.0, 0.3, -0.2, heading);
        let a = predict_current_state(&f, &whole, window);
        let b = predict_current_state(&f, &split, window);
        prop_assert!((a.position - b.position).norm() < 1e-12);
        prop_assert!((a.heading - b.heading).abs() < 1e-12);
    }

    #[test]
    fn predicted_heading_is_normalized(
        commands in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -20.0..20.0f64), 1..30),
        heading in -PI..PI,
    ) {
        let mut log = CommandLog::default();
        for (i, (vx, vy, w)) in commands.iter().enumerate() {
            log.push(i as f64 * 0.05, BodyTwist::new(*vx, *vy, *w));
        }
        let s = predict_current_state(&frame(0.0, 0.0, 0.0, heading), &log, commands.len() as f64 * 0.05);
        prop_assert!(s.heading > -PI && s.heading <= PI);
    }

    #[test]
    fn odometry_heading_is_normalized(
        w in -50.0..50.0f64, dt in 0.001..1.0f64, heading in -PI..PI,
    ) {
        let cfg = WheelConfig::default();
        let s = odometry_step(&RobotState::at_rest(Vec2::ZERO, heading), [1.0, -2.0, 3.0, 0.5], w, dt, &cfg);
        prop_assert!(s.heading > -PI && s.heading <= PI);
    }
}

#[test]
fn equal_wheel_speeds_translate_nowhere() {
    let cfg = WheelConfig::default();
    for speed in [-300.0, -1.0, 0.5, 42.0, 1000.0] {
        let t = cfg.twist_from_motor_speeds([speed; 4]);
        assert!(t.vx.abs() < 1e-12 && t.vy.abs() < 1e-12, "{t:?}");
    }
}

#[test]
fn entry_active_at_capture_is_clipped() {
    let mut log = CommandLog::default();
    log.push(0.0, BodyTwist::new(1.0, 0.0, 0.0));
    log.push(0.5, BodyTwist::new(0.0, 1.0, 0.0));
    let s = predict_current_state(&frame(0.4, 0.0, 0.0, 0.0), &log, 0.7);
    assert!((s.position - Vec2::new(0.1, 0.2)).norm() < 1e-12);
    assert_eq!(s.velocity, Vec2::new(0.0, 1.0));
}
