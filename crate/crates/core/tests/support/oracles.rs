//! Reference computations kept independent of the library code paths.
#![allow(dead_code)]

/// Time-optimal rest-to-target duration, derived by mirroring the problem so
/// the target is always in the +x direction.
pub fn bang_bang_time(x0: f64, v0: f64, target: f64, v_max: f64, a: f64) -> f64 {
    let mut d = target - x0;
    let mut v = v0;
    if d < 0.0 {
        d = -d;
        v = -v;
    }
    if d == 0.0 && v == 0.0 {
        return 0.0;
    }
    let mut t = 0.0;
    if v < 0.0 {
        // heading away: stop, which adds the stopping distance to the gap
        t += -v / a;
        d += v * v / (2.0 * a);
        v = 0.0;
    } else if v * v / (2.0 * a) > d {
        // too fast: stop beyond the target, then come back from rest
        t += v / a;
        d = v * v / (2.0 * a) - d;
        v = 0.0;
    }
    if v > v_max {
        t += (v - v_max) / a;
        d -= (v * v - v_max * v_max) / (2.0 * a);
        v = v_max;
    }
    let peak = (a * d + v * v / 2.0).sqrt();
    if peak <= v_max {
        t + (2.0 * peak - v) / a
    } else {
        let ramp = (v_max * v_max - v * v) / (2.0 * a) + v_max * v_max / (2.0 * a);
        t + (v_max - v) / a + v_max / a + (d - ramp) / v_max
    }
}

/// Forward-integrates a greedy bang-bang controller with a fixed step: brake
/// whenever the stopping distance exceeds the gap (or we move away),
/// otherwise accelerate toward the target up to `v_max`. Returns the time at
/// which the axis comes to rest within 1 mm of the target.
pub fn integrate_switching_law(x0: f64, v0: f64, target: f64, v_max: f64, a: f64, dt: f64) -> f64 {
    let mut x = x0;
    let mut v = v0;
    let mut t = 0.0;
    for _ in 0..10_000_000usize {
        let e = target - x;
        if v == 0.0 && e.abs() < 1e-3 {
            return t;
        }
        let must_brake = v != 0.0 && (v * e < 0.0 || v * v / (2.0 * a) > e.abs());
        if must_brake {
            let u = -a * v.signum();
            let tau = (v.abs() / a).min(dt);
            x += v * tau + 0.5 * u * tau * tau;
            v = if tau < dt { 0.0 } else { v + u * dt };
            t += tau;
            continue;
        }
        let dir = e.signum();
        let speed = v * dir;
        if speed > v_max {
            let tau = ((speed - v_max) / a).min(dt);
            x += v * tau - 0.5 * a * dir * tau * tau;
            v -= a * dir * tau;
            x += v * (dt - tau);
        } else {
            let tau = ((v_max - speed) / a).min(dt);
            x += v * tau + 0.5 * a * dir * tau * tau;
            v += a * dir * tau;
            x += v * (dt - tau);
        }
        t += dt;
    }
    panic!("forward integration did not settle");
}

/// First instant on a dense grid over `[0, t_end]` where `clearance` is negative.
pub fn dense_entry_time(clearance: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Option<f64> {
    let n = (t_end / dt).ceil() as usize;
    (0..=n)
        .map(|k| (k as f64 * dt).min(t_end))
        .find(|&t| clearance(t) < 0.0)
}
