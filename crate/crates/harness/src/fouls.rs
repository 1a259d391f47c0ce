//! Rule-violation detection with per-violation debouncing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sslm_core::refparser::{GameConstraints, GameStateLeaf};
use sslm_core::worldmodel::{distance_to_obstacle, FieldGeometry, FieldSide, ROBOT_RADIUS};
use sslm_core::{Obstacle, Vec2};

use crate::scenario::FoulConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FoulKind {
    BotCrashUnique,
    AttackerTooCloseToDefenseArea,
    DefenderTooCloseToKickPoint,
}

/// Something a robot can run into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Robot(u32),
    Obstacle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoulEvent {
    pub t: f64,
    pub kind: FoulKind,
    pub robot: u32,
    /// The other party of a crash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<Party>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FoulCounters {
    pub bot_crash_unique: u32,
    pub attacker_too_close_to_defense_area: u32,
    pub defender_too_close_to_kick_point: u32,
}

impl FoulCounters {
    pub fn record(&mut self, kind: FoulKind) {
        match kind {
            FoulKind::BotCrashUnique => self.bot_crash_unique += 1,
            FoulKind::AttackerTooCloseToDefenseArea => self.attacker_too_close_to_defense_area += 1,
            FoulKind::DefenderTooCloseToKickPoint => self.defender_too_close_to_kick_point += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.bot_crash_unique + self.attacker_too_close_to_defense_area + self.defender_too_close_to_kick_point
    }
}

/// Kinematic snapshot of one of our robots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotSnapshot {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub goalkeeper: bool,
}

/// Everything the rules look at, frozen at one instant.
#[derive(Debug, Clone, Copy)]
pub struct FoulScene<'a> {
    pub t: f64,
    pub robots: &'a [RobotSnapshot],
    /// Scenario obstacles with their time origin at 0.
    pub obstacles: &'a [Obstacle],
    pub ball: Option<Vec2>,
    pub field: &'a FieldGeometry,
    pub leaf: GameStateLeaf,
    pub constraints: GameConstraints,
}

type Key = (FoulKind, u32, Option<Party>);

/// Current violations in `scene`, without debouncing.
pub fn violations(scene: &FoulScene<'_>, cfg: &FoulConfig) -> Vec<Key> {
    let mut out = Vec::new();
    let robots = scene.robots;
    for (i, a) in robots.iter().enumerate() {
        for b in &robots[i + 1..] {
            if crashing(
                a.position,
                a.velocity,
                b.position,
                b.velocity,
                2.0 * ROBOT_RADIUS,
                cfg.crash_speed,
            ) {
                out.push((FoulKind::BotCrashUnique, a.id, Some(Party::Robot(b.id))));
            }
        }
        for (k, obs) in scene.obstacles.iter().enumerate() {
            let (center, velocity, radius) = match *obs {
                Obstacle::StaticDisc { radius, .. } => (obs.center_at(scene.t), Vec2::ZERO, radius),
                Obstacle::MovingDisc {
                    radius,
                    velocity,
                    horizon,
                    ..
                } => {
                    let v = if scene.t < horizon { velocity } else { Vec2::ZERO };
                    (obs.center_at(scene.t), v, radius)
                }
                _ => continue,
            };
            let Some(center) = center else { continue };
            if crashing(
                a.position,
                a.velocity,
                center,
                velocity,
                ROBOT_RADIUS + radius,
                cfg.crash_speed,
            ) {
                out.push((FoulKind::BotCrashUnique, a.id, Some(Party::Obstacle(k))));
            }
        }
        if scene.leaf.is_in_play() && !a.goalkeeper {
            let area = scene.field.defense_area(FieldSide::Opponent);
            if distance_to_obstacle(a.position, &area, scene.t) - ROBOT_RADIUS < cfg.defense_margin {
                out.push((FoulKind::AttackerTooCloseToDefenseArea, a.id, None));
            }
        }
        if scene.leaf.is_dynamic_formation() {
            if let (Some(ball), Some(keepout)) = (scene.ball, scene.constraints.ball_keepout) {
                if a.position.distance(ball) - ROBOT_RADIUS < keepout {
                    out.push((FoulKind::DefenderTooCloseToKickPoint, a.id, None));
                }
            }
        }
    }
    out
}

/// Overlap plus a closing speed at or above `threshold`.
fn crashing(pa: Vec2, va: Vec2, pb: Vec2, vb: Vec2, contact: f64, threshold: f64) -> bool {
    let d = pa - pb;
    let dist = d.norm();
    if dist >= contact {
        return false;
    }
    if dist == 0.0 {
        return (va - vb).norm() >= threshold;
    }
    let closing = -(va - vb).dot(d) / dist;
    closing >= threshold
}

#[derive(Debug, Clone, Copy)]
struct Track {
    active: bool,
    last_event: f64,
}

/// Turns per-tick violations into events: one per continuous violation, and
/// no repeat for the same key within the debounce window.
#[derive(Debug, Clone, Default)]
pub struct FoulMonitor {
    tracks: BTreeMap<Key, Track>,
    pub counters: FoulCounters,
    pub events: Vec<FoulEvent>,
}

impl FoulMonitor {
    pub fn detect(&mut self, scene: &FoulScene<'_>, cfg: &FoulConfig) -> Vec<FoulEvent> {
        let current = violations(scene, cfg);
        let mut fresh = Vec::new();
        for track in self.tracks.values_mut() {
            track.active = false;
        }
        for key in current {
            let track = self.tracks.entry(key).or_insert(Track {
                active: false,
                last_event: f64::NEG_INFINITY,
            });
            let was_active = track.active;
            track.active = true;
            if was_active || scene.t - track.last_event < cfg.debounce_s {
                continue;
            }
            track.last_event = scene.t;
            fresh.push(FoulEvent {
                t: scene.t,
                kind: key.0,
                robot: key.1,
                other: key.2,
            });
        }
        for e in &fresh {
            self.counters.record(e.kind);
        }
        self.events.extend_from_slice(&fresh);
        fresh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sslm_core::refparser::{constraints_for, FormationReason, GameMode};

    fn scene<'a>(robots: &'a [RobotSnapshot], field: &'a FieldGeometry, leaf: GameStateLeaf, t: f64) -> FoulScene<'a> {
        FoulScene {
            t,
            robots,
            obstacles: &[],
            ball: Some(Vec2::ZERO),
            field,
            leaf,
            constraints: constraints_for(leaf),
        }
    }

    fn robot(id: u32, x: f64, y: f64, vx: f64) -> RobotSnapshot {
        RobotSnapshot {
            id,
            position: Vec2::new(x, y),
            velocity: Vec2::new(vx, 0.0),
            goalkeeper: false,
        }
    }

    const PLAY: GameStateLeaf = GameStateLeaf::GameTactic(GameMode::Normal);

    #[test]
    fn distant_robots_do_not_crash() {
        let field = FieldGeometry::default();
        let robots = [robot(0, 0.0, 1.0, 2.0), robot(1, 1.0, 1.0, -2.0)];
        assert!(violations(&scene(&robots, &field, PLAY, 0.0), &FoulConfig::default()).is_empty());
    }

    #[test]
    fn overlapping_fast_approach_is_one_crash() {
        let field = FieldGeometry::default();
        let robots = [robot(0, 0.0, 1.0, 0.75), robot(1, 0.17, 1.0, -0.75)];
        let mut monitor = FoulMonitor::default();
        let cfg = FoulConfig::default();
        let first = monitor.detect(&scene(&robots, &field, PLAY, 0.0), &cfg);
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].kind, FoulKind::BotCrashUnique);
        // the same contact on the next tick is not a new event
        assert!(monitor.detect(&scene(&robots, &field, PLAY, 0.005), &cfg).is_empty());
        assert_eq!(monitor.counters.bot_crash_unique, 1);
    }

    #[test]
    fn slow_contact_is_not_a_crash() {
        let field = FieldGeometry::default();
        let robots = [robot(0, 0.0, 1.0, 0.5), robot(1, 0.17, 1.0, -0.5)];
        assert!(violations(&scene(&robots, &field, PLAY, 0.0), &FoulConfig::default()).is_empty());
    }

    #[test]
    fn debounce_suppresses_quick_repeats() {
        let field = FieldGeometry::default();
        let cfg = FoulConfig::default();
        let touching = [robot(0, 0.0, 1.0, 1.0), robot(1, 0.17, 1.0, -1.0)];
        let apart = [robot(0, -1.0, 1.0, 0.0), robot(1, 1.0, 1.0, 0.0)];
        let mut monitor = FoulMonitor::default();
        assert_eq!(monitor.detect(&scene(&touching, &field, PLAY, 0.0), &cfg).len(), 1);
        assert!(monitor.detect(&scene(&apart, &field, PLAY, 0.1), &cfg).is_empty());
        assert!(monitor.detect(&scene(&touching, &field, PLAY, 0.5), &cfg).is_empty());
        assert!(monitor.detect(&scene(&apart, &field, PLAY, 0.6), &cfg).is_empty());
        assert_eq!(monitor.detect(&scene(&touching, &field, PLAY, 1.2), &cfg).len(), 1);
    }

    #[test]
    fn robot_near_ball_during_stop_fouls_once() {
        let field = FieldGeometry::default();
        let stop = GameStateLeaf::DynamicFormation(FormationReason::Stop);
        let robots = [robot(0, 0.4, 0.0, 0.0)];
        let cfg = FoulConfig::default();
        let mut monitor = FoulMonitor::default();
        let events = monitor.detect(&scene(&robots, &field, stop, 0.0), &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, FoulKind::DefenderTooCloseToKickPoint);
        assert!(monitor.detect(&scene(&robots, &field, stop, 0.005), &cfg).is_empty());
        // the same spot is legal in normal play
        assert!(violations(&scene(&robots, &field, PLAY, 0.0), &cfg).is_empty());
    }

    #[test]
    fn defense_area_invasion_only_for_field_players_in_play() {
        let field = FieldGeometry::default();
        let cfg = FoulConfig::default();
        let mut inside = robot(3, 4.0, 0.0, 0.0);
        let kinds = |robots: &[RobotSnapshot], leaf| {
            violations(&scene(robots, &field, leaf, 0.0), &cfg)
                .into_iter()
                .map(|k| k.0)
                .collect::<Vec<_>>()
        };
        assert_eq!(kinds(&[inside], PLAY), vec![FoulKind::AttackerTooCloseToDefenseArea]);
        assert!(kinds(&[inside], GameStateLeaf::Halt).is_empty());
        inside.goalkeeper = true;
        assert!(kinds(&[inside], PLAY).is_empty());
        assert!(kinds(&[robot(3, 3.2, 0.0, 0.0)], PLAY).is_empty());
    }
}
