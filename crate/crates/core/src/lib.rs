//! Motion planning and navigation for omnidirectional soccer robots.
//!
//! - [`worldmodel`]: geometry, robot state, obstacles and field.
//! - [`trajectory`]: bang-bang profiles and their 2D synchronisation.
//! - [`planner`]: obstacle-aware search over direct, reset, warm-start and
//!   constellation candidates.
//! - [`estimator`]: latency compensation by command replay, wheel odometry.
//! - [`navigation`]: movement primitives and trajectory following.
//! - [`refparser`]: referee parser tree and the constraints it implies.

pub mod estimator;
pub mod navigation;
pub mod planner;
pub mod refparser;
pub mod trajectory;
pub mod worldmodel;

pub use worldmodel::{MotionLimits, Obstacle, RobotState, Vec2};
