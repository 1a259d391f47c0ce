//! Simulator, scenario runner and benchmarks for the sslm motion stack.

pub mod bench;
pub mod fouls;
pub mod metrics;
pub mod scenario;
pub mod sim;

pub use scenario::Scenario;
pub use sim::{detect_fouls, run, run_with, RunOptions, SimReport, World};
