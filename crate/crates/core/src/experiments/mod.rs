//! The simulation study and the rolling backtest.

pub mod backtest;
pub mod sim;

pub use backtest::{run_backtest, BacktestConfig, BacktestReport};
pub use sim::{run_sim_study, GridPointSummary, ReplicationRecord, SimStudyConfig, SimStudyReport};
