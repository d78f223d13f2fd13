//! Scenario files, threshold calculators, the drivers for the two-parameter problem and both
//! worked examples, and the pipeline behind the `plap` command.

pub mod drivers;
pub mod expr;
pub mod run;
pub mod scenario;
pub mod thresholds;

pub use drivers::{
    example1_driver, example2_driver, from_transformed, to_transformed, two_param_driver, Bracket, Example1Outcome,
    Example2Comparison, Example2Outcome, HypothesisChecks, PairSolve, PairSummary,
};
pub use expr::Expr;
pub use run::{
    run_scenario, run_scenario_struct, thresholds_scenario, write_artifacts, Overrides, RunOutcome, RunReport, Status,
};
pub use scenario::{ProbeConfig, ProblemConfig, Scenario};
pub use thresholds::{
    example1_thresholds, example2_thresholds, Example1Thresholds, Example2Thresholds, ThresholdReport,
};
