//! Command-line harness for lookahead counterfactual fairness experiments.

pub mod artifacts;
pub mod checks;
pub mod commands;
