//! Lookahead counterfactual fairness.
//!
//! Structural causal models with abduction and counterfactuals, strategic
//! agents that move their exogenous state along the gradient of a deployed
//! predictor, predictor families whose deployment provably shrinks (or
//! removes) the factual/counterfactual gap in *future* outcomes, and the
//! training and evaluation machinery around them.

pub mod data;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod numeric;
pub mod predictor;
pub mod response;
pub mod scm;
pub mod training;

pub use dist::DistSpec;
pub use error::{LcfError, Result};
pub use predictor::{ConditionReport, PredictorInput, PredictorSpec};
pub use response::{ResponseConfig, SimulationResult};
pub use scm::{
    Attribute, ExogenousSample, LawSchoolScm, LinearAdditiveScm, MultiplicativeBinaryScm, PathMask,
    ScalarMonotoneScm, StructuralModel,
};
