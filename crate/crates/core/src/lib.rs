//! Tree-structured Parzen Estimator search with an adaptive, variance-penalized
//! objective (TPE-AS), a synthetic black-box portfolio evaluator, baselines and
//! an experiment harness.
//!
//! The search maximizes `J = f - lambda_t * var`, where `lambda_t` ramps from 0
//! to 1 over the evaluation budget and `var` is the variance of recent
//! observations reweighted by clipped importance weights.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod kde;
pub mod objective;
pub mod optimizer;
pub mod portfolio;
pub mod space;
pub mod tpe;

pub use error::{Error, Result};
pub use kde::KdeModel;
pub use optimizer::{run, summarize, Blackbox, Evaluation, Mode, OptimizerConfig, RunSummary};
pub use space::{Config, ParamDomain, ParamSpace, Value};
pub use tpe::{History, TrialRecord};
