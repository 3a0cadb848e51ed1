//! Task log-posteriors, sampling, convergence diagnostics and posterior predictive.

mod predictive;
mod rhat;
mod sampler;
mod task;

pub use predictive::{posterior_predictive, PosteriorPredictive, PredictiveBand};
pub use rhat::{split_rhat, ConvergenceReport, ParamRhat, RHAT_THRESHOLD};
pub use sampler::{quantile_sorted, run_mcmc, PosteriorDraws, SamplerRecord, SamplerSettings, TARGET_ACCEPTANCE};
pub use task::{
    dtau_at, log_posterior, predict_demand, predict_point, LogPosterior, ParameterSpace, Prediction, TaskSpec,
};
