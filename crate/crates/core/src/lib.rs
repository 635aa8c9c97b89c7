//! Nonparametric inference for current status data: isotonic MLE, smoothed
//! MLE, bootstrap confidence intervals and the current status linear
//! regression model.

pub mod boot;
pub mod csreg;
pub mod data;
pub mod error;
pub mod exec;
pub mod gcm;
pub mod kernel;
pub mod mle;
pub mod quad;
pub mod sim;
pub mod smle;

pub use data::{
    draw_multinomial_weights, read_sample_csv, BootstrapWeights, CurrentStatusSample, Grid, RngSpec,
    StepDistribution, Support,
};
pub use error::{Error, Result};
