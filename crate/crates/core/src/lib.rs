//! Honest double-sample quantile regression forests for autoregressive time
//! series, with a kernel baseline and a Monte Carlo evaluation harness.

pub mod data;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod forest;
pub mod persist;
pub mod synth;
pub mod wnw;

pub use data::{embed, load_series_csv, log_returns, LagDataset, Series};
pub use error::{Error, Result};
pub use estimator::{forest_weights, predict_quantiles, weighted_quantile, WeightVector};
pub use forest::{Forest, ForestConfig, Tree};
pub use synth::{DgpModel, DgpSpec, ErrorDist};
pub use wnw::{Bandwidth, WnwConfig, WnwModel};
