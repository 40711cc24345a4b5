//! Forecasting a monthly target series from replicated search-query-volume
//! downloads.
//!
//! Public search-interest indices are regenerated from a fresh query sample
//! on every download, so repeated downloads of the same query disagree. This
//! crate treats each download as a noisy replicate of one latent
//! search-interest process and couples that process to the forecast target
//! through a two-state dynamic linear model with fixed monthly effects:
//!
//! - [`series`] aligns monthly targets with weekly search exports and
//!   prepares panels (aggregation, demeaning, train/holdout splits);
//! - [`dlm`], [`kalman`], and [`forecast`] specify the state-space model,
//!   run the filter/smoother, and produce interval forecasts;
//! - [`em`] estimates all parameters by maximum likelihood (EM with
//!   Monte Carlo multistart) and reports Hessian-based confidence intervals;
//! - [`benchmarks`] provides seasonal-naive, Holt-Winters, state-space
//!   SARIMA (AIC order selection), and a no-search-data DLM baseline;
//! - [`diagnostics`] covers accuracy splits, prewhitened cross-correlation,
//!   Ljung-Box, unit-root checks, and interval-length comparisons;
//! - [`synthetic`] simulates panels with known ground truth.
//!
//! The `sqvcast` binary wires these together into `ingest`, `fit`,
//! `compare`, and `simulate` subcommands; the `examples/` directory has one
//! runnable walkthrough per capability.

pub mod error;
pub mod month;
pub mod series;
pub mod io;
pub mod dlm;
pub mod kalman;
pub mod forecast;
pub mod em;
pub mod synthetic;
pub mod benchmarks;

pub use error::{Error, Result};
pub use month::{month_indicator, MonthStamp};
pub use series::{
    aggregate_weekly_to_monthly, concat, demean, split, MonthlySeries, ObservationPanel,
    WeeklySeries,
};
pub use dlm::{build_dlm0, build_nhnr_dlm, Dlm0Params, DlmParams, StateSpaceSpec};
pub use kalman::{kalman_filter, kalman_smoother, loglik, FilterResult, Observations, SmootherResult};
pub use forecast::{forecast, ForecastResult};
pub use em::{fit, fit_dlm0, hessian_ci, EmConfig, FitReport, FittedParams, ParamCi};
