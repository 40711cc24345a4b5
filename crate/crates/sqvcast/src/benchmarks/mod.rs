//! Benchmark forecasters behind one output shape: seasonal naive,
//! additive Holt-Winters, state-space SARIMA with AIC order selection, and
//! the no-search-data DLM baseline.
//!
//! All benchmarks require a fully observed training series (the coupled
//! model is the one that handles missing data natively).

mod arma;
mod dlm0;
mod holt_winters;
mod sarima;
mod snaive;

pub use arma::nelder_mead;
pub use dlm0::dlm0;
pub use holt_winters::{holt_winters, HoltWintersWeights};
pub use sarima::{sarima_fit, SarimaGrid, SarimaOrder};
pub use snaive::snaive;

use serde::{Deserialize, Serialize};

use crate::dlm::Dlm0Params;
use crate::io::ForecastRow;

/// Central prediction intervals attached to the point forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Model-specific metadata carried alongside the forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelMeta {
    Snaive,
    HoltWinters {
        alpha: f64,
        beta: f64,
        gamma: f64,
        sse: f64,
        sigma2: f64,
    },
    Sarima {
        order: SarimaOrder,
        aic: f64,
        loglik: f64,
        sigma2: f64,
        /// Count of estimated parameters entering the AIC penalty.
        k: usize,
        ar: Vec<f64>,
        ma: Vec<f64>,
        seasonal_ar: Vec<f64>,
        seasonal_ma: Vec<f64>,
        mean: f64,
    },
    Dlm0 {
        loglik: f64,
        params: Dlm0Params,
    },
    /// The coupled search-interest model, wrapped for side-by-side
    /// comparisons.
    Dlm {
        variant: String,
        a: usize,
        loglik: f64,
        beta: f64,
    },
}

/// Common forecaster output: in-sample one-step predictions (after the
/// model's warm-up), point forecasts for horizons `1..=H`, and optional
/// intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterOutput {
    /// One-step in-sample predictions, aligned to training index `warmup`.
    pub fitted: Vec<f64>,
    /// Training points consumed before the first fitted value.
    pub warmup: usize,
    pub forecasts: Vec<f64>,
    pub intervals: Option<Intervals>,
    pub model_meta: ModelMeta,
}

impl ForecasterOutput {
    /// Rows for the `horizon,mean,lower,upper` CSV format.
    pub fn to_forecast_rows(&self) -> Vec<ForecastRow> {
        (0..self.forecasts.len())
            .map(|h| ForecastRow {
                horizon: h + 1,
                mean: self.forecasts[h],
                lower: self.intervals.as_ref().map(|i| i.lower[h]),
                upper: self.intervals.as_ref().map(|i| i.upper[h]),
            })
            .collect()
    }
}
