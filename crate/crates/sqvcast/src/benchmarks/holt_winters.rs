//! Additive Holt-Winters with grid-plus-refinement weight selection.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::month::MonthStamp;
use crate::series::MonthlySeries;

use super::{ForecasterOutput, Intervals, ModelMeta};

/// Smoothing weights, each clamped inside the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoltWintersWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

const CLAMP: f64 = 1e-4;
/// Training points consumed by the classical-decomposition initialization.
const WARMUP: usize = 12;

struct HwState {
    level: f64,
    trend: f64,
    seasonal: [f64; 12],
}

/// Initial states from a classical decomposition of the first two years:
/// centered 12-month moving-average trend, per-month detrended means
/// (centered to sum to zero), and year-mean level/trend.
fn initial_state(values: &[f64], start: MonthStamp) -> HwState {
    let mean1: f64 = values[..12].iter().sum::<f64>() / 12.0;
    let mean2: f64 = values[12..24].iter().sum::<f64>() / 12.0;
    let trend = (mean2 - mean1) / 12.0;
    let level = mean1 - 6.5 * trend;

    let mut seasonal = [0.0f64; 12];
    for t in 6..18 {
        let ma: f64 = (0.5 * values[t - 6]
            + values[t - 5..=t + 5].iter().sum::<f64>()
            + 0.5 * values[t + 6])
            / 12.0;
        let month = (start.add_months(t as i64).month() - 1) as usize;
        seasonal[month] = values[t] - ma;
    }
    let mean_s: f64 = seasonal.iter().sum::<f64>() / 12.0;
    for s in &mut seasonal {
        *s -= mean_s;
    }
    HwState {
        level,
        trend,
        seasonal,
    }
}

/// One full recursion pass. Returns the SSE over the post-warmup fitted
/// range, the fitted values, and the final state.
fn run(
    values: &[f64],
    start: MonthStamp,
    weights: HoltWintersWeights,
    init: &HwState,
) -> (f64, Vec<f64>, HwState) {
    let mut level = init.level;
    let mut trend = init.trend;
    let mut seasonal = init.seasonal;
    let mut fitted = Vec::with_capacity(values.len().saturating_sub(WARMUP));
    let mut sse = 0.0;

    for (t, &y) in values.iter().enumerate() {
        let month = (start.add_months(t as i64).month() - 1) as usize;
        let pred = level + trend + seasonal[month];
        if t >= WARMUP {
            let e = y - pred;
            sse += e * e;
            fitted.push(pred);
        }
        let new_level = weights.alpha * (y - seasonal[month]) + (1.0 - weights.alpha) * (level + trend);
        let new_trend = weights.beta * (new_level - level) + (1.0 - weights.beta) * trend;
        seasonal[month] =
            weights.gamma * (y - level - trend) + (1.0 - weights.gamma) * seasonal[month];
        level = new_level;
        trend = new_trend;
    }

    (
        sse,
        fitted,
        HwState {
            level,
            trend,
            seasonal,
        },
    )
}

fn clamp(w: f64) -> f64 {
    w.clamp(CLAMP, 1.0 - CLAMP)
}

/// Additive level/trend/seasonal smoothing. Weights minimize the in-sample
/// one-step SSE over a 0.05 grid on (0,1)^3 followed by a finer local grid,
/// clamped away from the boundary.
pub fn holt_winters(train: &MonthlySeries, horizon: usize, level: f64) -> Result<ForecasterOutput> {
    if train.len() < 24 {
        return Err(Error::InsufficientData(format!(
            "Holt-Winters needs at least 24 training months, got {}",
            train.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let values = train.dense()?;
    let start = train.start();
    let init = initial_state(&values, start);

    let sse_at = |w: HoltWintersWeights| run(&values, start, w, &init).0;

    let mut best = HoltWintersWeights {
        alpha: 0.5,
        beta: 0.05,
        gamma: 0.5,
    };
    let mut best_sse = f64::INFINITY;
    let coarse: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    for &alpha in &coarse {
        for &beta in &coarse {
            for &gamma in &coarse {
                let w = HoltWintersWeights { alpha, beta, gamma };
                let sse = sse_at(w);
                if sse < best_sse {
                    best_sse = sse;
                    best = w;
                }
            }
        }
    }
    // Local refinement on a 0.005 grid around the coarse winner.
    let refine = |center: f64| -> Vec<f64> {
        (-9..=9)
            .map(|i| clamp(center + i as f64 * 0.005))
            .collect()
    };
    for &alpha in &refine(best.alpha) {
        for &beta in &refine(best.beta) {
            for &gamma in &refine(best.gamma) {
                let w = HoltWintersWeights { alpha, beta, gamma };
                let sse = sse_at(w);
                if sse < best_sse {
                    best_sse = sse;
                    best = w;
                }
            }
        }
    }
    best = HoltWintersWeights {
        alpha: clamp(best.alpha),
        beta: clamp(best.beta),
        gamma: clamp(best.gamma),
    };

    let (sse, fitted, state) = run(&values, start, best, &init);
    let n_fitted = fitted.len().max(1);
    let sigma2 = sse / n_fitted as f64;

    let end = train.end();
    let forecasts: Vec<f64> = (1..=horizon)
        .map(|h| {
            let month = (end.add_months(h as i64).month() - 1) as usize;
            state.level + h as f64 * state.trend + state.seasonal[month]
        })
        .collect();

    // One-step-error variance accumulation for additive Holt-Winters:
    // c_j = alpha (1 + j beta) + gamma [j = 0 mod 12].
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    let mut cum = 1.0;
    let mut lower = Vec::with_capacity(horizon);
    let mut upper = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        if h > 1 {
            let j = (h - 1) as f64;
            let seasonal_hit = if (h - 1) % 12 == 0 { best.gamma } else { 0.0 };
            let c = best.alpha * (1.0 + j * best.beta) + seasonal_hit;
            cum += c * c;
        }
        let sd = (sigma2 * cum).sqrt();
        lower.push(forecasts[h - 1] - z * sd);
        upper.push(forecasts[h - 1] + z * sd);
    }

    Ok(ForecasterOutput {
        fitted,
        warmup: WARMUP,
        forecasts,
        intervals: Some(Intervals {
            level,
            lower,
            upper,
        }),
        model_meta: ModelMeta::HoltWinters {
            alpha: best.alpha,
            beta: best.beta,
            gamma: best.gamma,
            sse,
            sigma2,
        },
    })
}
