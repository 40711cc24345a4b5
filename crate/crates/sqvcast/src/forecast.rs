//! h-step forecasts with Gaussian prediction intervals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dlm::StateSpaceSpec;
use crate::error::{Error, Result};
use crate::kalman::FilterResult;
use crate::month::MonthStamp;

/// Forecast means, variances, and central prediction intervals for the
/// target series and, when the model carries one, the latent search-interest
/// state.
///
/// The target forecast is an observation-space forecast: its variance adds
/// the target observation noise to the propagated state uncertainty. The
/// search-interest forecast is reported for the latent state itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Months being forecast, horizons `1..=H` in order.
    pub months: Vec<MonthStamp>,
    pub level: f64,
    pub target_mean: Vec<f64>,
    pub target_variance: Vec<f64>,
    pub target_lower: Vec<f64>,
    pub target_upper: Vec<f64>,
    /// Empty for single-state models.
    pub sqv_mean: Vec<f64>,
    pub sqv_variance: Vec<f64>,
    pub sqv_lower: Vec<f64>,
    pub sqv_upper: Vec<f64>,
    /// Whether demean offsets were added back into the reported means.
    pub offsets_applied: bool,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.months.len()
    }

    /// Interval length (upper minus lower) for the target at each horizon.
    pub fn target_interval_lengths(&self) -> Vec<f64> {
        self.target_upper
            .iter()
            .zip(&self.target_lower)
            .map(|(u, l)| u - l)
            .collect()
    }
}

/// Two-sided normal quantile for central coverage `level`.
pub(crate) fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Iterates the state equation `horizon` steps past the end of the filtered
/// sample with no further updates.
///
/// `offsets` are the demean offsets recorded by panel preprocessing (target
/// first, then replicates); when given, the target mean is re-centered by the
/// target offset and the latent search-interest mean by the average replicate
/// offset.
pub fn forecast(
    spec: &StateSpaceSpec,
    filter: &FilterResult,
    horizon: usize,
    level: f64,
    offsets: Option<&[f64]>,
) -> Result<ForecastResult> {
    if horizon == 0 {
        return Err(Error::Contract("forecast horizon must be at least 1".into()));
    }
    let z = normal_quantile(level)?;
    if filter.is_empty() {
        return Err(Error::Contract("cannot forecast from an empty filter".into()));
    }
    let q = spec.state_dim();
    let has_sqv = q >= 2;

    let (target_offset, sqv_offset) = match offsets {
        Some(o) if o.len() >= 2 => {
            let rep_mean = o[1..].iter().sum::<f64>() / (o.len() - 1) as f64;
            (o[0], rep_mean)
        }
        Some(o) if o.len() == 1 => (o[0], 0.0),
        _ => (0.0, 0.0),
    };

    let last_month = filter.start.add_months(filter.len() as i64 - 1);
    let mut x: DVector<f64> = filter.filtered_means.last().expect("nonempty").clone();
    let mut p: DMatrix<f64> = filter.filtered_covs.last().expect("nonempty").clone();

    let mut out = ForecastResult {
        months: Vec::with_capacity(horizon),
        level,
        target_mean: Vec::with_capacity(horizon),
        target_variance: Vec::with_capacity(horizon),
        target_lower: Vec::with_capacity(horizon),
        target_upper: Vec::with_capacity(horizon),
        sqv_mean: Vec::new(),
        sqv_variance: Vec::new(),
        sqv_lower: Vec::new(),
        sqv_upper: Vec::new(),
        offsets_applied: offsets.is_some(),
    };

    for h in 1..=horizon {
        let month = last_month.add_months(h as i64);
        x = &spec.g * &x + spec.seasonal_effect(month.month());
        p = &spec.g * &p * spec.g.transpose() + &spec.w;

        let target_mean = x[0] + target_offset;
        let target_var = p[(0, 0)] + spec.v[(0, 0)];
        let target_sd = target_var.max(0.0).sqrt();
        out.months.push(month);
        out.target_mean.push(target_mean);
        out.target_variance.push(target_var);
        out.target_lower.push(target_mean - z * target_sd);
        out.target_upper.push(target_mean + z * target_sd);

        if has_sqv {
            let sqv_mean = x[1] + sqv_offset;
            let sqv_var = p[(1, 1)];
            let sqv_sd = sqv_var.max(0.0).sqrt();
            out.sqv_mean.push(sqv_mean);
            out.sqv_variance.push(sqv_var);
            out.sqv_lower.push(sqv_mean - z * sqv_sd);
            out.sqv_upper.push(sqv_mean + z * sqv_sd);
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::{build_nhnr_dlm, DlmParams};
    use crate::kalman::{kalman_filter, Observations};

    fn filter_for(params: &DlmParams, rows: Vec<Vec<Option<f64>>>) -> (StateSpaceSpec, FilterResult) {
        let spec = build_nhnr_dlm(params, rows[0].len() - 1).unwrap();
        let obs = Observations::new(MonthStamp::new(2010, 1).unwrap(), rows[0].len(), rows).unwrap();
        let filter = kalman_filter(&spec, &obs).unwrap();
        (spec, filter)
    }

    fn base_params() -> DlmParams {
        DlmParams {
            beta: 0.0,
            sigma2_y1: 1.0,
            sigma2_y2: 1.0,
            sigma2_x1: 1.0,
            sigma2_x2: 1.0,
            c: [[0.0; 12]; 2],
            x0: [0.0, 0.0],
        }
    }

    #[test]
    fn frozen_dynamics_give_a_flat_forecast() {
        let mut p = base_params();
        p.sigma2_x1 = 1e-14;
        p.sigma2_x2 = 1e-14;
        let (spec, filter) = filter_for(
            &p,
            vec![vec![Some(5.0), Some(1.0)], vec![Some(5.0), Some(1.0)]],
        );
        let fc = forecast(&spec, &filter, 6, 0.95, None).unwrap();
        let last = filter.filtered_means.last().unwrap()[0];
        for h in 0..6 {
            assert!((fc.target_mean[h] - last).abs() < 1e-9);
        }
    }

    #[test]
    fn random_walk_variance_unrolls_in_closed_form() {
        let p = DlmParams {
            beta: 0.0,
            sigma2_y1: 0.7,
            sigma2_y2: 1.0,
            sigma2_x1: 0.4,
            sigma2_x2: 1.0,
            c: [[0.0; 12]; 2],
            x0: [0.0, 0.0],
        };
        let (spec, filter) = filter_for(
            &p,
            vec![
                vec![Some(1.0), Some(0.0)],
                vec![Some(2.0), Some(0.0)],
                vec![Some(1.5), Some(0.0)],
            ],
        );
        let fc = forecast(&spec, &filter, 12, 0.95, None).unwrap();
        let p_t = filter.filtered_covs.last().unwrap()[(0, 0)];
        for h in 1..=12usize {
            let expect = p_t + h as f64 * 0.4 + 0.7;
            assert!(
                (fc.target_variance[h - 1] - expect).abs() < 1e-10,
                "h = {h}"
            );
        }
    }

    #[test]
    fn interval_length_grows_with_the_horizon_under_state_noise() {
        let (spec, filter) = filter_for(
            &base_params(),
            vec![vec![Some(1.0), Some(0.5)], vec![Some(0.0), Some(0.2)]],
        );
        let fc = forecast(&spec, &filter, 8, 0.9, None).unwrap();
        let lengths = fc.target_interval_lengths();
        for w in lengths.windows(2) {
            assert!(w[1] > w[0]);
        }
        for h in 0..8 {
            assert!(fc.target_lower[h] <= fc.target_mean[h]);
            assert!(fc.target_mean[h] <= fc.target_upper[h]);
        }
    }

    #[test]
    fn offsets_recenter_target_and_latent_means() {
        let (spec, filter) = filter_for(
            &base_params(),
            vec![
                vec![Some(0.0), Some(0.0), Some(0.0)],
                vec![Some(0.0), Some(0.0), Some(0.0)],
            ],
        );
        let plain = forecast(&spec, &filter, 3, 0.95, None).unwrap();
        let offsets = [100.0, 40.0, 60.0];
        let recentred = forecast(&spec, &filter, 3, 0.95, Some(&offsets)).unwrap();
        assert!(recentred.offsets_applied);
        for h in 0..3 {
            assert!((recentred.target_mean[h] - plain.target_mean[h] - 100.0).abs() < 1e-12);
            assert!((recentred.sqv_mean[h] - plain.sqv_mean[h] - 50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_levels_are_rejected() {
        let (spec, filter) = filter_for(
            &base_params(),
            vec![vec![Some(1.0), Some(0.5)]],
        );
        for level in [0.0, 1.0, -0.5, 1.5] {
            assert!(matches!(
                forecast(&spec, &filter, 3, level, None),
                Err(Error::InvalidLevel(_))
            ));
        }
    }
}
