//! EM expectation step: smoothed state moments.

use nalgebra::{DMatrix, DVector};

use crate::dlm::StateSpaceSpec;
use crate::error::Result;
use crate::kalman::{kalman_filter, kalman_smoother, Observations};

/// Smoothed first and second moments of the state path, including the
/// initial state, in the form consumed by the M-step.
///
/// Index `t` of `means`/`second` refers to panel time `t` with `t = 0` the
/// initial state; `cross[t - 1]` holds `E[X_t X_{t-1}' | Y]` for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    pub means: Vec<DVector<f64>>,
    pub second: Vec<DMatrix<f64>>,
    pub cross: Vec<DMatrix<f64>>,
}

impl SufficientStats {
    /// Number of observation times `T`.
    pub fn len(&self) -> usize {
        self.cross.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cross.is_empty()
    }
}

/// Runs filter plus smoother and assembles the moment arrays.
///
/// Returns the statistics together with the log-likelihood at the current
/// parameters (a byproduct of the filter pass).
pub fn e_step(spec: &StateSpaceSpec, obs: &Observations) -> Result<(SufficientStats, f64)> {
    let filter = kalman_filter(spec, obs)?;
    let smooth = kalman_smoother(spec, &filter)?;
    let t_len = filter.len();

    let mut means = Vec::with_capacity(t_len + 1);
    let mut second = Vec::with_capacity(t_len + 1);
    means.push(smooth.initial_mean.clone());
    second.push(&smooth.initial_cov + &smooth.initial_mean * smooth.initial_mean.transpose());
    for t in 0..t_len {
        means.push(smooth.means[t].clone());
        second.push(&smooth.covs[t] + &smooth.means[t] * smooth.means[t].transpose());
    }

    let cross = (0..t_len)
        .map(|t| &smooth.lag_one[t] + &means[t + 1] * means[t].transpose())
        .collect();

    Ok((
        SufficientStats {
            means,
            second,
            cross,
        },
        filter.loglik,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::{build_nhnr_dlm, DlmParams};
    use crate::month::MonthStamp;

    #[test]
    fn noiseless_moments_collapse_onto_the_observations() {
        let params = DlmParams {
            beta: 0.0,
            sigma2_y1: 1e-12,
            sigma2_y2: 1e-12,
            sigma2_x1: 1e-12,
            sigma2_x2: 1e-12,
            c: [[0.0; 12]; 2],
            x0: [1.0, -0.5],
        };
        let spec = build_nhnr_dlm(&params, 1).unwrap();
        let rows = vec![
            vec![Some(1.0), Some(-0.5)],
            vec![Some(1.0), Some(-0.5)],
            vec![Some(1.0), Some(-0.5)],
        ];
        let obs = Observations::new(MonthStamp::new(2010, 1).unwrap(), 2, rows).unwrap();
        let (stats, _) = e_step(&spec, &obs).unwrap();
        for t in 1..=3 {
            assert!((stats.means[t][0] - 1.0).abs() < 1e-8);
            assert!((stats.means[t][1] + 0.5).abs() < 1e-8);
            let var0 = stats.second[t][(0, 0)] - stats.means[t][0].powi(2);
            assert!(var0.abs() < 1e-8);
        }
    }

    #[test]
    fn all_missing_moments_equal_prior_propagation() {
        let params = DlmParams {
            beta: 0.5,
            sigma2_y1: 1.0,
            sigma2_y2: 1.0,
            sigma2_x1: 1.0,
            sigma2_x2: 1.0,
            c: [[0.0; 12]; 2],
            x0: [2.0, 1.0],
        };
        let spec = build_nhnr_dlm(&params, 1).unwrap();
        let obs = Observations::new(
            MonthStamp::new(2010, 1).unwrap(),
            2,
            vec![vec![None, None]; 4],
        )
        .unwrap();
        let (stats, loglik) = e_step(&spec, &obs).unwrap();
        assert_eq!(loglik, 0.0);
        // X2 stays at 1, X1 gains beta * 1 each step from x0 = (2, 1).
        for t in 1..=4 {
            assert!((stats.means[t][1] - 1.0).abs() < 1e-12);
            assert!((stats.means[t][0] - (2.0 + 0.5 * t as f64)).abs() < 1e-12);
        }
    }
}
