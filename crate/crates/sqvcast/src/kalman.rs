//! Kalman filter and fixed-interval smoother for [`StateSpaceSpec`] models.
//!
//! The filter handles partially missing observation vectors by deleting the
//! affected rows of `F` and `V` at that time step, so missing data carries
//! exactly zero information. The Gaussian log-likelihood is accumulated from
//! the innovation densities over observed components only.
//!
//! Array indexing convention: position `i` of every per-step vector refers to
//! panel time `t = i + 1`; the initial state (time 0) lives in the spec.

use nalgebra::{DMatrix, DVector};

use crate::dlm::StateSpaceSpec;
use crate::error::{Error, Result};
use crate::month::MonthStamp;
use crate::series::{MonthlySeries, ObservationPanel};

const LN_2PI: f64 = 1.8378770664093453;
/// Relative conditioning floor for the innovation covariance factorization.
const COND_FLOOR: f64 = 1e-12;

/// Time-stamped observation vectors fed to the filter.
///
/// Row order for panels: target first, then the replicates in panel order.
#[derive(Debug, Clone)]
pub struct Observations {
    start: MonthStamp,
    obs_dim: usize,
    data: Vec<Vec<Option<f64>>>,
}

impl Observations {
    pub fn new(start: MonthStamp, obs_dim: usize, data: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Contract("observations must not be empty".into()));
        }
        if let Some(bad) = data.iter().position(|row| row.len() != obs_dim) {
            return Err(Error::Contract(format!(
                "observation vector at index {bad} does not have {obs_dim} rows"
            )));
        }
        Ok(Observations {
            start,
            obs_dim,
            data,
        })
    }

    pub fn from_panel(panel: &ObservationPanel) -> Observations {
        let data = (0..panel.len())
            .map(|i| {
                let mut row = Vec::with_capacity(panel.replicate_count() + 1);
                row.push(panel.target().values()[i]);
                for r in panel.replicates() {
                    row.push(r.values()[i]);
                }
                row
            })
            .collect();
        Observations {
            start: panel.start(),
            obs_dim: panel.replicate_count() + 1,
            data,
        }
    }

    pub fn univariate(series: &MonthlySeries) -> Observations {
        Observations {
            start: series.start(),
            obs_dim: 1,
            data: series.values().iter().map(|v| vec![*v]).collect(),
        }
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, i: usize) -> &[Option<f64>] {
        &self.data[i]
    }

    /// Month of panel time `t = i + 1`.
    pub fn month_at(&self, i: usize) -> MonthStamp {
        self.start.add_months(i as i64)
    }
}

/// Innovation at one time step, restricted to the observed rows.
#[derive(Debug, Clone)]
pub struct Innovation {
    /// Indices of the observed rows of the full observation vector.
    pub rows: Vec<usize>,
    pub residual: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Output of a full forward filter pass.
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub start: MonthStamp,
    pub loglik: f64,
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    /// `None` where the observation vector was entirely missing.
    pub innovations: Vec<Option<Innovation>>,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.filtered_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered_means.is_empty()
    }

    /// One-step-ahead predictions of observation row `row` at every t.
    pub fn one_step_predictions(&self, spec: &StateSpaceSpec, row: usize) -> Vec<f64> {
        let f_row = spec.f.row(row).transpose();
        self.predicted_means.iter().map(|x| f_row.dot(x)).collect()
    }
}

fn symmetrize(mat: &mut DMatrix<f64>) {
    let n = mat.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (mat[(i, j)] + mat[(j, i)]);
            mat[(i, j)] = avg;
            mat[(j, i)] = avg;
        }
    }
}

/// Cached update quantities for a converged (steady-state) covariance
/// recursion on fully observed steps.
struct SteadyState {
    p_pred: DMatrix<f64>,
    p_filt: DMatrix<f64>,
    s: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    gain: DMatrix<f64>,
    log_det: f64,
}

/// Relative tolerance below which consecutive predicted covariances are
/// treated as converged.
const STEADY_TOL: f64 = 1e-13;

/// Runs the forward predict/update recursion over `obs`.
///
/// On fully observed stretches the covariance recursion of a time-invariant
/// model converges; once consecutive predicted covariances agree to
/// round-off, the factorization and gain are frozen and each remaining step
/// costs only the mean update. Any missing value resets the cache.
pub fn kalman_filter(spec: &StateSpaceSpec, obs: &Observations) -> Result<FilterResult> {
    let m = spec.obs_dim();
    let q = spec.state_dim();
    if obs.obs_dim() != m {
        return Err(Error::Contract(format!(
            "observations have {} rows but the model expects {m}",
            obs.obs_dim()
        )));
    }
    let t_len = obs.len();
    let all_rows: Vec<usize> = (0..m).collect();

    let mut predicted_means = Vec::with_capacity(t_len);
    let mut predicted_covs = Vec::with_capacity(t_len);
    let mut filtered_means = Vec::with_capacity(t_len);
    let mut filtered_covs = Vec::with_capacity(t_len);
    let mut innovations = Vec::with_capacity(t_len);

    let mut x_prev = spec.x0.clone();
    let mut p_prev = spec.p0.clone();
    let mut loglik = 0.0;
    let mut steady: Option<SteadyState> = None;
    let mut prev_full_p_pred: Option<DMatrix<f64>> = None;

    for i in 0..t_len {
        let month = obs.month_at(i).month();
        let x_pred = &spec.g * &x_prev + spec.seasonal_effect(month);

        let row = obs.at(i);
        let fully_observed = row.iter().all(|v| v.is_some());

        if fully_observed {
            if let Some(ss) = &steady {
                let y_obs = DVector::from_iterator(m, row.iter().map(|v| v.expect("observed")));
                let residual = &y_obs - &spec.f * &x_pred;
                let x_filt = &x_pred + &ss.gain * &residual;
                let quad = residual.dot(&ss.chol.solve(&residual));
                loglik -= 0.5 * (m as f64 * LN_2PI + ss.log_det + quad);
                if !loglik.is_finite() {
                    return Err(Error::Degenerate { t: i + 1 });
                }
                predicted_means.push(x_pred);
                predicted_covs.push(ss.p_pred.clone());
                x_prev = x_filt.clone();
                filtered_means.push(x_filt);
                filtered_covs.push(ss.p_filt.clone());
                innovations.push(Some(Innovation {
                    rows: all_rows.clone(),
                    residual,
                    cov: ss.s.clone(),
                }));
                continue;
            }
        } else {
            steady = None;
            prev_full_p_pred = None;
        }

        let mut p_pred = &spec.g * &p_prev * spec.g.transpose() + &spec.w;
        symmetrize(&mut p_pred);

        let observed: Vec<usize> = row
            .iter()
            .enumerate()
            .filter_map(|(r, v)| v.map(|_| r))
            .collect();

        let (x_filt, p_filt, innovation) = if observed.is_empty() {
            (x_pred.clone(), p_pred.clone(), None)
        } else {
            let k = observed.len();
            let (f_obs, v_obs) = if k == m {
                (spec.f.clone(), spec.v.clone())
            } else {
                let mut f_obs = DMatrix::zeros(k, q);
                let mut v_obs = DMatrix::zeros(k, k);
                for (r_new, &r_old) in observed.iter().enumerate() {
                    f_obs.row_mut(r_new).copy_from(&spec.f.row(r_old));
                    for (c_new, &c_old) in observed.iter().enumerate() {
                        v_obs[(r_new, c_new)] = spec.v[(r_old, c_old)];
                    }
                }
                (f_obs, v_obs)
            };
            let y_obs = DVector::from_iterator(
                k,
                observed.iter().map(|&r| row[r].expect("observed row")),
            );

            let residual = &y_obs - &f_obs * &x_pred;
            let mut s = &f_obs * &p_pred * f_obs.transpose() + &v_obs;
            symmetrize(&mut s);

            let chol = s
                .clone()
                .cholesky()
                .ok_or(Error::Degenerate { t: i + 1 })?;
            let diag = chol.l_dirty().diagonal();
            let (dmin, dmax) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            if dmin * dmin <= COND_FLOOR * dmax * dmax {
                return Err(Error::Degenerate { t: i + 1 });
            }

            // K = P F' S^{-1}, via S K' = F P.
            let gain = chol.solve(&(&f_obs * &p_pred)).transpose();
            let x_filt = &x_pred + &gain * &residual;
            // Joseph-form update keeps the covariance PSD under round-off.
            let a = DMatrix::identity(q, q) - &gain * &f_obs;
            let mut p_filt = &a * &p_pred * a.transpose() + &gain * &v_obs * gain.transpose();
            symmetrize(&mut p_filt);

            let log_det = 2.0 * diag.iter().map(|d| d.ln()).sum::<f64>();
            let quad = residual.dot(&chol.solve(&residual));
            loglik -= 0.5 * (k as f64 * LN_2PI + log_det + quad);
            if !loglik.is_finite() {
                return Err(Error::Degenerate { t: i + 1 });
            }

            if k == m {
                let converged = prev_full_p_pred
                    .as_ref()
                    .map(|prev| {
                        let scale = 1.0 + p_pred.amax();
                        (&p_pred - prev).amax() <= STEADY_TOL * scale
                    })
                    .unwrap_or(false);
                if converged {
                    steady = Some(SteadyState {
                        p_pred: p_pred.clone(),
                        p_filt: p_filt.clone(),
                        s: s.clone(),
                        chol: s.clone().cholesky().expect("factorized above"),
                        gain: gain.clone(),
                        log_det,
                    });
                }
                prev_full_p_pred = Some(p_pred.clone());
            }

            (
                x_filt,
                p_filt,
                Some(Innovation {
                    rows: observed,
                    residual,
                    cov: s,
                }),
            )
        };

        predicted_means.push(x_pred);
        predicted_covs.push(p_pred);
        x_prev = x_filt.clone();
        p_prev = p_filt.clone();
        filtered_means.push(x_filt);
        filtered_covs.push(p_filt);
        innovations.push(innovation);
    }

    Ok(FilterResult {
        start: obs.start(),
        loglik,
        predicted_means,
        predicted_covs,
        filtered_means,
        filtered_covs,
        innovations,
    })
}

/// Total Gaussian log-likelihood of `obs` under `spec`.
pub fn loglik(spec: &StateSpaceSpec, obs: &Observations) -> Result<f64> {
    Ok(kalman_filter(spec, obs)?.loglik)
}

/// Output of the backward smoothing pass.
///
/// `means[i]`/`covs[i]` hold the smoothed moments of panel time `i + 1`;
/// the time-0 state has its own fields. `lag_one[i]` is the smoothed
/// cross-covariance `Cov(X_{i+1}, X_i | Y)` (so `lag_one[0]` pairs the first
/// observation time with the initial state).
#[derive(Debug, Clone)]
pub struct SmootherResult {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub lag_one: Vec<DMatrix<f64>>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

/// Backward fixed-interval smoother over a completed filter pass.
pub fn kalman_smoother(spec: &StateSpaceSpec, filter: &FilterResult) -> Result<SmootherResult> {
    let t_len = filter.len();
    if t_len == 0
        || filter.predicted_means.len() != t_len
        || filter.predicted_covs.len() != t_len
        || filter.filtered_covs.len() != t_len
    {
        return Err(Error::Contract(
            "filter result has inconsistent lengths".into(),
        ));
    }
    let q = spec.state_dim();
    if filter.filtered_means[0].len() != q {
        return Err(Error::Contract(
            "filter result does not match the model's state dimension".into(),
        ));
    }

    let mut means = filter.filtered_means.clone();
    let mut covs = filter.filtered_covs.clone();

    // Smoother gains J_t = P_{t|t} G' P_{t+1|t}^{-1} for t = 0..T-1, where
    // t = 0 refers to the initial state.
    let mut gains: Vec<DMatrix<f64>> = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let p_filt = if t == 0 {
            &spec.p0
        } else {
            &filter.filtered_covs[t - 1]
        };
        let p_pred = &filter.predicted_covs[t];
        let chol = p_pred
            .clone()
            .cholesky()
            .ok_or(Error::Degenerate { t: t + 1 })?;
        // J' = P_pred^{-1} G P_filt
        let j_t = chol.solve(&(&spec.g * p_filt)).transpose();
        gains.push(j_t);
    }

    for t in (0..t_len - 1).rev() {
        // Array slot t holds panel time t+1; its gain is gains[t + 1].
        let j = &gains[t + 1];
        let mean_diff = &means[t + 1] - &filter.predicted_means[t + 1];
        let cov_diff = &covs[t + 1] - &filter.predicted_covs[t + 1];
        means[t] = &filter.filtered_means[t] + j * mean_diff;
        let mut cov = &filter.filtered_covs[t] + j * cov_diff * j.transpose();
        symmetrize(&mut cov);
        covs[t] = cov;
    }

    let j0 = &gains[0];
    let initial_mean = &spec.x0 + j0 * (&means[0] - &filter.predicted_means[0]);
    let mut initial_cov = &spec.p0 + j0 * (&covs[0] - &filter.predicted_covs[0]) * j0.transpose();
    symmetrize(&mut initial_cov);

    // Cov(X_{t}, X_{t-1} | Y) = P_{t|T} J_{t-1}'.
    let lag_one: Vec<DMatrix<f64>> = (0..t_len).map(|t| &covs[t] * gains[t].transpose()).collect();

    Ok(SmootherResult {
        means,
        covs,
        lag_one,
        initial_mean,
        initial_cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::{build_nhnr_dlm, DlmParams};

    fn params(beta: f64, v1: f64, v2: f64, w1: f64, w2: f64) -> DlmParams {
        DlmParams {
            beta,
            sigma2_y1: v1,
            sigma2_y2: v2,
            sigma2_x1: w1,
            sigma2_x2: w2,
            c: [[0.0; 12]; 2],
            x0: [0.0, 0.0],
        }
    }

    fn month(y: i32, m: u32) -> MonthStamp {
        MonthStamp::new(y, m).unwrap()
    }

    fn obs_from_rows(rows: Vec<Vec<Option<f64>>>) -> Observations {
        let m = rows[0].len();
        Observations::new(month(2004, 1), m, rows).unwrap()
    }

    #[test]
    fn all_missing_observations_leave_the_prior_untouched() {
        let spec = build_nhnr_dlm(&params(0.5, 1.0, 1.0, 1.0, 1.0), 1).unwrap();
        let obs = obs_from_rows(vec![vec![None, None]; 4]);
        let out = kalman_filter(&spec, &obs).unwrap();
        assert_eq!(out.loglik, 0.0);
        for t in 0..4 {
            assert_eq!(out.filtered_means[t], out.predicted_means[t]);
            assert_eq!(out.filtered_covs[t], out.predicted_covs[t]);
            assert!(out.innovations[t].is_none());
        }
    }

    #[test]
    fn vanishing_observation_noise_makes_the_filter_trust_the_data() {
        let spec = build_nhnr_dlm(&params(0.0, 1e-12, 1e-12, 1.0, 1.0), 1).unwrap();
        let obs = obs_from_rows(vec![
            vec![Some(2.0), Some(-1.0)],
            vec![Some(3.5), Some(0.5)],
            vec![Some(-1.0), Some(4.0)],
        ]);
        let out = kalman_filter(&spec, &obs).unwrap();
        for (t, row) in [[2.0, -1.0], [3.5, 0.5], [-1.0, 4.0]].iter().enumerate() {
            assert!((out.filtered_means[t][0] - row[0]).abs() < 1e-6);
            assert!((out.filtered_means[t][1] - row[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn appending_an_all_missing_month_preserves_the_loglik() {
        let spec = build_nhnr_dlm(&params(0.3, 1.0, 2.0, 0.5, 0.7), 2).unwrap();
        let mut rows = vec![
            vec![Some(1.0), Some(0.2), Some(-0.1)],
            vec![Some(0.4), None, Some(0.3)],
            vec![Some(-0.2), Some(0.1), Some(0.6)],
        ];
        let base = kalman_filter(&spec, &obs_from_rows(rows.clone())).unwrap();
        rows.push(vec![None, None, None]);
        let extended = kalman_filter(&spec, &obs_from_rows(rows)).unwrap();
        assert_eq!(base.loglik, extended.loglik);
    }

    #[test]
    fn loglik_wrapper_matches_the_filter() {
        let spec = build_nhnr_dlm(&params(0.3, 1.0, 2.0, 0.5, 0.7), 1).unwrap();
        let obs = obs_from_rows(vec![vec![Some(1.0), Some(0.5)], vec![Some(0.0), Some(1.5)]]);
        assert_eq!(
            loglik(&spec, &obs).unwrap(),
            kalman_filter(&spec, &obs).unwrap().loglik
        );
    }

    #[test]
    fn permuting_replicate_rows_leaves_the_loglik_unchanged() {
        let spec = build_nhnr_dlm(&params(0.8, 1.0, 0.4, 0.6, 0.9), 3).unwrap();
        let rows = vec![
            vec![Some(1.0), Some(0.2), Some(0.4), Some(-0.3)],
            vec![Some(0.5), Some(0.6), None, Some(0.1)],
            vec![Some(-0.7), Some(-0.2), Some(0.8), Some(0.9)],
            vec![Some(0.2), Some(0.3), Some(0.5), None],
        ];
        let permuted = rows
            .iter()
            .map(|r| vec![r[0], r[3], r[1], r[2]])
            .collect::<Vec<_>>();
        let a = kalman_filter(&spec, &obs_from_rows(rows)).unwrap();
        let b = kalman_filter(&spec, &obs_from_rows(permuted)).unwrap();
        assert!((a.loglik - b.loglik).abs() <= 1e-9 * a.loglik.abs().max(1.0));
    }

    #[test]
    fn covariances_stay_symmetric_with_nonnegative_eigenvalues() {
        let spec = build_nhnr_dlm(&params(2.0, 0.3, 0.8, 1.5, 0.2), 2).unwrap();
        let rows = (0..30)
            .map(|t| {
                let x = t as f64;
                vec![Some(x.sin() * 3.0), Some(x.cos()), if t % 5 == 0 { None } else { Some(0.5 * x.cos()) }]
            })
            .collect();
        let out = kalman_filter(&spec, &obs_from_rows(rows)).unwrap();
        for p in out.filtered_covs.iter().chain(&out.predicted_covs) {
            assert!((p[(0, 1)] - p[(1, 0)]).abs() < 1e-10);
            let eigs = p.clone().symmetric_eigenvalues();
            let scale = eigs.iter().fold(1.0f64, |a, &e| a.max(e.abs()));
            assert!(eigs.iter().all(|&e| e >= -1e-10 * scale));
        }
    }

    #[test]
    fn smoother_boundary_matches_the_filter_exactly() {
        let spec = build_nhnr_dlm(&params(0.4, 1.0, 1.0, 1.0, 1.0), 1).unwrap();
        let obs = obs_from_rows(vec![
            vec![Some(1.0), Some(0.0)],
            vec![Some(2.0), Some(0.5)],
            vec![Some(0.5), Some(-0.5)],
        ]);
        let filter = kalman_filter(&spec, &obs).unwrap();
        let smooth = kalman_smoother(&spec, &filter).unwrap();
        assert_eq!(smooth.means[2], filter.filtered_means[2]);
        assert_eq!(smooth.covs[2], filter.filtered_covs[2]);
    }

    #[test]
    fn smoothing_without_data_propagates_the_initial_state() {
        let mut p = params(0.0, 1.0, 1.0, 1.0, 1.0);
        p.x0 = [3.0, -2.0];
        p.c[0][0] = 0.5; // January effect on the target state
        let spec = build_nhnr_dlm(&p, 1).unwrap();
        let obs = obs_from_rows(vec![vec![None, None]; 5]);
        let filter = kalman_filter(&spec, &obs).unwrap();
        let smooth = kalman_smoother(&spec, &filter).unwrap();
        for t in 0..5 {
            assert_eq!(smooth.means[t], filter.predicted_means[t]);
        }
        assert_eq!(smooth.initial_mean, spec.x0);
    }

    #[test]
    fn smoothed_variances_never_exceed_filtered_variances() {
        let spec = build_nhnr_dlm(&params(1.2, 0.7, 0.3, 0.9, 0.5), 2).unwrap();
        let rows = (0..40)
            .map(|t| {
                let x = t as f64 / 3.0;
                vec![Some(x.sin()), Some(x.cos() + 0.1), Some(x.cos() - 0.1)]
            })
            .collect();
        let obs = obs_from_rows(rows);
        let filter = kalman_filter(&spec, &obs).unwrap();
        let smooth = kalman_smoother(&spec, &filter).unwrap();
        for t in 0..40 {
            let diff = &filter.filtered_covs[t] - &smooth.covs[t];
            let eigs = diff.symmetric_eigenvalues();
            let scale = eigs.iter().fold(1.0f64, |a, &e| a.max(e.abs()));
            assert!(
                eigs.iter().all(|&e| e >= -1e-10 * scale),
                "PSD ordering violated at t = {t}"
            );
        }
    }

    #[test]
    fn mismatched_dimensions_are_a_contract_error() {
        let spec = build_nhnr_dlm(&params(0.0, 1.0, 1.0, 1.0, 1.0), 2).unwrap();
        let obs = obs_from_rows(vec![vec![Some(1.0), Some(2.0)]]);
        assert!(matches!(
            kalman_filter(&spec, &obs),
            Err(Error::Contract(_))
        ));
    }
}
