//! EM maximization step with closed-form updates.
//!
//! The constrained structure of the model (shared replicate variance, the
//! coupling `beta` inside the evolution matrix, fixed monthly effects) rules
//! out generic matrix-normal updates, but it keeps every block linear:
//!
//! - the target-state increment `X_{1,t} - X_{1,t-1}` regresses on
//!   `X_{2,t-1}` and a month intercept, so `(beta, c row 1)` solve one joint
//!   least-squares system in the smoothed second moments;
//! - the search-state increment has only the month intercept, giving
//!   `c row 2` by per-month averaging;
//! - the four variances are means of expected squared residuals at the
//!   updated coefficients, and the replicate variance pools over all `a`
//!   replicate series;
//! - the initial state solves the first transition exactly,
//!   `x0 = G^{-1}(E[X_1|Y] - C s_1)`.
//!
//! Each update is the exact conditional maximizer given the other blocks at
//! their latest values, so the log-likelihood cannot decrease.

use crate::dlm::{Dlm0Params, DlmParams};
use crate::error::{Error, Result};
use crate::kalman::Observations;

use super::estep::SufficientStats;

/// One month-grouped least-squares accumulator.
#[derive(Default, Clone, Copy)]
struct MonthSums {
    n: f64,
    sum_g: f64,
    sum_h: f64,
}

/// Closed-form parameter update for the coupled two-state model.
pub fn m_step(
    stats: &SufficientStats,
    obs: &Observations,
    variance_floor: &VarianceFloors,
) -> Result<DlmParams> {
    let t_len = stats.len();
    if t_len != obs.len() {
        return Err(Error::Contract(format!(
            "sufficient statistics cover {t_len} steps but the panel has {}",
            obs.len()
        )));
    }
    if stats.means[0].len() != 2 {
        return Err(Error::Contract(
            "the coupled M-step needs a two-state model".into(),
        ));
    }

    // Per-step regression quantities for the target-state increment
    // d_t = X_{1,t} - X_{1,t-1} on z_t = X_{2,t-1}.
    let mut sum_b = 0.0; // E[d_t z_t]
    let mut sum_a = 0.0; // E[z_t^2]
    let mut months: [MonthSums; 12] = [MonthSums::default(); 12];
    let mut months2: [MonthSums; 12] = [MonthSums::default(); 12];
    for t in 1..=t_len {
        let m_prev = &stats.second[t - 1];
        let m_cross = &stats.cross[t - 1];
        let month = (obs.month_at(t - 1).month() - 1) as usize;
        sum_a += m_prev[(1, 1)];
        sum_b += m_cross[(0, 1)] - m_prev[(0, 1)];
        let slot = &mut months[month];
        slot.n += 1.0;
        slot.sum_g += stats.means[t][0] - stats.means[t - 1][0];
        slot.sum_h += stats.means[t - 1][1];
        let slot2 = &mut months2[month];
        slot2.n += 1.0;
        slot2.sum_g += stats.means[t][1] - stats.means[t - 1][1];
    }

    // Eliminate the month intercepts analytically, leaving a scalar system
    // for beta. The denominator is the within-month spread of E[X_{2,t-1}]
    // plus its smoothed variance, so it vanishes only for a degenerate
    // design (constant regressor).
    let mut numer = sum_b;
    let mut denom = sum_a;
    for slot in &months {
        if slot.n > 0.0 {
            numer -= slot.sum_g * slot.sum_h / slot.n;
            denom -= slot.sum_h * slot.sum_h / slot.n;
        }
    }
    let scale = sum_a.abs().max(1.0);
    if denom <= 1e-12 * scale {
        return Err(Error::DegenerateDesign(
            "the latent search-interest regressor carries no variation; beta is not identified"
                .into(),
        ));
    }
    let beta = numer / denom;

    let mut c = [[0.0f64; 12]; 2];
    for m in 0..12 {
        if months[m].n > 0.0 {
            c[0][m] = (months[m].sum_g - beta * months[m].sum_h) / months[m].n;
        }
        if months2[m].n > 0.0 {
            c[1][m] = months2[m].sum_g / months2[m].n;
        }
    }

    // Expected squared residuals at the updated coefficients.
    let mut sse_x1 = 0.0;
    let mut sse_x2 = 0.0;
    for t in 1..=t_len {
        let m_prev = &stats.second[t - 1];
        let m_cur = &stats.second[t];
        let m_cross = &stats.cross[t - 1];
        let month = (obs.month_at(t - 1).month() - 1) as usize;
        let g_t = stats.means[t][0] - stats.means[t - 1][0];
        let h_t = stats.means[t - 1][1];
        let a_t = m_prev[(1, 1)];
        let b_t = m_cross[(0, 1)] - m_prev[(0, 1)];
        let d2_t = m_cur[(0, 0)] - 2.0 * m_cross[(0, 0)] + m_prev[(0, 0)];
        let c1 = c[0][month];
        sse_x1 += d2_t - 2.0 * beta * b_t - 2.0 * c1 * g_t
            + beta * beta * a_t
            + 2.0 * beta * c1 * h_t
            + c1 * c1;

        let dg_t = stats.means[t][1] - stats.means[t - 1][1];
        let e2_t = m_cur[(1, 1)] - 2.0 * m_cross[(1, 1)] + m_prev[(1, 1)];
        let c2 = c[1][month];
        sse_x2 += e2_t - 2.0 * c2 * dg_t + c2 * c2;
    }
    let sigma2_x1 = (sse_x1 / t_len as f64).max(variance_floor.state_target);
    let sigma2_x2 = (sse_x2 / t_len as f64).max(variance_floor.state_sqv);

    // Observation variances: target row, then the pooled replicate rows.
    let mut sse_y1 = 0.0;
    let mut n_y1 = 0usize;
    let mut sse_y2 = 0.0;
    let mut n_y2 = 0usize;
    for t in 1..=t_len {
        let row = obs.at(t - 1);
        let m_cur = &stats.second[t];
        if let Some(y) = row[0] {
            sse_y1 += y * y - 2.0 * y * stats.means[t][0] + m_cur[(0, 0)];
            n_y1 += 1;
        }
        for value in &row[1..] {
            if let Some(y) = value {
                sse_y2 += y * y - 2.0 * y * stats.means[t][1] + m_cur[(1, 1)];
                n_y2 += 1;
            }
        }
    }
    if n_y1 == 0 {
        return Err(Error::DegenerateDesign(
            "no observed target values; sigma2_y1 is not identified".into(),
        ));
    }
    if n_y2 == 0 {
        return Err(Error::DegenerateDesign(
            "no observed replicate values; sigma2_y2 is not identified".into(),
        ));
    }
    let sigma2_y1 = (sse_y1 / n_y1 as f64).max(variance_floor.obs_target);
    let sigma2_y2 = (sse_y2 / n_y2 as f64).max(variance_floor.obs_sqv);

    // x0 = G^{-1}(E[X_1|Y] - C s_1), with G^{-1} = [[1, -beta], [0, 1]].
    let first_month = (obs.month_at(0).month() - 1) as usize;
    let u1 = stats.means[1][0] - c[0][first_month];
    let u2 = stats.means[1][1] - c[1][first_month];
    let x0 = [u1 - beta * u2, u2];

    Ok(DlmParams {
        beta,
        sigma2_y1,
        sigma2_y2,
        sigma2_x1,
        sigma2_x2,
        c,
        x0,
    })
}

/// Closed-form parameter update for the scalar no-search-data model.
pub fn m_step_scalar(
    stats: &SufficientStats,
    obs: &Observations,
    variance_floor: &VarianceFloors,
) -> Result<Dlm0Params> {
    let t_len = stats.len();
    if t_len != obs.len() {
        return Err(Error::Contract(format!(
            "sufficient statistics cover {t_len} steps but the series has {}",
            obs.len()
        )));
    }
    if stats.means[0].len() != 1 {
        return Err(Error::Contract("the scalar M-step needs a one-state model".into()));
    }

    let mut months: [MonthSums; 12] = [MonthSums::default(); 12];
    for t in 1..=t_len {
        let month = (obs.month_at(t - 1).month() - 1) as usize;
        months[month].n += 1.0;
        months[month].sum_g += stats.means[t][0] - stats.means[t - 1][0];
    }
    let mut c = [0.0f64; 12];
    for m in 0..12 {
        if months[m].n > 0.0 {
            c[m] = months[m].sum_g / months[m].n;
        }
    }

    let mut sse_x = 0.0;
    let mut sse_y = 0.0;
    let mut n_y = 0usize;
    for t in 1..=t_len {
        let month = (obs.month_at(t - 1).month() - 1) as usize;
        let d2 = stats.second[t][(0, 0)] - 2.0 * stats.cross[t - 1][(0, 0)]
            + stats.second[t - 1][(0, 0)];
        let g_t = stats.means[t][0] - stats.means[t - 1][0];
        sse_x += d2 - 2.0 * c[month] * g_t + c[month] * c[month];
        if let Some(y) = obs.at(t - 1)[0] {
            sse_y += y * y - 2.0 * y * stats.means[t][0] + stats.second[t][(0, 0)];
            n_y += 1;
        }
    }
    if n_y == 0 {
        return Err(Error::DegenerateDesign(
            "no observed values; sigma2_y is not identified".into(),
        ));
    }

    let first_month = (obs.month_at(0).month() - 1) as usize;
    Ok(Dlm0Params {
        sigma2_y: (sse_y / n_y as f64).max(variance_floor.obs_target),
        sigma2_x: (sse_x / t_len as f64).max(variance_floor.state_target),
        c,
        x0: stats.means[1][0] - c[first_month],
    })
}

/// Per-block lower bounds applied to every variance update.
///
/// The target and replicate blocks of a panel can sit many orders of
/// magnitude apart, so a single shared floor would clamp the smaller block;
/// each block gets a floor scaled to its own sample variance instead.
#[derive(Debug, Clone, Copy)]
pub struct VarianceFloors {
    pub obs_target: f64,
    pub obs_sqv: f64,
    pub state_target: f64,
    pub state_sqv: f64,
}

impl VarianceFloors {
    pub fn uniform(floor: f64) -> Self {
        VarianceFloors {
            obs_target: floor,
            obs_sqv: floor,
            state_target: floor,
            state_sqv: floor,
        }
    }

    /// Derives floors as `scale` times each block's sample variance.
    pub fn from_observations(obs: &Observations, scale: f64) -> Self {
        let mut target = Vec::new();
        let mut sqv = Vec::new();
        for t in 0..obs.len() {
            let row = obs.at(t);
            if let Some(y) = row[0] {
                target.push(y);
            }
            for v in row[1..].iter().flatten() {
                sqv.push(*v);
            }
        }
        let var_target = sample_variance(&target).unwrap_or(1.0);
        let var_sqv = sample_variance(&sqv).unwrap_or(var_target);
        VarianceFloors {
            obs_target: scale * var_target,
            obs_sqv: scale * var_sqv,
            state_target: scale * var_target,
            state_sqv: scale * var_sqv,
        }
    }
}

pub(crate) fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let var = ss / (n - 1.0);
    if var > 0.0 {
        Some(var)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::{build_dlm0, build_nhnr_dlm, DlmParams};
    use crate::em::estep::e_step;
    use crate::month::MonthStamp;

    fn floors() -> VarianceFloors {
        VarianceFloors::uniform(1e-12)
    }

    fn obs_from_rows(rows: Vec<Vec<Option<f64>>>) -> Observations {
        let m = rows[0].len();
        Observations::new(MonthStamp::new(2010, 1).unwrap(), m, rows).unwrap()
    }

    #[test]
    fn decoupled_spec_with_flat_target_gives_zero_beta() {
        // Under a beta = 0 spec the two state blocks never mix, so the
        // smoothed cross-covariances vanish; with each month visited once
        // the month effects absorb the target increments exactly and the
        // beta update is zero to round-off.
        let params = DlmParams {
            beta: 0.0,
            sigma2_y1: 1.0,
            sigma2_y2: 1.0,
            sigma2_x1: 1.0,
            sigma2_x2: 1.0,
            c: [[0.0; 12]; 2],
            x0: [2.0, 0.0],
        };
        let spec = build_nhnr_dlm(&params, 1).unwrap();
        let rows = vec![
            vec![Some(2.0), Some(1.0)],
            vec![Some(2.0), Some(-1.0)],
            vec![Some(2.0), Some(2.0)],
            vec![Some(2.0), Some(-2.0)],
        ];
        let obs = obs_from_rows(rows);
        let (stats, _) = e_step(&spec, &obs).unwrap();
        let updated = m_step(&stats, &obs, &floors()).unwrap();
        assert!(updated.beta.abs() < 1e-8, "beta = {}", updated.beta);
    }

    #[test]
    fn scalar_variance_update_matches_the_hand_formula() {
        // With near-noiseless observation variance the smoothed path sits on
        // the data, so the variance update must equal the plain sample
        // formula: mean squared increment around the per-month mean
        // increment, computed here directly from the raw values.
        let series: Vec<f64> = (0..30).map(|t| ((t * t) % 11) as f64).collect();
        let params = Dlm0Params {
            sigma2_y: 1e-12,
            sigma2_x: 1.0,
            c: [0.0; 12],
            x0: series[0],
        };
        let spec = build_dlm0(&params).unwrap();
        let start = MonthStamp::new(2010, 1).unwrap();
        let rows: Vec<Vec<Option<f64>>> = series.iter().map(|&v| vec![Some(v)]).collect();
        let obs = Observations::new(start, 1, rows).unwrap();
        let (stats, _) = e_step(&spec, &obs).unwrap();
        let up = m_step_scalar(&stats, &obs, &floors()).unwrap();

        let mut increments: Vec<(usize, f64)> = Vec::new();
        increments.push((0, series[0] - params.x0));
        for t in 1..series.len() {
            increments.push((t % 12, series[t] - series[t - 1]));
        }
        let mut mean_inc = [0.0f64; 12];
        let mut count = [0.0f64; 12];
        for &(m, d) in &increments {
            mean_inc[m] += d;
            count[m] += 1.0;
        }
        for m in 0..12 {
            if count[m] > 0.0 {
                mean_inc[m] /= count[m];
            }
        }
        let sse: f64 = increments
            .iter()
            .map(|&(m, d)| (d - mean_inc[m]).powi(2))
            .sum();
        let expect = sse / increments.len() as f64;

        assert!(
            (up.sigma2_x - expect).abs() < 1e-6 * expect.max(1.0),
            "got {}, expected {expect}",
            up.sigma2_x
        );
        for m in 0..12 {
            assert!((up.c[m] - mean_inc[m]).abs() < 1e-6);
        }
    }

    #[test]
    fn replicate_pooling_equals_the_common_per_replicate_value() {
        // Two replicates with identical values have identical residual
        // moments against the shared smoothed state, so the pooled update
        // must equal the value either replicate gives on its own.
        let params = DlmParams {
            beta: 0.0,
            sigma2_y1: 1.0,
            sigma2_y2: 1.0,
            sigma2_x1: 1.0,
            sigma2_x2: 1.0,
            c: [[0.0; 12]; 2],
            x0: [0.0, 0.0],
        };
        let spec = build_nhnr_dlm(&params, 2).unwrap();
        let rows = vec![
            vec![Some(0.5), Some(1.0), Some(1.0)],
            vec![Some(-0.5), Some(2.0), Some(2.0)],
            vec![Some(0.0), Some(-1.0), Some(-1.0)],
        ];
        let obs = obs_from_rows(rows.clone());
        let (stats, _) = e_step(&spec, &obs).unwrap();
        let up = m_step(&stats, &obs, &floors()).unwrap();

        // Per-replicate residual mean from the same smoothed moments.
        let single: f64 = (1..=3)
            .map(|t| {
                let y = rows[t - 1][1].unwrap();
                y * y - 2.0 * y * stats.means[t][1] + stats.second[t][(1, 1)]
            })
            .sum::<f64>()
            / 3.0;
        assert!((up.sigma2_y2 - single).abs() < 1e-12);
    }

    #[test]
    fn constant_search_state_is_a_degenerate_design() {
        let params = DlmParams {
            beta: 0.0,
            sigma2_y1: 1e-13,
            sigma2_y2: 1e-13,
            sigma2_x1: 1e-13,
            sigma2_x2: 1e-13,
            c: [[0.0; 12]; 2],
            x0: [0.0, 1.0],
        };
        let spec = build_nhnr_dlm(&params, 1).unwrap();
        // X2 pinned at exactly 1 every month: no regressor variation.
        let rows = vec![vec![Some(0.0), Some(1.0)]; 3];
        let obs = obs_from_rows(rows);
        let (stats, _) = e_step(&spec, &obs).unwrap();
        assert!(matches!(
            m_step(&stats, &obs, &floors()),
            Err(Error::DegenerateDesign(_))
        ));
    }
}
