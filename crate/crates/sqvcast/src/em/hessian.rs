//! Asymptotic-Normality confidence intervals from a finite-difference
//! Hessian of the log-likelihood.
//!
//! Variances are handled on the log scale, so their intervals map back to
//! asymmetric, strictly positive ranges; all other parameters stay on the
//! identity scale.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dlm::{build_dlm0, build_nhnr_dlm, Dlm0Params, DlmParams};
use crate::error::{Error, Result};
use crate::forecast::normal_quantile;
use crate::kalman::{loglik, Observations};
use crate::series::{MonthlySeries, ObservationPanel};

/// One parameter's point estimate and confidence bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCi {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Relative central-difference step per transformed coordinate.
const STEP_SCALE: f64 = 1e-4;

/// Central-difference Hessian CIs for an arbitrary objective over a
/// transformed parameter vector.
///
/// `log_scale[i]` marks coordinates that are logs of positive parameters;
/// their estimates and bounds are exponentiated on the way out. Returns the
/// intervals and a reliability flag: `false` means the negated Hessian was
/// not positive definite and the intervals come from its projection onto the
/// stable eigenspace.
pub fn hessian_ci_generic<F>(
    objective: F,
    theta: &[f64],
    names: &[&str],
    log_scale: &[bool],
    level: f64,
) -> Result<(Vec<ParamCi>, bool)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = theta.len();
    if names.len() != n || log_scale.len() != n {
        return Err(Error::Contract("hessian name/scale arrays must match theta".into()));
    }
    let z = normal_quantile(level)?;

    let steps: Vec<f64> = theta.iter().map(|&v| STEP_SCALE * v.abs().max(1.0)).collect();
    let f0 = objective(theta)?;

    // Evaluation points: 2 per diagonal entry, 4 per off-diagonal pair.
    let mut points: Vec<(usize, usize, f64, f64)> = Vec::new();
    for i in 0..n {
        points.push((i, i, 1.0, 0.0));
        points.push((i, i, -1.0, 0.0));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                points.push((i, j, si, sj));
            }
        }
    }

    let values: Vec<f64> = points
        .par_iter()
        .map(|&(i, j, si, sj)| {
            let mut x = theta.to_vec();
            x[i] += si * steps[i];
            if j != i {
                x[j] += sj * steps[j];
            }
            objective(&x)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut hessian = DMatrix::zeros(n, n);
    let mut cursor = 0;
    for i in 0..n {
        let fp = values[cursor];
        let fm = values[cursor + 1];
        cursor += 2;
        hessian[(i, i)] = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let fpp = values[cursor];
            let fpm = values[cursor + 1];
            let fmp = values[cursor + 2];
            let fmm = values[cursor + 3];
            cursor += 4;
            let h = (fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j]);
            hessian[(i, j)] = h;
            hessian[(j, i)] = h;
        }
    }

    let info = -hessian;
    let (cov, reliable) = match info.clone().cholesky() {
        Some(chol) => (chol.inverse(), true),
        None => {
            // Project onto the positive-curvature eigenspace.
            let eig = info.symmetric_eigen();
            let max_eig = eig
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, &e| acc.max(e.abs()));
            let mut cov = DMatrix::zeros(n, n);
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda > 1e-12 * max_eig.max(1.0) {
                    let v = eig.eigenvectors.column(k);
                    cov += v * v.transpose() / lambda;
                }
            }
            (cov, false)
        }
    };

    let out = (0..n)
        .map(|i| {
            let se = cov[(i, i)].max(0.0).sqrt();
            let (lo, hi) = (theta[i] - z * se, theta[i] + z * se);
            if log_scale[i] {
                ParamCi {
                    name: names[i].to_string(),
                    estimate: theta[i].exp(),
                    lower: lo.exp(),
                    upper: hi.exp(),
                }
            } else {
                ParamCi {
                    name: names[i].to_string(),
                    estimate: theta[i],
                    lower: lo,
                    upper: hi,
                }
            }
        })
        .collect();
    Ok((out, reliable))
}

pub(crate) fn coupled_param_names() -> Vec<String> {
    let mut names = vec![
        "beta".to_string(),
        "sigma2_y1".to_string(),
        "sigma2_y2".to_string(),
        "sigma2_x1".to_string(),
        "sigma2_x2".to_string(),
    ];
    for row in 1..=2 {
        for m in 1..=12 {
            names.push(format!("c{row}_{m}"));
        }
    }
    names.push("x0_1".to_string());
    names.push("x0_2".to_string());
    names
}

pub(crate) fn coupled_pack(params: &DlmParams) -> (Vec<f64>, Vec<bool>) {
    let mut theta = vec![
        params.beta,
        params.sigma2_y1.ln(),
        params.sigma2_y2.ln(),
        params.sigma2_x1.ln(),
        params.sigma2_x2.ln(),
    ];
    let mut log_scale = vec![false, true, true, true, true];
    for row in &params.c {
        theta.extend_from_slice(row);
        log_scale.extend(std::iter::repeat(false).take(12));
    }
    theta.extend_from_slice(&params.x0);
    log_scale.extend([false, false]);
    (theta, log_scale)
}

pub(crate) fn coupled_unpack(theta: &[f64]) -> DlmParams {
    let mut c = [[0.0; 12]; 2];
    c[0].copy_from_slice(&theta[5..17]);
    c[1].copy_from_slice(&theta[17..29]);
    DlmParams {
        beta: theta[0],
        sigma2_y1: theta[1].exp(),
        sigma2_y2: theta[2].exp(),
        sigma2_x1: theta[3].exp(),
        sigma2_x2: theta[4].exp(),
        c,
        x0: [theta[29], theta[30]],
    }
}

pub(crate) fn scalar_param_names() -> Vec<String> {
    let mut names = vec!["sigma2_y".to_string(), "sigma2_x".to_string()];
    for m in 1..=12 {
        names.push(format!("c_{m}"));
    }
    names.push("x0".to_string());
    names
}

pub(crate) fn scalar_pack(params: &Dlm0Params) -> (Vec<f64>, Vec<bool>) {
    let mut theta = vec![params.sigma2_y.ln(), params.sigma2_x.ln()];
    let mut log_scale = vec![true, true];
    theta.extend_from_slice(&params.c);
    log_scale.extend(std::iter::repeat(false).take(12));
    theta.push(params.x0);
    log_scale.push(false);
    (theta, log_scale)
}

pub(crate) fn scalar_unpack(theta: &[f64]) -> Dlm0Params {
    let mut c = [0.0; 12];
    c.copy_from_slice(&theta[2..14]);
    Dlm0Params {
        sigma2_y: theta[0].exp(),
        sigma2_x: theta[1].exp(),
        c,
        x0: theta[14],
    }
}

/// Hessian CIs for the coupled model at (or near) a likelihood maximum.
pub fn hessian_ci(
    panel: &ObservationPanel,
    params: &DlmParams,
    level: f64,
) -> Result<(Vec<ParamCi>, bool)> {
    let a = panel.replicate_count();
    let obs = Observations::from_panel(panel);
    let (theta, log_scale) = coupled_pack(params);
    let names = coupled_param_names();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    hessian_ci_generic(
        |t: &[f64]| loglik(&build_nhnr_dlm(&coupled_unpack(t), a)?, &obs),
        &theta,
        &name_refs,
        &log_scale,
        level,
    )
}

/// Hessian CIs for the scalar no-search-data model.
pub fn hessian_ci_dlm0(
    series: &MonthlySeries,
    params: &Dlm0Params,
    level: f64,
) -> Result<(Vec<ParamCi>, bool)> {
    let obs = Observations::univariate(series);
    let (theta, log_scale) = scalar_pack(params);
    let names = scalar_param_names();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    hessian_ci_generic(
        |t: &[f64]| loglik(&build_dlm0(&scalar_unpack(t))?, &obs),
        &theta,
        &name_refs,
        &log_scale,
        level,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_objective_recovers_exact_half_widths() {
        // For f(theta) = -0.5 * sum k_i (theta_i - mu_i)^2 the central
        // differences are exact, so the half-width must be z / sqrt(k_i).
        let curvatures = [4.0, 0.25, 9.0];
        let center = [1.0, -2.0, 0.5];
        let f = |x: &[f64]| -> Result<f64> {
            Ok(-0.5
                * x.iter()
                    .zip(curvatures.iter().zip(center.iter()))
                    .map(|(&xi, (&k, &mu))| k * (xi - mu) * (xi - mu))
                    .sum::<f64>())
        };
        let (cis, reliable) = hessian_ci_generic(
            f,
            &center,
            &["a", "b", "c"],
            &[false, false, false],
            0.95,
        )
        .unwrap();
        assert!(reliable);
        let z = normal_quantile(0.95).unwrap();
        for (ci, &k) in cis.iter().zip(&curvatures) {
            let half = (ci.upper - ci.lower) / 2.0;
            assert!(
                (half - z / k.sqrt()).abs() < 1e-6,
                "{}: half-width {half}",
                ci.name
            );
        }
    }

    #[test]
    fn log_scale_intervals_stay_positive_and_asymmetric() {
        let f = |x: &[f64]| -> Result<f64> { Ok(-0.5 * (x[0] - 0.3f64).powi(2) / 4.0) };
        let (cis, _) = hessian_ci_generic(f, &[0.3], &["sigma2"], &[true], 0.95).unwrap();
        let ci = &cis[0];
        assert!(ci.lower > 0.0);
        assert!(ci.upper > ci.lower);
        assert!((ci.estimate - 0.3f64.exp()).abs() < 1e-12);
        let below = ci.estimate - ci.lower;
        let above = ci.upper - ci.estimate;
        assert!(above > below);
    }

    #[test]
    fn flat_directions_flag_the_intervals_as_unreliable() {
        // Curvature only in the first coordinate.
        let f = |x: &[f64]| -> Result<f64> { Ok(-0.5 * x[0] * x[0]) };
        let (cis, reliable) =
            hessian_ci_generic(f, &[0.0, 0.0], &["a", "b"], &[false, false], 0.95).unwrap();
        assert!(!reliable);
        assert!(cis[0].upper > cis[0].lower);
    }

    #[test]
    fn pack_unpack_round_trips() {
        let params = DlmParams {
            beta: -3.5,
            sigma2_y1: 2.0,
            sigma2_y2: 0.5,
            sigma2_x1: 7.0,
            sigma2_x2: 0.01,
            c: {
                let mut c = [[0.0; 12]; 2];
                c[0][3] = 1.5;
                c[1][7] = -2.5;
                c
            },
            x0: [10.0, -4.0],
        };
        let (theta, _) = coupled_pack(&params);
        let back = coupled_unpack(&theta);
        assert!((back.beta - params.beta).abs() < 1e-12);
        assert!((back.sigma2_y2 - params.sigma2_y2).abs() < 1e-12);
        assert_eq!(back.c[0][3], 1.5);
        assert_eq!(back.x0[1], -4.0);

        let scalar = Dlm0Params {
            sigma2_y: 3.0,
            sigma2_x: 0.2,
            c: [0.25; 12],
            x0: 5.0,
        };
        let (theta, _) = scalar_pack(&scalar);
        let back = scalar_unpack(&theta);
        assert!((back.sigma2_x - 0.2).abs() < 1e-12);
        assert_eq!(back.c[11], 0.25);
    }
}
