//! ARMA state-space machinery shared by the SARIMA benchmark: lag
//! polynomials, the partial-autocorrelation reparameterization that keeps
//! optimizer iterates stationary/invertible, the exact stationary initial
//! covariance, the concentrated Gaussian likelihood, and a compact
//! Nelder-Mead optimizer.

use nalgebra::{DMatrix, DVector};

use crate::dlm::StateSpaceSpec;
use crate::error::{Error, Result};
use crate::kalman::{kalman_filter, Observations};
use crate::month::MonthStamp;

const LN_2PI: f64 = 1.8378770664093453;

/// Multiplies lag polynomials given as full coefficient vectors starting at
/// the constant term.
pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `(1 - B)^d (1 - B^s)^sd` as a full coefficient vector.
pub(crate) fn differencing_poly(d: usize, sd: usize, season: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    for _ in 0..d {
        poly = poly_mul(&poly, &[1.0, -1.0]);
    }
    let mut seasonal = vec![0.0; season + 1];
    seasonal[0] = 1.0;
    seasonal[season] = -1.0;
    for _ in 0..sd {
        poly = poly_mul(&poly, &seasonal);
    }
    poly
}

/// Expands AR coefficients (`x_t = sum phi_j x_{t-j} + ...` convention) from
/// partial autocorrelations via the Durbin-Levinson recursion. Any pacf
/// vector inside (-1, 1)^p yields a stationary polynomial.
pub(crate) fn ar_from_pacf(pacf: &[f64]) -> Vec<f64> {
    let p = pacf.len();
    let mut phi = vec![0.0; p];
    let mut prev = vec![0.0; p];
    for k in 0..p {
        phi[k] = pacf[k];
        for j in 0..k {
            phi[j] = prev[j] - pacf[k] * prev[k - 1 - j];
        }
        prev[..=k].copy_from_slice(&phi[..=k]);
    }
    phi
}

/// Maps unconstrained optimizer coordinates to stationary AR (or invertible
/// MA) coefficients through `tanh` partial autocorrelations.
pub(crate) fn constrained_coeffs(z: &[f64]) -> Vec<f64> {
    let pacf: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
    ar_from_pacf(&pacf)
}

/// Harvey-form ARMA state space: the state transition carries the AR
/// coefficients in its first column with an identity superdiagonal, and the
/// innovation loads through `(1, theta_1, ..., theta_{r-1})`.
///
/// `phi` uses the recursion convention (`x_t = sum phi_j x_{t-j} + e_t + ...`)
/// and `theta` the positive MA convention.
pub(crate) fn arma_transition(phi: &[f64], theta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let r = phi.len().max(theta.len() + 1).max(1);
    let mut g = DMatrix::zeros(r, r);
    for (i, &p) in phi.iter().enumerate() {
        g[(i, 0)] = p;
    }
    for i in 0..r - 1 {
        g[(i, i + 1)] = 1.0;
    }
    let mut load = DVector::zeros(r);
    load[0] = 1.0;
    for (i, &t) in theta.iter().enumerate() {
        load[i + 1] = t;
    }
    (g, load)
}

/// Solves `P = G P G' + W` by doubling. Fails when the transition is not
/// (numerically) stable.
pub(crate) fn stationary_covariance(g: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = w.clone();
    let mut a = g.clone();
    for _ in 0..128 {
        let incr = &a * &p * a.transpose();
        let norm = incr.norm();
        p += incr;
        if norm <= 1e-14 * p.norm().max(1.0) {
            return Ok(p);
        }
        a = &a * &a;
        if !a.norm().is_finite() {
            break;
        }
    }
    Err(Error::DegenerateDesign(
        "ARMA transition is not stable; no stationary covariance".into(),
    ))
}

/// Builds the unit-variance ARMA spec used inside the likelihood loop.
pub(crate) fn arma_spec(phi: &[f64], theta: &[f64]) -> Result<StateSpaceSpec> {
    let (g, load) = arma_transition(phi, theta);
    let r = g.nrows();
    let w = &load * load.transpose();
    let p0 = stationary_covariance(&g, &w)?;
    let mut f = DMatrix::zeros(1, r);
    f[(0, 0)] = 1.0;
    StateSpaceSpec::new(
        f,
        g,
        DMatrix::zeros(r, 12),
        DMatrix::zeros(1, 1),
        w,
        DVector::zeros(r),
        p0,
    )
}

/// Concentrated Gaussian log-likelihood of a zero-mean ARMA model: runs the
/// filter with unit innovation variance and profiles the scale out.
///
/// Returns `(loglik, sigma2_hat)`.
pub(crate) fn arma_concentrated_loglik(
    phi: &[f64],
    theta: &[f64],
    data: &[f64],
) -> Result<(f64, f64)> {
    let spec = arma_spec(phi, theta)?;
    let rows: Vec<Vec<Option<f64>>> = data.iter().map(|&v| vec![Some(v)]).collect();
    let obs = Observations::new(MonthStamp::new(2000, 1).expect("valid"), 1, rows)?;
    let filter = kalman_filter(&spec, &obs)?;

    let n = data.len() as f64;
    let mut sum_ln_s = 0.0;
    let mut sum_scaled = 0.0;
    for innovation in filter.innovations.iter().flatten() {
        let s = innovation.cov[(0, 0)];
        let v = innovation.residual[0];
        sum_ln_s += s.ln();
        sum_scaled += v * v / s;
    }
    let sigma2 = sum_scaled / n;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::DegenerateDesign(
            "degenerate innovation scale in ARMA likelihood".into(),
        ));
    }
    let loglik = -0.5 * (n * LN_2PI + n * sigma2.ln() + n + sum_ln_s);
    Ok((loglik, sigma2))
}

/// Deterministic Nelder-Mead minimizer with an axis-aligned initial simplex.
///
/// The objective may return non-finite values; such points are treated as
/// worst-possible.
pub fn nelder_mead<F>(cost: F, x0: &[f64], step: f64, max_iter: usize, ftol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return (Vec::new(), cost(&[]));
    }
    let guard = |v: f64| if v.is_finite() { v } else { f64::INFINITY };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| guard(cost(x))).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("no NaN"));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if (values[worst] - values[best]).abs() <= ftol * (1.0 + values[best].abs()) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (k, x) in simplex.iter().enumerate() {
            if k != worst {
                for i in 0..n {
                    centroid[i] += x[i] / n as f64;
                }
            }
        }

        let stretch = |from: &[f64], factor: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + factor * (from[i] - centroid[i]))
                .collect()
        };

        let reflected = stretch(&simplex[worst], -1.0);
        let f_reflected = guard(cost(&reflected));
        if f_reflected < values[best] {
            let expanded = stretch(&simplex[worst], -2.0);
            let f_expanded = guard(cost(&expanded));
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                stretch(&simplex[worst], -0.5)
            } else {
                stretch(&simplex[worst], 0.5)
            };
            let f_contracted = guard(cost(&contracted));
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best].clone();
                for k in 0..=n {
                    if k != best {
                        for i in 0..n {
                            simplex[k][i] = anchor[i] + 0.5 * (simplex[k][i] - anchor[i]);
                        }
                        values[k] = guard(cost(&simplex[k]));
                    }
                }
            }
        }
    }

    let mut best_idx = 0;
    for k in 1..=n {
        if values[k] < values[best_idx] {
            best_idx = k;
        }
    }
    (simplex[best_idx].clone(), values[best_idx])
}
