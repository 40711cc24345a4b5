//! Linear-Gaussian state-space model specifications.
//!
//! The central model couples a latent target level `X1` with a latent
//! search-interest level `X2`:
//!
//! ```text
//! observation   Y_t = F X_t + v_t,              v_t ~ N(0, V)
//! state         X_t = G X_{t-1} + C s_t + w_t,  w_t ~ N(0, W)
//! ```
//!
//! with `F` stacking one target row `(1, 0)` over `a` replicate rows
//! `(0, 1)`, `G = [[1, beta], [0, 1]]`, `V = diag(s2_y1, s2_y2 I_a)`,
//! `W = diag(s2_x1, s2_x2)`, and `s_t` the month-of-year indicator so that
//! `C s_t` adds a fixed monthly effect to each state increment. `beta`
//! carries last month's latent search interest into this month's target
//! level.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial-state variance used by the diffuse alternative.
pub const DIFFUSE_KAPPA: f64 = 1e7;

/// Scalar parameters of the coupled two-state model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlmParams {
    /// Effect of latent search interest at `t-1` on the target level at `t`.
    pub beta: f64,
    /// Target observation noise variance.
    pub sigma2_y1: f64,
    /// Replicate observation noise variance, shared by all replicates.
    pub sigma2_y2: f64,
    /// Target state innovation variance.
    pub sigma2_x1: f64,
    /// Search-interest state innovation variance.
    pub sigma2_x2: f64,
    /// Fixed monthly effects added to the state increments; row 0 feeds the
    /// target state, row 1 the search-interest state.
    pub c: [[f64; 12]; 2],
    /// State mean one month before the first observation.
    pub x0: [f64; 2],
}

impl DlmParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma2_y1", self.sigma2_y1),
            ("sigma2_y2", self.sigma2_y2),
            ("sigma2_x1", self.sigma2_x1),
            ("sigma2_x2", self.sigma2_x2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be a positive finite variance, got {v}"
                )));
            }
        }
        if !self.beta.is_finite() {
            return Err(Error::ParameterDomain("beta must be finite".into()));
        }
        Ok(())
    }
}

/// Scalar parameters of the no-search-data specialization: a single
/// random-walk state with fixed monthly effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dlm0Params {
    pub sigma2_y: f64,
    pub sigma2_x: f64,
    pub c: [f64; 12],
    pub x0: f64,
}

impl Dlm0Params {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2_y", self.sigma2_y), ("sigma2_x", self.sigma2_x)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be a positive finite variance, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A fully assembled state-space specification.
///
/// Dimensions: `m` observed series, `q` latent states, `F` is `m x q`,
/// `G` and `W` are `q x q`, `C` is `q x 12`, `V` is `m x m`. The initial
/// state is `N(x0, p0)` one step before the first observation; the default
/// construction treats `x0` as a known (estimated) constant with `p0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSpec {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl StateSpaceSpec {
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        c: DMatrix<f64>,
        v: DMatrix<f64>,
        w: DMatrix<f64>,
        x0: DVector<f64>,
        p0: DMatrix<f64>,
    ) -> Result<Self> {
        let m = f.nrows();
        let q = f.ncols();
        if m == 0 || q == 0 {
            return Err(Error::Contract("observation and state dimensions must be positive".into()));
        }
        let square = |name: &str, mat: &DMatrix<f64>, n: usize| -> Result<()> {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::Contract(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            Ok(())
        };
        square("G", &g, q)?;
        square("V", &v, m)?;
        square("W", &w, q)?;
        square("P0", &p0, q)?;
        if c.nrows() != q || c.ncols() != 12 {
            return Err(Error::Contract(format!(
                "C must be {q}x12, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if x0.len() != q {
            return Err(Error::Contract(format!("x0 must have length {q}")));
        }
        for (name, mat) in [("V", &v), ("W", &w), ("P0", &p0)] {
            if !is_symmetric_psd(mat) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be symmetric positive semidefinite"
                )));
            }
        }
        Ok(StateSpaceSpec { f, g, c, v, w, x0, p0 })
    }

    /// Observation dimension `m`.
    pub fn obs_dim(&self) -> usize {
        self.f.nrows()
    }

    /// State dimension `q`.
    pub fn state_dim(&self) -> usize {
        self.f.ncols()
    }

    /// Replaces the initial condition with the diffuse alternative
    /// `x0 = 0`, `P0 = kappa I`.
    pub fn with_diffuse_initial(mut self, kappa: f64) -> Self {
        let q = self.state_dim();
        self.x0 = DVector::zeros(q);
        self.p0 = DMatrix::identity(q, q) * kappa;
        self
    }

    /// Monthly-effect column for the month of `t`.
    pub(crate) fn seasonal_effect(&self, month: u32) -> DVector<f64> {
        self.c.column((month - 1) as usize).into_owned()
    }
}

fn is_symmetric_psd(mat: &DMatrix<f64>) -> bool {
    let n = mat.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0f64.max(mat[(i, j)].abs().max(mat[(j, i)].abs()));
            if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-10 * scale {
                return false;
            }
        }
    }
    let sym = (mat + mat.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let scale = eigs.iter().fold(1.0f64, |acc, &e| acc.max(e.abs()));
    eigs.iter().all(|&e| e >= -1e-10 * scale)
}

/// Assembles the coupled two-state model for a panel with `a` replicates.
pub fn build_nhnr_dlm(params: &DlmParams, a: usize) -> Result<StateSpaceSpec> {
    params.validate()?;
    if a == 0 {
        return Err(Error::ParameterDomain(
            "replicate count a must be at least 1".into(),
        ));
    }
    let m = a + 1;
    let mut f = DMatrix::zeros(m, 2);
    f[(0, 0)] = 1.0;
    for j in 1..m {
        f[(j, 1)] = 1.0;
    }
    let g = DMatrix::from_row_slice(2, 2, &[1.0, params.beta, 0.0, 1.0]);
    let mut v = DMatrix::zeros(m, m);
    v[(0, 0)] = params.sigma2_y1;
    for j in 1..m {
        v[(j, j)] = params.sigma2_y2;
    }
    let w = DMatrix::from_diagonal(&DVector::from_row_slice(&[
        params.sigma2_x1,
        params.sigma2_x2,
    ]));
    let mut c = DMatrix::zeros(2, 12);
    for (row, effects) in params.c.iter().enumerate() {
        for (col, &value) in effects.iter().enumerate() {
            c[(row, col)] = value;
        }
    }
    let x0 = DVector::from_row_slice(&params.x0);
    StateSpaceSpec::new(f, g, c, v, w, x0, DMatrix::zeros(2, 2))
}

/// Assembles the scalar no-search-data model.
pub fn build_dlm0(params: &Dlm0Params) -> Result<StateSpaceSpec> {
    params.validate()?;
    let f = DMatrix::from_element(1, 1, 1.0);
    let g = DMatrix::from_element(1, 1, 1.0);
    let v = DMatrix::from_element(1, 1, params.sigma2_y);
    let w = DMatrix::from_element(1, 1, params.sigma2_x);
    let c = DMatrix::from_row_slice(1, 12, &params.c);
    let x0 = DVector::from_element(1, params.x0);
    StateSpaceSpec::new(f, g, c, v, w, x0, DMatrix::zeros(1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> DlmParams {
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
    fn decoupled_single_replicate_build() {
        let spec = build_nhnr_dlm(&unit_params(), 1).unwrap();
        assert_eq!(spec.f, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        assert_eq!(spec.g, DMatrix::identity(2, 2));
    }

    #[test]
    fn eleven_replicates_share_one_noise_variance() {
        let mut p = unit_params();
        p.sigma2_y2 = 1.63;
        let spec = build_nhnr_dlm(&p, 11).unwrap();
        assert_eq!(spec.f.nrows(), 12);
        assert_eq!(spec.v.nrows(), 12);
        let shared: Vec<f64> = (1..12).map(|j| spec.v[(j, j)]).collect();
        assert!(shared.iter().all(|&v| v == 1.63));
    }

    #[test]
    fn reported_fit_parameters_are_stored_exactly() {
        let p = DlmParams {
            beta: 104.56,
            sigma2_y1: 1.25e7,
            sigma2_y2: 1.63,
            sigma2_x1: 2.89e6,
            sigma2_x2: 13.66,
            c: [[0.0; 12]; 2],
            x0: [0.0, 0.0],
        };
        let spec = build_nhnr_dlm(&p, 11).unwrap();
        assert_eq!(spec.g[(0, 1)], 104.56);
        assert_eq!(spec.v[(0, 0)], 1.25e7);
        assert_eq!(spec.v[(1, 1)], 1.63);
        assert_eq!(spec.w[(0, 0)], 2.89e6);
        assert_eq!(spec.w[(1, 1)], 13.66);
    }

    #[test]
    fn nonpositive_variances_are_rejected() {
        let mut p = unit_params();
        p.sigma2_x2 = 0.0;
        assert!(matches!(
            build_nhnr_dlm(&p, 1),
            Err(Error::ParameterDomain(_))
        ));
        p.sigma2_x2 = -1.0;
        assert!(build_nhnr_dlm(&p, 1).is_err());
        p.sigma2_x2 = f64::NAN;
        assert!(build_nhnr_dlm(&p, 1).is_err());
    }

    #[test]
    fn zero_replicates_are_rejected() {
        assert!(build_nhnr_dlm(&unit_params(), 0).is_err());
    }

    #[test]
    fn diffuse_switch_replaces_the_initial_condition() {
        let spec = build_nhnr_dlm(&unit_params(), 1)
            .unwrap()
            .with_diffuse_initial(DIFFUSE_KAPPA);
        assert_eq!(spec.x0, DVector::zeros(2));
        assert_eq!(spec.p0, DMatrix::identity(2, 2) * 1e7);
    }

    #[test]
    fn seasonal_effect_selects_the_month_column() {
        let mut p = unit_params();
        p.c[0][2] = 7.0;
        p.c[1][2] = -3.0;
        let spec = build_nhnr_dlm(&p, 1).unwrap();
        let march = spec.seasonal_effect(3);
        assert_eq!(march, DVector::from_row_slice(&[7.0, -3.0]));
    }
}
