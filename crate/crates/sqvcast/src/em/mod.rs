//! Maximum-likelihood estimation by EM with Monte Carlo multistart.
//!
//! Each start draws parameters from data-informed ranges, runs a fixed
//! warmup of EM iterations, and the best start by log-likelihood continues
//! to convergence. Starts are independent (own RNG stream per start index)
//! and may run in parallel; the merge is deterministic.

mod estep;
mod hessian;
mod mstep;

pub use estep::{e_step, SufficientStats};
pub use hessian::{hessian_ci, hessian_ci_dlm0, hessian_ci_generic, ParamCi};
pub use mstep::{m_step, m_step_scalar, VarianceFloors};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dlm::{build_dlm0, build_nhnr_dlm, Dlm0Params, DlmParams};
use crate::error::{Error, Result};
use crate::kalman::Observations;
use crate::series::{MonthlySeries, ObservationPanel};

use mstep::sample_variance;

/// Multistart EM settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Total EM iteration budget for the winning start (warmup included).
    pub max_iterations: usize,
    /// Stop when |delta loglik| / (1 + |loglik|) falls below this.
    pub rel_tol: f64,
    /// Number of random starts.
    pub n_starts: usize,
    /// EM iterations run on every start before selection.
    pub warmup_iterations: usize,
    pub seed: u64,
    /// Hard lower bound for every variance update. `None` derives a floor of
    /// 1e-8 times the sample variance of each observation block (target and
    /// replicates separately, since their scales can differ by orders of
    /// magnitude).
    pub variance_floor: Option<f64>,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 5000,
            rel_tol: 1e-8,
            n_starts: 20,
            warmup_iterations: 50,
            seed: 0,
            variance_floor: None,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::ParameterDomain("max_iterations must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::ParameterDomain("rel_tol must be > 0".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::ParameterDomain("n_starts must be >= 1".into()));
        }
        if let Some(f) = self.variance_floor {
            if !(f > 0.0) {
                return Err(Error::ParameterDomain("variance_floor must be > 0".into()));
            }
        }
        Ok(())
    }

    fn floors(&self, obs: &Observations) -> VarianceFloors {
        match self.variance_floor {
            Some(f) => VarianceFloors::uniform(f),
            None => VarianceFloors::from_observations(obs, 1e-8),
        }
    }
}

/// Outcome of one multistart warmup run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostic {
    pub start: usize,
    /// Final warmup log-likelihood, absent when the start failed.
    pub loglik: Option<f64>,
    pub error: Option<String>,
}

/// Estimated parameters, either the coupled two-state model or the scalar
/// no-search-data specialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Coupled { a: usize, params: DlmParams },
    Scalar { params: Dlm0Params },
}

impl FittedParams {
    pub fn as_coupled(&self) -> Option<&DlmParams> {
        match self {
            FittedParams::Coupled { params, .. } => Some(params),
            FittedParams::Scalar { .. } => None,
        }
    }

    pub fn as_scalar(&self) -> Option<&Dlm0Params> {
        match self {
            FittedParams::Scalar { params } => Some(params),
            FittedParams::Coupled { .. } => None,
        }
    }
}

/// Full estimation record: estimates, trace, convergence, confidence
/// intervals, and per-start diagnostics. Serializes to JSON as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: FittedParams,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    pub ci_level: f64,
    pub ci: Vec<ParamCi>,
    /// False when the observed information matrix was not positive definite
    /// and the intervals come from its stable subspace only.
    pub ci_reliable: bool,
    pub start_diagnostics: Vec<StartDiagnostic>,
    pub config: EmConfig,
}

impl FitReport {
    /// Confidence interval for a parameter by name.
    pub fn ci_for(&self, name: &str) -> Option<&ParamCi> {
        self.ci.iter().find(|c| c.name == name)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

struct EmRun<P> {
    params: P,
    trace: Vec<f64>,
    converged: bool,
}

/// Generic EM loop over a parameter type with a pluggable M-step.
fn run_em<P, FE, FM>(
    mut params: P,
    max_iters: usize,
    rel_tol: Option<f64>,
    e_step_ll: FE,
    m_step_fn: FM,
) -> Result<EmRun<P>>
where
    P: Clone,
    FE: Fn(&P) -> Result<(SufficientStats, f64)>,
    FM: Fn(&SufficientStats) -> Result<P>,
{
    let mut trace = Vec::with_capacity(max_iters + 1);
    let mut converged = false;

    let (mut stats, mut ll) = e_step_ll(&params)?;
    trace.push(ll);

    for _ in 0..max_iters {
        let candidate = m_step_fn(&stats)?;
        let (new_stats, new_ll) = e_step_ll(&candidate)?;
        let slack = 1e-8 * (1.0 + ll.abs());
        if new_ll < ll - slack {
            // Numerical ascent failure: keep the last good parameters.
            converged = true;
            break;
        }
        params = candidate;
        stats = new_stats;
        trace.push(new_ll);
        let rel_change = (new_ll - ll).abs() / (1.0 + ll.abs());
        ll = new_ll;
        if let Some(tol) = rel_tol {
            if rel_change < tol {
                converged = true;
                break;
            }
        }
    }

    Ok(EmRun {
        params,
        trace,
        converged,
    })
}

/// Shared multistart scaffolding: draw starts, warm up, continue the best.
fn multistart<P, FD, FE, FM>(
    config: &EmConfig,
    draw_start: FD,
    e_step_ll: FE,
    m_step_fn: FM,
) -> Result<(P, Vec<f64>, bool, usize, Vec<StartDiagnostic>)>
where
    P: Clone + Send,
    FD: Fn(&mut ChaCha8Rng) -> P + Sync,
    FE: Fn(&P) -> Result<(SufficientStats, f64)> + Sync,
    FM: Fn(&SufficientStats) -> Result<P> + Sync,
{
    config.validate()?;
    let warmup = config.warmup_iterations.min(config.max_iterations);

    let runs: Vec<(usize, Result<EmRun<P>>)> = (0..config.n_starts)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(idx as u64 + 1);
            let start = draw_start(&mut rng);
            (idx, run_em(start, warmup, None, &e_step_ll, &m_step_fn))
        })
        .collect();

    let mut diagnostics = Vec::with_capacity(config.n_starts);
    let mut best: Option<(usize, EmRun<P>)> = None;
    for (idx, run) in runs {
        match run {
            Ok(r) => {
                let final_ll = *r.trace.last().expect("nonempty trace");
                diagnostics.push(StartDiagnostic {
                    start: idx,
                    loglik: Some(final_ll),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((_, b)) => final_ll > *b.trace.last().expect("nonempty trace"),
                };
                if better {
                    best = Some((idx, r));
                }
            }
            Err(e) => diagnostics.push(StartDiagnostic {
                start: idx,
                loglik: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let (_, warm) = best.ok_or_else(|| Error::EstimationFailure {
        reasons: diagnostics
            .iter()
            .map(|d| {
                format!(
                    "start {}: {}",
                    d.start,
                    d.error.as_deref().unwrap_or("no finite likelihood")
                )
            })
            .collect(),
    })?;

    let warm_iters = warm.trace.len() - 1;
    let remaining = config.max_iterations - warm_iters.min(config.max_iterations);
    let cont = run_em(
        warm.params.clone(),
        remaining,
        Some(config.rel_tol),
        &e_step_ll,
        &m_step_fn,
    )?;

    let mut trace = warm.trace;
    trace.extend_from_slice(&cont.trace[1..]);
    let iterations_used = trace.len() - 1;
    Ok((cont.params, trace, cont.converged, iterations_used, diagnostics))
}

/// Fits the coupled two-state model to a panel with `a` replicates.
///
/// The panel should already be demeaned on its training window; the model
/// can absorb level through `x0`, but the start-value heuristics assume
/// roughly centered series.
pub fn fit(panel: &ObservationPanel, a: usize, config: &EmConfig) -> Result<FitReport> {
    if a != panel.replicate_count() {
        return Err(Error::Contract(format!(
            "a = {a} does not match the panel's replicate count {}",
            panel.replicate_count()
        )));
    }
    let obs = Observations::from_panel(panel);
    let floors = config.floors(&obs);

    let target: Vec<f64> = panel.target().observed().collect();
    let var_target = sample_variance(&target).unwrap_or(1.0);
    let pooled: Vec<f64> = panel
        .replicates()
        .iter()
        .flat_map(|r| r.observed())
        .collect();
    let var_rep = sample_variance(&pooled).unwrap_or(1.0);

    // Per-month mean over replicates, for the beta start range.
    let rep_mean_series: Vec<f64> = (0..panel.len())
        .filter_map(|t| {
            let vals: Vec<f64> = panel
                .replicates()
                .iter()
                .filter_map(|r| r.values()[t])
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        })
        .collect();
    let sd_rep_mean = sample_variance(&rep_mean_series)
        .map(|v| v.sqrt())
        .unwrap_or(1.0);
    let beta_range = 2.0 * var_target.sqrt() / sd_rep_mean.max(1e-12);

    let x0_start = [
        panel.target().observed().next().unwrap_or(0.0),
        rep_mean_series.first().copied().unwrap_or(0.0),
    ];

    let draw = |rng: &mut ChaCha8Rng| -> DlmParams {
        let sigma2_y1 = log_uniform(rng, 1e-2, 1.0) * var_target;
        let sigma2_y2 = log_uniform(rng, 1e-2, 1.0) * var_rep;
        let sigma2_x1 = log_uniform(rng, 1e-2, 1.0) * var_target;
        let sigma2_x2 = log_uniform(rng, 1e-2, 1.0) * var_rep;
        let beta = rng.random_range(-beta_range..beta_range);
        DlmParams {
            beta,
            sigma2_y1,
            sigma2_y2,
            sigma2_x1,
            sigma2_x2,
            c: [[0.0; 12]; 2],
            x0: x0_start,
        }
    };

    let e = |p: &DlmParams| -> Result<(SufficientStats, f64)> {
        e_step(&build_nhnr_dlm(p, a)?, &obs)
    };
    let m = |stats: &SufficientStats| -> Result<DlmParams> { m_step(stats, &obs, &floors) };

    let (params, trace, converged, iterations_used, start_diagnostics) =
        multistart(config, draw, e, m)?;

    let loglik = *trace.last().expect("nonempty trace");
    let (ci, ci_reliable) = hessian_ci(panel, &params, 0.95)?;

    Ok(FitReport {
        params: FittedParams::Coupled { a, params },
        loglik,
        loglik_trace: trace,
        converged,
        iterations_used,
        ci_level: 0.95,
        ci,
        ci_reliable,
        start_diagnostics,
        config: config.clone(),
    })
}

/// Fits the scalar no-search-data model to a single monthly series.
pub fn fit_dlm0(series: &MonthlySeries, config: &EmConfig) -> Result<FitReport> {
    let obs = Observations::univariate(series);
    let floors = config.floors(&obs);

    let values: Vec<f64> = series.observed().collect();
    let var = sample_variance(&values).unwrap_or(1.0);
    let x0_start = series.observed().next().unwrap_or(0.0);

    let draw = |rng: &mut ChaCha8Rng| -> Dlm0Params {
        Dlm0Params {
            sigma2_y: log_uniform(rng, 1e-2, 1.0) * var,
            sigma2_x: log_uniform(rng, 1e-2, 1.0) * var,
            c: [0.0; 12],
            x0: x0_start,
        }
    };

    let e = |p: &Dlm0Params| -> Result<(SufficientStats, f64)> {
        e_step(&build_dlm0(p)?, &obs)
    };
    let m = |stats: &SufficientStats| -> Result<Dlm0Params> { m_step_scalar(stats, &obs, &floors) };

    let (params, trace, converged, iterations_used, start_diagnostics) =
        multistart(config, draw, e, m)?;

    let loglik = *trace.last().expect("nonempty trace");
    let (ci, ci_reliable) = hessian_ci_dlm0(series, &params, 0.95)?;

    Ok(FitReport {
        params: FittedParams::Scalar { params },
        loglik,
        loglik_trace: trace,
        converged,
        iterations_used,
        ci_level: 0.95,
        ci,
        ci_reliable,
        start_diagnostics,
        config: config.clone(),
    })
}
