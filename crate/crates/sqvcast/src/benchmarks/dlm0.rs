//! No-search-data DLM baseline: a single random-walk state with fixed
//! monthly effects, estimated by the same EM machinery as the coupled model.

use crate::dlm::build_dlm0;
use crate::em::{fit_dlm0, EmConfig, FittedParams};
use crate::error::{Error, Result};
use crate::forecast::forecast;
use crate::kalman::{kalman_filter, Observations};
use crate::series::MonthlySeries;

use super::{ForecasterOutput, Intervals, ModelMeta};

/// Fits and forecasts the scalar baseline.
pub fn dlm0(
    train: &MonthlySeries,
    horizon: usize,
    level: f64,
    config: &EmConfig,
) -> Result<ForecasterOutput> {
    if train.len() < 24 {
        return Err(Error::InsufficientData(format!(
            "the scalar baseline needs at least 24 training months, got {}",
            train.len()
        )));
    }
    let report = fit_dlm0(train, config)?;
    let FittedParams::Scalar { params } = &report.params else {
        return Err(Error::Contract("scalar fit returned a coupled model".into()));
    };

    let spec = build_dlm0(params)?;
    let obs = Observations::univariate(train);
    let filter = kalman_filter(&spec, &obs)?;
    let fitted = filter.one_step_predictions(&spec, 0);
    let fc = forecast(&spec, &filter, horizon, level, None)?;

    Ok(ForecasterOutput {
        fitted,
        warmup: 0,
        forecasts: fc.target_mean.clone(),
        intervals: Some(Intervals {
            level,
            lower: fc.target_lower.clone(),
            upper: fc.target_upper.clone(),
        }),
        model_meta: ModelMeta::Dlm0 {
            loglik: report.loglik,
            params: params.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::Dlm0Params;
    use crate::kalman::loglik;
    use crate::month::MonthStamp;

    #[test]
    fn scalar_filter_matches_a_hand_built_recursion() {
        // Local level with fixed x0 and P0 = 0: the predictive variance at
        // t is P_{t|t-1} and the likelihood is a product of N(y_t; x_pred,
        // P + v) densities, all computable by hand for T = 4.
        let params = Dlm0Params {
            sigma2_y: 0.5,
            sigma2_x: 0.25,
            c: [0.0; 12],
            x0: 1.0,
        };
        let spec = build_dlm0(&params).unwrap();
        let data = [1.2, 0.8, 1.5, 0.9];
        let series =
            MonthlySeries::from_values(MonthStamp::new(2010, 1).unwrap(), data.to_vec()).unwrap();
        let obs = Observations::univariate(&series);
        let got = loglik(&spec, &obs).unwrap();

        let (v, w) = (0.5, 0.25);
        let mut x = 1.0;
        let mut p = 0.0;
        let mut expected = 0.0;
        for &y in &data {
            let p_pred = p + w;
            let s = p_pred + v;
            let e = y - x;
            expected += -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + e * e / s);
            let k = p_pred / s;
            x += k * e;
            p = (1.0 - k) * p_pred;
        }
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn zero_state_noise_and_seasonal_gives_flat_forecasts() {
        let params = Dlm0Params {
            sigma2_y: 1.0,
            sigma2_x: 1e-14,
            c: [0.0; 12],
            x0: 10.0,
        };
        let spec = build_dlm0(&params).unwrap();
        let series = MonthlySeries::from_values(
            MonthStamp::new(2010, 1).unwrap(),
            vec![10.0; 30],
        )
        .unwrap();
        let obs = Observations::univariate(&series);
        let filter = kalman_filter(&spec, &obs).unwrap();
        let fc = forecast(&spec, &filter, 6, 0.95, None).unwrap();
        for h in 1..6 {
            assert!((fc.target_mean[h] - fc.target_mean[0]).abs() < 1e-9);
        }
    }
}
