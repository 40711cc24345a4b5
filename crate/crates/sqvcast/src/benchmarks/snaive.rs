//! Seasonal naive forecaster: repeat the same calendar month one year back.

use crate::error::{Error, Result};
use crate::series::MonthlySeries;

use super::{ForecasterOutput, ModelMeta};

/// Forecast month `T + h` with the observation at `T + h - 12`, wrapping
/// into the final training year for horizons past 12. In-sample fitted
/// values are exact 12-month lags.
pub fn snaive(train: &MonthlySeries, horizon: usize) -> Result<ForecasterOutput> {
    if train.len() < 12 {
        return Err(Error::InsufficientData(format!(
            "seasonal naive needs at least 12 training months, got {}",
            train.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let values = train.dense()?;
    let n = values.len();

    let fitted = values[..n - 12].to_vec();
    let forecasts = (1..=horizon)
        .map(|h| values[n - 12 + ((h - 1) % 12)])
        .collect();

    Ok(ForecasterOutput {
        fitted,
        warmup: 12,
        forecasts,
        intervals: None,
        model_meta: ModelMeta::Snaive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::MonthStamp;

    fn series(start: (i32, u32), values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::from_values(MonthStamp::new(start.0, start.1).unwrap(), values).unwrap()
    }

    #[test]
    fn periodic_series_forecasts_with_zero_error() {
        let pattern: Vec<f64> = (0..36).map(|t| ((t % 12) as f64) * 3.0 + 1.0).collect();
        let out = snaive(&series((2004, 1), pattern.clone()), 12).unwrap();
        for h in 0..12 {
            assert_eq!(out.forecasts[h], pattern[24 + h]);
        }
        for (i, f) in out.fitted.iter().enumerate() {
            assert_eq!(*f, pattern[i + 12] /* exact periodicity */);
        }
    }

    #[test]
    fn june_2013_forecast_is_june_2012_observation() {
        // Train Jan 2004 .. Sep 2012; June 2013 is horizon 9.
        let start = MonthStamp::new(2004, 1).unwrap();
        let n = start.months_until(&MonthStamp::new(2012, 9).unwrap()) as usize + 1;
        let values: Vec<f64> = (0..n).map(|t| 1000.0 + t as f64 * 7.5).collect();
        let train = series((2004, 1), values.clone());
        let out = snaive(&train, 12).unwrap();
        let june_2012 = start.months_until(&MonthStamp::new(2012, 6).unwrap()) as usize;
        assert_eq!(out.forecasts[8], values[june_2012]);
    }

    #[test]
    fn horizon_13_rereads_the_last_year() {
        let values: Vec<f64> = (0..24).map(|t| t as f64).collect();
        let out = snaive(&series((2004, 1), values), 13).unwrap();
        assert_eq!(out.forecasts[12], out.forecasts[0]);
    }

    #[test]
    fn short_training_data_is_rejected() {
        let values: Vec<f64> = (0..11).map(|t| t as f64).collect();
        assert!(snaive(&series((2004, 1), values), 1).is_err());
    }

    #[test]
    fn missing_training_values_are_rejected() {
        let mut values: Vec<Option<f64>> = (0..24).map(|t| Some(t as f64)).collect();
        values[5] = None;
        let train =
            MonthlySeries::new(MonthStamp::new(2004, 1).unwrap(), values).unwrap();
        assert!(matches!(
            snaive(&train, 3),
            Err(Error::InsufficientData(_))
        ));
    }
}
