//! Monthly and weekly series, observation panels, and the panel
//! preprocessing steps: weekly-to-monthly aggregation, demeaning on the
//! training window, and train/holdout splitting.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::month::MonthStamp;

/// A monthly time series with explicit missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    start: MonthStamp,
    values: Vec<Option<f64>>,
}

impl MonthlySeries {
    pub fn new(start: MonthStamp, values: Vec<Option<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("a monthly series must not be empty".into()));
        }
        Ok(MonthlySeries { start, values })
    }

    /// Builds a fully observed series.
    pub fn from_values(start: MonthStamp, values: Vec<f64>) -> Result<Self> {
        Self::new(start, values.into_iter().map(Some).collect())
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Month of the `i`-th entry.
    pub fn month_at(&self, i: usize) -> MonthStamp {
        self.start.add_months(i as i64)
    }

    /// Last covered month.
    pub fn end(&self) -> MonthStamp {
        self.month_at(self.len() - 1)
    }

    /// Value at a calendar month, if the month is inside the series range.
    pub fn at(&self, month: MonthStamp) -> Option<Option<f64>> {
        let offset = self.start.months_until(&month);
        if offset < 0 || offset as usize >= self.len() {
            None
        } else {
            Some(self.values[offset as usize])
        }
    }

    /// The observed (non-missing) values in order.
    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    /// Returns the values as a dense slice, or an error naming the first gap.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::InsufficientData(format!("missing value at {}", self.month_at(i)))
                })
            })
            .collect()
    }

    fn slice(&self, from: usize, to: usize) -> MonthlySeries {
        MonthlySeries {
            start: self.month_at(from),
            values: self.values[from..to].to_vec(),
        }
    }

    fn shifted_by(&self, offset: f64) -> MonthlySeries {
        MonthlySeries {
            start: self.start,
            values: self.values.iter().map(|v| v.map(|x| x - offset)).collect(),
        }
    }
}

/// A weekly series on a strict 7-day grid with values in [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklySeries {
    week_starts: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl WeeklySeries {
    pub fn new(week_starts: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if week_starts.is_empty() {
            return Err(Error::Contract("a weekly series must not be empty".into()));
        }
        if week_starts.len() != values.len() {
            return Err(Error::Contract(format!(
                "weekly series has {} dates but {} values",
                week_starts.len(),
                values.len()
            )));
        }
        for w in week_starts.windows(2) {
            if (w[1] - w[0]).num_days() != 7 {
                return Err(Error::Contract(format!(
                    "weekly dates {} and {} are not 7 days apart",
                    w[0], w[1]
                )));
            }
        }
        for (&d, &v) in week_starts.iter().zip(&values) {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::ParameterDomain(format!(
                    "weekly value {v} at {d} is outside [0, 100]"
                )));
            }
        }
        Ok(WeeklySeries {
            week_starts,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn week_starts(&self) -> &[NaiveDate] {
        &self.week_starts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The aligned multivariate observation set: one target series plus `a >= 1`
/// replicate series of the same latent process, all sharing start and length.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    start: MonthStamp,
    target: MonthlySeries,
    replicates: Vec<MonthlySeries>,
    /// Per-series training means removed by [`demean`], target first.
    demean_offsets: Option<Vec<f64>>,
}

impl ObservationPanel {
    pub fn new(target: MonthlySeries, replicates: Vec<MonthlySeries>) -> Result<Self> {
        if replicates.is_empty() {
            return Err(Error::Contract(
                "a panel needs at least one replicate series".into(),
            ));
        }
        let start = target.start();
        let len = target.len();
        for (j, r) in replicates.iter().enumerate() {
            if r.start() != start || r.len() != len {
                return Err(Error::Contract(format!(
                    "replicate {} is not aligned with the target (start {}, length {})",
                    j + 1,
                    start,
                    len
                )));
            }
        }
        Ok(ObservationPanel {
            start,
            target,
            replicates,
            demean_offsets: None,
        })
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn end(&self) -> MonthStamp {
        self.target.end()
    }

    /// Number of replicate series `a`.
    pub fn replicate_count(&self) -> usize {
        self.replicates.len()
    }

    pub fn target(&self) -> &MonthlySeries {
        &self.target
    }

    pub fn replicates(&self) -> &[MonthlySeries] {
        &self.replicates
    }

    pub fn demean_offsets(&self) -> Option<&[f64]> {
        self.demean_offsets.as_deref()
    }

    /// Keeps only the replicate at `index` (0-based), preserving offsets.
    pub fn with_single_replicate(&self, index: usize) -> Result<ObservationPanel> {
        if index >= self.replicates.len() {
            return Err(Error::Contract(format!(
                "replicate index {index} out of range (a = {})",
                self.replicates.len()
            )));
        }
        let offsets = self
            .demean_offsets
            .as_ref()
            .map(|o| vec![o[0], o[index + 1]]);
        Ok(ObservationPanel {
            start: self.start,
            target: self.target.clone(),
            replicates: vec![self.replicates[index].clone()],
            demean_offsets: offsets,
        })
    }

    /// Restores the per-series means recorded by [`demean`].
    pub fn recenter(&self) -> Result<ObservationPanel> {
        let offsets = self.demean_offsets.as_ref().ok_or_else(|| {
            Error::Contract("panel carries no demean offsets to restore".into())
        })?;
        Ok(ObservationPanel {
            start: self.start,
            target: self.target.shifted_by(-offsets[0]),
            replicates: self
                .replicates
                .iter()
                .zip(&offsets[1..])
                .map(|(r, &o)| r.shifted_by(-o))
                .collect(),
            demean_offsets: None,
        })
    }
}

/// Converts a weekly series to monthly values over `from..=to` by the
/// day-count-weighted mean of the 7-day windows overlapping each month.
///
/// A requested month with no overlapping window days triggers a coverage
/// error listing every such month.
pub fn aggregate_weekly_to_monthly(
    weekly: &WeeklySeries,
    from: MonthStamp,
    to: MonthStamp,
) -> Result<MonthlySeries> {
    if from > to {
        return Err(Error::Contract(format!(
            "month range {from}..{to} is reversed"
        )));
    }
    let n_months = from.months_until(&to) as usize + 1;
    let mut weighted = vec![0.0f64; n_months];
    let mut days = vec![0i64; n_months];

    for (&week_start, &value) in weekly.week_starts().iter().zip(weekly.values()) {
        let week_end = week_start + chrono::Duration::days(6);
        // A 7-day window spans at most two months.
        let first = MonthStamp::containing(week_start);
        let second = MonthStamp::containing(week_end);
        let months: &[MonthStamp] = if first == second {
            &[first][..]
        } else {
            &[first, second][..]
        };
        for &month in months {
            let idx = from.months_until(&month);
            if idx < 0 || idx as usize >= n_months {
                continue;
            }
            let lo = week_start.max(month.first_day());
            let hi = week_end.min(month.last_day());
            let overlap = (hi - lo).num_days() + 1;
            if overlap > 0 {
                weighted[idx as usize] += overlap as f64 * value;
                days[idx as usize] += overlap;
            }
        }
    }

    let uncovered: Vec<MonthStamp> = days
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| from.add_months(i as i64))
        .collect();
    if !uncovered.is_empty() {
        return Err(Error::Coverage(uncovered));
    }

    let values = weighted
        .iter()
        .zip(&days)
        .map(|(&w, &d)| Some(w / d as f64))
        .collect();
    MonthlySeries::new(from, values)
}

/// Subtracts each series' training-window mean (observed entries up to and
/// including `cutoff`) from all of its entries, recording the offsets.
pub fn demean(panel: &ObservationPanel, cutoff: MonthStamp) -> Result<ObservationPanel> {
    if panel.demean_offsets.is_some() {
        return Err(Error::Contract("panel is already demeaned".into()));
    }
    if cutoff < panel.start() || cutoff > panel.end() {
        return Err(Error::Contract(format!(
            "cutoff {cutoff} is outside the panel range {}..{}",
            panel.start(),
            panel.end()
        )));
    }
    let window = panel.start.months_until(&cutoff) as usize + 1;

    let mean_of = |series: &MonthlySeries, name: &str| -> Result<f64> {
        let obs: Vec<f64> = series.values()[..window].iter().filter_map(|v| *v).collect();
        if obs.is_empty() {
            return Err(Error::CannotDemean(name.to_string()));
        }
        Ok(obs.iter().sum::<f64>() / obs.len() as f64)
    };

    let mut offsets = Vec::with_capacity(panel.replicate_count() + 1);
    offsets.push(mean_of(&panel.target, "target")?);
    for (j, r) in panel.replicates.iter().enumerate() {
        offsets.push(mean_of(r, &format!("sqv_{}", j + 1))?);
    }

    Ok(ObservationPanel {
        start: panel.start,
        target: panel.target.shifted_by(offsets[0]),
        replicates: panel
            .replicates
            .iter()
            .zip(&offsets[1..])
            .map(|(r, &o)| r.shifted_by(o))
            .collect(),
        demean_offsets: Some(offsets),
    })
}

/// Splits a panel into `start..=cutoff` and the remainder.
pub fn split(
    panel: &ObservationPanel,
    cutoff: MonthStamp,
) -> Result<(ObservationPanel, ObservationPanel)> {
    if cutoff < panel.start() {
        return Err(Error::Contract(format!(
            "cutoff {cutoff} precedes the panel start {}",
            panel.start()
        )));
    }
    if cutoff >= panel.end() {
        return Err(Error::EmptyTest(cutoff));
    }
    let k = panel.start.months_until(&cutoff) as usize + 1;
    let carve = |which: std::ops::Range<usize>| ObservationPanel {
        start: panel.target.month_at(which.start),
        target: panel.target.slice(which.start, which.end),
        replicates: panel
            .replicates
            .iter()
            .map(|r| r.slice(which.start, which.end))
            .collect(),
        demean_offsets: panel.demean_offsets.clone(),
    };
    Ok((carve(0..k), carve(k..panel.len())))
}

/// Rejoins two contiguous panels produced by [`split`].
pub fn concat(train: &ObservationPanel, test: &ObservationPanel) -> Result<ObservationPanel> {
    if train.replicate_count() != test.replicate_count() {
        return Err(Error::Contract("panels have different replicate counts".into()));
    }
    if train.end().add_months(1) != test.start() {
        return Err(Error::Contract(format!(
            "panels are not contiguous: {} then {}",
            train.end(),
            test.start()
        )));
    }
    if train.demean_offsets != test.demean_offsets {
        return Err(Error::Contract("panels carry different demean offsets".into()));
    }
    let join = |a: &MonthlySeries, b: &MonthlySeries| MonthlySeries {
        start: a.start(),
        values: a.values().iter().chain(b.values()).cloned().collect(),
    };
    Ok(ObservationPanel {
        start: train.start,
        target: join(&train.target, &test.target),
        replicates: train
            .replicates
            .iter()
            .zip(&test.replicates)
            .map(|(a, b)| join(a, b))
            .collect(),
        demean_offsets: train.demean_offsets.clone(),
    })
}
