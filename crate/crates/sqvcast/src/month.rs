//! Calendar months and the fixed-seasonality month indicator.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month, ordered by `(year, month)`.
///
/// Serializes as `"YYYY-MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthStamp {
    year: i32,
    month: u32,
}

impl MonthStamp {
    /// Builds a stamp, rejecting months outside 1..=12.
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::ParameterDomain(format!(
                "month {month} is outside 1..=12"
            )));
        }
        Ok(MonthStamp { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    /// Month number in 1..=12.
    pub fn month(&self) -> u32 {
        self.month
    }

    /// The month `n` steps after (or before, for negative `n`) this one.
    pub fn add_months(&self, n: i64) -> MonthStamp {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) + n;
        MonthStamp {
            year: total.div_euclid(12) as i32,
            month: (total.rem_euclid(12) + 1) as u32,
        }
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: &MonthStamp) -> i64 {
        (other.year as i64 * 12 + other.month as i64) - (self.year as i64 * 12 + self.month as i64)
    }

    /// First calendar day of the month.
    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    /// Last calendar day of the month.
    pub fn last_day(&self) -> NaiveDate {
        self.add_months(1).first_day().pred_opt().expect("valid date")
    }

    /// Number of days in the month.
    pub fn day_count(&self) -> i64 {
        (self.last_day() - self.first_day()).num_days() + 1
    }

    /// The month containing `date`.
    pub fn containing(date: NaiveDate) -> MonthStamp {
        MonthStamp {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Unit basis 12-vector with a one at this month's position.
    pub fn indicator(&self) -> [f64; 12] {
        let mut v = [0.0; 12];
        v[(self.month - 1) as usize] = 1.0;
        v
    }
}

/// Unit basis 12-vector indicating the month of `t`.
pub fn month_indicator(t: MonthStamp) -> [f64; 12] {
    t.indicator()
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::ParameterDomain(format!("'{s}' is not a YYYY-MM month")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::ParameterDomain(format!("'{s}' has a bad year")))?;
        let month: u32 = m
            .parse()
            .map_err(|_| Error::ParameterDomain(format!("'{s}' has a bad month")))?;
        MonthStamp::new(year, month)
    }
}

impl Serialize for MonthStamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthStamp {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
