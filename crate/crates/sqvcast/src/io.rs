//! CSV and JSON readers/writers for every file format the toolkit emits.
//!
//! Formats:
//! - monthly CSV: header `date,value`, months as `YYYY-MM`, missing = empty
//! - weekly search-volume CSV: optional `#` preamble, header `Week,<label>`,
//!   dates as `YYYY-MM-DD`, `<1` allowed for below-threshold values
//! - panel CSV: header `date,target,sqv_1,...,sqv_a`
//! - forecast CSV: header `horizon,mean,lower,upper`
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! file re-parses to bit-identical values.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::month::MonthStamp;
use crate::series::{MonthlySeries, ObservationPanel, WeeklySeries};

/// Value substituted for the `<1` below-threshold marker in weekly exports:
/// the midpoint of the censored [0, 1) interval.
pub const BELOW_THRESHOLD_DEFAULT: f64 = 0.5;

struct CsvLines {
    path: String,
    lines: Vec<(u64, String)>,
}

fn read_lines(path: &Path, skip_comments: bool) -> Result<CsvLines> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty() && !(skip_comments && l.starts_with('#')))
        .collect();
    Ok(CsvLines {
        path: display,
        lines,
    })
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(|f| f.trim()).collect()
}

fn parse_f64(raw: &str, path: &str, line: u64) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("'{raw}' is not a number")))
}

/// Reads a `date,value` monthly CSV.
pub fn read_monthly_csv(path: &Path) -> Result<MonthlySeries> {
    let file = read_lines(path, false)?;
    let mut rows = file.lines.iter();
    let (hline, header) = rows
        .next()
        .ok_or_else(|| Error::parse(&file.path, 1, "empty file"))?;
    if split_fields(header) != ["date", "value"] {
        return Err(Error::parse(
            &file.path,
            *hline,
            "expected header 'date,value'",
        ));
    }

    let mut start: Option<MonthStamp> = None;
    let mut values = Vec::new();
    for (line, row) in rows {
        let fields = split_fields(row);
        if fields.len() != 2 {
            return Err(Error::parse(&file.path, *line, "expected 2 fields"));
        }
        let month = MonthStamp::from_str(fields[0])
            .map_err(|e| Error::parse(&file.path, *line, e.to_string()))?;
        match start {
            None => start = Some(month),
            Some(s) => {
                let expect = s.add_months(values.len() as i64);
                if month != expect {
                    return Err(Error::parse(
                        &file.path,
                        *line,
                        format!("expected month {expect}, found {month}"),
                    ));
                }
            }
        }
        let value = if fields[1].is_empty() {
            None
        } else {
            Some(parse_f64(fields[1], &file.path, *line)?)
        };
        values.push(value);
    }
    let start = start.ok_or_else(|| Error::parse(&file.path, 1, "no data rows"))?;
    MonthlySeries::new(start, values)
}

pub fn write_monthly_csv(path: &Path, series: &MonthlySeries) -> Result<()> {
    let mut out = String::from("date,value\n");
    for (i, v) in series.values().iter().enumerate() {
        out.push_str(&series.month_at(i).to_string());
        out.push(',');
        if let Some(x) = v {
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a Google-Trends-style weekly export. Preamble lines starting with
/// `#` are skipped; `<1` parses to `below_threshold`.
///
/// Returns the query label from the header together with the series.
pub fn read_weekly_csv(path: &Path, below_threshold: f64) -> Result<(String, WeeklySeries)> {
    let file = read_lines(path, true)?;
    let mut rows = file.lines.iter();
    let (hline, header) = rows
        .next()
        .ok_or_else(|| Error::parse(&file.path, 1, "empty file"))?;
    let head_fields = split_fields(header);
    if head_fields.len() != 2 || head_fields[0] != "Week" {
        return Err(Error::parse(
            &file.path,
            *hline,
            "expected header 'Week,<query label>'",
        ));
    }
    let label = head_fields[1].to_string();

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (line, row) in rows {
        let fields = split_fields(row);
        if fields.len() != 2 {
            return Err(Error::parse(&file.path, *line, "expected 2 fields"));
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
            .map_err(|_| Error::parse(&file.path, *line, format!("'{}' is not a YYYY-MM-DD date", fields[0])))?;
        let value = if fields[1] == "<1" {
            below_threshold
        } else {
            parse_f64(fields[1], &file.path, *line)?
        };
        dates.push(date);
        values.push(value);
    }
    let series = WeeklySeries::new(dates, values).map_err(|e| match e {
        Error::Contract(msg) | Error::ParameterDomain(msg) => {
            Error::parse(&file.path, 0, msg)
        }
        other => other,
    })?;
    Ok((label, series))
}

/// Reads a `date,target,sqv_1,...,sqv_a` panel CSV.
pub fn read_panel_csv(path: &Path) -> Result<ObservationPanel> {
    let file = read_lines(path, false)?;
    let mut rows = file.lines.iter();
    let (hline, header) = rows
        .next()
        .ok_or_else(|| Error::parse(&file.path, 1, "empty file"))?;
    let head_fields = split_fields(header);
    if head_fields.len() < 3 || head_fields[0] != "date" || head_fields[1] != "target" {
        return Err(Error::parse(
            &file.path,
            *hline,
            "expected header 'date,target,sqv_1,...'",
        ));
    }
    for (j, name) in head_fields[2..].iter().enumerate() {
        let expect = format!("sqv_{}", j + 1);
        if *name != expect {
            return Err(Error::parse(
                &file.path,
                *hline,
                format!("expected column '{expect}', found '{name}'"),
            ));
        }
    }
    let a = head_fields.len() - 2;

    let mut start: Option<MonthStamp> = None;
    let mut target = Vec::new();
    let mut reps: Vec<Vec<Option<f64>>> = vec![Vec::new(); a];
    for (line, row) in rows {
        let fields = split_fields(row);
        if fields.len() != a + 2 {
            return Err(Error::parse(
                &file.path,
                *line,
                format!("expected {} fields, found {}", a + 2, fields.len()),
            ));
        }
        let month = MonthStamp::from_str(fields[0])
            .map_err(|e| Error::parse(&file.path, *line, e.to_string()))?;
        match start {
            None => start = Some(month),
            Some(s) => {
                let expect = s.add_months(target.len() as i64);
                if month != expect {
                    return Err(Error::parse(
                        &file.path,
                        *line,
                        format!("expected month {expect}, found {month}"),
                    ));
                }
            }
        }
        let cell = |raw: &str| -> Result<Option<f64>> {
            if raw.is_empty() {
                Ok(None)
            } else {
                parse_f64(raw, &file.path, *line).map(Some)
            }
        };
        target.push(cell(fields[1])?);
        for (j, raw) in fields[2..].iter().enumerate() {
            reps[j].push(cell(raw)?);
        }
    }
    let start = start.ok_or_else(|| Error::parse(&file.path, 1, "no data rows"))?;
    ObservationPanel::new(
        MonthlySeries::new(start, target)?,
        reps.into_iter()
            .map(|v| MonthlySeries::new(start, v))
            .collect::<Result<Vec<_>>>()?,
    )
}

pub fn write_panel_csv(path: &Path, panel: &ObservationPanel) -> Result<()> {
    let mut out = String::from("date,target");
    for j in 1..=panel.replicate_count() {
        out.push_str(&format!(",sqv_{j}"));
    }
    out.push('\n');
    for i in 0..panel.len() {
        out.push_str(&panel.target().month_at(i).to_string());
        let mut push_cell = |v: Option<f64>| {
            out.push(',');
            if let Some(x) = v {
                out.push_str(&x.to_string());
            }
        };
        push_cell(panel.target().values()[i]);
        for r in panel.replicates() {
            push_cell(r.values()[i]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One row of a `horizon,mean,lower,upper` forecast CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub horizon: usize,
    pub mean: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

pub fn write_forecast_csv(path: &Path, rows: &[ForecastRow]) -> Result<()> {
    let mut out = String::from("horizon,mean,lower,upper\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.horizon, r.mean));
        for bound in [r.lower, r.upper] {
            out.push(',');
            if let Some(b) = bound {
                out.push_str(&b.to_string());
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_forecast_csv(path: &Path) -> Result<Vec<ForecastRow>> {
    let file = read_lines(path, false)?;
    let mut rows = file.lines.iter();
    let (hline, header) = rows
        .next()
        .ok_or_else(|| Error::parse(&file.path, 1, "empty file"))?;
    if split_fields(header) != ["horizon", "mean", "lower", "upper"] {
        return Err(Error::parse(
            &file.path,
            *hline,
            "expected header 'horizon,mean,lower,upper'",
        ));
    }
    let mut out = Vec::new();
    for (line, row) in rows {
        let fields = split_fields(row);
        if fields.len() != 4 {
            return Err(Error::parse(&file.path, *line, "expected 4 fields"));
        }
        let horizon = fields[0]
            .parse::<usize>()
            .map_err(|_| Error::parse(&file.path, *line, "bad horizon"))?;
        let mean = parse_f64(fields[1], &file.path, *line)?;
        let bound = |raw: &str| -> Result<Option<f64>> {
            if raw.is_empty() {
                Ok(None)
            } else {
                parse_f64(raw, &file.path, *line).map(Some)
            }
        };
        out.push(ForecastRow {
            horizon,
            mean,
            lower: bound(fields[2])?,
            upper: bound(fields[3])?,
        });
    }
    Ok(out)
}

/// A generic header-plus-rows CSV table, used for report outputs
/// (accuracy tables, interval curves) so they round-trip like everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "table row width mismatch");
        self.rows.push(row);
    }
}

pub fn write_table_csv(path: &Path, table: &Table) -> Result<()> {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_table_csv(path: &Path) -> Result<Table> {
    let file = read_lines(path, false)?;
    let mut rows = file.lines.iter();
    let (_, header) = rows
        .next()
        .ok_or_else(|| Error::parse(&file.path, 1, "empty file"))?;
    let header: Vec<String> = split_fields(header).iter().map(|s| s.to_string()).collect();
    let width = header.len();
    let mut table = Table::new(header);
    for (line, row) in rows {
        let fields = split_fields(row);
        if fields.len() != width {
            return Err(Error::parse(
                &file.path,
                *line,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        table.rows.push(fields.iter().map(|s| s.to_string()).collect());
    }
    Ok(table)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}
