//! Extrapolating a fitted model over calendar years and classifying the trend.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{DomainError, Expr};
use crate::ingest::TimeIndexMap;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("model is undefined in {year} (t = {t}): {source}")]
    Domain { year: i32, t: u32, source: DomainError },
    #[error("year {year} maps to a non-positive time index with offset {offset}")]
    NonPositiveIndex { year: i32, offset: i32 },
    #[error("trend needs at least 2 forecast rows, got {0}")]
    TooFewForecastRows(usize),
    #[error("empty year range")]
    EmptyRange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Actual,
    Forecast,
}

impl RowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowKind::Actual => "actual",
            RowKind::Forecast => "forecast",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub year: i32,
    pub t: u32,
    pub value: f64,
    pub kind: RowKind,
}

/// Model values per year. Rows up to the end of the fitting window are
/// `actual`, later rows `forecast`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForecastTable {
    pub index_id: String,
    pub offset_year: i32,
    pub rows: Vec<ForecastRow>,
}

impl ForecastTable {
    pub fn forecast_rows(&self) -> impl Iterator<Item = &ForecastRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Forecast)
    }
}

pub fn forecast(
    index_id: &str,
    e: &Expr,
    years: RangeInclusive<i32>,
    map: TimeIndexMap,
    fit_end: i32,
) -> Result<ForecastTable, ForecastError> {
    if years.is_empty() {
        return Err(ForecastError::EmptyRange);
    }
    let rows = years
        .map(|year| {
            let t = map.to_time_index(year).map_err(|_| ForecastError::NonPositiveIndex {
                year,
                offset: map.offset_year,
            })?;
            let value = e
                .eval(f64::from(t))
                .map_err(|source| ForecastError::Domain { year, t, source })?;
            let kind = if year <= fit_end { RowKind::Actual } else { RowKind::Forecast };
            Ok(ForecastRow { year, t, value, kind })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForecastTable { index_id: index_id.to_string(), offset_year: map.offset_year, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Mixed,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
            Direction::Mixed => "mixed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendVerdict {
    pub index_id: String,
    pub direction: Direction,
    pub first_year: i32,
    pub last_year: i32,
}

/// Direction of the forecast rows: every step up, every step down, or neither.
pub fn trend(table: &ForecastTable) -> Result<TrendVerdict, ForecastError> {
    let rows: Vec<&ForecastRow> = table.forecast_rows().collect();
    if rows.len() < 2 {
        return Err(ForecastError::TooFewForecastRows(rows.len()));
    }
    let deltas: Vec<f64> = rows.windows(2).map(|w| w[1].value - w[0].value).collect();
    let direction = if deltas.iter().all(|d| *d > 0.0) {
        Direction::Increasing
    } else if deltas.iter().all(|d| *d < 0.0) {
        Direction::Decreasing
    } else {
        Direction::Mixed
    };
    Ok(TrendVerdict {
        index_id: table.index_id.clone(),
        direction,
        first_year: rows[0].year,
        last_year: rows[rows.len() - 1].year,
    })
}
