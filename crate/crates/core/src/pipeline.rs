//! End-to-end run: ingest, per-group PCA, one search per retained index,
//! forecast to the horizon, and the report artifacts.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Stage, StageExt};
use crate::expr::Expr;
use crate::forecast::{forecast, trend, ForecastRow, RowKind, TrendVerdict};
use crate::ingest::{self, load_daly_csv, DalyTable, Group, GroupConfig, TimeIndexMap};
use crate::metrics::FitMetrics;
use crate::pca::{self, component_scores, fit_pca, PcaModel, Retention, ScoreSeries};
use crate::sr::{self, rng::derive_seed, select_model, Criterion, FrontEntry, ParetoFront, SrConfig, TrainingSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// `search.seed` is the master seed; each index searches with a seed
    /// derived from it and the index label.
    pub search: SrConfig,
    pub time_map: TimeIndexMap,
    pub horizon: i32,
    pub retention: Retention,
    pub criterion: Criterion,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            search: SrConfig::default(),
            time_map: TimeIndexMap::default(),
            horizon: 2020,
            retention: Retention::Kaiser,
            criterion: Criterion::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScreePoint {
    pub component: usize,
    pub eigenvalue: f64,
}

/// PCA summary for one group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupReport {
    #[serde(flatten)]
    pub model: PcaModel,
    pub indices: Vec<String>,
    pub scree: Vec<ScreePoint>,
}

impl From<PcaModel> for GroupReport {
    fn from(model: PcaModel) -> Self {
        let scree = pca::scree_data(&model)
            .into_iter()
            .map(|(component, eigenvalue)| ScreePoint { component, eigenvalue })
            .collect();
        Self { indices: model.labels(), model, scree }
    }
}

/// Everything a single-index search produced; the `fit` subcommand writes
/// one of these per index and `report` combines them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub index: String,
    pub seed: u64,
    pub offset_year: i32,
    pub years: Vec<i32>,
    pub observed: Vec<f64>,
    pub expression: Expr,
    pub metrics: FitMetrics,
    pub complexity: u32,
    pub front: Vec<FrontRecord>,
    pub config: SrConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    pub expression: Expr,
    pub mse: f64,
    pub complexity: u32,
}

impl From<&FrontEntry> for FrontRecord {
    fn from(e: &FrontEntry) -> Self {
        Self { expression: e.expr.clone(), mse: e.mse, complexity: e.complexity }
    }
}

/// Per-index report entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexReport {
    pub index: String,
    pub expression: String,
    pub r2: f64,
    pub r: Option<f64>,
    pub mse: f64,
    pub mae: f64,
    pub complexity: u32,
    pub rows: Vec<ForecastRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub offset_year: i32,
    pub horizon: i32,
    pub groups: Vec<GroupReport>,
    pub indices: Vec<IndexReport>,
    pub trends: Vec<TrendVerdict>,
    pub fits: Vec<FitRecord>,
}

/// Searches one index series with `cfg` as given (no seed derivation) and
/// selects a model that is also defined at every year up to `horizon`.
pub fn fit_series(
    series: &ScoreSeries,
    cfg: &SrConfig,
    map: TimeIndexMap,
    criterion: Criterion,
    horizon: i32,
) -> Result<FitRecord, Error> {
    let ctx = || series.index_id.clone();
    let data = TrainingSet::from_series(series, map).stage_with(Stage::Search, ctx)?;
    let front = sr::run_search(&data, cfg).stage_with(Stage::Search, ctx)?;
    let last = series.years.last().copied().unwrap_or(horizon);
    let ahead = ((last + 1)..=horizon)
        .map(|y| map.to_time_index(y).map(f64::from))
        .collect::<Result<Vec<_>, _>>()
        .stage_with(Stage::Forecast, ctx)?;
    let usable: ParetoFront = front
        .entries()
        .iter()
        .filter(|e| ahead.iter().all(|&t| e.expr.eval(t).is_ok()))
        .cloned()
        .collect();
    let pool = if usable.is_empty() { &front } else { &usable };
    let report = select_model(pool, &data, criterion).stage_with(Stage::Search, ctx)?;
    Ok(FitRecord {
        index: series.index_id.clone(),
        seed: cfg.seed,
        offset_year: map.offset_year,
        years: series.years.clone(),
        observed: series.scores.clone(),
        expression: report.expr,
        metrics: report.metrics,
        complexity: report.complexity,
        front: front.entries().iter().map(FrontRecord::from).collect(),
        config: cfg.clone(),
    })
}

/// Standardizes, decomposes and scores every group with at least two causes.
pub fn analyse_groups(
    table: &DalyTable,
    retention: Retention,
) -> Result<Vec<(PcaModel, Vec<ScoreSeries>)>, Error> {
    table
        .present_groups()
        .into_iter()
        .filter(|g| table.group_columns(*g).len() >= 2)
        .map(|group| {
            let ctx = || group.to_string();
            let z = ingest::standardize(table, group).stage_with(Stage::Standardize, ctx)?;
            let model = fit_pca(&z, group, retention).stage_with(Stage::Pca, ctx)?;
            let scores = component_scores(&z, &model, table.years()).stage_with(Stage::Pca, ctx)?;
            Ok((model, scores))
        })
        .collect()
}

/// Builds forecasts and trend verdicts from finished fits.
pub fn assemble_report(
    groups: Vec<GroupReport>,
    fits: Vec<FitRecord>,
    map: TimeIndexMap,
    horizon: i32,
) -> Result<PipelineReport, Error> {
    let mut indices = Vec::with_capacity(fits.len());
    let mut trends = Vec::with_capacity(fits.len());
    for fit in &fits {
        let ctx = || fit.index.clone();
        let first = *fit.years.first().ok_or_else(|| Error::Usage(format!("fit `{}` has no years", fit.index)))?;
        let last = *fit.years.last().expect("non-empty");
        if horizon < last {
            return Err(Error::Usage(format!(
                "horizon {horizon} precedes the last fitted year {last}"
            )));
        }
        let table = forecast(&fit.index, &fit.expression, first..=horizon, map, last)
            .stage_with(Stage::Forecast, ctx)?;
        if table.forecast_rows().count() >= 2 {
            trends.push(trend(&table).stage_with(Stage::Forecast, ctx)?);
        }
        indices.push(IndexReport {
            index: fit.index.clone(),
            expression: fit.expression.to_string(),
            r2: fit.metrics.r2,
            r: fit.metrics.r,
            mse: fit.metrics.mse,
            mae: fit.metrics.mae,
            complexity: fit.complexity,
            rows: table.rows,
        });
    }
    Ok(PipelineReport { offset_year: map.offset_year, horizon, groups, indices, trends, fits })
}

pub fn run_pipeline(table: &DalyTable, cfg: &PipelineConfig) -> Result<PipelineReport, Error> {
    cfg.search.validate().stage(Stage::Search)?;
    let analysed = analyse_groups(table, cfg.retention)?;
    let series: Vec<ScoreSeries> = analysed.iter().flat_map(|(_, s)| s.clone()).collect();
    let fits = series
        .par_iter()
        .map(|s| {
            let search = SrConfig { seed: derive_seed(cfg.search.seed, &s.index_id), ..cfg.search.clone() };
            fit_series(s, &search, cfg.time_map, cfg.criterion, cfg.horizon)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let groups = analysed.into_iter().map(|(m, _)| GroupReport::from(m)).collect();
    assemble_report(groups, fits, cfg.time_map, cfg.horizon)
}

pub fn run_pipeline_files(
    csv: impl AsRef<Path>,
    groups: impl AsRef<Path>,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, Error> {
    let config = GroupConfig::load(groups).stage(Stage::Ingest)?;
    let table = load_daly_csv(csv, &config).stage(Stage::Ingest)?;
    run_pipeline(&table, cfg)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// `component,eigenvalue` pairs.
pub fn write_scree_csv<W: Write>(out: W, model: &PcaModel) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["component", "eigenvalue"])?;
    for (k, l) in pca::scree_data(model) {
        w.write_record([k.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `year,<index>...` component scores sharing the same years.
pub fn write_scores_csv<W: Write>(out: W, series: &[ScoreSeries]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["year".to_string()];
    header.extend(series.iter().map(|s| s.index_id.clone()));
    w.write_record(&header)?;
    if let Some(first) = series.first() {
        for (i, year) in first.years.iter().enumerate() {
            let mut rec = vec![year.to_string()];
            rec.extend(series.iter().map(|s| s.scores[i].to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the `year,<index>...` layout written by [`write_scores_csv`].
pub fn read_scores_csv<R: std::io::Read>(input: R) -> Result<Vec<ScoreSeries>, Error> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0).map(str::trim) != Some("year") || header.len() < 2 {
        return Err(Error::Usage("scores file must start with a `year` column and at least one index".into()));
    }
    let mut series: Vec<ScoreSeries> = header
        .iter()
        .skip(1)
        .map(|h| ScoreSeries { index_id: h.trim().to_string(), years: Vec::new(), scores: Vec::new() })
        .collect();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::Usage(format!("scores row {}: bad {what}", line + 2));
        let year: i32 = record.get(0).unwrap_or("").trim().parse().map_err(|_| bad("year"))?;
        for (s, cell) in series.iter_mut().zip(record.iter().skip(1)) {
            let v: f64 = cell.trim().parse().map_err(|_| bad(&s.index_id))?;
            s.years.push(year);
            s.scores.push(v);
        }
    }
    Ok(series)
}

/// Observed index values against the model: `year,t,actual,model`, with
/// `actual` blank beyond the fitted years.
pub fn write_overlay_csv<W: Write>(out: W, fit: &FitRecord, index: &IndexReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["year", "t", "actual", "model"])?;
    for row in &index.rows {
        let actual = fit
            .years
            .iter()
            .position(|y| *y == row.year)
            .map(|i| fit.observed[i].to_string())
            .unwrap_or_default();
        w.write_record([row.year.to_string(), row.t.to_string(), actual, row.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per year and one column per index: observed scores for fitted
/// years, model values for forecast years.
pub fn write_forecast_table_csv<W: Write>(out: W, report: &PipelineReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["kind".to_string(), "year".to_string()];
    header.extend(report.indices.iter().map(|i| i.index.clone()));
    w.write_record(&header)?;
    let years: BTreeSet<i32> = report.indices.iter().flat_map(|i| i.rows.iter().map(|r| r.year)).collect();
    for year in years {
        let mut kind = RowKind::Forecast;
        let mut cells = Vec::with_capacity(report.indices.len());
        for (index, fit) in report.indices.iter().zip(&report.fits) {
            let observed = fit.years.iter().position(|y| *y == year).map(|i| fit.observed[i]);
            let cell = match observed {
                Some(v) => {
                    kind = RowKind::Actual;
                    v.to_string()
                }
                None => index
                    .rows
                    .iter()
                    .find(|r| r.year == year)
                    .map(|r| r.value.to_string())
                    .unwrap_or_default(),
            };
            cells.push(cell);
        }
        let mut rec = vec![kind.as_str().to_string(), year.to_string()];
        rec.extend(cells);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `index,expression,r2,r,mse,mae,complexity`.
pub fn write_fit_table_csv<W: Write>(out: W, report: &PipelineReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "expression", "r2", "r", "mse", "mae", "complexity"])?;
    for i in &report.indices {
        w.write_record([
            i.index.clone(),
            i.expression.clone(),
            i.r2.to_string(),
            i.r.map(|r| r.to_string()).unwrap_or_default(),
            i.mse.to_string(),
            i.mae.to_string(),
            i.complexity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `forecast_table.csv`, `fit_table.csv`, per-group
/// `pca_<group>.json` and `scree_<group>.csv`, and per-index
/// `overlay_<index>.csv` into `dir`.
pub fn write_report_dir(dir: &Path, report: &PipelineReport) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)?;
    write_forecast_table_csv(std::fs::File::create(dir.join("forecast_table.csv"))?, report)?;
    write_fit_table_csv(std::fs::File::create(dir.join("fit_table.csv"))?, report)?;
    for g in &report.groups {
        let file = std::fs::File::create(dir.join(format!("scree_{}.csv", g.model.group)))?;
        write_scree_csv(file, &g.model)?;
        write_json(&dir.join(format!("pca_{}.json", g.model.group)), g)?;
    }
    for (index, fit) in report.indices.iter().zip(&report.fits) {
        let file = std::fs::File::create(dir.join(format!("overlay_{}.csv", index.index)))?;
        write_overlay_csv(file, fit, index)?;
    }
    Ok(())
}

pub fn group_of_index(report: &PipelineReport, index: &str) -> Option<Group> {
    report
        .groups
        .iter()
        .find(|g| g.indices.iter().any(|i| i == index))
        .map(|g| g.model.group)
}
