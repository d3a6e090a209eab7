//! Loading, validation, grouping and standardization of annual multi-cause
//! burden tables, plus the calendar-year to time-index mapping.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("years are not consecutive: {before} is followed by {after}")]
    GapInYears { before: i32, after: i32 },
    #[error("year {0} appears more than once")]
    DuplicateYear(i32),
    #[error("cause `{0}` has no group assignment")]
    UnmappedCause(String),
    #[error("negative value {value} for cause `{cause}` in {year}")]
    NegativeValue { year: i32, cause: String, value: f64 },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("invalid group config: {0}")]
    GroupConfig(String),
    #[error("cause `{cause}` is constant within the analysed years")]
    ConstantColumn { cause: String },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("group `{group}` needs at least 2 causes, has {got}")]
    TooFewCauses { group: Group, got: usize },
    #[error("year {year} maps to a non-positive time index with offset {offset}")]
    NonPositiveIndex { year: i32, offset: i32 },
}

/// Disease category a cause belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Communicable,
    Noncommunicable,
    Injury,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Communicable, Group::Noncommunicable, Group::Injury];

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Communicable => "communicable",
            Group::Noncommunicable => "noncommunicable",
            Group::Injury => "injury",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "communicable" => Ok(Group::Communicable),
            "noncommunicable" => Ok(Group::Noncommunicable),
            "injury" => Ok(Group::Injury),
            other => Err(IngestError::GroupConfig(format!("unknown group `{other}`"))),
        }
    }
}

/// Cause name to group assignment, read from a TOML file of `cause = "group"`
/// pairs. A `[groups]` table wrapping the pairs is also accepted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    map: BTreeMap<String, Group>,
}

impl GroupConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cause: impl Into<String>, group: Group) {
        self.map.insert(cause.into(), group);
    }

    pub fn get(&self, cause: &str) -> Option<Group> {
        self.map.get(cause).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Group)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        let value: toml::Table =
            toml::from_str(text).map_err(|e| IngestError::GroupConfig(e.to_string()))?;
        let table = match value.get("groups") {
            Some(toml::Value::Table(inner)) if value.len() == 1 => inner.clone(),
            _ => value,
        };
        let mut cfg = GroupConfig::new();
        for (cause, v) in table {
            let name = v.as_str().ok_or_else(|| {
                IngestError::GroupConfig(format!("group for `{cause}` must be a string"))
            })?;
            cfg.insert(cause, name.parse()?);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(IngestError::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for (cause, group) in &self.map {
            out.push_str(&format!("{} = \"{}\"\n", toml_key(cause), group));
        }
        out
    }
}

fn toml_key(key: &str) -> String {
    if !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        key.to_string()
    } else {
        format!("\"{}\"", key.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// Annual burden counts per cause. `values[i][j]` is the count for
/// `years[i]` and `causes[j]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DalyTable {
    years: Vec<i32>,
    causes: Vec<String>,
    groups: Vec<Group>,
    values: Vec<Vec<f64>>,
}

impl DalyTable {
    /// Builds a table from unsorted rows, checking every table invariant.
    pub fn new(
        causes: Vec<String>,
        mut rows: Vec<(i32, Vec<f64>)>,
        config: &GroupConfig,
    ) -> Result<Self, IngestError> {
        let groups = causes
            .iter()
            .map(|c| config.get(c).ok_or_else(|| IngestError::UnmappedCause(c.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(IngestError::EmptyTable);
        }
        rows.sort_by_key(|(year, _)| *year);
        for pair in rows.windows(2) {
            let (a, b) = (pair[0].0, pair[1].0);
            if a == b {
                return Err(IngestError::DuplicateYear(a));
            }
            if b != a + 1 {
                return Err(IngestError::GapInYears { before: a, after: b });
            }
        }
        for (i, (year, row)) in rows.iter().enumerate() {
            if row.len() != causes.len() {
                return Err(IngestError::MalformedRow {
                    line: i + 2,
                    reason: format!("expected {} values, found {}", causes.len(), row.len()),
                });
            }
            for (cause, &value) in causes.iter().zip(row) {
                if !value.is_finite() {
                    return Err(IngestError::MalformedRow {
                        line: i + 2,
                        reason: format!("non-finite value for `{cause}`"),
                    });
                }
                if value < 0.0 {
                    return Err(IngestError::NegativeValue {
                        year: *year,
                        cause: cause.clone(),
                        value,
                    });
                }
            }
        }
        let (years, values) = rows.into_iter().unzip();
        Ok(Self { years, causes, groups, values })
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn causes(&self) -> &[String] {
        &self.causes
    }

    pub fn group_of(&self, cause_index: usize) -> Group {
        self.groups[cause_index]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, year_index: usize, cause_index: usize) -> f64 {
        self.values[year_index][cause_index]
    }

    pub fn column(&self, cause_index: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[cause_index]).collect()
    }

    /// Column indices of the causes in `group`, in table order.
    pub fn group_columns(&self, group: Group) -> Vec<usize> {
        (0..self.causes.len()).filter(|&j| self.groups[j] == group).collect()
    }

    /// Groups that have at least one cause, in canonical order.
    pub fn present_groups(&self) -> Vec<Group> {
        Group::ALL
            .into_iter()
            .filter(|g| self.groups.contains(g))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["year".to_string()];
        header.extend(self.causes.iter().cloned());
        w.write_record(&header).map_err(csv_io)?;
        for (year, row) in self.years.iter().zip(&self.values) {
            let mut record = vec![year.to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> IngestError {
    IngestError::Io(std::io::Error::other(e))
}

/// Reads a `year,<cause>,...` CSV file and validates it against `config`.
pub fn load_daly_csv(path: impl AsRef<Path>, config: &GroupConfig) -> Result<DalyTable, IngestError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    read_daly_csv(file, config)
}

pub fn read_daly_csv<R: Read>(reader: R, config: &GroupConfig) -> Result<DalyTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::MalformedHeader(e.to_string()))?
        .clone();
    match header.get(0) {
        Some(first) if first.trim_start_matches('\u{feff}').eq_ignore_ascii_case("year") => {}
        other => {
            return Err(IngestError::MalformedHeader(format!(
                "first column must be `year`, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    let causes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if causes.is_empty() {
        return Err(IngestError::MalformedHeader("no cause columns".into()));
    }
    for (j, cause) in causes.iter().enumerate() {
        if cause.is_empty() {
            return Err(IngestError::MalformedHeader(format!("column {} has an empty name", j + 2)));
        }
        if causes[..j].contains(cause) {
            return Err(IngestError::MalformedHeader(format!("duplicate cause `{cause}`")));
        }
        if config.get(cause).is_none() {
            return Err(IngestError::UnmappedCause(cause.clone()));
        }
    }

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IngestError::MalformedRow { line, reason: e.to_string() })?;
        if record.len() != causes.len() + 1 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", causes.len() + 1, record.len()),
            });
        }
        let year: i32 = record[0].parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("year `{}` is not an integer", &record[0]),
        })?;
        let mut values = Vec::with_capacity(causes.len());
        for (cell, cause) in record.iter().skip(1).zip(&causes) {
            let v: f64 = cell.parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("value `{cell}` for `{cause}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("value `{cell}` for `{cause}` is not finite"),
                });
            }
            values.push(v);
        }
        rows.push((year, values));
    }
    DalyTable::new(causes, rows, config)
}

/// Column-wise z-scores using the sample (n - 1) standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StandardizedMatrix {
    column_names: Vec<String>,
    z: Vec<Vec<f64>>,
    means: Vec<f64>,
    std_devs: Vec<f64>,
}

impl StandardizedMatrix {
    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Row-major z-scores.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    pub fn n_rows(&self) -> usize {
        self.z.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.z.iter().map(|row| row[j]).collect()
    }
}

/// Standardizes named columns. Each inner vector of `columns` is one column.
pub fn standardize_columns(
    names: Vec<String>,
    columns: &[Vec<f64>],
) -> Result<StandardizedMatrix, IngestError> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 3 {
        return Err(IngestError::TooFewRows { needed: 3, got: n });
    }
    let mut means = Vec::with_capacity(columns.len());
    let mut std_devs = Vec::with_capacity(columns.len());
    for (name, col) in names.iter().zip(columns) {
        if col.len() != n {
            return Err(IngestError::MalformedRow {
                line: 0,
                reason: format!("column `{name}` has {} rows, expected {n}", col.len()),
            });
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        // exact zero or pure rounding residue of identical values
        if !(sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE)) {
            return Err(IngestError::ConstantColumn { cause: name.clone() });
        }
        means.push(mean);
        std_devs.push(sd);
    }
    let z = (0..n)
        .map(|i| {
            columns
                .iter()
                .zip(means.iter().zip(&std_devs))
                .map(|(col, (m, s))| (col[i] - m) / s)
                .collect()
        })
        .collect();
    Ok(StandardizedMatrix { column_names: names, z, means, std_devs })
}

/// Standardizes the causes of one group.
pub fn standardize(table: &DalyTable, group: Group) -> Result<StandardizedMatrix, IngestError> {
    let cols = table.group_columns(group);
    if cols.len() < 2 {
        return Err(IngestError::TooFewCauses { group, got: cols.len() });
    }
    let names = cols.iter().map(|&j| table.causes[j].clone()).collect();
    let columns: Vec<Vec<f64>> = cols.iter().map(|&j| table.column(j)).collect();
    standardize_columns(names, &columns)
}

/// Calendar year to model time index: `t = year - offset_year`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeIndexMap {
    pub offset_year: i32,
}

impl Default for TimeIndexMap {
    fn default() -> Self {
        Self { offset_year: 1989 }
    }
}

impl TimeIndexMap {
    pub fn new(offset_year: i32) -> Self {
        Self { offset_year }
    }

    pub fn to_time_index(&self, year: i32) -> Result<u32, IngestError> {
        to_time_index(year, *self)
    }

    pub fn to_year(&self, t: u32) -> i32 {
        self.offset_year + t as i32
    }
}

pub fn to_time_index(year: i32, map: TimeIndexMap) -> Result<u32, IngestError> {
    let t = i64::from(year) - i64::from(map.offset_year);
    if t < 1 {
        return Err(IngestError::NonPositiveIndex { year, offset: map.offset_year });
    }
    Ok(t as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(pairs: &[(&str, Group)]) -> GroupConfig {
        let mut cfg = GroupConfig::new();
        for (c, g) in pairs {
            cfg.insert(*c, *g);
        }
        cfg
    }

    fn three_cause_config() -> GroupConfig {
        config(&[
            ("hiv", Group::Communicable),
            ("diarrhea", Group::Communicable),
            ("cancers", Group::Noncommunicable),
        ])
    }

    #[test]
    fn reads_27_row_file() {
        let mut text = String::from("year,hiv,diarrhea,cancers\n");
        // deliberately out of order
        for year in (1990..=2016).rev() {
            let k = (year - 1989) as f64;
            text.push_str(&format!("{year},{},{},{}\n", 100.0 + k, 50.0 * k, 7.5 + k * k));
        }
        let table = read_daly_csv(text.as_bytes(), &three_cause_config()).unwrap();
        assert_eq!(table.years().len(), 27);
        assert_eq!(table.years()[0], 1990);
        assert_eq!(table.years()[26], 2016);
        assert_eq!(table.value(0, 0), 101.0);
        assert_eq!(table.group_columns(Group::Communicable), vec![0, 1]);
    }

    #[test]
    fn gap_in_years() {
        let text = "year,hiv,diarrhea,cancers\n1990,1,2,3\n1992,1,2,3\n";
        let err = read_daly_csv(text.as_bytes(), &three_cause_config()).unwrap_err();
        assert!(matches!(err, IngestError::GapInYears { before: 1990, after: 1992 }));
    }

    #[test]
    fn unmapped_cause() {
        let cfg = config(&[("diarrhea", Group::Communicable), ("cancers", Group::Noncommunicable)]);
        let text = "year,hiv,diarrhea,cancers\n1990,1,2,3\n";
        let err = read_daly_csv(text.as_bytes(), &cfg).unwrap_err();
        assert!(matches!(err, IngestError::UnmappedCause(c) if c == "hiv"));
    }

    #[test]
    fn malformed_rows() {
        let cfg = three_cause_config();
        for text in [
            "year,hiv,diarrhea,cancers\n1990,1,x,3\n",
            "year,hiv,diarrhea,cancers\n1990,1,2\n",
            "year,hiv,diarrhea,cancers\n1990,1,,3\n",
            "year,hiv,diarrhea,cancers\n1990.5,1,2,3\n",
            "year,hiv,diarrhea,cancers\n1990,1,2,NaN\n",
            "year,hiv,diarrhea,cancers\n1990,1,\"1,000\",3\n",
        ] {
            let err = read_daly_csv(text.as_bytes(), &cfg).unwrap_err();
            assert!(matches!(err, IngestError::MalformedRow { line: 2, .. }), "{text}: {err}");
        }
    }

    #[test]
    fn negative_and_duplicate() {
        let cfg = three_cause_config();
        let err = read_daly_csv("year,hiv,diarrhea,cancers\n1990,1,-2,3\n".as_bytes(), &cfg)
            .unwrap_err();
        assert!(matches!(err, IngestError::NegativeValue { year: 1990, .. }));
        let err = read_daly_csv(
            "year,hiv,diarrhea,cancers\n1990,1,2,3\n1990,1,2,3\n".as_bytes(),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::DuplicateYear(1990)));
    }

    #[test]
    fn header_must_start_with_year() {
        let err = read_daly_csv("date,hiv\n1990,1\n".as_bytes(), &three_cause_config())
            .unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeader(_)));
    }

    #[test]
    fn missing_file() {
        let err = load_daly_csv("/nonexistent/burden.csv", &GroupConfig::new()).unwrap_err();
        assert!(matches!(err, IngestError::MissingFile(_)));
    }

    #[test]
    fn group_config_formats() {
        let flat = GroupConfig::from_toml_str("hiv = \"communicable\"\n\"self-harm\" = \"injury\"\n")
            .unwrap();
        assert_eq!(flat.get("hiv"), Some(Group::Communicable));
        assert_eq!(flat.get("self-harm"), Some(Group::Injury));
        let nested = GroupConfig::from_toml_str("[groups]\nhiv = \"communicable\"\n").unwrap();
        assert_eq!(nested.get("hiv"), Some(Group::Communicable));
        assert!(GroupConfig::from_toml_str("hiv = \"viral\"").is_err());
        assert_eq!(GroupConfig::from_toml_str(&flat.to_toml_string()).unwrap(), flat);
    }

    #[test]
    fn standardize_small_column() {
        let z = standardize_columns(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0, 3.0], vec![4.0, 0.0, 2.0]],
        )
        .unwrap();
        assert_eq!(z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(z.means()[0], 2.0);
        assert_eq!(z.std_devs()[0], 1.0);
    }

    #[test]
    fn standardize_rejects_constant_and_short() {
        let err = standardize_columns(
            vec!["a".into(), "flat".into()],
            &[vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]],
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::ConstantColumn { cause } if cause == "flat"));
        let err = standardize_columns(vec!["a".into()], &[vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, IngestError::TooFewRows { needed: 3, got: 2 }));
    }

    #[test]
    fn standardize_group_needs_two_causes() {
        let text = "year,hiv,diarrhea,cancers\n1990,1,2,3\n1991,2,3,5\n1992,4,1,6\n";
        let table = read_daly_csv(text.as_bytes(), &three_cause_config()).unwrap();
        assert!(standardize(&table, Group::Communicable).is_ok());
        assert!(matches!(
            standardize(&table, Group::Noncommunicable),
            Err(IngestError::TooFewCauses { got: 1, .. })
        ));
    }

    #[test]
    fn time_index() {
        let map = TimeIndexMap::default();
        assert_eq!(to_time_index(1990, map).unwrap(), 1);
        assert_eq!(to_time_index(2020, map).unwrap(), 31);
        assert!(matches!(
            to_time_index(1989, map),
            Err(IngestError::NonPositiveIndex { year: 1989, offset: 1989 })
        ));
        assert_eq!(map.to_year(31), 2020);
    }
}
