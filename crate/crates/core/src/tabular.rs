//! Columnar tables and the harmonization steps that turn raw source CSVs
//! into an analysis-ready study frame.
//!
//! Conventions, fixed here because the upstream sources do not fix them:
//! percentiles use linear interpolation between closest ranks (the
//! inclusive convention); the SUTVA exclusion band is expressed in
//! percentile points and excludes rows whose percentile rank falls inside
//! `[p - band, p + band]`; with `band = 0` rows at exactly the threshold
//! value are assigned to the treated arm.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty file: no header row")]
    EmptyFile,
    #[error("duplicate header `{0}`")]
    DuplicateHeader(String),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not numeric")]
    NotNumeric(String),
    #[error("column `{0}` has no aggregator")]
    NoAggregator(String),
    #[error("no date column found for period bucketing")]
    NoDateColumn,
    #[error("date cell `{0}` lacks a month, required for monthly bucketing")]
    MissingMonth(String),
    #[error("non-positive population {value} on row {row}")]
    NonPositivePopulation { row: usize, value: f64 },
    #[error("missing population on row {0} where a normalized column is present")]
    MissingPopulation(usize),
    #[error("column `{0}` was already normalized per capita")]
    AlreadyNormalized(String),
    #[error("degenerate threshold: all treatment values identical")]
    DegenerateThreshold,
    #[error("{arm} arm has {n} rows after exclusion, need at least 2")]
    ArmTooSmall { arm: &'static str, n: usize },
    #[error("no complete rows after dropping missing values")]
    NoCompleteRows,
    #[error("outcome value {value} on row {row} outside [0, 1]")]
    OutcomeOutOfRange { row: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Date,
}

/// A partially specified calendar date: year, optional month, optional day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Date {
    pub year: i32,
    pub month: Option<u32>,
    pub day: Option<u32>,
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.month, self.day) {
            (Some(m), Some(d)) => write!(f, "{:04}-{:02}-{:02}", self.year, m, d),
            (Some(m), None) => write!(f, "{:04}-{:02}", self.year, m),
            _ => write!(f, "{:04}", self.year),
        }
    }
}

impl Date {
    /// Accepts YYYY, YYYY-MM and YYYY-MM-DD.
    pub fn parse(s: &str) -> Option<Date> {
        let mut parts = s.trim().split('-');
        let year: i32 = parts.next()?.parse().ok()?;
        let month = match parts.next() {
            Some(m) => {
                let m: u32 = m.parse().ok()?;
                if !(1..=12).contains(&m) {
                    return None;
                }
                Some(m)
            }
            None => None,
        };
        let day = match parts.next() {
            Some(d) => {
                let d: u32 = d.parse().ok()?;
                if !(1..=31).contains(&d) {
                    return None;
                }
                Some(d)
            }
            None => None,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(Date { year, month, day })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Date(Date),
    Missing,
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn sort_key(&self) -> String {
        match self {
            Cell::Num(v) => format!("n:{v}"),
            Cell::Text(s) => format!("t:{s}"),
            Cell::Date(d) => format!("d:{d}"),
            Cell::Missing => "m:".to_string(),
        }
    }
}

/// An immutable columnar table. Every operation returns a new table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<(String, ColumnKind)>,
    rows: Vec<Vec<Cell>>,
    /// Columns already divided by population; re-normalization is refused.
    normalized: BTreeSet<String>,
}

/// What `load_csv` saw: row count and per-column missing-cell counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadSummary {
    pub rows_read: usize,
    pub missing_per_column: BTreeMap<String, usize>,
}

impl fmt::Display for LoadSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows read: {}", self.rows_read)?;
        for (col, n) in &self.missing_per_column {
            writeln!(f, "missing {col}: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Period {
    Annual,
    Monthly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Mean,
    Sum,
    Last,
}

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("n/a")
        || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("null")
}

impl Table {
    pub fn new(columns: Vec<(String, ColumnKind)>, rows: Vec<Vec<Cell>>) -> Table {
        debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
        Table { columns, rows, normalized: BTreeSet::new() }
    }

    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.columns
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn cell(&self, row: usize, col: &str) -> Result<&Cell, TableError> {
        Ok(&self.rows[row][self.column_index(col)?])
    }

    /// Numeric view of a column; missing and non-numeric cells are `None`.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<Option<f64>>, TableError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_num()).collect())
    }

    /// Keep only rows where `col` equals `value` (categorical match).
    pub fn filter_eq(&self, col: &str, value: &str) -> Result<Table, TableError> {
        let i = self.column_index(col)?;
        let rows = self
            .rows
            .iter()
            .filter(|r| matches!(&r[i], Cell::Text(s) if s == value))
            .cloned()
            .collect();
        Ok(Table { columns: self.columns.clone(), rows, normalized: self.normalized.clone() })
    }

    /// Group by `keys` plus the period bucket of the (single) date column
    /// and aggregate every other column. Aggregators skip missing cells;
    /// an all-missing group yields a missing cell. Output rows are in
    /// deterministic (keys, bucket) order.
    pub fn aggregate(
        &self,
        keys: &[&str],
        period: Period,
        spec: &BTreeMap<String, Aggregator>,
    ) -> Result<Table, TableError> {
        let key_idx: Vec<usize> =
            keys.iter().map(|k| self.column_index(k)).collect::<Result<_, _>>()?;
        let date_idx = self
            .columns
            .iter()
            .position(|(_, k)| *k == ColumnKind::Date)
            .ok_or(TableError::NoDateColumn)?;
        let mut value_idx: Vec<usize> = Vec::new();
        for (i, (name, _)) in self.columns.iter().enumerate() {
            if i == date_idx || key_idx.contains(&i) {
                continue;
            }
            let agg = spec.get(name).ok_or_else(|| TableError::NoAggregator(name.clone()))?;
            if matches!(agg, Aggregator::Mean | Aggregator::Sum)
                && self.columns[i].1 != ColumnKind::Numeric
            {
                return Err(TableError::NotNumeric(name.clone()));
            }
            value_idx.push(i);
        }
        for name in spec.keys() {
            self.column_index(name)?;
        }

        let mut groups: BTreeMap<(Vec<String>, Date), Vec<usize>> = BTreeMap::new();
        for (ri, row) in self.rows.iter().enumerate() {
            let date = match &row[date_idx] {
                Cell::Date(d) => *d,
                _ => continue, // rows without a date cannot be bucketed
            };
            let bucket = match period {
                Period::Annual => Date { year: date.year, month: None, day: None },
                Period::Monthly => Date {
                    year: date.year,
                    month: Some(
                        date.month.ok_or_else(|| TableError::MissingMonth(date.to_string()))?,
                    ),
                    day: None,
                },
            };
            let key: Vec<String> = key_idx.iter().map(|&i| row[i].sort_key()).collect();
            groups.entry((key, bucket)).or_default().push(ri);
        }

        let mut columns: Vec<(String, ColumnKind)> = Vec::new();
        for &i in &key_idx {
            columns.push(self.columns[i].clone());
        }
        columns.push(self.columns[date_idx].clone());
        for &i in &value_idx {
            columns.push(self.columns[i].clone());
        }

        let mut rows = Vec::with_capacity(groups.len());
        for ((_, bucket), members) in &groups {
            let first = members[0];
            let mut out: Vec<Cell> = Vec::with_capacity(columns.len());
            for &i in &key_idx {
                out.push(self.rows[first][i].clone());
            }
            out.push(Cell::Date(*bucket));
            for &i in &value_idx {
                let name = &self.columns[i].0;
                let agg = spec[name];
                out.push(match agg {
                    Aggregator::Mean | Aggregator::Sum => {
                        let vals: Vec<f64> =
                            members.iter().filter_map(|&r| self.rows[r][i].as_num()).collect();
                        if vals.is_empty() {
                            Cell::Missing
                        } else if agg == Aggregator::Sum {
                            Cell::Num(vals.iter().sum())
                        } else {
                            Cell::Num(vals.iter().sum::<f64>() / vals.len() as f64)
                        }
                    }
                    Aggregator::Last => members
                        .iter()
                        .rev()
                        .map(|&r| &self.rows[r][i])
                        .find(|c| !matches!(c, Cell::Missing))
                        .cloned()
                        .unwrap_or(Cell::Missing),
                });
            }
            rows.push(out);
        }
        Ok(Table { columns, rows, normalized: self.normalized.clone() })
    }

    /// Replace each listed column by value / population. Refuses to
    /// normalize the same column twice.
    pub fn per_capita_normalize(
        &self,
        cols: &[&str],
        population_col: &str,
    ) -> Result<Table, TableError> {
        let pop_idx = self.column_index(population_col)?;
        if self.columns[pop_idx].1 != ColumnKind::Numeric {
            return Err(TableError::NotNumeric(population_col.to_string()));
        }
        let col_idx: Vec<usize> = cols
            .iter()
            .map(|c| {
                if self.normalized.contains(*c) {
                    return Err(TableError::AlreadyNormalized(c.to_string()));
                }
                let i = self.column_index(c)?;
                if self.columns[i].1 != ColumnKind::Numeric {
                    return Err(TableError::NotNumeric(c.to_string()));
                }
                Ok(i)
            })
            .collect::<Result<_, _>>()?;

        let mut rows = self.rows.clone();
        for (ri, row) in rows.iter_mut().enumerate() {
            let pop = row[pop_idx].as_num();
            if let Some(p) = pop {
                if p <= 0.0 {
                    return Err(TableError::NonPositivePopulation { row: ri, value: p });
                }
            }
            for &ci in &col_idx {
                match (&row[ci], pop) {
                    (Cell::Num(v), Some(p)) => row[ci] = Cell::Num(v / p),
                    (Cell::Num(_), None) => return Err(TableError::MissingPopulation(ri)),
                    _ => {}
                }
            }
        }
        let mut normalized = self.normalized.clone();
        normalized.extend(cols.iter().map(|c| c.to_string()));
        Ok(Table { columns: self.columns.clone(), rows, normalized })
    }

    /// Left-outer join: append `other`'s non-key columns, matching rows on
    /// the key columns. Unmatched rows get missing cells; when `other` has
    /// duplicate keys the first occurrence wins.
    pub fn merge_on(&self, other: &Table, keys: &[&str]) -> Result<Table, TableError> {
        let self_keys: Vec<usize> =
            keys.iter().map(|k| self.column_index(k)).collect::<Result<_, _>>()?;
        let other_keys: Vec<usize> =
            keys.iter().map(|k| other.column_index(k)).collect::<Result<_, _>>()?;
        let other_vals: Vec<usize> = (0..other.columns.len())
            .filter(|i| !other_keys.contains(i))
            .collect();
        for &i in &other_vals {
            if self.column_index(&other.columns[i].0).is_ok() {
                return Err(TableError::DuplicateHeader(other.columns[i].0.clone()));
            }
        }
        let mut lookup: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for (ri, row) in other.rows.iter().enumerate() {
            let key: Vec<String> = other_keys.iter().map(|&i| row[i].sort_key()).collect();
            lookup.entry(key).or_insert(ri);
        }
        let mut columns = self.columns.clone();
        for &i in &other_vals {
            columns.push(other.columns[i].clone());
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let key: Vec<String> = self_keys.iter().map(|&i| row[i].sort_key()).collect();
                let mut out = row.clone();
                match lookup.get(&key) {
                    Some(&ri) => {
                        out.extend(other_vals.iter().map(|&i| other.rows[ri][i].clone()))
                    }
                    None => out.extend(other_vals.iter().map(|_| Cell::Missing)),
                }
                out
            })
            .collect();
        let mut normalized = self.normalized.clone();
        normalized.extend(other.normalized.iter().cloned());
        Ok(Table { columns, rows, normalized })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TableError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|(n, _)| n.as_str()))?;
        for row in &self.rows {
            let rec: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format!("{v}"),
                    Cell::Text(s) => s.clone(),
                    Cell::Date(d) => d.to_string(),
                    Cell::Missing => String::new(),
                })
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load a CSV against a declared schema. Columns not in the schema are
/// ignored; numeric cells that fail to parse become missing.
pub fn load_csv(
    path: &Path,
    schema: &[(&str, ColumnKind)],
) -> Result<(Table, LoadSummary), TableError> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, schema)
}

pub fn load_csv_str(
    text: &str,
    schema: &[(&str, ColumnKind)],
) -> Result<(Table, LoadSummary), TableError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
    let headers: Vec<String> = match reader.headers() {
        Ok(h) if !h.is_empty() => h.iter().map(str::to_string).collect(),
        _ => return Err(TableError::EmptyFile),
    };
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(TableError::EmptyFile);
    }
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.clone()) {
            return Err(TableError::DuplicateHeader(h.clone()));
        }
    }
    let mut source_idx: Vec<usize> = Vec::with_capacity(schema.len());
    for (name, _) in schema {
        let i = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))?;
        source_idx.push(i);
    }

    let columns: Vec<(String, ColumnKind)> =
        schema.iter().map(|(n, k)| (n.to_string(), *k)).collect();
    let mut missing: BTreeMap<String, usize> =
        columns.iter().map(|(n, _)| (n.clone(), 0)).collect();
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for ((name, kind), &si) in columns.iter().zip(&source_idx) {
            let raw = record.get(si).unwrap_or("");
            let cell = match kind {
                _ if is_missing_token(raw) => Cell::Missing,
                ColumnKind::Numeric => match raw.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Num(v),
                    _ => Cell::Missing,
                },
                ColumnKind::Categorical => Cell::Text(raw.trim().to_string()),
                ColumnKind::Date => match Date::parse(raw) {
                    Some(d) => Cell::Date(d),
                    None => Cell::Missing,
                },
            };
            if matches!(cell, Cell::Missing) {
                *missing.get_mut(name).unwrap() += 1;
            }
            row.push(cell);
        }
        rows.push(row);
    }
    let summary = LoadSummary { rows_read: rows.len(), missing_per_column: missing };
    Ok((Table::new(columns, rows), summary))
}

/// Percentile with linear interpolation between closest ranks (the
/// inclusive convention): position `p/100 * (n-1)` on the sorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    assert!((0.0..=100.0).contains(&p));
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Which columns of a harmonized table play which causal role.
#[derive(Debug, Clone)]
pub struct FrameColumns {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<String>,
}

/// Analysis-ready view: binary treatment, numeric outcome, covariate block.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFrame {
    pub treatment: Vec<bool>,
    pub outcome: Vec<f64>,
    /// Row-major covariate matrix, one inner vec per row.
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    pub threshold_percentile: f64,
    pub threshold_value: f64,
    /// Rows inside the SUTVA exclusion band.
    pub excluded_count: usize,
    /// Rows dropped because T, Y or Z had a missing value.
    pub dropped_missing: usize,
}

impl StudyFrame {
    /// Direct construction, for synthetic studies where the treatment is
    /// already binary. Validates arm sizes and finiteness only; the
    /// [0, 1] outcome-range rule belongs to the GAM pipeline and is
    /// enforced by the study runner.
    pub fn from_parts(
        treatment: Vec<bool>,
        outcome: Vec<f64>,
        covariates: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<StudyFrame, TableError> {
        let frame = StudyFrame {
            treatment,
            outcome,
            covariates,
            covariate_names,
            threshold_percentile: 50.0,
            threshold_value: 0.5,
            excluded_count: 0,
            dropped_missing: 0,
        };
        frame.validate_arms()?;
        Ok(frame)
    }

    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    fn validate_arms(&self) -> Result<(), TableError> {
        if self.n_treated() < 2 {
            return Err(TableError::ArmTooSmall { arm: "treated", n: self.n_treated() });
        }
        if self.n_control() < 2 {
            return Err(TableError::ArmTooSmall { arm: "control", n: self.n_control() });
        }
        Ok(())
    }

    /// A new frame keeping only the listed row indices (duplicates allowed,
    /// for bootstrap resampling). Does not re-validate arms.
    pub fn select_rows(&self, idx: &[usize]) -> StudyFrame {
        StudyFrame {
            treatment: idx.iter().map(|&i| self.treatment[i]).collect(),
            outcome: idx.iter().map(|&i| self.outcome[i]).collect(),
            covariates: idx.iter().map(|&i| self.covariates[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
            ..*self
        }
    }

    pub fn with_treatment(&self, treatment: Vec<bool>) -> StudyFrame {
        StudyFrame {
            treatment,
            outcome: self.outcome.clone(),
            covariates: self.covariates.clone(),
            covariate_names: self.covariate_names.clone(),
            ..*self
        }
    }

    /// Append one extra covariate column (used by the random-common-cause
    /// refutation).
    pub fn with_extra_covariate(&self, name: &str, values: Vec<f64>) -> StudyFrame {
        let mut covariates = self.covariates.clone();
        for (row, v) in covariates.iter_mut().zip(&values) {
            row.push(*v);
        }
        let mut covariate_names = self.covariate_names.clone();
        covariate_names.push(name.to_string());
        StudyFrame {
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
            covariates,
            covariate_names,
            ..*self
        }
    }
}

/// Binarize a continuous treatment column at a percentile threshold and
/// assemble the study frame.
///
/// Rows with any missing value among treatment, outcome and covariates are
/// dropped first (listwise deletion, counted). The threshold `t*` is the
/// interpolated percentile of the remaining treatment values. With
/// `band = 0` the complete rows are partitioned: `T = 1` iff value >= t*.
/// With `band > 0`, a row whose percentile rank `100 * rank / n` (rank =
/// number of values <= its own) falls inside `[p - band, p + band]` is
/// excluded; higher ranks are treated, lower ranks control.
pub fn binarize_treatment(
    table: &Table,
    cols: &FrameColumns,
    percentile_pt: f64,
    band: f64,
) -> Result<StudyFrame, TableError> {
    assert!(percentile_pt > 0.0 && percentile_pt < 100.0);
    assert!(band >= 0.0);
    let t_raw = table.numeric_column(&cols.treatment)?;
    let y_raw = table.numeric_column(&cols.outcome)?;
    let z_raw: Vec<Vec<Option<f64>>> = cols
        .covariates
        .iter()
        .map(|c| table.numeric_column(c))
        .collect::<Result<_, _>>()?;

    let mut complete: Vec<usize> = Vec::new();
    let mut dropped_missing = 0usize;
    for i in 0..table.n_rows() {
        let ok = t_raw[i].is_some()
            && y_raw[i].is_some()
            && z_raw.iter().all(|col| col[i].is_some());
        if ok {
            complete.push(i);
        } else {
            dropped_missing += 1;
        }
    }
    if complete.is_empty() {
        return Err(TableError::NoCompleteRows);
    }

    let values: Vec<f64> = complete.iter().map(|&i| t_raw[i].unwrap()).collect();
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if vmin == vmax {
        return Err(TableError::DegenerateThreshold);
    }
    let t_star = percentile(&values, percentile_pt);

    let n = values.len() as f64;
    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    let mut covariates = Vec::new();
    let mut excluded_count = 0usize;
    for (ci, &row) in complete.iter().enumerate() {
        let v = values[ci];
        let assigned = if band == 0.0 {
            Some(v >= t_star)
        } else {
            let rank = values.iter().filter(|&&w| w <= v).count() as f64;
            let r = 100.0 * rank / n;
            if r >= percentile_pt - band && r <= percentile_pt + band {
                None
            } else {
                Some(r > percentile_pt + band)
            }
        };
        match assigned {
            None => excluded_count += 1,
            Some(t) => {
                treatment.push(t);
                outcome.push(y_raw[row].unwrap());
                covariates.push(z_raw.iter().map(|col| col[row].unwrap()).collect());
            }
        }
    }

    let frame = StudyFrame {
        treatment,
        outcome,
        covariates,
        covariate_names: cols.covariates.clone(),
        threshold_percentile: percentile_pt,
        threshold_value: t_star,
        excluded_count,
        dropped_missing,
    };
    frame.validate_arms()?;
    Ok(frame)
}
