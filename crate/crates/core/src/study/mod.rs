//! Config-driven study runner: ingestion, harmonization, identification,
//! estimation and refutation over a (threshold x method) grid.

mod report;

pub use report::{
    emit_report, render_csv, render_json, render_text, report_from_csv, report_from_json,
    OutputFormat,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    bootstrap_inference, BaseLearner, EffectEstimate, EstimateError, EstimatorSpec, Method,
    DEFAULT_ALPHA, DEFAULT_BOOTSTRAP, DEFAULT_CLIP,
};
use crate::graph::{parse_dag, CausalDag, GraphError};
use crate::learners::ForestParams;
use crate::refute::{
    refute_placebo, refute_random_common_cause, refute_subset_removal, RefutationReport,
    RefuteError, DEFAULT_REMOVAL_FRACTION, DEFAULT_TRIALS,
};
use crate::seed;
use crate::tabular::{
    binarize_treatment, load_csv, Aggregator, ColumnKind, FrameColumns, Period, StudyFrame,
    Table, TableError,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("i/o on `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("area `{0}` has no rows after filtering")]
    EmptyArea(String),
    #[error("outcome value {value} on row {row} outside [0, 1]")]
    OutcomeOutOfRange { row: usize, value: f64 },
}

/// A fully validated study configuration, usually read from a TOML file
/// with [`StudyConfig::from_toml_path`]. Relative paths resolve against
/// the config file's directory.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub seed: u64,
    pub dag_path: PathBuf,
    /// "country" for the whole table, otherwise a district name.
    pub area: String,
    pub period: Period,
    pub thresholds: Vec<f64>,
    pub band: f64,
    pub methods: Vec<EstimatorSpec>,
    pub bootstrap: usize,
    pub trials: usize,
    pub removal_fraction: f64,
    pub sources: Vec<SourceConfig>,
    pub district_col: String,
    pub date_col: String,
    pub population_col: String,
    pub per_capita: Vec<String>,
    pub aggregators: BTreeMap<String, Aggregator>,
    /// Directory reports are written into (CLI `--out` overrides).
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SourceConfig {
    pub path: PathBuf,
    /// Numeric value columns this file contributes.
    pub columns: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    dag: String,
    area: String,
    period: String,
    thresholds: Vec<f64>,
    #[serde(default = "default_band")]
    band: f64,
    methods: Vec<String>,
    #[serde(default = "default_bootstrap")]
    bootstrap: usize,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_fraction")]
    removal_fraction: f64,
    #[serde(default = "default_matching_k")]
    matching_k: usize,
    #[serde(default = "default_out_dir")]
    out_dir: String,
    #[serde(default)]
    forest: RawForest,
    columns: RawColumns,
    sources: Vec<RawSource>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawForest {
    n_trees: Option<usize>,
    max_depth: Option<usize>,
    min_leaf: Option<usize>,
    feature_fraction: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumns {
    district: String,
    date: String,
    population: String,
    #[serde(default)]
    per_capita: Vec<String>,
    #[serde(default)]
    aggregators: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    path: String,
    columns: Vec<String>,
}

fn default_band() -> f64 {
    5.0
}
fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}
fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_fraction() -> f64 {
    DEFAULT_REMOVAL_FRACTION
}
fn default_matching_k() -> usize {
    1
}
fn default_out_dir() -> String {
    ".".into()
}

impl StudyConfig {
    pub fn from_toml_path(path: &Path) -> Result<StudyConfig, StudyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| StudyError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        StudyConfig::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<StudyConfig, StudyError> {
        let raw: RawConfig = toml::from_str(text)?;
        if raw.thresholds.is_empty() {
            return Err(StudyError::Invalid("thresholds must be non-empty".into()));
        }
        for &t in &raw.thresholds {
            if !(t > 0.0 && t < 100.0) {
                return Err(StudyError::Invalid(format!("threshold {t} outside (0, 100)")));
            }
        }
        if raw.methods.is_empty() {
            return Err(StudyError::Invalid("methods must be non-empty".into()));
        }
        if raw.band < 0.0 {
            return Err(StudyError::Invalid(format!("band {} must be >= 0", raw.band)));
        }
        let period = match raw.period.as_str() {
            "annual" => Period::Annual,
            "monthly" => Period::Monthly,
            other => return Err(StudyError::Invalid(format!("unknown period `{other}`"))),
        };
        let mut forest = ForestParams::default();
        if let Some(v) = raw.forest.n_trees {
            forest.n_trees = v;
        }
        if let Some(v) = raw.forest.max_depth {
            forest.max_depth = v;
        }
        if let Some(v) = raw.forest.min_leaf {
            forest.min_leaf = v;
        }
        if let Some(v) = raw.forest.feature_fraction {
            if !(v > 0.0 && v <= 1.0) {
                return Err(StudyError::Invalid(format!(
                    "feature_fraction {v} outside (0, 1]"
                )));
            }
            forest.feature_fraction = v;
        }
        let methods = raw
            .methods
            .iter()
            .map(|m| match m.as_str() {
                "lr" => Ok(EstimatorSpec::Lr),
                "matching" => Ok(EstimatorSpec::Matching { k: raw.matching_k }),
                "ipsw" => Ok(EstimatorSpec::Ipsw { clip: DEFAULT_CLIP }),
                "tlearner" => {
                    Ok(EstimatorSpec::TLearner { base: BaseLearner::Forest(forest.clone()) })
                }
                "xlearner" => {
                    Ok(EstimatorSpec::XLearner { base: BaseLearner::Forest(forest.clone()) })
                }
                other => Err(StudyError::Invalid(format!("unknown method `{other}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let aggregators = raw
            .columns
            .aggregators
            .iter()
            .map(|(k, v)| {
                let agg = match v.as_str() {
                    "mean" => Aggregator::Mean,
                    "sum" => Aggregator::Sum,
                    "last" => Aggregator::Last,
                    other => {
                        return Err(StudyError::Invalid(format!("unknown aggregator `{other}`")))
                    }
                };
                Ok((k.clone(), agg))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Ok(StudyConfig {
            seed: raw.seed,
            dag_path: base_dir.join(raw.dag),
            area: raw.area,
            period,
            thresholds: raw.thresholds,
            band: raw.band,
            methods,
            bootstrap: raw.bootstrap,
            trials: raw.trials,
            removal_fraction: raw.removal_fraction,
            sources: raw
                .sources
                .into_iter()
                .map(|s| SourceConfig { path: base_dir.join(s.path), columns: s.columns })
                .collect(),
            district_col: raw.columns.district,
            date_col: raw.columns.date,
            population_col: raw.columns.population,
            per_capita: raw.columns.per_capita,
            aggregators,
            out_dir: base_dir.join(raw.out_dir),
        })
    }
}

/// Per-threshold frame statistics (or the reason no frame was built).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMeta {
    pub threshold: f64,
    pub threshold_value: Option<f64>,
    pub n_used: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub excluded_band: usize,
    pub dropped_missing: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellOutcome {
    Estimated {
        estimate: EffectEstimate,
        placebo: RefutationReport,
        rcc: RefutationReport,
        rsr: RefutationReport,
    },
    Inestimable {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub threshold: f64,
    pub method: Method,
    /// Human-readable method label, e.g. "T-L (RF)".
    pub method_label: String,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub area: String,
    pub seed: u64,
    pub adjustment_set: Vec<String>,
    /// Rows in the harmonized (aggregated) table before trimming.
    pub rows_harmonized: usize,
    pub thresholds: Vec<ThresholdMeta>,
    pub cells: Vec<ReportCell>,
}

impl StudyReport {
    pub fn all_estimated(&self) -> bool {
        self.cells.iter().all(|c| matches!(c.outcome, CellOutcome::Estimated { .. }))
    }
}

fn method_label(spec: &EstimatorSpec) -> String {
    match spec {
        EstimatorSpec::TLearner { base: BaseLearner::Forest(_) } => "T-L (RF)".into(),
        EstimatorSpec::XLearner { base: BaseLearner::Forest(_) } => "X-L (RF)".into(),
        other => other.method().to_string(),
    }
}

/// Load, merge and harmonize the configured sources into the analysis
/// table: filter to the area, normalize per capita, aggregate by district
/// and period bucket.
pub fn harmonize(config: &StudyConfig, dag: &CausalDag) -> Result<Table, StudyError> {
    let mut merged: Option<Table> = None;
    for source in &config.sources {
        let mut schema: Vec<(&str, ColumnKind)> = vec![
            (&config.district_col, ColumnKind::Categorical),
            (&config.date_col, ColumnKind::Date),
        ];
        for c in &source.columns {
            schema.push((c, ColumnKind::Numeric));
        }
        let (table, _summary) = load_csv(&source.path, &schema)?;
        merged = Some(match merged {
            None => table,
            Some(acc) => acc.merge_on(&table, &[&config.district_col, &config.date_col])?,
        });
    }
    let mut table = merged.ok_or_else(|| StudyError::Invalid("no sources configured".into()))?;
    for node in dag.nodes() {
        table.column_index(node)?;
    }
    if config.area != "country" {
        table = table.filter_eq(&config.district_col, &config.area)?;
        if table.n_rows() == 0 {
            return Err(StudyError::EmptyArea(config.area.clone()));
        }
    }
    if !config.per_capita.is_empty() {
        let cols: Vec<&str> = config.per_capita.iter().map(String::as_str).collect();
        table = table.per_capita_normalize(&cols, &config.population_col)?;
    }
    let mut spec: BTreeMap<String, Aggregator> = BTreeMap::new();
    for (name, kind) in table.columns() {
        if name == &config.district_col || *kind == ColumnKind::Date {
            continue;
        }
        let agg = config.aggregators.get(name).copied().unwrap_or(Aggregator::Mean);
        spec.insert(name.clone(), agg);
    }
    Ok(table.aggregate(&[&config.district_col], config.period, &spec)?)
}

fn check_outcome_range(frame: &StudyFrame) -> Result<(), StudyError> {
    for (row, &y) in frame.outcome.iter().enumerate() {
        if !(0.0..=1.0).contains(&y) {
            return Err(StudyError::OutcomeOutOfRange { row, value: y });
        }
    }
    Ok(())
}

/// Execute the full (threshold x method) grid. Per-cell failures are
/// recorded in the report rather than aborting the study.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, StudyError> {
    let dag_text = std::fs::read_to_string(&config.dag_path)
        .map_err(|source| StudyError::Io { path: config.dag_path.clone(), source })?;
    let dag = parse_dag(&dag_text, None, None)?;
    let adjustment = dag.parent_adjustment_set();
    let covariates: Vec<String> = adjustment.members.iter().cloned().collect();
    let table = harmonize(config, &dag)?;
    let frame_cols = FrameColumns {
        treatment: dag.treatment().to_string(),
        outcome: dag.outcome().to_string(),
        covariates: covariates.clone(),
    };

    let mut thresholds = Vec::new();
    let mut cells = Vec::new();
    for &p in &config.thresholds {
        let frame = binarize_treatment(&table, &frame_cols, p, config.band)
            .map_err(StudyError::from)
            .and_then(|f| {
                check_outcome_range(&f)?;
                Ok(f)
            });
        match frame {
            Ok(frame) => {
                thresholds.push(ThresholdMeta {
                    threshold: p,
                    threshold_value: Some(frame.threshold_value),
                    n_used: frame.n(),
                    n_treated: frame.n_treated(),
                    n_control: frame.n_control(),
                    excluded_band: frame.excluded_count,
                    dropped_missing: frame.dropped_missing,
                    error: None,
                });
                for spec in &config.methods {
                    cells.push(run_cell(config, spec, &frame, p));
                }
            }
            Err(e) => {
                let reason = e.to_string();
                thresholds.push(ThresholdMeta {
                    threshold: p,
                    threshold_value: None,
                    n_used: 0,
                    n_treated: 0,
                    n_control: 0,
                    excluded_band: 0,
                    dropped_missing: 0,
                    error: Some(reason.clone()),
                });
                for spec in &config.methods {
                    cells.push(ReportCell {
                        threshold: p,
                        method: spec.method(),
                        method_label: method_label(spec),
                        outcome: CellOutcome::Inestimable { reason: reason.clone() },
                    });
                }
            }
        }
    }
    Ok(StudyReport {
        area: config.area.clone(),
        seed: config.seed,
        adjustment_set: covariates,
        rows_harmonized: table.n_rows(),
        thresholds,
        cells,
    })
}

fn run_cell(
    config: &StudyConfig,
    spec: &EstimatorSpec,
    frame: &StudyFrame,
    threshold: f64,
) -> ReportCell {
    // every cell gets its own seed stream, so removing one method or
    // threshold from the config cannot change any other cell
    let cell_seed =
        seed::derive(config.seed, &format!("cell-{threshold}-{}", spec.method()));
    let outcome = run_cell_inner(config, spec, frame, cell_seed)
        .unwrap_or_else(|reason| CellOutcome::Inestimable { reason });
    ReportCell {
        threshold,
        method: spec.method(),
        method_label: method_label(spec),
        outcome,
    }
}

fn run_cell_inner(
    config: &StudyConfig,
    spec: &EstimatorSpec,
    frame: &StudyFrame,
    cell_seed: u64,
) -> Result<CellOutcome, String> {
    let fmt_e = |e: EstimateError| e.to_string();
    let fmt_r = |e: RefuteError| e.to_string();
    let estimate = bootstrap_inference(
        spec,
        frame,
        config.bootstrap,
        DEFAULT_ALPHA,
        seed::derive(cell_seed, "bootstrap"),
    )
    .map_err(fmt_e)?;
    let placebo = refute_placebo(spec, frame, config.trials, seed::derive(cell_seed, "placebo"))
        .map_err(fmt_r)?;
    let rcc =
        refute_random_common_cause(spec, frame, config.trials, seed::derive(cell_seed, "rcc"))
            .map_err(fmt_r)?;
    let rsr = refute_subset_removal(
        spec,
        frame,
        config.removal_fraction,
        config.trials,
        seed::derive(cell_seed, "rsr"),
    )
    .map_err(fmt_r)?;
    Ok(CellOutcome::Estimated { estimate, placebo, rcc, rsr })
}
