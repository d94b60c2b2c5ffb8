//! Report rendering: a fixed-width text table mirroring the published
//! layout (ATE and refuted effects scaled x 10^-4), plus lossless CSV and
//! JSON serializations that round-trip bit-exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::estimators::{EffectEstimate, Method};
use crate::refute::{RefutationReport, RefutationTest, Verdict};

use super::{CellOutcome, ReportCell, StudyError, StudyReport, ThresholdMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected text|csv|json)")),
        }
    }
}

/// Write the report into `dir` as report.txt / report.csv / report.json.
pub fn emit_report(
    report: &StudyReport,
    format: OutputFormat,
    dir: &Path,
) -> Result<PathBuf, StudyError> {
    let (name, content) = match format {
        OutputFormat::Text => ("report.txt", render_text(report)),
        OutputFormat::Csv => ("report.csv", render_csv(report)),
        OutputFormat::Json => ("report.json", render_json(report)),
    };
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|source| StudyError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn scaled(v: f64) -> String {
    format!("{:.3}", v * 1e4)
}

fn p3(v: f64) -> String {
    format!("{v:.3}")
}

/// Fixed-width table in the published layout; estimates and refuted
/// effects are shown x 10^-4.
pub fn render_text(report: &StudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Study area: {}    seed: {}", report.area, report.seed);
    let _ = writeln!(s, "Adjustment set: {{{}}}", report.adjustment_set.join(", "));
    let _ = writeln!(s, "Harmonized rows: {}", report.rows_harmonized);
    for m in &report.thresholds {
        match &m.error {
            Some(e) => {
                let _ = writeln!(s, "Threshold {}: no frame ({e})", m.threshold);
            }
            None => {
                let _ = writeln!(
                    s,
                    "Threshold {}: t*={}, n={} (treated {}, control {}), excluded {}, dropped missing {}",
                    m.threshold,
                    m.threshold_value.map(|v| format!("{v:.6}")).unwrap_or_default(),
                    m.n_used,
                    m.n_treated,
                    m.n_control,
                    m.excluded_band,
                    m.dropped_missing,
                );
            }
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10} {:>4} {:<9} {:>9} {:<18} {:>8} | {:>9} {:>6} | {:>9} {:>6} | {:>9} {:>6}",
        "Area", "Th", "Method", "ATE", "CI", "p-value", "Placebo*", "p", "RCC*", "p", "RSR*", "p"
    );
    let _ = writeln!(
        s,
        "{:<10} {:>4} {:<9} {:>9} {:<18} {:>8} | {:>9} {:>6} | {:>9} {:>6} | {:>9} {:>6}",
        "", "", "", "(1e-4)", "", "", "(1e-4)", "", "(1e-4)", "", "(1e-4)", ""
    );
    for cell in &report.cells {
        match &cell.outcome {
            CellOutcome::Estimated { estimate, placebo, rcc, rsr } => {
                let ci = format!("({:.3}, {:.3})", estimate.ci_low, estimate.ci_high);
                let _ = writeln!(
                    s,
                    "{:<10} {:>4} {:<9} {:>9} {:<18} {:>8} | {:>9} {:>6} | {:>9} {:>6} | {:>9} {:>6}",
                    report.area,
                    cell.threshold,
                    cell.method_label,
                    scaled(estimate.ate),
                    ci,
                    p3(estimate.p_value),
                    scaled(placebo.refuted_effect),
                    p3(placebo.p_value),
                    scaled(rcc.refuted_effect),
                    p3(rcc.p_value),
                    scaled(rsr.refuted_effect),
                    p3(rsr.p_value),
                );
            }
            CellOutcome::Inestimable { reason } => {
                let _ = writeln!(
                    s,
                    "{:<10} {:>4} {:<9} inestimable: {reason}",
                    report.area, cell.threshold, cell.method_label,
                );
            }
        }
    }
    s
}

pub fn render_json(report: &StudyReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<StudyReport, StudyError> {
    serde_json::from_str(text).map_err(|e| StudyError::Invalid(format!("json report: {e}")))
}

const CSV_HEADER: &[&str] = &[
    "area",
    "seed",
    "adjustment_set",
    "rows_harmonized",
    "threshold",
    "threshold_value",
    "frame_n",
    "frame_treated",
    "frame_control",
    "frame_excluded",
    "frame_dropped_missing",
    "frame_error",
    "method",
    "method_label",
    "status",
    "ate",
    "ci_low",
    "ci_high",
    "p_value",
    "n_used",
    "placebo_original",
    "placebo_effect",
    "placebo_p",
    "placebo_trials",
    "placebo_verdict",
    "rcc_original",
    "rcc_effect",
    "rcc_p",
    "rcc_trials",
    "rcc_verdict",
    "rsr_original",
    "rsr_effect",
    "rsr_p",
    "rsr_trials",
    "rsr_verdict",
    "reason",
];

fn f(v: f64) -> String {
    // shortest round-trip decimal form: parses back to the same bits
    format!("{v}")
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "Pass",
        Verdict::Fail => "Fail",
    }
}

fn parse_verdict(s: &str) -> Result<Verdict, StudyError> {
    match s {
        "Pass" => Ok(Verdict::Pass),
        "Fail" => Ok(Verdict::Fail),
        other => Err(StudyError::Invalid(format!("bad verdict `{other}`"))),
    }
}

fn method_str(m: Method) -> String {
    m.to_string()
}

fn parse_method(s: &str) -> Result<Method, StudyError> {
    match s {
        "LR" => Ok(Method::Lr),
        "M" => Ok(Method::Matching),
        "IPSW" => Ok(Method::Ipsw),
        "T-L" => Ok(Method::TLearner),
        "X-L" => Ok(Method::XLearner),
        other => Err(StudyError::Invalid(format!("bad method `{other}`"))),
    }
}

/// Lossless CSV: one row per grid cell, report metadata repeated on every
/// row, floats written in shortest round-trip form.
pub fn render_csv(report: &StudyReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).unwrap();
    for cell in &report.cells {
        let meta = report
            .thresholds
            .iter()
            .find(|m| m.threshold == cell.threshold)
            .expect("cell threshold has metadata");
        let mut rec: Vec<String> = vec![
            report.area.clone(),
            report.seed.to_string(),
            report.adjustment_set.join(";"),
            report.rows_harmonized.to_string(),
            f(cell.threshold),
            meta.threshold_value.map(f).unwrap_or_default(),
            meta.n_used.to_string(),
            meta.n_treated.to_string(),
            meta.n_control.to_string(),
            meta.excluded_band.to_string(),
            meta.dropped_missing.to_string(),
            meta.error.clone().unwrap_or_default(),
            method_str(cell.method),
            cell.method_label.clone(),
        ];
        match &cell.outcome {
            CellOutcome::Estimated { estimate, placebo, rcc, rsr } => {
                rec.push("estimated".into());
                rec.push(f(estimate.ate));
                rec.push(f(estimate.ci_low));
                rec.push(f(estimate.ci_high));
                rec.push(f(estimate.p_value));
                rec.push(estimate.n_used.to_string());
                for r in [placebo, rcc, rsr] {
                    rec.push(f(r.original_ate));
                    rec.push(f(r.refuted_effect));
                    rec.push(f(r.p_value));
                    rec.push(r.trials.to_string());
                    rec.push(verdict_str(r.verdict).to_string());
                }
                rec.push(String::new());
            }
            CellOutcome::Inestimable { reason } => {
                rec.push("inestimable".into());
                for _ in 0..20 {
                    rec.push(String::new());
                }
                rec.push(reason.clone());
            }
        }
        w.write_record(&rec).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn report_from_csv(text: &str) -> Result<StudyReport, StudyError> {
    let bad = |msg: &str| StudyError::Invalid(format!("csv report: {msg}"));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> =
        reader.headers().map_err(|e| bad(&e.to_string()))?.iter().map(str::to_string).collect();
    if headers != CSV_HEADER {
        return Err(bad("unexpected header row"));
    }
    let col = |name: &str| CSV_HEADER.iter().position(|h| h == &name).unwrap();
    let mut report: Option<StudyReport> = None;
    for record in reader.records() {
        let record = record.map_err(|e| bad(&e.to_string()))?;
        let get = |name: &str| record.get(col(name)).unwrap_or("").to_string();
        let num = |name: &str| -> Result<f64, StudyError> {
            get(name).parse().map_err(|_| bad(&format!("bad number in `{name}`")))
        };
        let int = |name: &str| -> Result<usize, StudyError> {
            get(name).parse().map_err(|_| bad(&format!("bad count in `{name}`")))
        };
        if report.is_none() {
            report = Some(StudyReport {
                area: get("area"),
                seed: get("seed").parse().map_err(|_| bad("bad seed"))?,
                adjustment_set: get("adjustment_set")
                    .split(';')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
                rows_harmonized: int("rows_harmonized")?,
                thresholds: Vec::new(),
                cells: Vec::new(),
            });
        }
        let report = report.as_mut().unwrap();
        let threshold = num("threshold")?;
        if !report.thresholds.iter().any(|m| m.threshold == threshold) {
            let frame_error = get("frame_error");
            report.thresholds.push(ThresholdMeta {
                threshold,
                threshold_value: match get("threshold_value").as_str() {
                    "" => None,
                    _ => Some(num("threshold_value")?),
                },
                n_used: int("frame_n")?,
                n_treated: int("frame_treated")?,
                n_control: int("frame_control")?,
                excluded_band: int("frame_excluded")?,
                dropped_missing: int("frame_dropped_missing")?,
                error: if frame_error.is_empty() { None } else { Some(frame_error) },
            });
        }
        let method = parse_method(&get("method"))?;
        let outcome = match get("status").as_str() {
            "estimated" => {
                let refutation = |prefix: &str, test: RefutationTest| -> Result<RefutationReport, StudyError> {
                    let p_value = num(&format!("{prefix}_p"))?;
                    Ok(RefutationReport {
                        test,
                        original_ate: num(&format!("{prefix}_original"))?,
                        refuted_effect: num(&format!("{prefix}_effect"))?,
                        p_value,
                        trials: int(&format!("{prefix}_trials"))?,
                        verdict: parse_verdict(&get(&format!("{prefix}_verdict")))?,
                    })
                };
                CellOutcome::Estimated {
                    estimate: EffectEstimate {
                        method,
                        ate: num("ate")?,
                        ci_low: num("ci_low")?,
                        ci_high: num("ci_high")?,
                        p_value: num("p_value")?,
                        threshold_percentile: threshold,
                        n_used: int("n_used")?,
                    },
                    placebo: refutation("placebo", RefutationTest::Placebo)?,
                    rcc: refutation("rcc", RefutationTest::RandomCommonCause)?,
                    rsr: refutation("rsr", RefutationTest::SubsetRemoval)?,
                }
            }
            "inestimable" => CellOutcome::Inestimable { reason: get("reason") },
            other => return Err(bad(&format!("bad status `{other}`"))),
        };
        report.cells.push(ReportCell {
            threshold,
            method,
            method_label: get("method_label"),
            outcome,
        });
    }
    report.ok_or_else(|| bad("no rows"))
}
