//! Observational causal effect estimation toolkit.
//!
//! Pipeline: a user-supplied causal DAG is checked with the backdoor
//! criterion to produce an adjustment set, tabular data is harmonized
//! (aggregation, per-capita normalization, treatment binarization), the
//! average treatment effect is estimated by five methods (linear
//! regression, distance matching, inverse propensity score weighting,
//! T-learner, X-learner) with bootstrap confidence intervals, and each
//! estimate is stress-tested by placebo, random-common-cause and
//! random-subset-removal refutation tests.
//!
//! The `scm` module provides synthetic structural causal models with
//! known ground-truth effects; it is the verification backbone for the
//! estimators and the d-separation engine.

pub mod estimators;
pub mod graph;
pub mod learners;
pub mod refute;
pub mod scm;
pub mod seed;
pub mod study;
pub mod tabular;


pub use estimators::{EffectEstimate, EstimatorSpec, Method};
pub use graph::{AdjustmentSet, CausalDag};
pub use refute::{RefutationReport, RefutationTest, Verdict};
pub use scm::ScmSpec;
pub use study::{
    emit_report, render_csv, render_text, run_study, OutputFormat, StudyConfig, StudyError,
    StudyReport,
};
pub use tabular::{StudyFrame, Table};
