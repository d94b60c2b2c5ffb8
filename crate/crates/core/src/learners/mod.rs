//! Supervised base learners used by the effect estimators: ordinary least
//! squares, logistic regression and a random-forest regressor. All reject
//! missing (non-finite) inputs rather than imputing.

mod forest;
mod linear;
mod logistic;

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use linear::{fit_ols, LinearModel};
pub use logistic::{fit_logistic, LogisticModel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("design has {rows} rows but target has {targets}")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("non-finite value in row {0}; learners do not impute")]
    NonFinite(usize),
    #[error("target must contain both classes")]
    SingleClass,
    #[error("empty data")]
    Empty,
    #[error("min_leaf {min_leaf} exceeds available rows {rows}")]
    MinLeafTooLarge { min_leaf: usize, rows: usize },
}

pub(crate) fn check_finite(x: &[Vec<f64>], y: &[f64]) -> Result<(), LearnError> {
    if x.len() != y.len() {
        return Err(LearnError::ShapeMismatch { rows: x.len(), targets: y.len() });
    }
    for (i, (row, yi)) in x.iter().zip(y).enumerate() {
        if !yi.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite(i));
        }
    }
    Ok(())
}
