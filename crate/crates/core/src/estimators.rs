//! The five average-treatment-effect estimators and bootstrap inference.
//!
//! Every estimator consumes a [`StudyFrame`] whose covariates come from a
//! backdoor adjustment set. Zero-variance covariate columns are dropped
//! before fitting, and an empty covariate block degenerates every method
//! to the plain difference of arm means.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::learners::{
    fit_forest, fit_logistic, fit_ols, ForestModel, ForestParams, LearnError, LinearModel,
};
use crate::seed;
use crate::tabular::{percentile, StudyFrame};

pub const DEFAULT_CLIP: (f64, f64) = (0.01, 0.99);
pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("k={k} neighbors requested but an arm has only {available} rows")]
    KTooLarge { k: usize, available: usize },
    #[error("arm `{arm}` has {got} rows, forest base needs at least {need}")]
    ArmTooSmallForForest { arm: &'static str, need: usize, got: usize },
    #[error("bootstrap exhausted {cap} redraws without a non-degenerate resample")]
    DegenerateResamples { cap: usize },
    #[error("bootstrap needs B >= 100, got {0}")]
    TooFewReplicates(usize),
    #[error("alpha must be in (0, 1), got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Lr,
    Matching,
    Ipsw,
    TLearner,
    XLearner,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lr => "LR",
            Method::Matching => "M",
            Method::Ipsw => "IPSW",
            Method::TLearner => "T-L",
            Method::XLearner => "X-L",
        })
    }
}

/// Regression learner plugged into the T- and X-learners.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseLearner {
    Ols,
    Forest(ForestParams),
}

enum BaseModel {
    Ols(LinearModel),
    Forest(ForestModel),
}

impl BaseModel {
    fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        match self {
            BaseModel::Ols(m) => m.predict(x),
            BaseModel::Forest(m) => m.predict(x),
        }
    }
}

impl BaseLearner {
    fn fit(&self, x: &[Vec<f64>], y: &[f64], seed_value: u64) -> Result<BaseModel, EstimateError> {
        match self {
            BaseLearner::Ols => Ok(BaseModel::Ols(fit_ols(x, y)?)),
            BaseLearner::Forest(params) => {
                Ok(BaseModel::Forest(fit_forest(x, y, params.clone().with_seed(seed_value))?))
            }
        }
    }

    fn check_arms(&self, frame: &StudyFrame) -> Result<(), EstimateError> {
        if let BaseLearner::Forest(p) = self {
            let need = 2 * p.min_leaf;
            if frame.n_treated() < need {
                return Err(EstimateError::ArmTooSmallForForest {
                    arm: "treated",
                    need,
                    got: frame.n_treated(),
                });
            }
            if frame.n_control() < need {
                return Err(EstimateError::ArmTooSmallForForest {
                    arm: "control",
                    need,
                    got: frame.n_control(),
                });
            }
        }
        Ok(())
    }
}

/// A fully parameterized estimator, ready to run on a frame.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Lr,
    Matching { k: usize },
    Ipsw { clip: (f64, f64) },
    TLearner { base: BaseLearner },
    XLearner { base: BaseLearner },
}

impl EstimatorSpec {
    pub fn method(&self) -> Method {
        match self {
            EstimatorSpec::Lr => Method::Lr,
            EstimatorSpec::Matching { .. } => Method::Matching,
            EstimatorSpec::Ipsw { .. } => Method::Ipsw,
            EstimatorSpec::TLearner { .. } => Method::TLearner,
            EstimatorSpec::XLearner { .. } => Method::XLearner,
        }
    }

    /// Point estimate of the ATE. `seed_value` only matters for
    /// stochastic base learners.
    pub fn estimate(&self, frame: &StudyFrame, seed_value: u64) -> Result<f64, EstimateError> {
        match self {
            EstimatorSpec::Lr => ate_linear(frame),
            EstimatorSpec::Matching { k } => ate_matching(frame, *k),
            EstimatorSpec::Ipsw { clip } => ate_ipsw(frame, *clip),
            EstimatorSpec::TLearner { base } => ate_tlearner(frame, base, seed_value),
            EstimatorSpec::XLearner { base } => ate_xlearner(frame, base, seed_value),
        }
    }
}

/// Point estimate with percentile-bootstrap CI and a normal-approximation
/// p-value against ATE = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub method: Method,
    pub ate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub threshold_percentile: f64,
    pub n_used: usize,
}

/// Covariate block with zero-variance columns removed; returns the kept
/// column names alongside the row-major data.
fn active_covariates(frame: &StudyFrame) -> (Vec<Vec<f64>>, Vec<String>) {
    let d = frame.covariate_names.len();
    let keep: Vec<usize> = (0..d)
        .filter(|&j| frame.covariates.iter().any(|r| r[j] != frame.covariates[0][j]))
        .collect();
    let z = frame
        .covariates
        .iter()
        .map(|r| keep.iter().map(|&j| r[j]).collect())
        .collect();
    let names = keep.iter().map(|&j| frame.covariate_names[j].clone()).collect();
    (z, names)
}

fn arm_mean_diff(frame: &StudyFrame) -> f64 {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (&t, &y) in frame.treatment.iter().zip(&frame.outcome) {
        if t {
            s1 += y;
            n1 += 1;
        } else {
            s0 += y;
            n0 += 1;
        }
    }
    s1 / n1 as f64 - s0 / n0 as f64
}

/// OLS of Y on [T, Z]; the coefficient on T.
pub fn ate_linear(frame: &StudyFrame) -> Result<f64, EstimateError> {
    let (z, _) = active_covariates(frame);
    if z[0].is_empty() {
        return Ok(arm_mean_diff(frame));
    }
    let x: Vec<Vec<f64>> = frame
        .treatment
        .iter()
        .zip(&z)
        .map(|(&t, zi)| {
            let mut row = Vec::with_capacity(zi.len() + 1);
            row.push(f64::from(t));
            row.extend_from_slice(zi);
            row
        })
        .collect();
    let model = fit_ols(&x, &frame.outcome)?;
    Ok(model.coefficients[1])
}

/// k-nearest-neighbor matching on standardized covariates, with
/// replacement, ties broken by lowest row index. Every row is a match
/// target (ATE, not ATT).
pub fn ate_matching(frame: &StudyFrame, k: usize) -> Result<f64, EstimateError> {
    assert!(k >= 1);
    let (z, _) = active_covariates(frame);
    if z[0].is_empty() {
        return Ok(arm_mean_diff(frame));
    }
    let d = z[0].len();
    let n = z.len();
    // standardize each kept column to zero mean, unit variance
    let mut std_z = z;
    for j in 0..d {
        let mean = std_z.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = std_z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for r in &mut std_z {
            r[j] = (r[j] - mean) / sd;
        }
    }
    let treated: Vec<usize> = (0..n).filter(|&i| frame.treatment[i]).collect();
    let control: Vec<usize> = (0..n).filter(|&i| !frame.treatment[i]).collect();
    for arm in [&treated, &control] {
        if arm.len() < k {
            return Err(EstimateError::KTooLarge { k, available: arm.len() });
        }
    }
    let effects: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pool = if frame.treatment[i] { &control } else { &treated };
            // (distance, index) pairs; ties resolved by index order
            let mut scored: Vec<(f64, usize)> = pool
                .iter()
                .map(|&j| {
                    let dist: f64 = std_z[i]
                        .iter()
                        .zip(&std_z[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    (dist, j)
                })
                .collect();
            scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let cf: f64 =
                scored[..k].iter().map(|&(_, j)| frame.outcome[j]).sum::<f64>() / k as f64;
            if frame.treatment[i] {
                frame.outcome[i] - cf
            } else {
                cf - frame.outcome[i]
            }
        })
        .collect();
    Ok(effects.iter().sum::<f64>() / n as f64)
}

/// Hájek (self-normalized) inverse propensity score weighting with a
/// logistic propensity model clipped to `clip`.
pub fn ate_ipsw(frame: &StudyFrame, clip: (f64, f64)) -> Result<f64, EstimateError> {
    let (z, _) = active_covariates(frame);
    if z[0].is_empty() {
        return Ok(arm_mean_diff(frame));
    }
    let t: Vec<f64> = frame.treatment.iter().map(|&b| f64::from(b)).collect();
    let model = fit_logistic(&z, &t)?;
    let e = model.predict_proba(&z, clip);
    let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..frame.n() {
        if frame.treatment[i] {
            num1 += frame.outcome[i] / e[i];
            den1 += 1.0 / e[i];
        } else {
            num0 += frame.outcome[i] / (1.0 - e[i]);
            den0 += 1.0 / (1.0 - e[i]);
        }
    }
    Ok(num1 / den1 - num0 / den0)
}

fn split_by_arm(frame: &StudyFrame, z: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let mut z1 = Vec::new();
    let mut y1 = Vec::new();
    let mut z0 = Vec::new();
    let mut y0 = Vec::new();
    for i in 0..frame.n() {
        if frame.treatment[i] {
            z1.push(z[i].clone());
            y1.push(frame.outcome[i]);
        } else {
            z0.push(z[i].clone());
            y0.push(frame.outcome[i]);
        }
    }
    (z1, y1, z0, y0)
}

/// T-learner: per-arm outcome surfaces, averaged surface difference.
pub fn ate_tlearner(
    frame: &StudyFrame,
    base: &BaseLearner,
    seed_value: u64,
) -> Result<f64, EstimateError> {
    let (z, _) = active_covariates(frame);
    if z[0].is_empty() {
        return Ok(arm_mean_diff(frame));
    }
    base.check_arms(frame)?;
    let (z1, y1, z0, y0) = split_by_arm(frame, &z);
    let mu1 = base.fit(&z1, &y1, seed::derive(seed_value, "tl-mu1"))?;
    let mu0 = base.fit(&z0, &y0, seed::derive(seed_value, "tl-mu0"))?;
    let p1 = mu1.predict(&z);
    let p0 = mu0.predict(&z);
    Ok(p1.iter().zip(&p0).map(|(a, b)| a - b).sum::<f64>() / z.len() as f64)
}

/// X-learner: stage-1 surfaces, stage-2 imputed-effect regressions,
/// propensity-weighted combination.
pub fn ate_xlearner(
    frame: &StudyFrame,
    base: &BaseLearner,
    seed_value: u64,
) -> Result<f64, EstimateError> {
    let (z, _) = active_covariates(frame);
    if z[0].is_empty() {
        return Ok(arm_mean_diff(frame));
    }
    base.check_arms(frame)?;
    let (z1, y1, z0, y0) = split_by_arm(frame, &z);
    let mu1 = base.fit(&z1, &y1, seed::derive(seed_value, "xl-mu1"))?;
    let mu0 = base.fit(&z0, &y0, seed::derive(seed_value, "xl-mu0"))?;
    // imputed treatment effects
    let d1: Vec<f64> = y1.iter().zip(mu0.predict(&z1)).map(|(y, m)| y - m).collect();
    let d0: Vec<f64> = y0.iter().zip(mu1.predict(&z0)).map(|(y, m)| m - y).collect();
    let tau1 = base.fit(&z1, &d1, seed::derive(seed_value, "xl-tau1"))?;
    let tau0 = base.fit(&z0, &d0, seed::derive(seed_value, "xl-tau0"))?;
    let t: Vec<f64> = frame.treatment.iter().map(|&b| f64::from(b)).collect();
    let prop = fit_logistic(&z, &t)?;
    let g = prop.predict_proba(&z, DEFAULT_CLIP);
    let t1 = tau1.predict(&z);
    let t0 = tau0.predict(&z);
    let total: f64 = (0..z.len()).map(|i| g[i] * t0[i] + (1.0 - g[i]) * t1[i]).sum();
    Ok(total / z.len() as f64)
}

/// Percentile bootstrap over row resamples. Degenerate (single-arm) or
/// inestimable resamples are redrawn, up to 10 draws per replicate
/// (10·B in total).
pub fn bootstrap_inference(
    spec: &EstimatorSpec,
    frame: &StudyFrame,
    b: usize,
    alpha: f64,
    seed_value: u64,
) -> Result<EffectEstimate, EstimateError> {
    if b < 100 {
        return Err(EstimateError::TooFewReplicates(b));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EstimateError::BadAlpha(alpha));
    }
    let ate = spec.estimate(frame, seed::derive(seed_value, "point"))?;
    let n = frame.n();
    let replicates: Vec<Result<f64, EstimateError>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_indexed(seed_value, "bootstrap", i as u64);
            for _ in 0..10 {
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let rf = frame.select_rows(&idx);
                if rf.n_treated() < 2 || rf.n_control() < 2 {
                    continue;
                }
                if let Ok(v) = spec.estimate(&rf, seed::derive_indexed(seed_value, "bootstrap-fit", i as u64)) {
                    return Ok(v);
                }
            }
            Err(EstimateError::DegenerateResamples { cap: 10 * b })
        })
        .collect();
    let mut boots = Vec::with_capacity(b);
    for r in replicates {
        boots.push(r?);
    }
    let lo = percentile(&boots, 100.0 * alpha / 2.0);
    let hi = percentile(&boots, 100.0 * (1.0 - alpha / 2.0));
    // the percentile interval can miss the point estimate on skewed
    // resamples; clamp so the reported interval always contains it
    let ci_low = lo.min(ate);
    let ci_high = hi.max(ate);
    let mean = boots.iter().sum::<f64>() / b as f64;
    let sd = (boots.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt();
    let p_value = if sd == 0.0 {
        if ate == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let normal = Normal::new(0.0, 1.0).unwrap();
        2.0 * (1.0 - normal.cdf((ate / sd).abs()))
    };
    Ok(EffectEstimate {
        method: spec.method(),
        ate,
        ci_low,
        ci_high,
        p_value,
        threshold_percentile: frame.threshold_percentile,
        n_used: n,
    })
}
