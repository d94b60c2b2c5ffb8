//! Refutation tests: placebo treatment, random common cause, and random
//! subset removal.
//!
//! Each test perturbs the study frame `trials` times, re-estimates, and
//! z-tests the trial mean against its expected target (0 for placebo, the
//! original estimate otherwise) using the trial standard deviation. A
//! p-value below 0.05 means the expectation is violated and the estimate
//! is refuted.
//!
//! The learner seed is held fixed across the original estimate and every
//! trial, so all trial-to-trial variation comes from the perturbation
//! itself; a no-op perturbation reproduces the original estimate exactly,
//! stochastic learners included.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::estimators::{EstimateError, EstimatorSpec};
use crate::seed;
use crate::tabular::StudyFrame;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_REMOVAL_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum RefuteError {
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("refutation needs at least 20 trials, got {0}")]
    TooFewTrials(usize),
    #[error("removal fraction must be in (0, 0.5), got {0}")]
    BadFraction(f64),
    #[error("subset removal exhausted {cap} redraws without keeping both arms")]
    ArmStarvation { cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefutationTest {
    Placebo,
    RandomCommonCause,
    SubsetRemoval,
}

impl std::fmt::Display for RefutationTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RefutationTest::Placebo => "Placebo",
            RefutationTest::RandomCommonCause => "RCC",
            RefutationTest::SubsetRemoval => "RSR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefutationReport {
    pub test: RefutationTest,
    pub original_ate: f64,
    /// Mean of the trial estimates.
    pub refuted_effect: f64,
    pub p_value: f64,
    pub trials: usize,
    pub verdict: Verdict,
}

fn report(
    test: RefutationTest,
    original_ate: f64,
    target: f64,
    estimates: &[f64],
) -> RefutationReport {
    let n = estimates.len();
    // keep the mean exact when every trial agrees (e.g. no-op perturbations)
    let mean = if estimates.iter().all(|&v| v == estimates[0]) {
        estimates[0]
    } else {
        estimates.iter().sum::<f64>() / n as f64
    };
    let sd =
        (estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let p_value = if sd == 0.0 {
        if mean == target {
            1.0
        } else {
            0.0
        }
    } else {
        let normal = Normal::new(0.0, 1.0).unwrap();
        2.0 * (1.0 - normal.cdf(((mean - target) / sd).abs()))
    };
    let verdict = if p_value < 0.05 { Verdict::Fail } else { Verdict::Pass };
    RefutationReport { test, original_ate, refuted_effect: mean, p_value, trials: n, verdict }
}

fn run_trials(
    estimator: &EstimatorSpec,
    frame: &StudyFrame,
    trials: usize,
    seed_value: u64,
    label: &str,
    perturb: impl Fn(&mut ChaCha8Rng, &StudyFrame) -> Result<StudyFrame, RefuteError> + Sync,
) -> Result<(f64, Vec<f64>), RefuteError> {
    if trials < 20 {
        return Err(RefuteError::TooFewTrials(trials));
    }
    let est_seed = seed::derive(seed_value, "estimate");
    let original = estimator.estimate(frame, est_seed)?;
    let results: Vec<Result<f64, RefuteError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_indexed(seed_value, label, i as u64);
            let trial_frame = perturb(&mut rng, frame)?;
            Ok(estimator.estimate(&trial_frame, est_seed)?)
        })
        .collect();
    let mut estimates = Vec::with_capacity(trials);
    for r in results {
        estimates.push(r?);
    }
    Ok((original, estimates))
}

/// Permute the treatment assignment uniformly at random (arm sizes
/// preserved); the effect should vanish.
pub fn refute_placebo(
    estimator: &EstimatorSpec,
    frame: &StudyFrame,
    trials: usize,
    seed_value: u64,
) -> Result<RefutationReport, RefuteError> {
    let (original, estimates) =
        run_trials(estimator, frame, trials, seed_value, "placebo", |rng, f| {
            let mut t = f.treatment.clone();
            for i in (1..t.len()).rev() {
                let j = rng.gen_range(0..=i);
                t.swap(i, j);
            }
            Ok(f.with_treatment(t))
        })?;
    Ok(report(RefutationTest::Placebo, original, 0.0, &estimates))
}

/// Append an independent standard-normal covariate; the estimate should
/// not move.
pub fn refute_random_common_cause(
    estimator: &EstimatorSpec,
    frame: &StudyFrame,
    trials: usize,
    seed_value: u64,
) -> Result<RefutationReport, RefuteError> {
    refute_common_cause_with(estimator, frame, trials, seed_value, |rng, n| {
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| normal.inverse_cdf(rng.gen_range(f64::EPSILON..1.0))).collect()
    })
}

/// Random-common-cause refutation with a caller-supplied column source.
/// Exposed so a deterministic (e.g. all-zero) column can demonstrate that
/// the machinery itself leaves estimates untouched.
pub fn refute_common_cause_with(
    estimator: &EstimatorSpec,
    frame: &StudyFrame,
    trials: usize,
    seed_value: u64,
    column: impl Fn(&mut ChaCha8Rng, usize) -> Vec<f64> + Sync,
) -> Result<RefutationReport, RefuteError> {
    let (original, estimates) =
        run_trials(estimator, frame, trials, seed_value, "rcc", |rng, f| {
            Ok(f.with_extra_covariate("__random_cause", column(rng, f.n())))
        })?;
    Ok(report(RefutationTest::RandomCommonCause, original, original, &estimates))
}

/// Drop `floor(fraction * n)` uniformly random rows; the estimate should
/// not move. Trials that starve an arm are redrawn (cap 10 per trial).
pub fn refute_subset_removal(
    estimator: &EstimatorSpec,
    frame: &StudyFrame,
    fraction: f64,
    trials: usize,
    seed_value: u64,
) -> Result<RefutationReport, RefuteError> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(RefuteError::BadFraction(fraction));
    }
    let n = frame.n();
    let drop_count = (fraction * n as f64).floor() as usize;
    let (original, estimates) =
        run_trials(estimator, frame, trials, seed_value, "rsr", |rng, f| {
            for _ in 0..10 {
                // partial Fisher-Yates: the first drop_count entries are
                // the removed rows
                let mut idx: Vec<usize> = (0..n).collect();
                for i in 0..drop_count {
                    let j = rng.gen_range(i..n);
                    idx.swap(i, j);
                }
                let mut keep: Vec<usize> = idx[drop_count..].to_vec();
                keep.sort_unstable();
                let trial = f.select_rows(&keep);
                if trial.n_treated() >= 2 && trial.n_control() >= 2 {
                    return Ok(trial);
                }
            }
            Err(RefuteError::ArmStarvation { cap: 10 * trials })
        })?;
    Ok(report(RefutationTest::SubsetRemoval, original, original, &estimates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DEFAULT_CLIP;
    use crate::scm;

    fn lr() -> EstimatorSpec {
        EstimatorSpec::Lr
    }

    fn study_frame() -> StudyFrame {
        scm::benchmark_frame(&scm::benchmark("confounded-linear").unwrap(), 500, 41)
    }

    #[test]
    fn placebo_passes_on_well_specified_study() {
        let f = study_frame();
        let r = refute_placebo(&lr(), &f, 50, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.trials, 50);
        assert!(r.p_value >= 0.05);
        assert!(r.refuted_effect.abs() < 0.5, "effect {}", r.refuted_effect);
        assert!((r.original_ate - 2.0).abs() < 0.5);
    }

    #[test]
    fn placebo_constant_outcome_p_is_one() {
        let t: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let y = vec![3.0; 20];
        let f = StudyFrame::from_parts(t, y, vec![vec![]; 20], vec![]).unwrap();
        let r = refute_placebo(&lr(), &f, 20, 1).unwrap();
        assert_eq!(r.refuted_effect, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn rcc_zero_column_reproduces_exactly_for_all_estimators() {
        use crate::estimators::{BaseLearner, EstimatorSpec};
        use crate::learners::ForestParams;
        let f = scm::benchmark_frame(&scm::benchmark("confounded-linear").unwrap(), 200, 43);
        let forest = ForestParams { n_trees: 20, ..ForestParams::default() };
        let specs = [
            EstimatorSpec::Lr,
            EstimatorSpec::Matching { k: 1 },
            EstimatorSpec::Ipsw { clip: DEFAULT_CLIP },
            EstimatorSpec::TLearner { base: BaseLearner::Forest(forest.clone()) },
            EstimatorSpec::XLearner { base: BaseLearner::Ols },
        ];
        for spec in &specs {
            let r =
                refute_common_cause_with(spec, &f, 20, 7, |_, n| vec![0.0; n]).unwrap();
            assert_eq!(r.refuted_effect, r.original_ate, "{:?}", spec.method());
            assert_eq!(r.p_value, 1.0);
            assert_eq!(r.verdict, Verdict::Pass);
        }
    }

    #[test]
    fn rcc_random_column_passes_and_barely_moves_lr() {
        let f = scm::benchmark_frame(&scm::benchmark("confounded-linear").unwrap(), 2000, 47);
        let r = refute_random_common_cause(&lr(), &f, 40, 3).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(
            (r.refuted_effect - r.original_ate).abs() < 0.01,
            "moved {}",
            (r.refuted_effect - r.original_ate).abs()
        );
    }

    #[test]
    fn rcc_zero_effect_frame_passes() {
        let f = scm::benchmark_frame(&scm::benchmark("null").unwrap(), 1000, 53);
        let r = refute_random_common_cause(&lr(), &f, 30, 5).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.refuted_effect.abs() < 0.15, "effect {}", r.refuted_effect);
    }

    #[test]
    fn rsr_keeps_effect_close() {
        let f = study_frame();
        let r = refute_subset_removal(&lr(), &f, 0.2, 40, 9).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let rel = (r.refuted_effect - r.original_ate).abs() / r.original_ate.abs();
        assert!(rel < 0.10, "relative deviation {rel}");
    }

    #[test]
    fn rsr_rejects_bad_fraction() {
        let f = study_frame();
        assert!(matches!(
            refute_subset_removal(&lr(), &f, 0.6, 40, 1),
            Err(RefuteError::BadFraction(_))
        ));
        assert!(matches!(
            refute_subset_removal(&lr(), &f, 0.0, 40, 1),
            Err(RefuteError::BadFraction(_))
        ));
    }

    #[test]
    fn too_few_trials_rejected() {
        let f = study_frame();
        assert!(matches!(refute_placebo(&lr(), &f, 19, 1), Err(RefuteError::TooFewTrials(19))));
    }

    #[test]
    fn reports_are_seed_deterministic() {
        let f = study_frame();
        let a = refute_placebo(&lr(), &f, 25, 11).unwrap();
        let b = refute_placebo(&lr(), &f, 25, 11).unwrap();
        assert_eq!(a, b);
        let c = refute_placebo(&lr(), &f, 25, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn verdict_follows_p_value_rule() {
        // a hopeless placebo: effect exactly tracks T even after permuting?
        // Instead, check both branches via constructed estimate vectors.
        let passing = report(RefutationTest::Placebo, 1.0, 0.0, &[0.1, -0.1, 0.05, -0.05]);
        assert_eq!(passing.verdict, Verdict::Pass);
        let failing = report(RefutationTest::Placebo, 1.0, 0.0, &[1.0, 1.001, 0.999, 1.0]);
        assert!(failing.p_value < 0.05);
        assert_eq!(failing.verdict, Verdict::Fail);
    }

    #[test]
    fn rsr_arm_starvation_reported() {
        // 2 treated of 20 rows; dropping 40% usually kills the treated arm
        let mut t = vec![false; 20];
        t[0] = true;
        t[1] = true;
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let f = StudyFrame::from_parts(t, y, vec![vec![]; 20], vec![]).unwrap();
        let r = refute_subset_removal(&lr(), &f, 0.4, 20, 2);
        assert!(matches!(r, Err(RefuteError::ArmStarvation { .. })));
    }
}
