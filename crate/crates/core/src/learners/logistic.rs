//! Logistic regression by iteratively reweighted least squares with
//! step halving, so the log-likelihood never decreases across iterations.

use nalgebra::{DMatrix, DVector};

use super::{check_finite, LearnError};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
// Probability floor used inside the fit for numerical stability; callers
// apply their own clipping (e.g. [0.01, 0.99]) at prediction time.
const P_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Intercept first, then one slope per feature.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    fn linear(&self, row: &[f64]) -> f64 {
        self.coefficients[0]
            + row.iter().zip(&self.coefficients[1..]).map(|(x, b)| x * b).sum::<f64>()
    }

    /// P(y = 1 | row), clipped to `[clip.0, clip.1]`.
    pub fn predict_proba_row(&self, row: &[f64], clip: (f64, f64)) -> f64 {
        sigmoid(self.linear(row)).clamp(clip.0, clip.1)
    }

    pub fn predict_proba(&self, x: &[Vec<f64>], clip: (f64, f64)) -> Vec<f64> {
        x.iter().map(|r| self.predict_proba_row(r, clip)).collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(a: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = a * beta;
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &z)| {
            let p = sigmoid(z).clamp(P_EPS, 1.0 - P_EPS);
            yi * p.ln() + (1.0 - yi) * (1.0 - p).ln()
        })
        .sum()
}

/// Maximum-likelihood fit of a Bernoulli response on `[1, x]`.
///
/// Stops when the gradient max-norm drops below 1e-8 or after 100
/// iterations; separable data comes back with `converged = false`.
pub fn fit_logistic(x: &[Vec<f64>], y: &[f64]) -> Result<LogisticModel, LearnError> {
    check_finite(x, y)?;
    if x.is_empty() {
        return Err(LearnError::Empty);
    }
    let has_one = y.iter().any(|&v| v == 1.0);
    let has_zero = y.iter().any(|&v| v == 0.0);
    if !has_one || !has_zero {
        return Err(LearnError::SingleClass);
    }
    let n = x.len();
    let d = x[0].len();
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });

    let mut beta = DVector::zeros(d + 1);
    let mut ll = log_likelihood(&a, y, &beta);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let eta = &a * &beta;
        let p: Vec<f64> =
            eta.iter().map(|&z| sigmoid(z).clamp(P_EPS, 1.0 - P_EPS)).collect();
        let grad: DVector<f64> = a.transpose()
            * DVector::from_iterator(n, y.iter().zip(&p).map(|(&yi, &pi)| yi - pi));
        if grad.iter().map(|g| g.abs()).fold(0.0_f64, f64::max) < GRAD_TOL {
            // A vanishing gradient caused by clamped probabilities means
            // separation, not convergence.
            converged = !p.iter().any(|&pi| pi <= P_EPS || pi >= 1.0 - P_EPS);
            break;
        }
        // Newton step: (X'WX + eps I)^-1 grad, W = p(1-p).
        let mut xtwx = DMatrix::zeros(d + 1, d + 1);
        for i in 0..n {
            let w = p[i] * (1.0 - p[i]);
            for r in 0..d + 1 {
                for c in r..d + 1 {
                    let v = w * a[(i, r)] * a[(i, c)];
                    xtwx[(r, c)] += v;
                    if r != c {
                        xtwx[(c, r)] += v;
                    }
                }
            }
        }
        for i in 0..d + 1 {
            xtwx[(i, i)] += 1e-10;
        }
        let step = match xtwx.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => break,
        };
        // Step halving keeps the likelihood monotone.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * scale;
            let cand_ll = log_likelihood(&a, y, &candidate);
            if cand_ll >= ll - 1e-12 {
                beta = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LogisticModel { coefficients: beta.iter().copied().collect(), converged, iterations })
}
