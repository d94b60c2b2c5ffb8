//! Ordinary least squares via column-pivoted QR, with a tiny-ridge
//! fallback on rank-deficient designs.

use nalgebra::{DMatrix, DVector};

use super::{check_finite, LearnError};

const RIDGE: f64 = 1e-8;

/// Fitted linear model. `coefficients[0]` is the intercept, followed by
/// one slope per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    /// Set when the design was rank deficient and the ridge fallback was
    /// used; names the offending column index (0 = intercept).
    pub collinear_warning: Option<String>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len() + 1, self.coefficients.len());
        self.coefficients[0]
            + row.iter().zip(&self.coefficients[1..]).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }
}

fn design(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

/// Least-squares fit of `y` on `[1, x]`.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel, LearnError> {
    check_finite(x, y)?;
    let d = x.first().map_or(0, Vec::len);
    if x.len() < d + 1 {
        return Err(LearnError::TooFewRows { need: d + 1, got: x.len() });
    }
    let a = design(x);
    let b = DVector::from_column_slice(y);
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let rmax = r.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1e-300);
    let tol = rmax * 1e-10;
    let rank = (0..(d + 1).min(r.nrows())).filter(|&i| r[(i, i)].abs() > tol).count();
    if rank < d + 1 {
        // Name a collinear column (the first whose removal restores full
        // rank), then fall back to a ridge solve so the caller still gets
        // usable coefficients.
        let col = (1..=d)
            .find(|&skip| {
                let reduced = DMatrix::from_fn(x.len(), d, |i, j| {
                    let jj = if j >= skip { j + 1 } else { j };
                    if jj == 0 {
                        1.0
                    } else {
                        x[i][jj - 1]
                    }
                });
                reduced.rank(tol) == d
            })
            .unwrap_or(0);
        let warning = format!(
            "rank-deficient design (rank {rank} of {}), feature column {} collinear; ridge fallback 1e-8 applied",
            d + 1,
            col.saturating_sub(1)
        );
        let ata = a.transpose() * &a + DMatrix::identity(d + 1, d + 1) * RIDGE;
        let atb = a.transpose() * b;
        let beta = ata
            .cholesky()
            .map(|c| c.solve(&atb))
            .unwrap_or_else(|| DVector::zeros(d + 1));
        return Ok(LinearModel {
            coefficients: beta.iter().copied().collect(),
            collinear_warning: Some(warning),
        });
    }
    // Thin QR least squares: solve R beta = Q^T b by back substitution.
    let thin = a.qr();
    let qtb = thin.q().transpose() * b;
    let rr = thin.r();
    let p = d + 1;
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut v = qtb[i];
        for j in i + 1..p {
            v -= rr[(i, j)] * beta[j];
        }
        beta[i] = v / rr[(i, i)];
    }
    Ok(LinearModel { coefficients: beta, collinear_warning: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = fit_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.coefficients[1], 2.0, epsilon = 1e-10);
        assert!(m.collinear_warning.is_none());
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![3.5; 10];
        let m = fit_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 3.5, epsilon = 1e-10);
        assert_abs_diff_eq!(m.coefficients[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn matches_normal_equations() {
        // Independent oracle: 3x3 normal equations solved by hand-rolled
        // Gaussian elimination, no shared code with the QR path.
        let mut state = 1u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let x: Vec<Vec<f64>> = (0..50).map(|_| vec![next(), next(), next()]).collect();
        let y: Vec<f64> =
            x.iter().map(|r| 0.3 + 1.2 * r[0] - 0.7 * r[1] + 0.1 * r[2] + 0.01 * next()).collect();
        let m = fit_ols(&x, &y).unwrap();

        // Build X'X and X'y with the intercept column.
        let p = 4;
        let mut a = vec![vec![0.0; p + 1]; p];
        for (r, yi) in x.iter().zip(&y) {
            let full = [1.0, r[0], r[1], r[2]];
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += full[i] * full[j];
                }
                a[i][p] += full[i] * yi;
            }
        }
        for i in 0..p {
            let piv = (i..p).max_by(|&r1, &r2| a[r1][i].abs().partial_cmp(&a[r2][i].abs()).unwrap()).unwrap();
            a.swap(i, piv);
            for r in i + 1..p {
                let f = a[r][i] / a[i][i];
                for c in i..=p {
                    a[r][c] -= f * a[i][c];
                }
            }
        }
        let mut beta = vec![0.0; p];
        for i in (0..p).rev() {
            let mut v = a[i][p];
            for c in i + 1..p {
                v -= a[i][c] * beta[c];
            }
            beta[i] = v / a[i][i];
        }
        for (got, want) in m.coefficients.iter().zip(&beta) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()])
            .collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, r)| r[0] - r[1] + (i % 5) as f64).collect();
        let m = fit_ols(&x, &y).unwrap();
        let pred = m.predict(&x);
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let y_norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..3 {
            let dot: f64 = resid
                .iter()
                .enumerate()
                .map(|(i, r)| r * if j == 0 { 1.0 } else { x[i][j - 1] })
                .sum();
            assert!(dot.abs() / y_norm < 1e-8, "column {j} dot {dot}");
        }
    }

    #[test]
    fn rank_deficient_falls_back_to_ridge() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = fit_ols(&x, &y).unwrap();
        assert!(m.collinear_warning.is_some());
        // fitted values still reproduce the target
        for (p, yi) in m.predict(&x).iter().zip(&y) {
            assert_abs_diff_eq!(p, yi, epsilon = 1e-4);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let x = vec![vec![1.0], vec![f64::NAN]];
        let y = vec![1.0, 2.0];
        assert!(matches!(fit_ols(&x, &y), Err(LearnError::NonFinite(1))));
    }

    #[test]
    fn optimality_spot_check() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 0.5 * r[0] - 0.25 * r[1]).collect();
        let m = fit_ols(&x, &y).unwrap();
        let sse = |coef: &[f64]| -> f64 {
            x.iter()
                .zip(&y)
                .map(|(r, yi)| {
                    let p = coef[0] + coef[1] * r[0] + coef[2] * r[1];
                    (yi - p).powi(2)
                })
                .sum()
        };
        let base = sse(&m.coefficients);
        let mut state = 99u64;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let j = (state >> 33) as usize % 3;
            let delta = if state & 1 == 0 { 1e-3 } else { -1e-3 };
            let mut perturbed = m.coefficients.clone();
            perturbed[j] += delta;
            assert!(sse(&perturbed) >= base - 1e-9);
        }
    }
}
