//! Rank-revealing linear least squares via Householder QR with column pivoting.
//!
//! Columns whose pivot magnitude falls below `RANK_TOL` times the largest
//! pivot are dropped from the solve and flagged as omitted; the generalized
//! inverse of X'X is assembled on the retained subspace only.

use super::Matrix;
use crate::{Error, Result};

/// Relative pivot threshold for declaring a column linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Solution of min ||y - X b||^2 with rank detection.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// Coefficients in original column order; omitted columns carry 0.0.
    pub coefficients: Vec<f64>,
    /// Flags columns dropped for rank deficiency.
    pub omitted: Vec<bool>,
    pub rank: usize,
    /// y - X b over the retained columns.
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    /// Generalized inverse of X'X: zero rows/columns at omitted positions.
    pub xtx_inverse: Matrix,
}

impl LeastSquares {
    pub fn sum_sq_residuals(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

pub fn solve_least_squares(x: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let n = x.rows();
    let k = x.cols();
    if n == 0 || k == 0 {
        return Err(Error::Dimension("empty design matrix".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "y has {} entries for {} design rows",
            y.len(),
            n
        )));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input".into()));
    }

    // Working copy in column-major form plus the pivot permutation.
    let mut a: Vec<Vec<f64>> = (0..k).map(|j| x.column(j)).collect();
    let mut qty = y.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let steps = n.min(k);
    let mut rdiag = vec![0.0_f64; steps];
    let mut rank = 0;

    for step in 0..steps {
        // Pivot on the largest residual column norm below row `step`.
        let mut best = step;
        let mut best_norm = 0.0;
        for j in step..k {
            let norm: f64 = a[j][step..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if step == 0 && best_norm == 0.0 {
            break;
        }
        if best_norm < RANK_TOL * rdiag[0].abs() || best_norm == 0.0 {
            break;
        }
        a.swap(step, best);
        perm.swap(step, best);

        // Householder reflection zeroing column `step` below the diagonal.
        let alpha = -a[step][step].signum() * best_norm;
        let mut v: Vec<f64> = a[step][step..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|w| w * w).sum();
        a[step][step] = alpha;
        for w in a[step][step + 1..].iter_mut() {
            *w = 0.0;
        }
        rdiag[step] = alpha;
        rank = step + 1;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(step + 1) {
                let dot: f64 = v.iter().zip(&col[step..]).map(|(a, b)| a * b).sum();
                let scale = 2.0 * dot / vnorm2;
                for (vi, ci) in v.iter().zip(col[step..].iter_mut()) {
                    *ci -= scale * vi;
                }
            }
            let dot: f64 = v.iter().zip(&qty[step..]).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (vi, qi) in v.iter().zip(qty[step..].iter_mut()) {
                *qi -= scale * vi;
            }
        }
    }

    // Back substitution on the rank x rank upper triangle.
    let mut beta_perm = vec![0.0_f64; rank];
    for i in (0..rank).rev() {
        let mut acc = qty[i];
        for j in (i + 1)..rank {
            acc -= a[j][i] * beta_perm[j];
        }
        beta_perm[i] = acc / a[i][i];
    }

    let mut coefficients = vec![0.0_f64; k];
    let mut omitted = vec![true; k];
    for i in 0..rank {
        coefficients[perm[i]] = beta_perm[i];
        omitted[perm[i]] = false;
    }

    let fitted = x.matvec(&coefficients)?;
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();

    // Invert the retained triangle, then (X'X)^-1 = R^-1 R^-T scattered
    // back through the permutation.
    let mut rinv = Matrix::zeros(rank, rank);
    for j in 0..rank {
        rinv[(j, j)] = 1.0 / a[j][j];
        for i in (0..j).rev() {
            let mut acc = 0.0;
            for l in (i + 1)..=j {
                acc += a[l][i] * rinv[(l, j)];
            }
            rinv[(i, j)] = -acc / a[i][i];
        }
    }
    let mut xtx_inverse = Matrix::zeros(k, k);
    for i in 0..rank {
        for j in 0..rank {
            let mut acc = 0.0;
            for l in 0..rank {
                acc += rinv[(i, l)] * rinv[(j, l)];
            }
            xtx_inverse[(perm[i], perm[j])] = acc;
        }
    }
    xtx_inverse.symmetrize();

    Ok(LeastSquares {
        coefficients,
        omitted,
        rank,
        residuals,
        fitted,
        xtx_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn identity_design_returns_y() {
        let x = Matrix::identity(3);
        let sol = solve_least_squares(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sol.rank, 3);
        assert!(close(sol.coefficients[0], 1.0, 1e-14));
        assert!(close(sol.coefficients[1], 2.0, 1e-14));
        assert!(close(sol.coefficients[2], 3.0, 1e-14));
        assert!(sol.residuals.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn duplicated_column_is_flagged_omitted() {
        let c = vec![1.0, 2.0, 3.0, 4.0];
        let x = Matrix::from_columns(&[c.clone(), c]).unwrap();
        let sol = solve_least_squares(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(sol.rank, 1);
        assert_eq!(sol.omitted.iter().filter(|&&o| o).count(), 1);
    }

    #[test]
    fn matches_normal_equations_on_simple_regression() {
        // y = 2x + 1 + e with a fixed small disturbance.
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let e = [0.01, -0.02, 0.005, 0.015, -0.01];
        let y: Vec<f64> = xs.iter().zip(&e).map(|(x, e)| 2.0 * x + 1.0 + e).collect();
        let ones = vec![1.0; 5];
        let x = Matrix::from_columns(&[ones, xs.to_vec()]).unwrap();
        let sol = solve_least_squares(&x, &y).unwrap();

        // Closed-form (X'X)^-1 X'y for the two-column case.
        let n = 5.0;
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = xs.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let b0 = (sxx * sy - sx * sxy) / det;
        let b1 = (n * sxy - sx * sy) / det;
        assert!(close(sol.coefficients[0], b0, 1e-10));
        assert!(close(sol.coefficients[1], b1, 1e-10));

        // The generalized inverse must match the closed form too.
        assert!(close(sol.xtx_inverse[(0, 0)], sxx / det, 1e-10));
        assert!(close(sol.xtx_inverse[(1, 1)], n / det, 1e-10));
        assert!(close(sol.xtx_inverse[(0, 1)], -sx / det, 1e-10));
    }

    #[test]
    fn residuals_orthogonal_to_retained_columns() {
        let x = Matrix::from_columns(&[
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.3, 1.7, 2.2, 3.9, 4.1, 5.5],
            vec![2.0, -1.0, 0.5, 0.7, -2.2, 1.1],
        ])
        .unwrap();
        let y = vec![1.0, 0.0, 2.0, -1.0, 3.0, 0.5];
        let sol = solve_least_squares(&x, &y).unwrap();
        let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..3 {
            let dot: f64 = x.column(j).iter().zip(&sol.residuals).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn refit_on_fitted_values_is_idempotent() {
        let x = Matrix::from_columns(&[
            vec![1.0; 5],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        ])
        .unwrap();
        let sol = solve_least_squares(&x, &[2.0, 2.5, 4.0, 3.5, 6.0]).unwrap();
        let refit = solve_least_squares(&x, &sol.fitted).unwrap();
        for j in 0..2 {
            assert!(close(sol.coefficients[j], refit.coefficients[j], 1e-10));
        }
    }

    #[test]
    fn all_zero_design_yields_rank_zero() {
        let x = Matrix::from_columns(&[vec![0.0; 4]]).unwrap();
        let sol = solve_least_squares(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(sol.rank, 0);
        assert!(sol.omitted[0]);
        assert_eq!(sol.residuals, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let x = Matrix::identity(3);
        assert!(solve_least_squares(&x, &[1.0, 2.0]).is_err());
    }
}
