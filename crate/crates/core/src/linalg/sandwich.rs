//! Sandwich covariance assembly for least-squares coefficients.

use serde::{Deserialize, Serialize};

use super::{solve_least_squares, Matrix};
use crate::{Error, Result};

/// Covariance estimator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovVariant {
    /// s^2 (X'X)^-1 under homoskedasticity.
    Classical,
    /// White sandwich (X'X)^-1 X' diag(e^2) X (X'X)^-1.
    Hc0,
    /// HC0 scaled by n/(n-k).
    #[default]
    Hc1,
}

impl CovVariant {
    pub fn label(&self) -> &'static str {
        match self {
            CovVariant::Classical => "classical",
            CovVariant::Hc0 => "hc0",
            CovVariant::Hc1 => "hc1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(CovVariant::Classical),
            "hc0" => Ok(CovVariant::Hc0),
            "hc1" => Ok(CovVariant::Hc1),
            other => Err(Error::Invalid(format!(
                "unknown covariance variant '{other}' (expected classical, hc0, or hc1)"
            ))),
        }
    }
}

impl std::fmt::Display for CovVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Covariance of least-squares coefficients for a full-rank design.
///
/// `x` must contain only rank-retained columns; `residuals` must align with
/// its rows. The HC1 scale uses n/(n-k); callers absorbing group effects
/// apply their own degrees-of-freedom correction via [`sandwich_with_bread`].
pub fn sandwich_covariance(x: &Matrix, residuals: &[f64], variant: CovVariant) -> Result<Matrix> {
    let n = x.rows();
    let k = x.cols();
    if residuals.len() != n {
        return Err(Error::Dimension(format!(
            "{} residuals for {} design rows",
            residuals.len(),
            n
        )));
    }
    if variant == CovVariant::Hc1 && n <= k {
        return Err(Error::Invalid(format!(
            "HC1 requires n > k (n = {n}, k = {k})"
        )));
    }
    let sol = solve_least_squares(x, &vec![0.0; n])?;
    if sol.rank < k {
        return Err(Error::RankDeficient(
            "sandwich covariance needs a full-rank design".into(),
        ));
    }
    let df = (n - k).max(1) as f64;
    sandwich_with_bread(x, &sol.xtx_inverse, residuals, variant, df)
}

/// Sandwich assembly with a caller-supplied bread matrix and residual
/// degrees of freedom. The bread is a (generalized) inverse of X'X whose
/// omitted rows/columns are zero; those positions stay zero in the output.
pub fn sandwich_with_bread(
    x: &Matrix,
    xtx_inv: &Matrix,
    residuals: &[f64],
    variant: CovVariant,
    df_residual: f64,
) -> Result<Matrix> {
    let n = x.rows();
    let k = x.cols();
    if df_residual <= 0.0 {
        return Err(Error::Invalid(format!(
            "nonpositive residual degrees of freedom ({df_residual})"
        )));
    }
    let mut cov = match variant {
        CovVariant::Classical => {
            let ssr: f64 = residuals.iter().map(|e| e * e).sum();
            let s2 = ssr / df_residual;
            let mut c = xtx_inv.clone();
            c.scale(s2);
            c
        }
        CovVariant::Hc0 | CovVariant::Hc1 => {
            // Meat: X' diag(e^2) X.
            let mut meat = Matrix::zeros(k, k);
            for i in 0..n {
                let w = residuals[i] * residuals[i];
                let r = x.row(i);
                for a in 0..k {
                    let ra = r[a] * w;
                    for b in a..k {
                        meat[(a, b)] += ra * r[b];
                    }
                }
            }
            for a in 0..k {
                for b in 0..a {
                    meat[(a, b)] = meat[(b, a)];
                }
            }
            let mut c = xtx_inv.matmul(&meat)?.matmul(xtx_inv)?;
            if variant == CovVariant::Hc1 {
                c.scale(n as f64 / df_residual);
            }
            c
        }
    };
    cov.symmetrize();
    Ok(cov)
}
