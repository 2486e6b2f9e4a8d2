//! Endogeneity, instrument-strength, and multicollinearity diagnostics.

use serde::{Deserialize, Serialize};

use crate::estimators::ModelSpec;
use crate::linalg::{sandwich_with_bread, solve_least_squares, Matrix};
use crate::panel::PanelDataset;
use crate::stats::f_pvalue;
use crate::{Error, Result};

/// Rule-of-thumb threshold below which instruments are flagged weak.
pub const WEAK_INSTRUMENT_F: f64 = 10.0;

/// Outcome of one diagnostic test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    /// (numerator, denominator) degrees of freedom for F-shaped tests.
    pub df: (f64, f64),
    pub p_value: f64,
    pub null_hypothesis: String,
    /// Echo of the model and columns the test saw.
    pub inputs: String,
    pub weak_flag: Option<bool>,
}

use crate::estimators::fit::internals as fit_internals;

/// Joint F test of the excluded instruments in the first-stage regression of
/// the first declared endogenous column, after the within transform when the
/// spec requests fixed effects. The test never reads the dependent column.
pub fn first_stage_f(spec: &ModelSpec, panel: &PanelDataset) -> Result<TestResult> {
    if spec.endogenous.is_empty() || spec.instruments.is_empty() {
        return Err(Error::Spec(
            "first-stage F needs at least one endogenous column and one instrument".into(),
        ));
    }
    let parts = fit_internals::prepare_iv_parts(spec, panel)?;
    let n = parts.n;
    let endo_col = &parts.declared_endo_cols[0];
    let q = parts.declared_z_cols.len() as f64;

    // Unrestricted: included exogenous + declared instruments. Restricted:
    // exogenous only.
    let mut unrestricted = parts.exog_cols.clone();
    unrestricted.extend(parts.declared_z_cols.iter().cloned());
    let xu = fit_internals::matrix_with_intercept(&unrestricted, n, parts.with_intercept)?;
    let solu = solve_least_squares(&xu, endo_col)?;
    if solu.rank == 0 {
        return Err(Error::RankDeficient("first stage has rank zero".into()));
    }
    let ssr_u = solu.sum_sq_residuals();

    let ssr_r = if parts.exog_cols.is_empty() && !parts.with_intercept {
        endo_col.iter().map(|v| v * v).sum()
    } else {
        let xr = fit_internals::matrix_with_intercept(&parts.exog_cols, n, parts.with_intercept)?;
        solve_least_squares(&xr, endo_col)?.sum_sq_residuals()
    };

    let df_resid = n as f64 - solu.rank as f64 - parts.n_groups as f64;
    if df_resid <= 0.0 {
        return Err(Error::Data("no residual degrees of freedom in the first stage".into()));
    }
    let statistic = if ssr_u <= 0.0 {
        // Perfect first-stage fit: relevance is unbounded; report a large
        // finite statistic rather than failing.
        f64::MAX.sqrt()
    } else {
        ((ssr_r - ssr_u).max(0.0) / q) / (ssr_u / df_resid)
    };
    let p_value = f_pvalue(statistic, q, df_resid)?;

    Ok(TestResult {
        name: "first-stage F".into(),
        statistic,
        df: (q, df_resid),
        p_value,
        null_hypothesis: "excluded instruments are jointly irrelevant in the first stage".into(),
        inputs: format!(
            "model '{}': {} on [{}] given [{}]",
            spec.name,
            spec.endogenous[0],
            spec.instruments.join(", "),
            spec.exogenous.join(", ")
        ),
        weak_flag: Some(statistic < WEAK_INSTRUMENT_F),
    })
}

/// Regression-based Durbin-Wu-Hausman test: the structural equation is
/// augmented with the first-stage residuals of each instrumented term and
/// their joint significance is tested with the spec's covariance variant.
pub fn wu_hausman(spec: &ModelSpec, panel: &PanelDataset) -> Result<TestResult> {
    if spec.endogenous.is_empty() || spec.instruments.is_empty() {
        return Err(Error::Spec(
            "the Wu-Hausman test needs endogenous columns and instruments".into(),
        ));
    }
    let parts = fit_internals::prepare_iv_parts(spec, panel)?;
    let n = parts.n;

    // First-stage residuals per instrumented term; terms whose residuals are
    // numerically zero (self-instrumented) carry no test content.
    let mut fs_cols = parts.exog_cols.clone();
    fs_cols.extend(parts.z_cols.iter().cloned());
    let fs_design = fit_internals::matrix_with_intercept(&fs_cols, n, parts.with_intercept)?;
    let mut resid_cols: Vec<Vec<f64>> = Vec::new();
    for endo in &parts.endo_cols {
        let fs = solve_least_squares(&fs_design, endo)?;
        let scale = endo.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        if fs.residuals.iter().all(|e| e.abs() < 1e-12 * scale) {
            continue;
        }
        resid_cols.push(fs.residuals);
    }

    let inputs = format!(
        "model '{}': instrumented [{}], instruments [{}]",
        spec.name,
        spec.endogenous.join(", "),
        spec.instruments.join(", ")
    );
    if resid_cols.is_empty() {
        return Ok(TestResult {
            name: "Wu-Hausman".into(),
            statistic: 0.0,
            df: (0.0, n as f64),
            p_value: 1.0,
            null_hypothesis: "the instrumented columns are exogenous".into(),
            inputs,
            weak_flag: None,
        });
    }

    // Augmented structural regression with original endogenous columns.
    let mut aug_cols = parts.struct_cols.clone();
    let k_struct = aug_cols.len();
    aug_cols.extend(resid_cols.iter().cloned());
    let x = fit_internals::matrix_with_intercept(&aug_cols, n, parts.with_intercept)?;
    let sol = solve_least_squares(&x, &parts.y)?;
    let offset = usize::from(parts.with_intercept);
    let df_resid = n as f64 - sol.rank as f64 - parts.n_groups as f64;
    if df_resid <= 0.0 {
        return Err(Error::Data("no residual degrees of freedom in the augmented model".into()));
    }
    let cov = sandwich_with_bread(&x, &sol.xtx_inverse, &sol.residuals, spec.covariance, df_resid)?;

    // Wald statistic on the residual-column coefficients that survived.
    let tested: Vec<usize> = (0..resid_cols.len())
        .map(|j| offset + k_struct + j)
        .filter(|&j| !sol.omitted[j])
        .collect();
    if tested.is_empty() {
        return Ok(TestResult {
            name: "Wu-Hausman".into(),
            statistic: 0.0,
            df: (0.0, df_resid),
            p_value: 1.0,
            null_hypothesis: "the instrumented columns are exogenous".into(),
            inputs,
            weak_flag: None,
        });
    }
    let q = tested.len();
    let mut vbb = Matrix::zeros(q, q);
    for (a, &i) in tested.iter().enumerate() {
        for (b, &j) in tested.iter().enumerate() {
            vbb[(a, b)] = cov[(i, j)];
        }
    }
    let b: Vec<f64> = tested.iter().map(|&i| sol.coefficients[i]).collect();
    let w = quadratic_form_inv(&vbb, &b)?;
    let statistic = w / q as f64;
    let p_value = f_pvalue(statistic.max(0.0), q as f64, df_resid)?;

    Ok(TestResult {
        name: "Wu-Hausman".into(),
        statistic: statistic.max(0.0),
        df: (q as f64, df_resid),
        p_value,
        null_hypothesis: "the instrumented columns are exogenous".into(),
        inputs,
        weak_flag: None,
    })
}

/// b' V^-1 b via the least-squares solver (V symmetric positive definite).
fn quadratic_form_inv(v: &Matrix, b: &[f64]) -> Result<f64> {
    let sol = solve_least_squares(v, b)?;
    if sol.rank < v.cols() {
        return Err(Error::RankDeficient(
            "singular covariance block in Wald statistic".into(),
        ));
    }
    Ok(b.iter().zip(&sol.coefficients).map(|(a, c)| a * c).sum())
}

/// Variance inflation factors: VIF_j = 1 / (1 - R2_j) from regressing each
/// column on the others with an intercept, over listwise-complete rows.
/// Perfect collinearity reports +infinity.
pub fn vif(panel: &PanelDataset, columns: &[&str]) -> Result<Vec<(String, f64)>> {
    if columns.len() < 2 {
        return Err(Error::Invalid("VIF needs at least two columns".into()));
    }
    let data = listwise_columns(panel, columns)?;
    let n = data[0].len();
    let mut out = Vec::with_capacity(columns.len());
    for (j, &name) in columns.iter().enumerate() {
        let others: Vec<Vec<f64>> = (0..columns.len())
            .filter(|&i| i != j)
            .map(|i| data[i].clone())
            .collect();
        let x = fit_internals::matrix_with_intercept(&others, n, true)?;
        let sol = solve_least_squares(&x, &data[j])?;
        let mean = data[j].iter().sum::<f64>() / n as f64;
        let sst: f64 = data[j].iter().map(|v| (v - mean).powi(2)).sum();
        let vif_j = if sst <= 0.0 {
            f64::INFINITY
        } else {
            let r2 = 1.0 - sol.sum_sq_residuals() / sst;
            if r2 >= 1.0 - 1e-12 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - r2)
            }
        };
        out.push((name.to_string(), vif_j));
    }
    Ok(out)
}

/// Pearson correlation matrix over pairwise-complete observations.
pub fn correlation_matrix(panel: &PanelDataset, columns: &[&str]) -> Result<Matrix> {
    let k = columns.len();
    if k == 0 {
        return Err(Error::Invalid("correlation needs at least one column".into()));
    }
    let cols: Vec<&[Option<f64>]> = columns
        .iter()
        .map(|&c| panel.values(c))
        .collect::<Result<_>>()?;
    let mut m = Matrix::zeros(k, k);
    for a in 0..k {
        m[(a, a)] = 1.0;
        for b in (a + 1)..k {
            let pairs: Vec<(f64, f64)> = cols[a]
                .iter()
                .zip(cols[b])
                .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
                .collect();
            if pairs.len() < 2 {
                return Err(Error::Data(format!(
                    "columns '{}' and '{}' share fewer than two observations",
                    columns[a], columns[b]
                )));
            }
            let n = pairs.len() as f64;
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
            if sxx <= 0.0 || syy <= 0.0 {
                return Err(Error::Data(format!(
                    "zero-variance column in correlation: '{}' or '{}'",
                    columns[a], columns[b]
                )));
            }
            let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
            m[(a, b)] = r;
            m[(b, a)] = r;
        }
    }
    Ok(m)
}

fn listwise_columns(panel: &PanelDataset, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<&[Option<f64>]> = columns
        .iter()
        .map(|&c| panel.values(c))
        .collect::<Result<_>>()?;
    let n = panel.n_rows();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| cols.iter().all(|c| c[i].is_some()))
        .collect();
    if keep.is_empty() {
        return Err(Error::Data("no listwise-complete rows".into()));
    }
    Ok(cols
        .iter()
        .map(|c| keep.iter().map(|&i| c[i].unwrap()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Unit;

    fn panel_from(cols: &[(&str, Vec<Option<f64>>)], states: &[u32], years: &[i32]) -> PanelDataset {
        let mut p = PanelDataset::balanced_grid(states, years).unwrap();
        for (name, values) in cols {
            p.add_column(name, Unit::Dimensionless, values.clone()).unwrap();
        }
        p
    }

    #[test]
    fn orthogonal_instrument_flags_weak() {
        // Instrument orthogonal to the endogenous column by construction.
        let x = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let z = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let y = vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];
        let p = panel_from(
            &[
                ("y", y.into_iter().map(Some).collect()),
                ("x", x.into_iter().map(Some).collect()),
                ("z", z.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2, 3],
        );
        let spec = ModelSpec::new("m", "y").with_instrumented(&["x"], &["z"]);
        let t = first_stage_f(&spec, &p).unwrap();
        assert!(t.statistic < 1e-20, "F = {}", t.statistic);
        assert_eq!(t.weak_flag, Some(true));
    }

    #[test]
    fn perfect_relevance_reports_large_finite_f() {
        let z: Vec<f64> = (0..8).map(|i| 0.5 + i as f64).collect();
        let x: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let p = panel_from(
            &[
                ("y", y.into_iter().map(Some).collect()),
                ("x", x.into_iter().map(Some).collect()),
                ("z", z.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2, 3],
        );
        let spec = ModelSpec::new("m", "y").with_instrumented(&["x"], &["z"]);
        let t = first_stage_f(&spec, &p).unwrap();
        assert!(t.statistic.is_finite());
        assert!(t.statistic > 1e10);
        assert_eq!(t.weak_flag, Some(false));
    }

    #[test]
    fn first_stage_f_ignores_the_dependent_column() {
        let x = vec![0.3, 1.1, 2.4, 2.9, 4.2, 5.5, 6.1, 7.7];
        let z = vec![0.5, 1.0, 2.0, 3.1, 4.0, 5.2, 6.3, 7.0];
        let y1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y2 = vec![8.0, 1.0, 4.0, 4.0, 2.0, 9.0, 0.0, 3.0];
        let base = vec![
            ("x", x.into_iter().map(Some).collect::<Vec<_>>()),
            ("z", z.into_iter().map(Some).collect::<Vec<_>>()),
        ];
        let mut cols1 = base.clone();
        cols1.push(("y", y1.into_iter().map(Some).collect()));
        let mut cols2 = base;
        cols2.push(("y", y2.into_iter().map(Some).collect()));
        let states = [1, 2];
        let years = [0, 1, 2, 3];
        let p1 = panel_from(&cols1, &states, &years);
        let p2 = panel_from(&cols2, &states, &years);
        let spec = ModelSpec::new("m", "y").with_instrumented(&["x"], &["z"]);
        let f1 = first_stage_f(&spec, &p1).unwrap().statistic;
        let f2 = first_stage_f(&spec, &p2).unwrap().statistic;
        assert_eq!(f1, f2);
    }

    #[test]
    fn wu_hausman_is_zero_when_endogenous_equals_fitted() {
        // x exactly linear in z: first-stage residuals vanish.
        let z: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 + 0.1).collect();
        let x: Vec<f64> = z.iter().map(|v| 3.0 * v + 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.5).collect();
        let p = panel_from(
            &[
                ("y", y.into_iter().map(Some).collect()),
                ("x", x.into_iter().map(Some).collect()),
                ("z", z.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2, 3, 4],
        );
        let spec = ModelSpec::new("m", "y").with_instrumented(&["x"], &["z"]);
        let t = wu_hausman(&spec, &p).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn orthogonal_centered_columns_have_unit_vif() {
        let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let p = panel_from(
            &[
                ("a", a.into_iter().map(Some).collect()),
                ("b", b.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2, 3],
        );
        for (_, v) in vif(&p, &["a", "b"]).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn correlated_pair_matches_analytic_vif() {
        // Correlation 0.6 exactly: VIF = 1 / (1 - 0.36) = 1.5625.
        let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        // b = 0.6 a + 0.8 e with e orthogonal to a, both unit variance.
        let e = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        let mut eo = e.clone();
        eo[8] = -1.0;
        eo[9] = 1.0;
        let b: Vec<f64> = a.iter().zip(&eo).map(|(x, y)| 0.6 * x + 0.8 * y).collect();
        let dot: f64 = a.iter().zip(&eo).map(|(x, y)| x * y).sum();
        assert_eq!(dot, 0.0);
        let p = panel_from(
            &[
                ("a", a.into_iter().map(Some).collect()),
                ("b", b.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2, 3, 4],
        );
        let v = vif(&p, &["a", "b"]).unwrap();
        assert!((v[0].1 - 1.5625).abs() < 1e-10, "{}", v[0].1);
        assert!((v[1].1 - 1.5625).abs() < 1e-10);
    }

    #[test]
    fn perfectly_collinear_columns_report_infinite_vif() {
        let a: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        let p = panel_from(
            &[
                ("a", a.into_iter().map(Some).collect()),
                ("b", b.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2],
        );
        let v = vif(&p, &["a", "b"]).unwrap();
        assert!(v[0].1.is_infinite());
    }

    #[test]
    fn correlation_diagonal_and_negation() {
        let a: Vec<f64> = vec![0.4, 1.7, 2.2, 3.1, 4.8, 5.5];
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let p = panel_from(
            &[
                ("a", a.into_iter().map(Some).collect()),
                ("b", b.into_iter().map(Some).collect()),
            ],
            &[1, 2],
            &[0, 1, 2],
        );
        let m = correlation_matrix(&p, &["a", "b"]).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert!((m[(0, 1)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn year_constant_and_state_constant_columns_are_uncorrelated() {
        // On a balanced grid a year-broadcast column and a state-broadcast
        // column are exactly uncorrelated.
        let states = [1, 2, 3];
        let years = [2000, 2001, 2002, 2003];
        let mut p = PanelDataset::balanced_grid(&states, &years).unwrap();
        let ngi_by_year = [10.0, 30.0, 15.0, 44.0];
        let dist_by_state = [184.0, 788.0, 2032.0];
        let mut ngi = Vec::new();
        let mut dist = Vec::new();
        for key in p.keys().to_vec() {
            let yi = years.iter().position(|&y| Some(y) == key.year).unwrap();
            let si = states.iter().position(|&s| Some(s) == key.state).unwrap();
            ngi.push(Some(ngi_by_year[yi]));
            dist.push(Some(dist_by_state[si]));
        }
        p.add_column("ngi", Unit::MillionMcf, ngi).unwrap();
        p.add_column("dist", Unit::Km, dist).unwrap();
        let m = correlation_matrix(&p, &["ngi", "dist"]).unwrap();
        assert!(m[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn zero_variance_column_errors() {
        let p = panel_from(
            &[
                ("a", vec![Some(1.0), Some(1.0), Some(1.0), Some(1.0)]),
                ("b", vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
            ],
            &[1, 2],
            &[0, 1],
        );
        assert!(correlation_matrix(&p, &["a", "b"]).is_err());
    }
}
