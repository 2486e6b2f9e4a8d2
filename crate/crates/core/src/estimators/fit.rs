//! The three estimators behind every reported table: pooled OLS, the within
//! (state fixed-effects) estimator, and two-stage least squares.

use std::collections::BTreeMap;

use super::design::{build_fit_data, columns_matrix, demean_columns, group_means, FitData, Term};
use super::{EstimatorKind, FitResult, FixedEffects, IvMode, ModelSpec};
use crate::linalg::{sandwich_with_bread, solve_least_squares, Matrix};
use crate::panel::{PanelDataset, StateId};
use crate::stats::student_t_pvalue;
use crate::{Error, Result};

/// Routes a spec to the estimator it asks for.
pub fn fit(spec: &ModelSpec, panel: &PanelDataset) -> Result<FitResult> {
    if !spec.endogenous.is_empty() {
        fit_2sls(spec, panel)
    } else if spec.fixed_effects == FixedEffects::State {
        fit_fe(spec, panel)
    } else {
        fit_ols(spec, panel)
    }
}

/// Pooled least squares with intercept.
pub fn fit_ols(spec: &ModelSpec, panel: &PanelDataset) -> Result<FitResult> {
    if !spec.endogenous.is_empty() {
        return Err(Error::Spec(format!(
            "model '{}' declares endogenous columns; use the two-stage estimator",
            spec.name
        )));
    }
    if spec.fixed_effects != FixedEffects::None {
        return Err(Error::Spec(format!(
            "model '{}' requests fixed effects; use the within estimator",
            spec.name
        )));
    }
    let data = build_fit_data(spec, panel)?;
    let x = data.x_matrix(true)?;
    let sol = solve_least_squares(&x, &data.y)?;
    let df = data.n() as f64 - sol.rank as f64;
    if df <= 0.0 {
        return Err(Error::Data(format!(
            "model '{}' has no residual degrees of freedom ({} rows, rank {})",
            spec.name,
            data.n(),
            sol.rank
        )));
    }
    let covariance = sandwich_with_bread(&x, &sol.xtx_inverse, &sol.residuals, spec.covariance, df)?;
    let r_squared = centered_r_squared(&data.y, sol.sum_sq_residuals());

    finish(
        spec,
        panel,
        FitParts {
            kind: EstimatorKind::Ols,
            data: &data,
            has_intercept: true,
            coefficients: sol.coefficients,
            omitted: sol.omitted,
            covariance,
            residuals: sol.residuals,
            df,
            r_squared,
            groups: 0,
            mu: None,
            iv_mode: None,
        },
    )
}

/// Within estimator: state means removed from every column, then least
/// squares on the time-varying content. Group-invariant regressors fall out
/// of the identified subspace and are flagged omitted.
pub fn fit_fe(spec: &ModelSpec, panel: &PanelDataset) -> Result<FitResult> {
    if !spec.endogenous.is_empty() {
        return Err(Error::Spec(format!(
            "model '{}' declares endogenous columns; use the two-stage estimator",
            spec.name
        )));
    }
    if spec.fixed_effects != FixedEffects::State {
        return Err(Error::Spec(format!("model '{}' does not request state fixed effects", spec.name)));
    }
    let data = build_fit_data(spec, panel)?;

    let x_raw = data.x_cols.clone();
    let mut x_cols = data.x_cols.clone();
    let mut y_cols = vec![data.y.clone()];
    let groups = demean_columns(&mut x_cols, &data.states);
    demean_columns(&mut y_cols, &data.states);
    let y_within = y_cols.pop().unwrap();

    let x = columns_matrix(&x_cols, data.n(), false)?;
    let sol = solve_least_squares(&x, &y_within)?;
    if sol.rank == 0 {
        return Err(Error::RankDeficient(format!(
            "model '{}': every regressor is state-invariant; nothing identified within states",
            spec.name
        )));
    }
    let n_groups = groups.len();
    let df = data.n() as f64 - sol.rank as f64 - n_groups as f64;
    if df <= 0.0 {
        return Err(Error::Data(format!(
            "model '{}' has no residual degrees of freedom after absorbing {} states",
            spec.name, n_groups
        )));
    }
    let covariance = sandwich_with_bread(&x, &sol.xtx_inverse, &sol.residuals, spec.covariance, df)?;
    let r_squared = centered_r_squared(&data.y, sol.sum_sq_residuals());
    let mu = recover_fixed_effects(&data.y, &x_raw, &sol.coefficients, &groups);

    finish(
        spec,
        panel,
        FitParts {
            kind: EstimatorKind::Fe,
            data: &data,
            has_intercept: false,
            coefficients: sol.coefficients,
            omitted: sol.omitted,
            covariance,
            residuals: sol.residuals,
            df,
            r_squared,
            groups: n_groups,
            mu: Some(mu),
            iv_mode: None,
        },
    )
}

/// Two-stage least squares, with or without state fixed effects.
///
/// Reported residuals are structural: y - X b with the original endogenous
/// columns. The covariance sandwich is built on those residuals with the
/// second-stage bread. An endogenous interaction follows the spec's mode:
/// instrument-by-exogenous products, or a rebuild from first-stage fitted
/// values.
pub fn fit_2sls(spec: &ModelSpec, panel: &PanelDataset) -> Result<FitResult> {
    let data = build_fit_data(spec, panel)?;
    if data.endo_idx.is_empty() {
        // Degenerates to plain least squares.
        let mut plain = spec.clone();
        plain.instruments.clear();
        return fit(&plain, panel);
    }

    let fe = spec.fixed_effects == FixedEffects::State;
    let x_raw = data.x_cols.clone();
    let mut x_cols = data.x_cols.clone();
    let mut z_cols = data.z_cols.clone();
    let mut y_cols = vec![data.y.clone()];
    let groups = if fe {
        let g = demean_columns(&mut x_cols, &data.states);
        demean_columns(&mut z_cols, &data.states);
        demean_columns(&mut y_cols, &data.states);
        g
    } else {
        BTreeMap::new()
    };
    let y = y_cols.pop().unwrap();
    let n = data.n();
    let with_intercept = !fe;

    // First stage: each instrumented term on the exogenous structural terms
    // plus instruments. Terms touching an endogenous column never appear on
    // the first-stage right-hand side in either mode.
    let instrumented = instrumented_term_indices(spec, &data);
    let included_exog: Vec<Vec<f64>> = (0..data.terms.len())
        .filter(|i| !instrumented.contains(i))
        .map(|i| x_cols[i].clone())
        .collect();
    let mut first_stage_cols = included_exog;
    first_stage_cols.extend(z_cols.iter().cloned());
    let fs_design = columns_matrix(&first_stage_cols, n, with_intercept)?;

    let mut fitted: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &j in &data.endo_idx {
        let fs = solve_least_squares(&fs_design, &x_cols[j])?;
        if fs.rank == 0 {
            return Err(Error::WeakInstruments(format!(
                "model '{}': first stage for '{}' has rank zero",
                spec.name, data.term_labels[j]
            )));
        }
        fitted.insert(j, fs.fitted);
    }

    // Second stage design: endogenous columns replaced by fitted values; in
    // fitted-value mode, endogenous interactions rebuilt from fitted levels.
    let mut xhat_cols = x_cols.clone();
    for (&j, f) in &fitted {
        xhat_cols[j] = f.clone();
    }
    if spec.iv_mode == IvMode::FittedValue {
        rebuild_fitted_interactions(spec, &data, &groups, &fitted, &mut xhat_cols, fe)?;
    }

    let xhat = columns_matrix(&xhat_cols, n, with_intercept)?;
    let sol2 = solve_least_squares(&xhat, &y)?;

    // Identification: an instrumented column dropped in the second stage
    // means the instruments carry no independent variation for it.
    let offset = usize::from(with_intercept);
    for &j in &instrumented {
        if sol2.omitted[j + offset] {
            return Err(Error::WeakInstruments(format!(
                "model '{}': instrumented term '{}' is collinear after the first stage",
                spec.name, data.term_labels[j]
            )));
        }
    }

    // Structural residuals with the original columns.
    let x_struct = columns_matrix(&x_cols, n, with_intercept)?;
    let residuals: Vec<f64> = {
        let fitted_struct = x_struct.matvec(&sol2.coefficients)?;
        y.iter().zip(&fitted_struct).map(|(a, b)| a - b).collect()
    };

    let n_groups = groups.len();
    let rank = sol2.rank;
    let df = n as f64 - rank as f64 - n_groups as f64;
    if df <= 0.0 {
        return Err(Error::Data(format!(
            "model '{}' has no residual degrees of freedom",
            spec.name
        )));
    }
    let covariance = sandwich_with_bread(&xhat, &sol2.xtx_inverse, &residuals, spec.covariance, df)?;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = centered_r_squared(&data.y, ssr);
    let mu = if fe {
        Some(recover_fixed_effects(&data.y, &x_raw, &strip_intercept(&sol2.coefficients, offset), &groups))
    } else {
        None
    };

    finish(
        spec,
        panel,
        FitParts {
            kind: if fe { EstimatorKind::FeTwoSls } else { EstimatorKind::TwoSls },
            data: &data,
            has_intercept: with_intercept,
            coefficients: sol2.coefficients,
            omitted: sol2.omitted,
            covariance,
            residuals,
            df,
            r_squared,
            groups: n_groups,
            mu,
            iv_mode: Some(spec.iv_mode),
        },
    )
}

/// Terms that end up instrumented in the second stage under the spec's mode.
pub(crate) fn instrumented_term_indices(spec: &ModelSpec, data: &FitData) -> Vec<usize> {
    let is_endo_col = |c: &str| spec.endogenous.iter().any(|e| e == c);
    data.terms
        .iter()
        .enumerate()
        .filter(|(_, t)| match t {
            Term::Column(c) => is_endo_col(c),
            Term::Interaction(a, b) => is_endo_col(a) || is_endo_col(b),
        })
        .map(|(i, _)| i)
        .collect()
}

fn strip_intercept(coefficients: &[f64], offset: usize) -> Vec<f64> {
    coefficients[offset..].to_vec()
}

fn rebuild_fitted_interactions(
    spec: &ModelSpec,
    data: &FitData,
    groups: &BTreeMap<StateId, Vec<usize>>,
    fitted: &BTreeMap<usize, Vec<f64>>,
    xhat_cols: &mut [Vec<f64>],
    fe: bool,
) -> Result<()> {
    let is_endo_col = |c: &str| spec.endogenous.iter().any(|e| e == c);
    // Raw-scale fitted endogenous levels: demeaned fit plus group means.
    let mut fitted_raw: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (&j, f) in fitted {
        let Term::Column(name) = &data.terms[j] else {
            continue;
        };
        let mut raw = f.clone();
        if fe {
            let means = group_means(&data.x_cols[j], groups);
            for (s, members) in groups {
                for &i in members {
                    raw[i] += means[s];
                }
            }
        }
        fitted_raw.insert(name.clone(), raw);
    }
    for (j, t) in data.terms.iter().enumerate() {
        let Term::Interaction(a, b) = t else {
            continue;
        };
        let (endo, other) = if is_endo_col(a) {
            (a, b)
        } else if is_endo_col(b) {
            (b, a)
        } else {
            continue;
        };
        let endo_fit = fitted_raw.get(endo).ok_or_else(|| {
            Error::Spec(format!(
                "interaction references endogenous column '{endo}' with no first stage"
            ))
        })?;
        // The raw (transformed, undemeaned) other factor is the interaction
        // column divided elementwise by the endogenous column; recompute it
        // directly from the stored raw term values instead.
        let other_idx = data
            .terms
            .iter()
            .position(|t| matches!(t, Term::Column(c) if c == other));
        let other_vals: Vec<f64> = match other_idx {
            Some(i) => data.x_cols[i].clone(),
            None => {
                // Factor not a main effect (absorbed under FE): derive from
                // the raw interaction and endogenous values.
                let endo_idx = data
                    .terms
                    .iter()
                    .position(|t| matches!(t, Term::Column(c) if c == endo))
                    .ok_or_else(|| {
                        Error::Spec(format!("endogenous column '{endo}' missing from terms"))
                    })?;
                data.x_cols[j]
                    .iter()
                    .zip(&data.x_cols[endo_idx])
                    .map(|(prod, e)| if *e != 0.0 { prod / e } else { 0.0 })
                    .collect()
            }
        };
        let mut col: Vec<f64> = endo_fit.iter().zip(&other_vals).map(|(f, o)| f * o).collect();
        if fe {
            let mut wrap = vec![std::mem::take(&mut col)];
            let states: Vec<StateId> = {
                let mut s = vec![0; data.n()];
                for (&g, members) in groups {
                    for &i in members {
                        s[i] = g;
                    }
                }
                s
            };
            demean_columns(&mut wrap, &states);
            col = wrap.pop().unwrap();
        }
        xhat_cols[j] = col;
    }
    Ok(())
}

fn centered_r_squared(y: &[f64], ssr: f64) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst > 0.0 {
        1.0 - ssr / sst
    } else {
        f64::NAN
    }
}

fn recover_fixed_effects(
    y: &[f64],
    x_raw: &[Vec<f64>],
    slopes: &[f64],
    groups: &BTreeMap<StateId, Vec<usize>>,
) -> Vec<(StateId, f64)> {
    let mut net = y.to_vec();
    for (col, &b) in x_raw.iter().zip(slopes) {
        if b == 0.0 {
            continue;
        }
        for (v, x) in net.iter_mut().zip(col) {
            *v -= b * x;
        }
    }
    groups
        .iter()
        .map(|(&s, members)| {
            let m = members.iter().map(|&i| net[i]).sum::<f64>() / members.len() as f64;
            (s, m)
        })
        .collect()
}

struct FitParts<'a> {
    kind: EstimatorKind,
    data: &'a FitData,
    has_intercept: bool,
    coefficients: Vec<f64>,
    omitted: Vec<bool>,
    covariance: Matrix,
    residuals: Vec<f64>,
    df: f64,
    r_squared: f64,
    groups: usize,
    mu: Option<Vec<(StateId, f64)>>,
    iv_mode: Option<IvMode>,
}

fn finish(spec: &ModelSpec, panel: &PanelDataset, parts: FitParts<'_>) -> Result<FitResult> {
    let mut terms = Vec::new();
    if parts.has_intercept {
        terms.push("(intercept)".to_string());
    }
    terms.extend(parts.data.term_labels.iter().cloned());

    let k = terms.len();
    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        if parts.omitted[j] {
            std_errors.push(None);
            t_stats.push(None);
            p_values.push(None);
            continue;
        }
        let var = parts.covariance[(j, j)].max(0.0);
        let se = var.sqrt();
        std_errors.push(Some(se));
        if se > 0.0 {
            let t = parts.coefficients[j] / se;
            t_stats.push(Some(t));
            p_values.push(Some(student_t_pvalue(t, parts.df)?));
        } else {
            t_stats.push(None);
            p_values.push(None);
        }
    }

    let used_rows = parts.data.rows.iter().map(|&i| panel.keys()[i]).collect();
    Ok(FitResult {
        estimator: parts.kind,
        terms,
        coefficients: parts.coefficients,
        omitted: parts.omitted,
        covariance: parts.covariance,
        std_errors,
        t_stats,
        p_values,
        residuals: parts.residuals,
        n_obs: parts.data.n(),
        df_residual: parts.df,
        r_squared: parts.r_squared,
        n_absorbed_groups: parts.groups,
        fixed_effect_estimates: parts.mu,
        covariance_variant: spec.covariance,
        iv_mode: parts.iv_mode,
        spec: spec.clone(),
        used_rows,
    })
}

/// Shared model views for the IV diagnostics: transformed, listwise-complete
/// columns, demeaned when fixed effects are requested, split into structural
/// terms, instrumented terms, and instruments.
pub(crate) mod internals {
    use super::*;

    pub(crate) struct IvParts {
        pub n: usize,
        pub with_intercept: bool,
        pub n_groups: usize,
        pub y: Vec<f64>,
        /// All structural term columns (original endogenous values).
        pub struct_cols: Vec<Vec<f64>>,
        /// Structural terms not touching any endogenous column.
        pub exog_cols: Vec<Vec<f64>>,
        /// Columns the fitter instruments under the spec's mode.
        pub endo_cols: Vec<Vec<f64>>,
        /// Declared endogenous columns, first stages' dependent variables.
        pub declared_endo_cols: Vec<Vec<f64>>,
        /// Declared instruments only.
        pub declared_z_cols: Vec<Vec<f64>>,
        /// Mode-expanded instruments, as the fitter sees them.
        pub z_cols: Vec<Vec<f64>>,
    }

    pub(crate) fn matrix_with_intercept(
        cols: &[Vec<f64>],
        n: usize,
        with_intercept: bool,
    ) -> Result<Matrix> {
        columns_matrix(cols, n, with_intercept)
    }

    pub(crate) fn prepare_iv_parts(spec: &ModelSpec, panel: &PanelDataset) -> Result<IvParts> {
        let data = build_fit_data(spec, panel)?;
        let fe = spec.fixed_effects == FixedEffects::State;
        let mut x_cols = data.x_cols.clone();
        let mut z_cols = data.z_cols.clone();
        let mut y_cols = vec![data.y.clone()];
        let n_groups = if fe {
            let g = demean_columns(&mut x_cols, &data.states);
            demean_columns(&mut z_cols, &data.states);
            demean_columns(&mut y_cols, &data.states);
            g.len()
        } else {
            0
        };
        let y = y_cols.pop().unwrap();

        let instrumented = instrumented_term_indices(spec, &data);
        let exog_cols: Vec<Vec<f64>> = (0..data.terms.len())
            .filter(|i| !instrumented.contains(i))
            .map(|i| x_cols[i].clone())
            .collect();
        let endo_cols: Vec<Vec<f64>> = data.endo_idx.iter().map(|&i| x_cols[i].clone()).collect();
        let declared_endo_cols: Vec<Vec<f64>> = data
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, Term::Column(c) if spec.endogenous.contains(c)))
            .map(|(i, _)| x_cols[i].clone())
            .collect();
        let declared_z_cols: Vec<Vec<f64>> = z_cols[..spec.instruments.len()].to_vec();

        Ok(IvParts {
            n: data.n(),
            with_intercept: !fe,
            n_groups,
            y,
            struct_cols: x_cols,
            exog_cols,
            endo_cols,
            declared_endo_cols,
            declared_z_cols,
            z_cols,
        })
    }
}

/// Replaces each named column by its deviation from the state mean, computed
/// over rows that are complete across all the named columns. Incomplete rows
/// come back missing. Errors when a state has rows but none complete.
pub fn within_demean(panel: &PanelDataset, columns: &[&str]) -> Result<PanelDataset> {
    let mut complete = vec![true; panel.n_rows()];
    for &name in columns {
        for (i, v) in panel.values(name)?.iter().enumerate() {
            if v.is_none() {
                complete[i] = false;
            }
        }
    }
    let mut groups: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
    let mut seen_states: std::collections::BTreeSet<StateId> = std::collections::BTreeSet::new();
    for (i, key) in panel.keys().iter().enumerate() {
        let Some(s) = key.state else {
            return Err(Error::Data("within transform needs state-keyed rows".into()));
        };
        seen_states.insert(s);
        if complete[i] {
            groups.entry(s).or_default().push(i);
        }
    }
    for &s in &seen_states {
        if !groups.contains_key(&s) {
            return Err(Error::Data(format!(
                "state {s} has no complete rows for the within transform"
            )));
        }
    }

    let mut out = panel.clone();
    for &name in columns {
        let col = panel.column(name)?;
        let mut values = vec![None; panel.n_rows()];
        for members in groups.values() {
            let mean = members
                .iter()
                .map(|&i| col.values[i].expect("complete row"))
                .sum::<f64>()
                / members.len() as f64;
            for &i in members {
                values[i] = Some(col.values[i].unwrap() - mean);
            }
        }
        out.replace_column(name, col.unit, values)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CovVariant;
    use crate::panel::Unit;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn panel_from(cols: &[(&str, Vec<Option<f64>>)], states: &[StateId], years: &[i32]) -> PanelDataset {
        let mut p = PanelDataset::balanced_grid(states, years).unwrap();
        for (name, values) in cols {
            p.add_column(name, Unit::Dimensionless, values.clone()).unwrap();
        }
        p
    }

    #[test]
    fn exact_linear_data_fits_perfectly() {
        let x: Vec<Option<f64>> = (0..8).map(|i| Some(i as f64)).collect();
        let y: Vec<Option<f64>> = (0..8).map(|i| Some(3.0 * i as f64 + 1.0)).collect();
        let p = panel_from(&[("y", y), ("x", x)], &[1, 2], &[2000, 2001, 2002, 2003]);
        let spec = ModelSpec::new("m", "y").with_exogenous(&["x"]);
        let fit = fit_ols(&spec, &p).unwrap();
        assert!(close(fit.r_squared, 1.0, 1e-12));
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-10));
        assert!(close(fit.coefficient("x").unwrap(), 3.0, 1e-10));
        assert!(close(fit.coefficient("(intercept)").unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn adding_irrelevant_regressor_never_lowers_r_squared() {
        let x: Vec<Option<f64>> = [0.3, 1.9, 2.1, 3.7, 4.4, 5.9, 6.1, 7.8]
            .iter()
            .map(|&v| Some(v))
            .collect();
        let w: Vec<Option<f64>> = [1.0, -0.5, 0.7, 0.1, -1.2, 0.4, 0.9, -0.3]
            .iter()
            .map(|&v| Some(v))
            .collect();
        let y: Vec<Option<f64>> = [1.1, 3.8, 5.2, 7.9, 9.4, 12.1, 12.2, 16.0]
            .iter()
            .map(|&v| Some(v))
            .collect();
        let p = panel_from(&[("y", y), ("x", x), ("w", w)], &[1, 2], &[0, 1, 2, 3]);
        let small = fit_ols(&ModelSpec::new("s", "y").with_exogenous(&["x"]), &p).unwrap();
        let large = fit_ols(&ModelSpec::new("l", "y").with_exogenous(&["x", "w"]), &p).unwrap();
        assert!(large.r_squared >= small.r_squared - 1e-12);
    }

    #[test]
    fn fe_matches_lsdv_on_small_fixture() {
        // 4 states x 5 years with state intercepts.
        let states = [1u32, 2, 3, 4];
        let years: Vec<i32> = (0..5).collect();
        let alpha = [5.0, -2.0, 0.5, 9.0];
        let mut xv = Vec::new();
        let mut yv = Vec::new();
        let mut v = 0.17;
        for (si, _s) in states.iter().enumerate() {
            for t in 0..5 {
                v = (v * 7.3 + 1.1) % 5.0;
                let x = v + t as f64 * 0.5;
                xv.push(Some(x));
                yv.push(Some(alpha[si] + 2.5 * x + ((si + t) as f64 * 0.11).sin() * 0.2));
            }
        }
        let p = panel_from(&[("y", yv.clone()), ("x", xv.clone())], &states, &years);
        let fe = fit_fe(
            &ModelSpec::new("fe", "y")
                .with_exogenous(&["x"])
                .with_fixed_effects(FixedEffects::State),
            &p,
        )
        .unwrap();

        // LSDV oracle: explicit dummies, solved directly.
        let mut dummy_cols: Vec<Vec<f64>> = vec![vec![0.0; 20]; 4];
        for i in 0..20 {
            dummy_cols[i / 5][i] = 1.0;
        }
        let mut cols = dummy_cols;
        cols.push(xv.iter().map(|v| v.unwrap()).collect());
        let x = Matrix::from_columns(&cols).unwrap();
        let y: Vec<f64> = yv.iter().map(|v| v.unwrap()).collect();
        let lsdv = solve_least_squares(&x, &y).unwrap();
        assert!(
            close(fe.coefficient("x").unwrap(), lsdv.coefficients[4], 1e-8),
            "fe {} vs lsdv {}",
            fe.coefficient("x").unwrap(),
            lsdv.coefficients[4]
        );
        // Recovered state effects match the dummy coefficients.
        let mu = fe.fixed_effect_estimates.as_ref().unwrap();
        for (i, &(_, m)) in mu.iter().enumerate() {
            assert!(close(m, lsdv.coefficients[i], 1e-8));
        }
    }

    #[test]
    fn group_invariant_column_is_omitted_under_fe() {
        let dist = vec![Some(10.0), Some(10.0), Some(10.0), Some(25.0), Some(25.0), Some(25.0)];
        let x = vec![Some(1.0), Some(2.0), Some(3.0), Some(0.5), Some(1.5), Some(4.0)];
        let y = vec![Some(2.0), Some(4.1), Some(5.9), Some(1.2), Some(3.1), Some(8.2)];
        let p = panel_from(&[("y", y), ("x", x), ("dist", dist)], &[1, 2], &[0, 1, 2]);
        let fit = fit_fe(
            &ModelSpec::new("fe", "y")
                .with_exogenous(&["x", "dist"])
                .with_fixed_effects(FixedEffects::State),
            &p,
        )
        .unwrap();
        let j = fit.term_index("dist").unwrap();
        assert!(fit.omitted[j]);
        assert!(!fit.omitted[fit.term_index("x").unwrap()]);
    }

    #[test]
    fn all_invariant_regressors_error_under_fe() {
        let dist = vec![Some(10.0), Some(10.0), Some(25.0), Some(25.0)];
        let y = vec![Some(2.0), Some(4.0), Some(1.0), Some(3.0)];
        let p = panel_from(&[("y", y), ("dist", dist)], &[1, 2], &[0, 1]);
        let err = fit_fe(
            &ModelSpec::new("fe", "y")
                .with_exogenous(&["dist"])
                .with_fixed_effects(FixedEffects::State),
            &p,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
    }

    #[test]
    fn self_instrumenting_equals_ols() {
        let x: Vec<Option<f64>> = [0.3, 1.9, 2.1, 3.7, 4.4, 5.9, 6.1, 7.8]
            .iter()
            .map(|&v| Some(v))
            .collect();
        let y: Vec<Option<f64>> = [1.1, 3.8, 5.2, 7.9, 9.4, 12.1, 12.2, 16.0]
            .iter()
            .map(|&v| Some(v))
            .collect();
        let p = panel_from(&[("y", y), ("x", x)], &[1, 2], &[0, 1, 2, 3]);
        let ols = fit_ols(&ModelSpec::new("ols", "y").with_exogenous(&["x"]), &p).unwrap();
        let iv = fit_2sls(
            &ModelSpec::new("iv", "y").with_instrumented(&["x"], &["x"]),
            &p,
        )
        .unwrap();
        assert!(close(
            iv.coefficient("x").unwrap(),
            ols.coefficient("x").unwrap(),
            1e-10
        ));
        assert!(close(
            iv.coefficient("(intercept)").unwrap(),
            ols.coefficient("(intercept)").unwrap(),
            1e-10
        ));
    }

    #[test]
    fn exactly_identified_matches_indirect_least_squares() {
        // 6 rows, one endogenous column, one instrument: b = (Z'X)^-1 Z'y.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.5];
        let z = [0.8, 2.3, 2.9, 3.6, 5.4, 6.1];
        let y = [2.1, 3.9, 6.2, 7.8, 10.3, 12.6];
        let p = panel_from(
            &[
                ("y", y.iter().map(|&v| Some(v)).collect()),
                ("x", x.iter().map(|&v| Some(v)).collect()),
                ("z", z.iter().map(|&v| Some(v)).collect()),
            ],
            &[1, 2],
            &[0, 1, 2],
        );
        let iv = fit_2sls(
            &ModelSpec::new("iv", "y").with_instrumented(&["x"], &["z"]),
            &p,
        )
        .unwrap();

        // Closed-form with intercepts partialled out (demeaned cross products).
        let n = 6.0;
        let mx: f64 = x.iter().sum::<f64>() / n;
        let mz: f64 = z.iter().sum::<f64>() / n;
        let my: f64 = y.iter().sum::<f64>() / n;
        let szy: f64 = z.iter().zip(&y).map(|(a, b)| (a - mz) * (b - my)).sum();
        let szx: f64 = z.iter().zip(&x).map(|(a, b)| (a - mz) * (b - mx)).sum();
        let oracle = szy / szx;
        assert!(close(iv.coefficient("x").unwrap(), oracle, 1e-10));
    }

    #[test]
    fn structural_residuals_use_original_columns() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.5];
        let z = [0.8, 2.3, 2.9, 3.6, 5.4, 6.1];
        let y = [2.1, 3.9, 6.2, 7.8, 10.3, 12.6];
        let p = panel_from(
            &[
                ("y", y.iter().map(|&v| Some(v)).collect()),
                ("x", x.iter().map(|&v| Some(v)).collect()),
                ("z", z.iter().map(|&v| Some(v)).collect()),
            ],
            &[1, 2],
            &[0, 1, 2],
        );
        let iv = fit_2sls(
            &ModelSpec::new("iv", "y").with_instrumented(&["x"], &["z"]),
            &p,
        )
        .unwrap();
        let b0 = iv.coefficient("(intercept)").unwrap();
        let b1 = iv.coefficient("x").unwrap();
        for i in 0..6 {
            let expect = y[i] - b0 - b1 * x[i];
            assert!((iv.residuals[i] - expect).abs() < 1e-12);
        }
        // Residuals sum to zero through the instrumented intercept.
        let total: f64 = iv.residuals.iter().sum();
        assert!(total.abs() < 1e-8);
    }

    #[test]
    fn within_demean_matches_hand_computation() {
        let p = panel_from(
            &[("v", vec![Some(1.0), Some(2.0), Some(3.0), Some(7.0), Some(9.0), Some(11.0)])],
            &[1, 2],
            &[0, 1, 2],
        );
        let out = within_demean(&p, &["v"]).unwrap();
        assert_eq!(
            out.values("v").unwrap(),
            &[Some(-1.0), Some(0.0), Some(1.0), Some(-2.0), Some(0.0), Some(2.0)]
        );
    }

    #[test]
    fn double_demeaning_is_idempotent() {
        let p = panel_from(
            &[("v", vec![Some(1.5), Some(2.5), Some(4.0), Some(7.0), Some(9.5), Some(11.0)])],
            &[1, 2],
            &[0, 1, 2],
        );
        let once = within_demean(&p, &["v"]).unwrap();
        let twice = within_demean(&once, &["v"]).unwrap();
        assert_eq!(once.values("v").unwrap(), twice.values("v").unwrap());
    }

    #[test]
    fn hc1_fit_reports_matching_se_and_cov() {
        let x: Vec<Option<f64>> = (0..10).map(|i| Some((i as f64).sin() + i as f64)).collect();
        let y: Vec<Option<f64>> = (0..10).map(|i| Some(2.0 * i as f64 + (i as f64 * 0.7).cos())).collect();
        let p = panel_from(&[("y", y), ("x", x)], &[1, 2], &[0, 1, 2, 3, 4]);
        let fit = fit_ols(
            &ModelSpec::new("m", "y")
                .with_exogenous(&["x"])
                .with_covariance(CovVariant::Hc1),
            &p,
        )
        .unwrap();
        for j in 0..2 {
            let se = fit.std_errors[j].unwrap();
            assert!(close(se * se, fit.covariance[(j, j)], 1e-12));
        }
    }
}
