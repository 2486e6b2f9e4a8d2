//! Table rendering: aligned text in the published layout (coefficients with
//! parenthesized p-values), CSV with full precision, and JSON documents.
//! Renderers are pure views over stored results; they never recompute
//! statistics.

use crate::diagnostics::TestResult;
use crate::effects::{ElasticitySummary, MarginalEffectTable};
use crate::estimators::FitResult;
use crate::linalg::Matrix;
use crate::montecarlo::McReport;
use crate::panel::SummaryRow;
use crate::Result;

const TERM_WIDTH: usize = 40;
const CELL_WIDTH: usize = 22;

fn text_cell(v: f64) -> String {
    format!("{v:.2}")
}

fn coef_p_cell(coef: f64, p: Option<f64>) -> String {
    match p {
        Some(p) => format!("{coef:.2} ({p:.2})"),
        None => format!("{coef:.2}"),
    }
}

/// Full-precision number for CSV bodies; shortest round-trip form.
pub fn csv_num(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v}")
}

fn pad(s: &str, width: usize) -> String {
    format!("{s:>width$}")
}

fn rule(n_cols: usize) -> String {
    "-".repeat(TERM_WIDTH + CELL_WIDTH * n_cols)
}

/// Side-by-side model comparison in the published layout: one row per term,
/// cells showing "coefficient (p-value)", a dash where a term is absent or
/// omitted, then per-model statistics and free-form note lines.
pub fn render_fit_comparison(
    title: &str,
    models: &[(&str, &FitResult)],
    extra_rows: &[(String, Vec<String>)],
    notes: &[String],
) -> String {
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&rule(models.len()));
    out.push('\n');
    out.push_str(&format!("{:<TERM_WIDTH$}", ""));
    for (label, _) in models {
        out.push_str(&pad(label, CELL_WIDTH));
    }
    out.push('\n');
    out.push_str(&rule(models.len()));
    out.push('\n');

    // Row order: terms as they appear across models, first model first.
    let mut terms: Vec<String> = Vec::new();
    for (_, fit) in models {
        for t in &fit.terms {
            if t != "(intercept)" && !terms.contains(t) {
                terms.push(t.clone());
            }
        }
    }
    if models.iter().any(|(_, f)| f.terms.iter().any(|t| t == "(intercept)")) {
        terms.push("(intercept)".to_string());
    }

    for term in &terms {
        out.push_str(&format!("{term:<TERM_WIDTH$}"));
        for (_, fit) in models {
            let cell = match fit.term_index(term) {
                Some(j) if !fit.omitted[j] => coef_p_cell(fit.coefficients[j], fit.p_values[j]),
                _ => "-".to_string(),
            };
            out.push_str(&pad(&cell, CELL_WIDTH));
        }
        out.push('\n');
    }

    out.push_str(&format!("{:<TERM_WIDTH$}", "Fixed effects"));
    for (_, fit) in models {
        let cell = if fit.n_absorbed_groups > 0 { "State" } else { "None" };
        out.push_str(&pad(cell, CELL_WIDTH));
    }
    out.push('\n');
    for (label, value) in extra_rows {
        out.push_str(&format!("{label:<TERM_WIDTH$}"));
        for cell in value {
            out.push_str(&pad(cell, CELL_WIDTH));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<TERM_WIDTH$}", "R-squared"));
    for (_, fit) in models {
        out.push_str(&pad(&text_cell(fit.r_squared), CELL_WIDTH));
    }
    out.push('\n');
    out.push_str(&format!("{:<TERM_WIDTH$}", "Observations"));
    for (_, fit) in models {
        out.push_str(&pad(&fit.n_obs.to_string(), CELL_WIDTH));
    }
    out.push('\n');
    out.push_str(&rule(models.len()));
    out.push('\n');
    for note in notes {
        out.push_str(&format!("Note: {note}\n"));
    }
    out
}

/// CSV companion of [`render_fit_comparison`]: term, then estimate and
/// p-value columns per model, full precision.
pub fn fit_comparison_csv(models: &[(&str, &FitResult)]) -> String {
    let mut out = String::from("term");
    for (label, _) in models {
        out.push_str(&format!(",{label}_estimate,{label}_p_value"));
    }
    out.push('\n');

    let mut terms: Vec<String> = Vec::new();
    for (_, fit) in models {
        for t in &fit.terms {
            if !terms.contains(t) {
                terms.push(t.clone());
            }
        }
    }
    for term in &terms {
        out.push_str(term);
        for (_, fit) in models {
            match fit.term_index(term) {
                Some(j) if !fit.omitted[j] => {
                    out.push_str(&format!(",{}", csv_num(fit.coefficients[j])));
                    match fit.p_values[j] {
                        Some(p) => out.push_str(&format!(",{}", csv_num(p))),
                        None => out.push(','),
                    }
                }
                _ => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// One fitted model with full inference columns.
pub fn render_fit_text(fit: &FitResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "model '{}' [{}], covariance {}, N = {}, df = {:.0}, R2 = {:.4}\n",
        fit.spec.name,
        fit.estimator.label(),
        fit.covariance_variant,
        fit.n_obs,
        fit.df_residual,
        fit.r_squared
    ));
    if let Some(mode) = fit.iv_mode {
        out.push_str(&format!("endogenous interaction mode: {mode}\n"));
    }
    out.push_str(&rule(3));
    out.push('\n');
    out.push_str(&format!(
        "{:<TERM_WIDTH$}{}{}{}\n",
        "term",
        pad("estimate", CELL_WIDTH),
        pad("std error", CELL_WIDTH),
        pad("p-value", CELL_WIDTH)
    ));
    for (j, term) in fit.terms.iter().enumerate() {
        if fit.omitted[j] {
            out.push_str(&format!(
                "{term:<TERM_WIDTH$}{}\n",
                pad("omitted (collinear)", CELL_WIDTH)
            ));
            continue;
        }
        out.push_str(&format!(
            "{term:<TERM_WIDTH$}{}{}{}\n",
            pad(&format!("{:.4}", fit.coefficients[j]), CELL_WIDTH),
            pad(
                &fit.std_errors[j].map_or("-".into(), |s| format!("{s:.4}")),
                CELL_WIDTH
            ),
            pad(
                &fit.p_values[j].map_or("-".into(), |p| format!("{p:.4}")),
                CELL_WIDTH
            ),
        ));
    }
    out
}

pub fn fit_csv(fit: &FitResult) -> String {
    let mut out = String::from("term,estimate,std_error,t_stat,p_value,omitted\n");
    for (j, term) in fit.terms.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(csv_num).unwrap_or_default();
        out.push_str(&format!(
            "{term},{},{},{},{},{}\n",
            csv_num(fit.coefficients[j]),
            opt(fit.std_errors[j]),
            opt(fit.t_stats[j]),
            opt(fit.p_values[j]),
            fit.omitted[j]
        ));
    }
    out
}

pub fn fit_to_json(fit: &FitResult) -> Result<String> {
    serde_json::to_string_pretty(fit)
        .map_err(|e| crate::Error::Data(format!("serializing fit: {e}")))
}

pub fn fit_from_json(text: &str) -> Result<FitResult> {
    serde_json::from_str(text).map_err(|e| crate::Error::Data(format!("reading fit: {e}")))
}

/// Per-state marginal effects in the published layout.
pub fn render_margins_text(table: &MarginalEffectTable) -> String {
    let mut out = String::new();
    out.push_str("Estimated marginal employment impact by state\n");
    out.push_str(&rule(3));
    out.push('\n');
    out.push_str(&format!(
        "{:<TERM_WIDTH$}{}{}{}\n",
        "State",
        pad("Distance (km)", CELL_WIDTH),
        pad("Marginal effect", CELL_WIDTH),
        pad("Std. error", CELL_WIDTH)
    ));
    out.push_str(&rule(3));
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{:<TERM_WIDTH$}{}{}{}\n",
            row.state,
            pad(&format!("{:.0}", row.distance_km), CELL_WIDTH),
            pad(&text_cell(row.effect), CELL_WIDTH),
            pad(&text_cell(row.std_error), CELL_WIDTH)
        ));
    }
    out.push_str(&rule(3));
    out.push('\n');
    out.push_str(&format!(
        "Note: effects are jobs per million MCF; standard errors use the delta method.\n"
    ));
    out.push_str(&format!(
        "Note: effect(d) = {:.4} + d x {:.5}; average over listed states = {:.2}.\n",
        table.level_coefficient,
        table.interaction_coefficient,
        table.average_effect()
    ));
    out
}

pub fn margins_csv(table: &MarginalEffectTable) -> String {
    let mut out = String::from("state,distance_km,effect,std_error,t_stat,p_value\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.state,
            csv_num(r.distance_km),
            csv_num(r.effect),
            csv_num(r.std_error),
            csv_num(r.t_stat),
            csv_num(r.p_value)
        ));
    }
    out
}

pub fn render_summary_text(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str("Summary statistics\n");
    out.push_str(&rule(4));
    out.push('\n');
    out.push_str(&format!(
        "{:<TERM_WIDTH$}{}{}{}{}\n",
        "Variable",
        pad("Mean", CELL_WIDTH),
        pad("Min", CELL_WIDTH),
        pad("Max", CELL_WIDTH),
        pad("Std. Dev.", CELL_WIDTH)
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<TERM_WIDTH$}{}{}{}{}\n",
            r.column,
            pad(&text_cell(r.mean), CELL_WIDTH),
            pad(&text_cell(r.min), CELL_WIDTH),
            pad(&text_cell(r.max), CELL_WIDTH),
            pad(&text_cell(r.std_dev), CELL_WIDTH)
        ));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("column,n_obs,mean,min,max,std_dev\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.column,
            r.n_obs,
            csv_num(r.mean),
            csv_num(r.min),
            csv_num(r.max),
            csv_num(r.std_dev)
        ));
    }
    out
}

/// Correlation matrix plus variance inflation factors, appendix layout.
pub fn render_screen_text(
    title: &str,
    columns: &[&str],
    correlations: &Matrix,
    vifs: &[(String, f64)],
) -> String {
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&format!("{:<TERM_WIDTH$}", ""));
    for c in columns {
        out.push_str(&pad(c, CELL_WIDTH));
    }
    out.push('\n');
    for (i, c) in columns.iter().enumerate() {
        out.push_str(&format!("{c:<TERM_WIDTH$}"));
        for j in 0..columns.len() {
            let cell = if j <= i {
                format!("{:.4}", correlations[(i, j)])
            } else {
                String::new()
            };
            out.push_str(&pad(&cell, CELL_WIDTH));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<TERM_WIDTH$}", "VIF"));
    let vif_of = |name: &str| vifs.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
    for c in columns {
        let cell = match vif_of(c) {
            Some(v) if v.is_finite() => format!("{v:.4}"),
            Some(_) => "inf".to_string(),
            None => String::new(),
        };
        out.push_str(&pad(&cell, CELL_WIDTH));
    }
    out.push('\n');
    out
}

pub fn screen_csv(columns: &[&str], correlations: &Matrix, vifs: &[(String, f64)]) -> String {
    let mut out = String::from("row");
    for c in columns {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (i, c) in columns.iter().enumerate() {
        out.push_str(c);
        for j in 0..columns.len() {
            out.push_str(&format!(",{}", csv_num(correlations[(i, j)])));
        }
        out.push('\n');
    }
    out.push_str("vif");
    let vif_of = |name: &str| vifs.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
    for c in columns {
        match vif_of(c) {
            Some(v) => out.push_str(&format!(",{}", csv_num(v))),
            None => out.push(','),
        }
    }
    out.push('\n');
    out
}

pub fn render_test_text(test: &TestResult) -> String {
    let mut out = format!(
        "{}: statistic = {:.4}, df = ({:.0}, {:.0}), p = {:.4}\n  H0: {}\n  inputs: {}\n",
        test.name, test.statistic, test.df.0, test.df.1, test.p_value, test.null_hypothesis, test.inputs
    );
    if let Some(weak) = test.weak_flag {
        out.push_str(&format!(
            "  weak-instrument flag (F < 10): {}\n",
            if weak { "WEAK" } else { "ok" }
        ));
    }
    out
}

/// Elasticity line in the published phrasing.
pub fn render_elasticity_line(s: &ElasticitySummary) -> String {
    format!(
        "{:.2} Pesos/GJ -> {:+.2} jobs ({:.2}%)",
        s.price_step, s.employment_change, s.percent_change
    )
}

/// Monte Carlo report as an aligned text table. Wall time goes to the
/// optional trailer only, keeping the body deterministic.
pub fn render_mc_text(report: &McReport, with_wall_time: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Monte Carlo experiment: {} replications, {} states x {} years, seed {}\n",
        report.n_reps, report.config.n_states, report.config.n_years, report.config.seed
    ));
    out.push_str(&format!(
        "truth: import effect = {}, rho = {}\n",
        csv_num(report.true_import_effect),
        csv_num(report.config.rho)
    ));
    out.push_str(&format!("rng: {}\n", report.rng));
    out.push_str(&rule(4));
    out.push('\n');
    out.push_str(&format!(
        "{:<TERM_WIDTH$}{}{}{}{}\n",
        "estimator",
        pad("bias", CELL_WIDTH),
        pad("rmse", CELL_WIDTH),
        pad("mc-se", CELL_WIDTH),
        pad("95% coverage", CELL_WIDTH)
    ));
    for s in [&report.ols, &report.fe, &report.fe_2sls] {
        out.push_str(&format!(
            "{:<TERM_WIDTH$}{}{}{}{}\n",
            s.estimator,
            pad(&format!("{:.4}", s.bias), CELL_WIDTH),
            pad(&format!("{:.4}", s.rmse), CELL_WIDTH),
            pad(&format!("{:.4}", s.mc_se), CELL_WIDTH),
            pad(&format!("{:.4}", s.coverage_95), CELL_WIDTH)
        ));
    }
    out.push_str(&rule(4));
    out.push('\n');
    out.push_str(&format!(
        "Wu-Hausman rejection rate at 5%: {:.4}\n",
        report.wu_hausman_rejection_rate
    ));
    out.push_str(&format!(
        "first-stage F: mean {:.2}, sd {:.2}, min {:.2}, max {:.2}, share below 10: {:.4}\n",
        report.first_stage_f.mean,
        report.first_stage_f.std_dev,
        report.first_stage_f.min,
        report.first_stage_f.max,
        report.first_stage_f.share_below_10
    ));
    if with_wall_time {
        out.push_str(&format!("wall time: {:.2} s\n", report.wall_time_secs));
    }
    out
}

pub fn mc_report_json(report: &McReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| crate::Error::Data(format!("serializing report: {e}")))
}
