//! Instrument construction from the import price series, per-state marginal
//! effects with delta-method standard errors, and the average-impact and
//! elasticity summaries.

use serde::{Deserialize, Serialize};

use crate::estimators::FitResult;
use crate::linalg::{solve_least_squares, Matrix};
use crate::panel::Year;
use crate::stats::student_t_pvalue;
use crate::{Error, Result};

/// Least-squares autoregression of order `p` with intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArFit {
    /// Intercept followed by the lag coefficients, nearest lag first.
    pub coefficients: Vec<f64>,
    /// One-step-ahead in-sample fitted values aligned with the input series;
    /// entries without `p` available lags are missing.
    pub fitted: Vec<Option<f64>>,
}

/// Fits x_t on (1, x_{t-1}, ..., x_{t-p}) over all rows with full lags.
/// A constant series falls back to the intercept-only fit.
pub fn ar_fit(series: &[f64], p: usize) -> Result<ArFit> {
    if p == 0 {
        return Err(Error::Invalid("autoregression order must be positive".into()));
    }
    if series.len() <= p + 1 {
        return Err(Error::Invalid(format!(
            "series length {} is too short for an AR({p}) fit",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("autoregression input".into()));
    }

    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let variance = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / series.len() as f64;
    if variance < 1e-24 * (1.0 + mean * mean) {
        let mut coefficients = vec![0.0; p + 1];
        coefficients[0] = mean;
        let fitted = series
            .iter()
            .enumerate()
            .map(|(t, _)| if t >= p { Some(mean) } else { None })
            .collect();
        return Ok(ArFit {
            coefficients,
            fitted,
        });
    }

    let n = series.len() - p;
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for lag in 1..=p {
        cols.push((p..series.len()).map(|t| series[t - lag]).collect());
    }
    let x = Matrix::from_columns(&cols)?;
    let y: Vec<f64> = series[p..].to_vec();
    let sol = solve_least_squares(&x, &y)?;

    let mut fitted = vec![None; series.len()];
    for (i, f) in sol.fitted.iter().enumerate() {
        fitted[p + i] = Some(*f);
    }
    Ok(ArFit {
        coefficients: sol.coefficients,
        fitted,
    })
}

/// The two constructed instruments: the one-period-lagged price and the
/// AR(3) in-sample prediction. The contemporary price is never included.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentSet {
    pub years: Vec<Year>,
    pub lag1_price: Vec<Option<f64>>,
    pub ar3_predicted_price: Vec<Option<f64>>,
    /// Intercept, then the three lag coefficients.
    pub ar_coefficients: [f64; 4],
    /// First and last year entering the AR regression sample.
    pub fit_window: (Year, Year),
}

const AR_ORDER: usize = 3;

/// Builds instruments from the yearly import price series. Optional warm-up
/// rows supply pre-sample prices so early study years keep full lag
/// coverage; only the last three warm-up values are used. Without warm-up,
/// years lacking lags come back missing.
pub fn build_instruments(
    years: &[Year],
    price: &[f64],
    warmup: Option<&[(Year, f64)]>,
) -> Result<InstrumentSet> {
    if years.len() != price.len() {
        return Err(Error::Dimension(format!(
            "{} years for {} prices",
            years.len(),
            price.len()
        )));
    }
    if years.is_empty() {
        return Err(Error::Invalid("empty price series".into()));
    }
    for w in years.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::Data(format!(
                "price series years must be consecutive; found {} then {}",
                w[0], w[1]
            )));
        }
    }

    let mut pre: Vec<f64> = Vec::new();
    if let Some(rows) = warmup {
        let mut rows: Vec<(Year, f64)> = rows.to_vec();
        rows.sort_by_key(|r| r.0);
        let tail: Vec<(Year, f64)> = rows
            .iter()
            .rev()
            .take(AR_ORDER)
            .rev()
            .copied()
            .collect();
        for w in tail.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::Data(format!(
                    "warm-up years must be consecutive; found {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(last_year, _)) = tail.last() {
            if last_year != years[0] - 1 {
                return Err(Error::Data(format!(
                    "warm-up must end the year before the study period ({} vs {})",
                    last_year,
                    years[0] - 1
                )));
            }
        }
        pre = tail.into_iter().map(|(_, v)| v).collect();
    }

    let w = pre.len();
    let mut extended = pre.clone();
    extended.extend_from_slice(price);
    // Targets start at index AR_ORDER of the extended series; the fit needs
    // at least AR_ORDER + 2 usable rows to be identified.
    if extended.len() < 2 * AR_ORDER + 2 - w.min(AR_ORDER) {
        return Err(Error::Invalid(format!(
            "price series too short for an AR({AR_ORDER}) instrument even with warm-up"
        )));
    }

    let ar = ar_fit(&extended, AR_ORDER)?;
    let mut ar_coefficients = [0.0_f64; 4];
    ar_coefficients.copy_from_slice(&ar.coefficients);

    let lag1_price: Vec<Option<f64>> = (0..years.len())
        .map(|i| {
            let ext_idx = w + i;
            if ext_idx >= 1 {
                Some(extended[ext_idx - 1])
            } else {
                None
            }
        })
        .collect();
    let ar3_predicted_price: Vec<Option<f64>> =
        (0..years.len()).map(|i| ar.fitted[w + i]).collect();

    let first_fit_year = years[0] + (AR_ORDER as Year - w as Year).max(0);
    Ok(InstrumentSet {
        years: years.to_vec(),
        lag1_price,
        ar3_predicted_price,
        ar_coefficients,
        fit_window: (first_fit_year, years[years.len() - 1]),
    })
}

/// One state's row in the marginal-effect table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalEffectRow {
    pub state: String,
    pub distance_km: f64,
    /// Jobs per million MCF at this distance.
    pub effect: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// Per-state marginal impacts of the instrumented quantity, with
/// delta-method standard errors from the (level, interaction) covariance
/// block. The effect is linear in distance, so the delta method is exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalEffectTable {
    pub rows: Vec<MarginalEffectRow>,
    pub level_term: String,
    pub interaction_term: String,
    pub level_coefficient: f64,
    pub interaction_coefficient: f64,
    /// (V22, V23, V33): variances and covariance of the two coefficients.
    pub covariance_block: (f64, f64, f64),
    pub df_residual: f64,
}

impl MarginalEffectTable {
    pub fn average_effect(&self) -> f64 {
        self.rows.iter().map(|r| r.effect).sum::<f64>() / self.rows.len() as f64
    }
}

/// Effect and exact delta-method standard error at one distance.
pub fn effect_at(
    level_coef: f64,
    interaction_coef: f64,
    block: (f64, f64, f64),
    distance: f64,
) -> (f64, f64) {
    let (v22, v23, v33) = block;
    let effect = level_coef + distance * interaction_coef;
    let var = v22 + 2.0 * distance * v23 + distance * distance * v33;
    (effect, var.max(0.0).sqrt())
}

/// Builds the per-state marginal-effect table from a fitted model.
pub fn marginal_effects(
    fit: &FitResult,
    level_term: &str,
    interaction_term: &str,
    states: &[(String, f64)],
) -> Result<MarginalEffectTable> {
    if states.is_empty() {
        return Err(Error::Invalid("no states supplied for marginal effects".into()));
    }
    let b2 = fit.coefficient(level_term)?;
    let b3 = fit.coefficient(interaction_term)?;
    for term in [level_term, interaction_term] {
        let j = fit.term_index(term).unwrap();
        if fit.omitted[j] {
            return Err(Error::Data(format!(
                "term '{term}' was omitted from the fit; no covariance block"
            )));
        }
    }
    let v = fit.covariance_block(&[level_term, interaction_term])?;
    let block = (v[(0, 0)], v[(0, 1)], v[(1, 1)]);
    build_margin_table(
        b2,
        b3,
        block,
        fit.df_residual,
        level_term,
        interaction_term,
        states,
    )
}

/// Margin table from raw coefficients and covariance entries, for callers
/// replaying stored estimates.
pub fn build_margin_table(
    level_coef: f64,
    interaction_coef: f64,
    block: (f64, f64, f64),
    df_residual: f64,
    level_term: &str,
    interaction_term: &str,
    states: &[(String, f64)],
) -> Result<MarginalEffectTable> {
    if df_residual <= 0.0 {
        return Err(Error::Invalid("nonpositive degrees of freedom".into()));
    }
    let mut rows = Vec::with_capacity(states.len());
    for (name, d) in states {
        if !d.is_finite() {
            return Err(Error::NonFinite(format!("distance for state '{name}'")));
        }
        let (effect, se) = effect_at(level_coef, interaction_coef, block, *d);
        let t = if se > 0.0 { effect / se } else { f64::INFINITY };
        let p = if se > 0.0 {
            student_t_pvalue(t, df_residual)?
        } else {
            0.0
        };
        rows.push(MarginalEffectRow {
            state: name.clone(),
            distance_km: *d,
            effect,
            std_error: se,
            t_stat: t,
            p_value: p,
        });
    }
    Ok(MarginalEffectTable {
        rows,
        level_term: level_term.to_string(),
        interaction_term: interaction_term.to_string(),
        level_coefficient: level_coef,
        interaction_coefficient: interaction_coef,
        covariance_block: block,
        df_residual,
    })
}

/// Unweighted mean of per-state effects over a subset of states.
pub fn average_effect(
    fit: &FitResult,
    level_term: &str,
    interaction_term: &str,
    states: &[(String, f64)],
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Invalid("empty state subset".into()));
    }
    Ok(marginal_effects(fit, level_term, interaction_term, states)?.average_effect())
}

/// Interpretation of a log-log price coefficient at the sample means: the
/// price step behind a one-percent increase, the implied employment change,
/// and the percent change (the elasticity itself).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElasticitySummary {
    pub elasticity: f64,
    pub mean_price: f64,
    pub mean_employment: f64,
    /// 0.01 x mean price.
    pub price_step: f64,
    /// elasticity / 100 x mean employment.
    pub employment_change: f64,
    pub percent_change: f64,
}

pub fn elasticity_summary_from(
    elasticity: f64,
    mean_price: f64,
    mean_employment: f64,
) -> Result<ElasticitySummary> {
    if mean_price <= 0.0 || mean_employment <= 0.0 {
        return Err(Error::Invalid(format!(
            "elasticity summary needs positive means (price {mean_price}, employment {mean_employment})"
        )));
    }
    Ok(ElasticitySummary {
        elasticity,
        mean_price,
        mean_employment,
        price_step: 0.01 * mean_price,
        employment_change: elasticity / 100.0 * mean_employment,
        percent_change: elasticity,
    })
}

/// Reads the elasticity off a fitted log-log model.
pub fn elasticity_summary(
    fit: &FitResult,
    price_term: &str,
    mean_price: f64,
    mean_employment: f64,
) -> Result<ElasticitySummary> {
    elasticity_summary_from(fit.coefficient(price_term)?, mean_price, mean_employment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar3_recovers_exact_coefficients() {
        // Noiseless AR(3); any sample with independent rows recovers exactly.
        let (c, p1, p2, p3) = (0.0, 0.5, 0.3, 0.1);
        let mut x = vec![1.0, -0.7, 0.4];
        for t in 3..60 {
            x.push(c + p1 * x[t - 1] + p2 * x[t - 2] + p3 * x[t - 3]);
        }
        let fit = ar_fit(&x, 3).unwrap();
        assert!((fit.coefficients[0] - c).abs() < 1e-8);
        assert!((fit.coefficients[1] - p1).abs() < 1e-8);
        assert!((fit.coefficients[2] - p2).abs() < 1e-8);
        assert!((fit.coefficients[3] - p3).abs() < 1e-8);
    }

    #[test]
    fn constant_series_fits_constant() {
        let x = vec![7.5; 20];
        let fit = ar_fit(&x, 3).unwrap();
        for t in 3..20 {
            assert_eq!(fit.fitted[t], Some(7.5));
        }
        assert_eq!(fit.fitted[2], None);
    }

    #[test]
    fn fitted_variance_never_exceeds_series_variance() {
        // Deterministic pseudo-noise.
        let x: Vec<f64> = (0..80)
            .map(|i| ((i as f64 * 12.9898).sin() * 43758.5453).fract() - 0.5)
            .collect();
        let fit = ar_fit(&x, 3).unwrap();
        let targets: Vec<f64> = x[3..].to_vec();
        let fitted: Vec<f64> = fit.fitted[3..].iter().map(|v| v.unwrap()).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        assert!(var(&fitted) <= var(&targets) + 1e-12);
    }

    #[test]
    fn too_short_series_errors() {
        assert!(ar_fit(&[1.0, 2.0, 3.0, 4.0], 3).is_err());
    }

    #[test]
    fn instruments_without_warmup_lose_three_years() {
        let years: Vec<Year> = (1998..2020).collect();
        let price: Vec<f64> = (0..22).map(|i| 4.0 + (i as f64 * 0.7).sin()).collect();
        let set = build_instruments(&years, &price, None).unwrap();
        assert_eq!(set.ar3_predicted_price.iter().filter(|v| v.is_none()).count(), 3);
        assert!(set.ar3_predicted_price[3].is_some());
        assert_eq!(set.lag1_price[0], None);
        assert_eq!(set.lag1_price[1], Some(price[0]));
        assert_eq!(set.fit_window.0, 2001);
    }

    #[test]
    fn warmup_gives_full_coverage() {
        let years: Vec<Year> = (1998..2020).collect();
        let price: Vec<f64> = (0..22).map(|i| 4.0 + (i as f64 * 0.7).sin()).collect();
        let warmup = vec![(1995, 3.1), (1996, 3.4), (1997, 3.8)];
        let set = build_instruments(&years, &price, Some(&warmup)).unwrap();
        assert!(set.lag1_price.iter().all(|v| v.is_some()));
        assert!(set.ar3_predicted_price.iter().all(|v| v.is_some()));
        assert_eq!(set.lag1_price[0], Some(3.8));
        assert_eq!(set.fit_window.0, 1998);
    }

    #[test]
    fn misaligned_warmup_errors() {
        let years: Vec<Year> = (1998..2020).collect();
        let price = vec![4.0; 22];
        let warmup = vec![(1994, 3.1), (1995, 3.4), (1996, 3.8)];
        assert!(build_instruments(&years, &price, Some(&warmup)).is_err());
    }

    #[test]
    fn effects_are_linear_in_distance() {
        let block = (2392.4, -1.9083, 0.0016119);
        let d = [200.0, 900.0, 1600.0];
        let e: Vec<f64> = d
            .iter()
            .map(|&x| effect_at(276.96, -0.18310, block, x).0)
            .collect();
        // Collinear: second differences vanish for equally spaced distances.
        assert!(((e[2] - e[1]) - (e[1] - e[0])).abs() < 1e-9);
    }

    #[test]
    fn delta_method_matches_direct_quadratic_form() {
        let block = (2392.4, -1.9083, 0.0016119);
        for d in [184.0, 610.0, 1188.0, 2032.0] {
            let (_, se) = effect_at(276.96, -0.18310, block, d);
            // g' V g with g = (1, d).
            let direct = (block.0 + 2.0 * d * block.1 + d * d * block.2).sqrt();
            assert!((se - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn se_parabola_has_nonnegative_leading_coefficient() {
        let block = (2392.4, -1.9083, 0.0016119);
        let vertex = -block.1 / block.2;
        let (_, se_v) = effect_at(0.0, 0.0, block, vertex);
        for d in [vertex - 500.0, vertex + 500.0] {
            let (_, se) = effect_at(0.0, 0.0, block, d);
            assert!(se >= se_v);
        }
    }

    #[test]
    fn singleton_average_equals_marginal_effect() {
        let states = vec![("Somewhere".to_string(), 819.38)];
        let table = build_margin_table(
            276.96,
            -0.18310,
            (2392.4, -1.9083, 0.0016119),
            669.0,
            "q",
            "qxd",
            &states,
        )
        .unwrap();
        assert!((table.average_effect() - table.rows[0].effect).abs() < 1e-12);
    }

    #[test]
    fn elasticity_arithmetic() {
        let s = elasticity_summary_from(2.38, 182.39, 5890.92).unwrap();
        assert!((s.price_step - 1.8239).abs() < 1e-10);
        assert!((s.employment_change - 140.2039).abs() < 1e-3);
        assert_eq!(s.percent_change, 2.38);
    }

    #[test]
    fn zero_elasticity_means_zero_change() {
        let s = elasticity_summary_from(0.0, 50.0, 1000.0).unwrap();
        assert_eq!(s.employment_change, 0.0);
        assert_eq!(s.percent_change, 0.0);
    }

    #[test]
    fn nonpositive_means_error() {
        assert!(elasticity_summary_from(1.0, 0.0, 10.0).is_err());
        assert!(elasticity_summary_from(1.0, 10.0, -5.0).is_err());
    }
}
