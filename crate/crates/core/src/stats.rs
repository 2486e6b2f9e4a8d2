//! Distribution tail functions for inference: Student t and F p-values via
//! the regularized incomplete beta function with continued-fraction
//! evaluation, plus the t quantile used for confidence intervals.

use crate::{Error, Result};

/// ln Γ(z) for z > 0, Lanczos approximation.
pub fn ln_gamma(z: f64) -> f64 {
    const C: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, c) in C.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / z).ln()
}

/// Regularized incomplete beta function I_x(a, b), Lentz continued fraction.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Swap for the fast-converging branch.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(1.0 - x, b, a);
    }

    let ln_front = a * x.ln() + b * (1.0 - x).ln()
        - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    let front = ln_front.exp();

    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-15;
    let mut c = 1.0_f64;
    let mut d = 0.0_f64;
    let mut f = 1.0_f64;

    for m in 0..300 {
        let m_f = m as f64;
        let numerators = [
            // odd step 2m+1
            -(a + m_f) * (a + b + m_f) * x / ((a + 2.0 * m_f) * (a + 2.0 * m_f + 1.0)),
            // even step 2m+2
            (m_f + 1.0) * (b - m_f - 1.0) * x / ((a + 2.0 * m_f + 1.0) * (a + 2.0 * m_f + 2.0)),
        ];
        let mut converged = false;
        for num in numerators {
            d = 1.0 + num * d;
            if d.abs() < TINY {
                d = TINY;
            }
            d = 1.0 / d;
            c = 1.0 + num / c;
            if c.abs() < TINY {
                c = TINY;
            }
            let delta = c * d;
            f *= delta;
            converged = (delta - 1.0).abs() < EPS;
        }
        if converged && m > 0 {
            break;
        }
    }
    front / (a * f)
}

/// Two-sided p-value of a Student t statistic.
pub fn student_t_pvalue(t: f64, df: f64) -> Result<f64> {
    if df <= 0.0 {
        return Err(Error::Invalid(format!("nonpositive t degrees of freedom ({df})")));
    }
    if !t.is_finite() {
        return Ok(if t.is_nan() { f64::NAN } else { 0.0 });
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let x = df / (df + t * t);
    Ok(inc_beta(x, 0.5 * df, 0.5).clamp(0.0, 1.0))
}

/// Upper-tail p-value of an F statistic.
pub fn f_pvalue(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if df1 <= 0.0 || df2 <= 0.0 {
        return Err(Error::Invalid(format!(
            "nonpositive F degrees of freedom ({df1}, {df2})"
        )));
    }
    if f < 0.0 {
        return Err(Error::Invalid(format!("negative F statistic ({f})")));
    }
    if !f.is_finite() {
        return Ok(0.0);
    }
    let x = df2 / (df2 + df1 * f);
    Ok(inc_beta(x, 0.5 * df2, 0.5 * df1).clamp(0.0, 1.0))
}

/// Critical value t* with P(|T| > t*) = alpha, found by bisection on the
/// two-sided p-value. Good to ~1e-10, plenty for interval construction.
pub fn student_t_critical(alpha: f64, df: f64) -> Result<f64> {
    if df <= 0.0 {
        return Err(Error::Invalid(format!("nonpositive t degrees of freedom ({df})")));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mut lo = 0.0_f64;
    let mut hi = 2.0_f64;
    while student_t_pvalue(hi, df)? > alpha {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Invalid("t critical value out of range".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_pvalue(mid, df)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_zero_is_one() {
        assert_eq!(student_t_pvalue(0.0, 12.0).unwrap(), 1.0);
    }

    #[test]
    fn t_large_df_matches_normal_limit() {
        let p = student_t_pvalue(1.96, 10000.0).unwrap();
        assert!((p - 0.0500).abs() < 5e-4, "p = {p}");
    }

    #[test]
    fn f_at_one_with_equal_df_is_half() {
        for df in [1.0, 7.0, 33.0, 250.0] {
            let p = f_pvalue(1.0, df, df).unwrap();
            assert!((p - 0.5).abs() < 1e-10, "df = {df}, p = {p}");
        }
    }

    #[test]
    fn p_decreases_in_magnitude() {
        let df = 17.0;
        let mut last = 1.0 + 1e-12;
        for i in 0..60 {
            let t = 0.1 * i as f64;
            let p = student_t_pvalue(t, df).unwrap();
            assert!(p < last || (t == 0.0 && p == 1.0), "t = {t}");
            last = p;
        }
    }

    #[test]
    fn rejects_bad_df() {
        assert!(student_t_pvalue(1.0, 0.0).is_err());
        assert!(f_pvalue(1.0, -1.0, 5.0).is_err());
    }

    #[test]
    fn critical_value_round_trips() {
        for df in [3.0, 21.0, 669.0] {
            let crit = student_t_critical(0.05, df).unwrap();
            let p = student_t_pvalue(crit, df).unwrap();
            assert!((p - 0.05).abs() < 1e-9, "df = {df}");
        }
    }

    #[test]
    fn ln_gamma_small_integers() {
        // Γ(5) = 24
        assert!((ln_gamma(5.0) - 24.0_f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1.0)).abs() < 1e-12);
    }
}
