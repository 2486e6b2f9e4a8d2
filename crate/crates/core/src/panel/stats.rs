//! Column summary statistics.

use serde::{Deserialize, Serialize};

use super::PanelDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub column: String,
    pub n_obs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n-1 denominator); 0 for a single value.
    pub std_dev: f64,
}

/// Per-column mean, min, max, and sample standard deviation over observed
/// values. Missing cells are excluded column by column.
pub fn summary_stats(panel: &PanelDataset, columns: &[&str]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::with_capacity(columns.len());
    for &name in columns {
        let col = panel.column(name)?;
        let values: Vec<f64> = col.values.iter().flatten().copied().collect();
        if values.is_empty() {
            return Err(Error::Data(format!("column '{name}' has no observed values")));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let std_dev = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push(SummaryRow {
            column: name.to_string(),
            n_obs: n,
            mean,
            min,
            max,
            std_dev,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Unit;

    #[test]
    fn constant_column_has_zero_std() {
        let mut p = PanelDataset::balanced_grid(&[1], &[2000, 2001, 2002]).unwrap();
        p.add_column("c", Unit::Dimensionless, vec![Some(5.0); 3]).unwrap();
        let s = &summary_stats(&p, &["c"]).unwrap()[0];
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.mean, 5.0);
    }

    #[test]
    fn hand_computed_three_values() {
        let mut p = PanelDataset::balanced_grid(&[1], &[2000, 2001, 2002]).unwrap();
        p.add_column("x", Unit::Dimensionless, vec![Some(1.0), Some(2.0), Some(3.0)])
            .unwrap();
        let s = &summary_stats(&p, &["x"]).unwrap()[0];
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_dev, 1.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 3.0);
        assert_eq!(s.n_obs, 3);
    }

    #[test]
    fn missing_cells_excluded() {
        let mut p = PanelDataset::balanced_grid(&[1], &[2000, 2001, 2002]).unwrap();
        p.add_column("x", Unit::Dimensionless, vec![Some(1.0), None, Some(3.0)])
            .unwrap();
        let s = &summary_stats(&p, &["x"]).unwrap()[0];
        assert_eq!(s.n_obs, 2);
        assert_eq!(s.mean, 2.0);
    }

    #[test]
    fn empty_column_errors() {
        let mut p = PanelDataset::balanced_grid(&[1], &[2000]).unwrap();
        p.add_column("x", Unit::Dimensionless, vec![None]).unwrap();
        assert!(summary_stats(&p, &["x"]).is_err());
    }
}
