//! Design-matrix construction from a spec and a panel: listwise selection,
//! log transforms, interaction terms, and instrument expansion.

use std::collections::BTreeMap;

use super::{FixedEffects, IvMode, ModelSpec};
use crate::linalg::Matrix;
use crate::panel::{PanelDataset, StateId};
use crate::{Error, Result};

pub fn term_label(column: &str, spec: &ModelSpec) -> String {
    if spec.log_columns.contains(column) {
        format!("ln({column})")
    } else {
        column.to_string()
    }
}

pub fn interaction_label(a: &str, b: &str, spec: &ModelSpec) -> String {
    format!("{}x{}", term_label(a, spec), term_label(b, spec))
}

/// One structural regressor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Term {
    Column(String),
    Interaction(String, String),
}

impl Term {
    pub(crate) fn label(&self, spec: &ModelSpec) -> String {
        match self {
            Term::Column(c) => term_label(c, spec),
            Term::Interaction(a, b) => interaction_label(a, b, spec),
        }
    }
}

/// Data extracted for one fit: listwise-complete rows, transformed values.
pub(crate) struct FitData {
    /// Panel row indices retained after listwise deletion.
    pub rows: Vec<usize>,
    pub states: Vec<StateId>,
    pub y: Vec<f64>,
    pub terms: Vec<Term>,
    pub term_labels: Vec<String>,
    /// Structural regressor columns (original endogenous values).
    pub x_cols: Vec<Vec<f64>>,
    /// Indices into `terms` treated as endogenous after mode expansion.
    pub endo_idx: Vec<usize>,
    /// Instrument columns after mode expansion.
    pub z_cols: Vec<Vec<f64>>,
    pub z_labels: Vec<String>,
}

impl FitData {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn x_matrix(&self, with_intercept: bool) -> Result<Matrix> {
        columns_matrix(&self.x_cols, self.n(), with_intercept)
    }
}

pub(crate) fn columns_matrix(cols: &[Vec<f64>], n: usize, with_intercept: bool) -> Result<Matrix> {
    let mut all: Vec<Vec<f64>> = Vec::with_capacity(cols.len() + 1);
    if with_intercept {
        all.push(vec![1.0; n]);
    }
    all.extend(cols.iter().cloned());
    Matrix::from_columns(&all)
}

/// Assembles listwise-complete, log-transformed fit data for a spec.
///
/// Rows are dropped when any referenced column is missing, or when a
/// log-transformed referenced column is not strictly positive.
pub(crate) fn build_fit_data(spec: &ModelSpec, panel: &PanelDataset) -> Result<FitData> {
    spec.validate()?;

    let referenced = spec.referenced_columns();
    let mut raw: BTreeMap<&str, &[Option<f64>]> = BTreeMap::new();
    for col in &referenced {
        raw.insert(col.as_str(), panel.values(col)?);
    }

    let mut rows = Vec::new();
    'row: for i in 0..panel.n_rows() {
        for col in &referenced {
            match raw[col.as_str()][i] {
                None => continue 'row,
                Some(v) if spec.log_columns.contains(col) && v <= 0.0 => continue 'row,
                Some(_) => {}
            }
        }
        rows.push(i);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "no complete rows for model '{}' after listwise deletion",
            spec.name
        )));
    }

    let transformed = |col: &str| -> Vec<f64> {
        let log = spec.log_columns.contains(col);
        rows.iter()
            .map(|&i| {
                let v = raw[col][i].expect("listwise-complete");
                if log {
                    v.ln()
                } else {
                    v
                }
            })
            .collect()
    };

    let y = transformed(&spec.dependent);
    let states: Vec<StateId> = rows
        .iter()
        .map(|&i| panel.keys()[i].state.unwrap_or(0))
        .collect();

    // Structural order: exogenous, endogenous, interactions.
    let mut terms: Vec<Term> = Vec::new();
    for c in &spec.exogenous {
        terms.push(Term::Column(c.clone()));
    }
    for c in &spec.endogenous {
        terms.push(Term::Column(c.clone()));
    }
    for (a, b) in &spec.interactions {
        terms.push(Term::Interaction(a.clone(), b.clone()));
    }
    if terms.is_empty() {
        return Err(Error::Spec(format!("model '{}' has no regressors", spec.name)));
    }

    let term_values = |t: &Term| -> Vec<f64> {
        match t {
            Term::Column(c) => transformed(c),
            Term::Interaction(a, b) => {
                let va = transformed(a);
                let vb = transformed(b);
                va.iter().zip(&vb).map(|(x, y)| x * y).collect()
            }
        }
    };
    let x_cols: Vec<Vec<f64>> = terms.iter().map(term_values).collect();
    let term_labels: Vec<String> = terms.iter().map(|t| t.label(spec)).collect();

    // Endogenous term set and instrument expansion.
    let is_endo_col = |c: &str| spec.endogenous.iter().any(|e| e == c);
    let mut endo_idx = Vec::new();
    let mut z_cols: Vec<Vec<f64>> = Vec::new();
    let mut z_labels: Vec<String> = Vec::new();
    if !spec.endogenous.is_empty() {
        for z in &spec.instruments {
            z_cols.push(transformed(z));
            z_labels.push(term_label(z, spec));
        }
        for (i, t) in terms.iter().enumerate() {
            match t {
                Term::Column(c) if is_endo_col(c) => endo_idx.push(i),
                Term::Interaction(a, b) if is_endo_col(a) || is_endo_col(b) => {
                    match spec.iv_mode {
                        IvMode::InteractedInstruments => {
                            endo_idx.push(i);
                            let other = if is_endo_col(a) { b } else { a };
                            let vo = transformed(other);
                            for (zi, z) in spec.instruments.iter().enumerate() {
                                let col: Vec<f64> =
                                    z_cols[zi].iter().zip(&vo).map(|(z, o)| z * o).collect();
                                z_cols.push(col);
                                z_labels.push(interaction_label(z, other, spec));
                            }
                        }
                        IvMode::FittedValue => {}
                    }
                }
                _ => {}
            }
        }
    }

    Ok(FitData {
        rows,
        states,
        y,
        terms,
        term_labels,
        x_cols,
        endo_idx,
        z_cols,
        z_labels,
    })
}

/// Subtracts group means in place from each column, using the supplied
/// group labels. Returns per-group row indices for reuse.
pub(crate) fn demean_columns(
    cols: &mut [Vec<f64>],
    states: &[StateId],
) -> BTreeMap<StateId, Vec<usize>> {
    let mut groups: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
    for (i, &s) in states.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    for col in cols.iter_mut() {
        for members in groups.values() {
            let mean: f64 = members.iter().map(|&i| col[i]).sum::<f64>() / members.len() as f64;
            for &i in members {
                col[i] -= mean;
            }
        }
    }
    groups
}

/// Interaction handling in `build_fit_data` only expands instruments for
/// endogenous interactions; fixed-effect handling lives in the fitters.
pub(crate) fn group_means(values: &[f64], groups: &BTreeMap<StateId, Vec<usize>>) -> BTreeMap<StateId, f64> {
    groups
        .iter()
        .map(|(&s, members)| {
            let m = members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64;
            (s, m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Unit;

    fn tiny_panel() -> PanelDataset {
        let mut p = PanelDataset::balanced_grid(&[1, 2], &[2000, 2001]).unwrap();
        p.add_column("y", Unit::Persons, vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)])
            .unwrap();
        p.add_column("x", Unit::Dimensionless, vec![Some(1.0), Some(0.5), None, Some(2.0)])
            .unwrap();
        p
    }

    #[test]
    fn listwise_deletion_drops_missing_rows() {
        let spec = ModelSpec::new("m", "y").with_exogenous(&["x"]);
        let data = build_fit_data(&spec, &tiny_panel()).unwrap();
        assert_eq!(data.n(), 3);
    }

    #[test]
    fn log_rows_require_positive_values() {
        let mut p = tiny_panel();
        p.replace_column(
            "x",
            Unit::Dimensionless,
            vec![Some(1.0), Some(-0.5), Some(2.0), Some(2.0)],
        )
        .unwrap();
        let spec = ModelSpec::new("m", "y").with_exogenous(&["x"]).with_logs(&["x"]);
        let data = build_fit_data(&spec, &p).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.term_labels, vec!["ln(x)"]);
    }

    #[test]
    fn interacted_instruments_expand() {
        let mut p = tiny_panel();
        p.replace_column("x", Unit::Dimensionless, vec![Some(1.0); 4]).unwrap();
        p.add_column("d", Unit::Km, vec![Some(10.0), Some(10.0), Some(20.0), Some(20.0)])
            .unwrap();
        p.add_column("z1", Unit::UsdPerMcf, vec![Some(0.1), Some(0.2), Some(0.1), Some(0.2)])
            .unwrap();
        let spec = ModelSpec::new("m", "y")
            .with_exogenous(&["d"])
            .with_instrumented(&["x"], &["z1"])
            .with_interaction("x", "d");
        let data = build_fit_data(&spec, &p).unwrap();
        assert_eq!(data.z_labels, vec!["z1", "z1xd"]);
        assert_eq!(data.endo_idx.len(), 2);
    }

    #[test]
    fn demeaning_removes_group_means() {
        let mut cols = vec![vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]];
        let states = vec![1, 1, 1, 2, 2, 2];
        demean_columns(&mut cols, &states);
        assert_eq!(cols[0], vec![-1.0, 0.0, 1.0, -10.0, 0.0, 10.0]);
    }
}
