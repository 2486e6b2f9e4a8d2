//! Model fitting: pooled OLS, state fixed effects (within estimator), and
//! two-stage least squares with constructed instruments, all driven by a
//! declarative [`ModelSpec`].

mod design;
pub(crate) mod fit;

pub use design::{interaction_label, term_label};
pub use fit::{fit, fit_2sls, fit_fe, fit_ols, within_demean};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::linalg::{CovVariant, Matrix};
use crate::panel::{RowKey, StateId};
use crate::{Error, Result};

/// Which fixed effects the model absorbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FixedEffects {
    #[default]
    None,
    State,
}

/// How an interaction between an endogenous column and an exogenous column
/// is handled in two-stage least squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IvMode {
    /// The interaction is treated as endogenous in its own right and the
    /// instrument set is augmented with instrument-by-exogenous products.
    #[default]
    InteractedInstruments,
    /// The interaction is rebuilt from the first-stage fitted values of the
    /// endogenous column.
    FittedValue,
}

impl IvMode {
    pub fn label(&self) -> &'static str {
        match self {
            IvMode::InteractedInstruments => "interacted-instruments",
            IvMode::FittedValue => "fitted-value",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interacted-instruments" => Ok(IvMode::InteractedInstruments),
            "fitted-value" => Ok(IvMode::FittedValue),
            other => Err(Error::Invalid(format!(
                "unknown iv mode '{other}' (expected interacted-instruments or fitted-value)"
            ))),
        }
    }
}

impl std::fmt::Display for IvMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Declarative description of one regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub dependent: String,
    pub exogenous: Vec<String>,
    /// Interaction terms as ordered column pairs.
    pub interactions: Vec<(String, String)>,
    /// Columns entered in natural logs wherever they appear (dependent,
    /// main effects, interaction factors, instruments).
    pub log_columns: BTreeSet<String>,
    pub fixed_effects: FixedEffects,
    pub endogenous: Vec<String>,
    pub instruments: Vec<String>,
    pub iv_mode: IvMode,
    pub covariance: CovVariant,
}

impl ModelSpec {
    pub fn new(name: &str, dependent: &str) -> Self {
        ModelSpec {
            name: name.to_string(),
            dependent: dependent.to_string(),
            exogenous: Vec::new(),
            interactions: Vec::new(),
            log_columns: BTreeSet::new(),
            fixed_effects: FixedEffects::None,
            endogenous: Vec::new(),
            instruments: Vec::new(),
            iv_mode: IvMode::default(),
            covariance: CovVariant::default(),
        }
    }

    pub fn with_exogenous(mut self, cols: &[&str]) -> Self {
        self.exogenous = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_interaction(mut self, a: &str, b: &str) -> Self {
        self.interactions.push((a.to_string(), b.to_string()));
        self
    }

    pub fn with_logs(mut self, cols: &[&str]) -> Self {
        self.log_columns = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_fixed_effects(mut self, fe: FixedEffects) -> Self {
        self.fixed_effects = fe;
        self
    }

    pub fn with_instrumented(mut self, endogenous: &[&str], instruments: &[&str]) -> Self {
        self.endogenous = endogenous.iter().map(|s| s.to_string()).collect();
        self.instruments = instruments.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_iv_mode(mut self, mode: IvMode) -> Self {
        self.iv_mode = mode;
        self
    }

    pub fn with_covariance(mut self, cov: CovVariant) -> Self {
        self.covariance = cov;
        self
    }

    /// Structural validity checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if self.dependent.is_empty() {
            return Err(Error::Spec("dependent column is empty".into()));
        }
        for e in &self.endogenous {
            if self.exogenous.contains(e) {
                return Err(Error::Spec(format!(
                    "column '{e}' is declared both exogenous and endogenous"
                )));
            }
        }
        if self.exogenous.contains(&self.dependent)
            || self.endogenous.contains(&self.dependent)
        {
            return Err(Error::Spec(format!(
                "dependent column '{}' also appears as a regressor",
                self.dependent
            )));
        }
        if !self.endogenous.is_empty() && self.instruments.len() < self.endogenous.len() {
            return Err(Error::Spec(format!(
                "order condition fails: {} instruments for {} endogenous columns",
                self.instruments.len(),
                self.endogenous.len()
            )));
        }
        for z in &self.instruments {
            if self.exogenous.contains(z) || self.endogenous.contains(z) {
                return Err(Error::Spec(format!(
                    "instrument '{z}' also appears in the structural equation"
                )));
            }
        }
        for (a, b) in &self.interactions {
            if a == &self.dependent || b == &self.dependent {
                return Err(Error::Spec("interaction references the dependent column".into()));
            }
            if self.endogenous.contains(a) && self.endogenous.contains(b) {
                return Err(Error::Spec(format!(
                    "interaction {a} x {b} joins two endogenous columns; not supported"
                )));
            }
        }
        Ok(())
    }

    /// Every panel column the spec reads.
    pub fn referenced_columns(&self) -> BTreeSet<String> {
        let mut cols = BTreeSet::new();
        cols.insert(self.dependent.clone());
        cols.extend(self.exogenous.iter().cloned());
        cols.extend(self.endogenous.iter().cloned());
        cols.extend(self.instruments.iter().cloned());
        for (a, b) in &self.interactions {
            cols.insert(a.clone());
            cols.insert(b.clone());
        }
        cols
    }
}

/// Which estimator produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    Ols,
    Fe,
    TwoSls,
    FeTwoSls,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Ols => "OLS",
            EstimatorKind::Fe => "FE",
            EstimatorKind::TwoSls => "2SLS",
            EstimatorKind::FeTwoSls => "FE-2SLS",
        }
    }
}

/// A fitted model: coefficients, covariance, residuals, fit statistics, and
/// per-coefficient inference. Omitted (rank-dropped) coefficients carry 0.0
/// and `None` inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: EstimatorKind,
    /// Term labels; index 0 is "(intercept)" for pooled fits.
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub omitted: Vec<bool>,
    pub covariance: Matrix,
    pub std_errors: Vec<Option<f64>>,
    pub t_stats: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    /// Structural residuals aligned with `used_rows`. For two-stage fits
    /// these are y - X b with the original (not fitted) endogenous columns.
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub df_residual: f64,
    pub r_squared: f64,
    pub n_absorbed_groups: usize,
    /// Recovered state intercepts when fixed effects are absorbed.
    pub fixed_effect_estimates: Option<Vec<(StateId, f64)>>,
    pub covariance_variant: CovVariant,
    pub iv_mode: Option<IvMode>,
    /// Echo of the spec that produced this fit.
    pub spec: ModelSpec,
    pub used_rows: Vec<RowKey>,
}

impl FitResult {
    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coefficient(&self, term: &str) -> Result<f64> {
        let i = self
            .term_index(term)
            .ok_or_else(|| Error::Data(format!("no term '{term}' in fit '{}'", self.spec.name)))?;
        Ok(self.coefficients[i])
    }

    /// Covariance block for the named terms, in the order given.
    pub fn covariance_block(&self, terms: &[&str]) -> Result<Matrix> {
        let idx: Vec<usize> = terms
            .iter()
            .map(|t| {
                self.term_index(t)
                    .ok_or_else(|| Error::Data(format!("no term '{t}' in fit '{}'", self.spec.name)))
            })
            .collect::<Result<_>>()?;
        let mut block = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                block[(a, b)] = self.covariance[(i, j)];
            }
        }
        Ok(block)
    }
}
