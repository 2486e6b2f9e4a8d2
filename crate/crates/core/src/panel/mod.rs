//! Panel assembly and transformation: CSV ingestion, merging with broadcast,
//! lags, price deflation, spatial interpolation of missing state prices,
//! border-distance routing, and summary statistics.

mod csv;
mod stats;
mod transform;

pub use csv::{load_adjacency_csv, load_csv_table, read_adjacency_edges};
pub use stats::{summary_stats, SummaryRow};
pub use transform::{
    assemble_panel, deflate_prices, effective_distance, interpolate_missing_state_prices,
    lag_series, UnitConversion,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type StateId = u32;
pub type Year = i32;

/// Closed unit registry. Conversions between units are explicit operations;
/// a column never changes scale implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    Persons,
    ThousandsOfPersons,
    MillionMcf,
    PesosPerGjNominal,
    PesosPerGj2015,
    UsdPerMcf,
    Km,
    Index,
    Dimensionless,
}

impl Unit {
    /// Multiplicative factor converting `self` to `to`, when defined.
    pub fn conversion_factor(self, to: Unit) -> Option<f64> {
        if self == to {
            return Some(1.0);
        }
        match (self, to) {
            (Unit::ThousandsOfPersons, Unit::Persons) => Some(1000.0),
            (Unit::Persons, Unit::ThousandsOfPersons) => Some(1e-3),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Unit::Persons => "persons",
            Unit::ThousandsOfPersons => "thousands-of-persons",
            Unit::MillionMcf => "million-MCF",
            Unit::PesosPerGjNominal => "Pesos-per-GJ-nominal",
            Unit::PesosPerGj2015 => "Pesos-per-GJ-2015",
            Unit::UsdPerMcf => "USD-per-MCF",
            Unit::Km => "km",
            Unit::Index => "index",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

/// Role a column plays in the analysis; keys identify rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Dependent,
    Regressor,
    Key,
    Auxiliary,
}

/// Declared schema for one CSV column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub unit: Unit,
    pub role: Role,
}

impl ColumnSchema {
    pub fn new(name: &str, unit: Unit, role: Role) -> Self {
        ColumnSchema {
            name: name.to_string(),
            unit,
            role,
        }
    }
}

/// Row identity: a state, a year, or both. Pure time series carry no state;
/// pure cross-sections carry no year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub state: Option<StateId>,
    pub year: Option<Year>,
}

impl RowKey {
    pub fn panel(state: StateId, year: Year) -> Self {
        RowKey {
            state: Some(state),
            year: Some(year),
        }
    }

    pub fn year_only(year: Year) -> Self {
        RowKey {
            state: None,
            year: Some(year),
        }
    }

    pub fn state_only(state: StateId) -> Self {
        RowKey {
            state: Some(state),
            year: None,
        }
    }

    fn describe(&self) -> String {
        match (self.state, self.year) {
            (Some(s), Some(y)) => format!("(state {s}, year {y})"),
            (Some(s), None) => format!("(state {s})"),
            (None, Some(y)) => format!("(year {y})"),
            (None, None) => "(empty key)".into(),
        }
    }
}

/// One named value sequence aligned to the panel's row order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelColumn {
    pub unit: Unit,
    pub values: Vec<Option<f64>>,
}

/// A state-by-year table of named numeric columns with explicit missingness.
///
/// Rows are kept sorted by (state, year) so construction order never affects
/// any downstream computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelDataset {
    keys: Vec<RowKey>,
    state_ids: Vec<StateId>,
    years: Vec<Year>,
    state_names: BTreeMap<StateId, String>,
    columns: BTreeMap<String, PanelColumn>,
}

impl PanelDataset {
    /// Builds an empty panel over the given row keys; duplicates are rejected.
    pub fn new(mut keys: Vec<RowKey>) -> Result<Self> {
        keys.sort();
        for w in keys.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Data(format!("duplicate row key {}", w[0].describe())));
            }
        }
        let mut state_ids: Vec<StateId> = keys.iter().filter_map(|k| k.state).collect();
        state_ids.sort_unstable();
        state_ids.dedup();
        let mut years: Vec<Year> = keys.iter().filter_map(|k| k.year).collect();
        years.sort_unstable();
        years.dedup();
        Ok(PanelDataset {
            keys,
            state_ids,
            years,
            state_names: BTreeMap::new(),
            columns: BTreeMap::new(),
        })
    }

    /// Balanced grid over all (state, year) combinations.
    pub fn balanced_grid(states: &[StateId], years: &[Year]) -> Result<Self> {
        let mut keys = Vec::with_capacity(states.len() * years.len());
        for &s in states {
            for &y in years {
                keys.push(RowKey::panel(s, y));
            }
        }
        PanelDataset::new(keys)
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn state_ids(&self) -> &[StateId] {
        &self.state_ids
    }

    pub fn years(&self) -> &[Year] {
        &self.years
    }

    pub fn state_name(&self, id: StateId) -> Option<&str> {
        self.state_names.get(&id).map(|s| s.as_str())
    }

    pub fn set_state_name(&mut self, id: StateId, name: &str) -> Result<()> {
        if let Some(existing) = self.state_names.get(&id) {
            if !existing.is_empty() && existing != name {
                return Err(Error::Data(format!(
                    "conflicting names for state {id}: '{existing}' vs '{name}'"
                )));
            }
        }
        self.state_names.insert(id, name.to_string());
        Ok(())
    }

    pub fn state_names(&self) -> &BTreeMap<StateId, String> {
        &self.state_names
    }

    pub fn row_of(&self, key: RowKey) -> Option<usize> {
        self.keys.binary_search(&key).ok()
    }

    /// A panel is balanced when it covers every state-year combination.
    pub fn is_balanced(&self) -> bool {
        !self.state_ids.is_empty()
            && !self.years.is_empty()
            && self.keys.len() == self.state_ids.len() * self.years.len()
    }

    pub fn add_column(&mut self, name: &str, unit: Unit, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.keys.len() {
            return Err(Error::Dimension(format!(
                "column '{name}' has {} values for {} rows",
                values.len(),
                self.keys.len()
            )));
        }
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("column '{name}' contains {v}")));
        }
        if self.columns.contains_key(name) {
            return Err(Error::Data(format!("column '{name}' already present")));
        }
        self.columns.insert(name.to_string(), PanelColumn { unit, values });
        Ok(())
    }

    pub fn replace_column(&mut self, name: &str, unit: Unit, values: Vec<Option<f64>>) -> Result<()> {
        self.columns.remove(name);
        self.add_column(name, unit, values)
    }

    pub fn column(&self, name: &str) -> Result<&PanelColumn> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::Data(format!("column '{name}' not found")))
    }

    pub fn values(&self, name: &str) -> Result<&[Option<f64>]> {
        Ok(&self.column(name)?.values)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    pub fn columns(&self) -> &BTreeMap<String, PanelColumn> {
        &self.columns
    }

    /// Rows of the state's sorted year sequence, as (row index, year).
    pub fn state_rows(&self, state: StateId) -> Vec<(usize, Year)> {
        self.keys
            .iter()
            .enumerate()
            .filter(|(_, k)| k.state == Some(state))
            .map(|(i, k)| (i, k.year.unwrap_or(0)))
            .collect()
    }
}

/// Symmetric border relation between states. No self-loops.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdjacencyMap {
    map: BTreeMap<StateId, std::collections::BTreeSet<StateId>>,
}

impl AdjacencyMap {
    /// Builds from directed edges, requiring every edge's mirror to be present.
    pub fn from_edges(edges: &[(StateId, StateId)]) -> Result<Self> {
        let mut map: BTreeMap<StateId, std::collections::BTreeSet<StateId>> = BTreeMap::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Data(format!("adjacency self-loop on state {a}")));
            }
            map.entry(a).or_default().insert(b);
        }
        for (&a, nbrs) in &map {
            for &b in nbrs {
                if !map.get(&b).map(|s| s.contains(&a)).unwrap_or(false) {
                    return Err(Error::Data(format!(
                        "asymmetric adjacency: {a} -> {b} has no mirror {b} -> {a}"
                    )));
                }
            }
        }
        Ok(AdjacencyMap { map })
    }

    pub fn neighbors(&self, id: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.map.get(&id).into_iter().flatten().copied()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.map.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_grid_row_count() {
        let p = PanelDataset::balanced_grid(&[1, 2, 3], &[2000, 2001]).unwrap();
        assert_eq!(p.n_rows(), 6);
        assert!(p.is_balanced());
    }

    #[test]
    fn duplicate_keys_rejected() {
        let keys = vec![RowKey::panel(1, 2000), RowKey::panel(1, 2000)];
        assert!(PanelDataset::new(keys).is_err());
    }

    #[test]
    fn adjacency_requires_mirror_edges() {
        assert!(AdjacencyMap::from_edges(&[(1, 2)]).is_err());
        assert!(AdjacencyMap::from_edges(&[(1, 2), (2, 1)]).is_ok());
        assert!(AdjacencyMap::from_edges(&[(1, 1)]).is_err());
    }

    #[test]
    fn unit_conversions_are_closed() {
        assert_eq!(Unit::ThousandsOfPersons.conversion_factor(Unit::Persons), Some(1000.0));
        assert_eq!(Unit::Km.conversion_factor(Unit::Persons), None);
        assert_eq!(Unit::Km.conversion_factor(Unit::Km), Some(1.0));
    }
}
