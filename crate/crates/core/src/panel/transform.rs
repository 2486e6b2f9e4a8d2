//! Panel construction steps: merging with broadcast, lags, deflation,
//! spatial interpolation, and the border-distance routing rule.

use std::collections::BTreeSet;

use super::{AdjacencyMap, PanelDataset, RowKey, StateId, Unit, Year};
use crate::{Error, Result};

/// Requests that a named column end up in the target unit after assembly.
#[derive(Debug, Clone)]
pub struct UnitConversion {
    pub column: String,
    pub to: Unit,
}

impl UnitConversion {
    pub fn new(column: &str, to: Unit) -> Self {
        UnitConversion {
            column: column.to_string(),
            to,
        }
    }
}

/// Merges tables into one panel. Year-only columns are replicated across
/// states, state-only columns across years. The row grid is the union of the
/// panel-shaped tables' keys; with no panel-shaped table it is the full
/// states-by-years product. Merging is order-independent.
pub fn assemble_panel(tables: &[&PanelDataset], policy: &[UnitConversion]) -> Result<PanelDataset> {
    if tables.is_empty() {
        return Err(Error::Data("no tables to assemble".into()));
    }

    let mut states: BTreeSet<StateId> = BTreeSet::new();
    let mut years: BTreeSet<Year> = BTreeSet::new();
    let mut grid: BTreeSet<(StateId, Year)> = BTreeSet::new();
    for t in tables {
        states.extend(t.state_ids().iter().copied());
        years.extend(t.years().iter().copied());
        for k in t.keys() {
            if let (Some(s), Some(y)) = (k.state, k.year) {
                grid.insert((s, y));
            }
        }
    }
    if states.is_empty() || years.is_empty() {
        return Err(Error::Data(
            "assembly needs at least one state dimension and one year dimension".into(),
        ));
    }
    if grid.is_empty() {
        for &s in &states {
            for &y in &years {
                grid.insert((s, y));
            }
        }
    }

    let keys: Vec<RowKey> = grid.iter().map(|&(s, y)| RowKey::panel(s, y)).collect();
    let mut merged = PanelDataset::new(keys)?;

    for t in tables {
        for (id, name) in t.state_names() {
            if !name.is_empty() {
                merged.set_state_name(*id, name)?;
            }
        }
        let is_panel = !t.state_ids().is_empty() && !t.years().is_empty();
        let is_year_only = t.state_ids().is_empty();
        for (name, col) in t.columns() {
            if merged.has_column(name) {
                return Err(Error::Data(format!(
                    "column '{name}' appears in more than one table"
                )));
            }
            let mut values = vec![None; merged.n_rows()];
            let mut any = false;
            for (i, key) in merged.keys().iter().enumerate() {
                let (s, y) = (key.state.unwrap(), key.year.unwrap());
                let source_key = if is_panel {
                    RowKey::panel(s, y)
                } else if is_year_only {
                    RowKey::year_only(y)
                } else {
                    RowKey::state_only(s)
                };
                if let Some(at) = t.row_of(source_key) {
                    values[i] = col.values[at];
                    any = true;
                }
            }
            if !any {
                return Err(Error::Data(format!(
                    "column '{name}' shares no keys with the merged grid"
                )));
            }
            merged.add_column(name, col.unit, values)?;
        }
    }

    for conv in policy {
        let col = merged.column(&conv.column)?;
        let factor = col.unit.conversion_factor(conv.to).ok_or_else(|| {
            Error::Unit(format!(
                "no conversion from {} to {} for column '{}'",
                col.unit.label(),
                conv.to.label(),
                conv.column
            ))
        })?;
        let values: Vec<Option<f64>> = col.values.iter().map(|v| v.map(|x| x * factor)).collect();
        merged.replace_column(&conv.column, conv.to, values)?;
    }

    Ok(merged)
}

/// Adds `{column}_lag{k}`: each state's series shifted k periods, the first
/// k periods missing. Pre-sample rows present in the panel act as warm-up.
pub fn lag_series(panel: &PanelDataset, column: &str, k: usize) -> Result<PanelDataset> {
    if k == 0 {
        return Err(Error::Invalid("lag requires k >= 1".into()));
    }
    if k >= panel.years().len() {
        return Err(Error::Invalid(format!(
            "lag {k} is not shorter than the {} observed periods",
            panel.years().len()
        )));
    }
    let source = panel.column(column)?.clone();
    let mut values = vec![None; panel.n_rows()];

    let mut shift_rows = |rows: &[(usize, Year)]| {
        for w in rows.windows(k + 1) {
            let (from, _) = w[0];
            let (to, _) = w[k];
            values[to] = source.values[from];
        }
    };

    if panel.state_ids().is_empty() {
        let rows: Vec<(usize, Year)> = panel
            .keys()
            .iter()
            .enumerate()
            .map(|(i, key)| (i, key.year.unwrap_or(0)))
            .collect();
        shift_rows(&rows);
    } else {
        for &s in panel.state_ids() {
            let rows = panel.state_rows(s);
            shift_rows(&rows);
        }
    }

    let mut out = panel.clone();
    out.add_column(&format!("{column}_lag{k}"), source.unit, values)?;
    Ok(out)
}

/// Deflates a nominal price column by a year-level deflator, rebasing the
/// deflator so the base year equals one (index-100 style series included).
pub fn deflate_prices(
    panel: &PanelDataset,
    nominal_col: &str,
    deflator_col: &str,
    base_year: Year,
    out_col: &str,
) -> Result<PanelDataset> {
    let nominal = panel.column(nominal_col)?.clone();
    let deflator = panel.column(deflator_col)?;

    let base_at = panel
        .keys()
        .iter()
        .position(|k| k.year == Some(base_year))
        .ok_or_else(|| Error::Data(format!("deflator base year {base_year} not in panel")))?;
    let base = deflator.values[base_at]
        .ok_or_else(|| Error::Data(format!("deflator missing at base year {base_year}")))?;
    if base <= 0.0 {
        return Err(Error::Data(format!(
            "nonpositive deflator {base} at base year {base_year}"
        )));
    }

    let mut values = vec![None; panel.n_rows()];
    for (i, key) in panel.keys().iter().enumerate() {
        let Some(nom) = nominal.values[i] else {
            continue;
        };
        let year = key.year.unwrap_or(base_year);
        let d = deflator.values[i].ok_or_else(|| {
            Error::Data(format!("deflator missing for year {year} with observed price"))
        })?;
        if d <= 0.0 {
            return Err(Error::Data(format!("nonpositive deflator {d} for year {year}")));
        }
        values[i] = Some(nom / (d / base));
    }

    let out_unit = match nominal.unit {
        Unit::PesosPerGjNominal => Unit::PesosPerGj2015,
        other => other,
    };
    let mut out = panel.clone();
    out.add_column(out_col, out_unit, values)?;
    Ok(out)
}

/// Fills missing state prices year by year with the simple average of
/// observed bordering neighbors, iterating to a fixed point so states whose
/// neighbors are all missing are reached through filled intermediates.
/// Observed values are never altered. Updates within a pass read the
/// previous pass's values, in ascending state order.
pub fn interpolate_missing_state_prices(
    panel: &PanelDataset,
    price_col: &str,
    adjacency: &AdjacencyMap,
) -> Result<PanelDataset> {
    const TOL: f64 = 1e-9;
    const MAX_PASSES: usize = 10_000;

    let source = panel.column(price_col)?.clone();
    let mut values = source.values.clone();

    for &year in panel.years() {
        let state_rows: Vec<(StateId, usize)> = panel
            .state_ids()
            .iter()
            .filter_map(|&s| panel.row_of(RowKey::panel(s, year)).map(|i| (s, i)))
            .collect();
        let observed: BTreeSet<StateId> = state_rows
            .iter()
            .filter(|&&(_, i)| source.values[i].is_some())
            .map(|&(s, _)| s)
            .collect();
        if observed.is_empty() {
            return Err(Error::Data(format!("no state has an observed price in year {year}")));
        }
        if observed.len() == state_rows.len() {
            continue;
        }

        let mut current: std::collections::BTreeMap<StateId, Option<f64>> = state_rows
            .iter()
            .map(|&(s, i)| (s, values[i]))
            .collect();

        for _pass in 0..MAX_PASSES {
            let snapshot = current.clone();
            let mut max_change = 0.0_f64;
            let mut fills = 0usize;
            for &(s, _) in &state_rows {
                if observed.contains(&s) {
                    continue;
                }
                let neighbor_vals: Vec<f64> = adjacency
                    .neighbors(s)
                    .filter_map(|n| snapshot.get(&n).copied().flatten())
                    .collect();
                if neighbor_vals.is_empty() {
                    continue;
                }
                let avg = neighbor_vals.iter().sum::<f64>() / neighbor_vals.len() as f64;
                match current.get(&s).copied().flatten() {
                    Some(prev) => max_change = max_change.max((avg - prev).abs()),
                    None => fills += 1,
                }
                current.insert(s, Some(avg));
            }
            let still_missing = current.values().filter(|v| v.is_none()).count();
            if fills == 0 && still_missing > 0 {
                let stranded: Vec<StateId> = current
                    .iter()
                    .filter(|(_, v)| v.is_none())
                    .map(|(&s, _)| s)
                    .collect();
                return Err(Error::Data(format!(
                    "states {stranded:?} have no path to an observed price in year {year}"
                )));
            }
            if still_missing == 0 && fills == 0 && max_change <= TOL {
                break;
            }
        }

        for &(s, i) in &state_rows {
            values[i] = current[&s];
        }
    }

    let mut out = panel.clone();
    out.replace_column(price_col, source.unit, values)?;
    Ok(out)
}

/// Border distance with the southern routing rule: states south of Mexico
/// City take their distance to Mexico City plus the fixed Mexico City to
/// border distance; all other states take their direct border distance.
pub fn effective_distance(
    state_ids: &[StateId],
    dist_border_km: &[Option<f64>],
    dist_cdmx_km: &[Option<f64>],
    south_states: &BTreeSet<StateId>,
    cdmx_to_border_km: f64,
) -> Result<Vec<f64>> {
    if state_ids.len() != dist_border_km.len() || state_ids.len() != dist_cdmx_km.len() {
        return Err(Error::Dimension("distance inputs have unequal lengths".into()));
    }
    if !cdmx_to_border_km.is_finite() || cdmx_to_border_km < 0.0 {
        return Err(Error::Invalid(format!(
            "invalid Mexico City to border distance {cdmx_to_border_km}"
        )));
    }
    let mut out = Vec::with_capacity(state_ids.len());
    for (i, &s) in state_ids.iter().enumerate() {
        if south_states.contains(&s) {
            let d = dist_cdmx_km[i].ok_or_else(|| {
                Error::Data(format!("southern state {s} is missing its distance to Mexico City"))
            })?;
            out.push(d + cdmx_to_border_km);
        } else {
            let d = dist_border_km[i].ok_or_else(|| {
                Error::Data(format!("state {s} is missing a direct border distance"))
            })?;
            out.push(d);
        }
    }
    Ok(out)
}
