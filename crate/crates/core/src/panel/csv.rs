//! CSV ingestion against a declared column schema.
//!
//! Dialect: comma-separated, UTF-8, header row required, dot decimal
//! separator. Empty cells are explicit missing values; anything else must
//! parse as a finite number.

use std::collections::BTreeSet;
use std::path::Path;

use super::{ColumnSchema, PanelDataset, Role, RowKey, StateId, Year};
use crate::error::io_err;
use crate::{Error, Result};

const STATE_KEY: &str = "state_id";
const YEAR_KEY: &str = "year";
const NAME_KEY: &str = "state_name";

/// Loads one CSV table whose header matches the schema exactly (as a set).
///
/// The key shape is inferred from the schema: `state_id` and/or `year`
/// declared with role `Key`. A `state_name` key column is captured as state
/// labels rather than as a numeric column.
pub fn load_csv_table(path: &Path, schema: &[ColumnSchema]) -> Result<PanelDataset> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::Schema {
                file: file_label.clone(),
                message: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema {
            file: file_label.clone(),
            message: format!("cannot read header: {e}"),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let declared: BTreeSet<&str> = schema.iter().map(|c| c.name.as_str()).collect();
    let present: BTreeSet<&str> = headers.iter().map(|h| h.as_str()).collect();
    if declared != present {
        let missing: Vec<_> = declared.difference(&present).collect();
        let extra: Vec<_> = present.difference(&declared).collect();
        return Err(Error::Schema {
            file: file_label,
            message: format!(
                "header mismatch: missing {missing:?}, unexpected {extra:?}"
            ),
        });
    }

    let col_of = |name: &str| headers.iter().position(|h| h == name);
    let has_state = schema.iter().any(|c| c.name == STATE_KEY && c.role == Role::Key);
    let has_year = schema.iter().any(|c| c.name == YEAR_KEY && c.role == Role::Key);
    if !has_state && !has_year {
        return Err(Error::Schema {
            file: file_label,
            message: "schema declares no key column (state_id or year)".into(),
        });
    }
    let state_pos = col_of(STATE_KEY);
    let year_pos = col_of(YEAR_KEY);
    let name_pos = col_of(NAME_KEY);

    struct Parsed {
        key: RowKey,
        row: usize,
        name: Option<String>,
        values: Vec<Option<f64>>,
    }

    let value_schemas: Vec<(usize, &ColumnSchema)> = schema
        .iter()
        .filter(|c| c.name != STATE_KEY && c.name != YEAR_KEY && c.name != NAME_KEY)
        .map(|c| (col_of(&c.name).expect("validated above"), c))
        .collect();

    let mut rows: Vec<Parsed> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Schema {
            file: file_label.clone(),
            message: format!("row {line}: {e}"),
        })?;
        let field = |pos: usize| record.get(pos).unwrap_or("");

        let state = match state_pos {
            Some(p) if has_state => Some(parse_cell::<StateId>(field(p), &file_label, line, STATE_KEY)?),
            _ => None,
        };
        let year = match year_pos {
            Some(p) if has_year => Some(parse_cell::<Year>(field(p), &file_label, line, YEAR_KEY)?),
            _ => None,
        };
        let name = name_pos.map(|p| field(p).to_string());

        let mut values = Vec::with_capacity(value_schemas.len());
        for &(pos, col) in &value_schemas {
            let raw = field(pos);
            if raw.is_empty() {
                values.push(None);
            } else {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    file: file_label.clone(),
                    row: line,
                    column: col.name.clone(),
                    message: format!("'{raw}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        file: file_label.clone(),
                        row: line,
                        column: col.name.clone(),
                        message: format!("'{raw}' is not finite"),
                    });
                }
                values.push(Some(v));
            }
        }
        rows.push(Parsed {
            key: RowKey { state, year },
            row: line,
            name,
            values,
        });
    }

    // Key uniqueness, reported with the offending file row.
    let mut seen: std::collections::BTreeMap<RowKey, usize> = std::collections::BTreeMap::new();
    for p in &rows {
        if let Some(_first) = seen.insert(p.key, p.row) {
            let key = match (p.key.state, p.key.year) {
                (Some(s), Some(y)) => format!("(state {s}, year {y})"),
                (Some(s), None) => format!("(state {s})"),
                (None, Some(y)) => format!("(year {y})"),
                (None, None) => "()".into(),
            };
            return Err(Error::DuplicateKey {
                file: file_label,
                key,
                row: p.row,
            });
        }
    }

    let mut panel = PanelDataset::new(rows.iter().map(|p| p.key).collect())?;
    for (j, &(_, col)) in value_schemas.iter().enumerate() {
        let mut values = vec![None; panel.n_rows()];
        for p in &rows {
            let at = panel.row_of(p.key).expect("key built from rows");
            values[at] = p.values[j];
        }
        panel.add_column(&col.name, col.unit, values)?;
    }
    for p in &rows {
        if let (Some(state), Some(name)) = (p.key.state, p.name.as_deref()) {
            if !name.is_empty() {
                panel.set_state_name(state, name)?;
            }
        }
    }
    Ok(panel)
}

fn parse_cell<T: std::str::FromStr>(
    raw: &str,
    file: &str,
    row: usize,
    column: &str,
) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        file: file.to_string(),
        row,
        column: column.to_string(),
        message: format!("'{raw}' is not a valid {column}"),
    })
}

/// Reads raw directed adjacency edges (state_id, neighbor_id) without
/// symmetry enforcement, so validators can report each violation.
pub fn read_adjacency_edges(path: &Path) -> Result<Vec<(StateId, StateId)>> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Schema {
            file: file_label.clone(),
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema {
            file: file_label.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers != ["state_id", "neighbor_id"] {
        return Err(Error::Schema {
            file: file_label,
            message: format!("expected header state_id,neighbor_id; found {headers:?}"),
        });
    }
    let mut edges = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Schema {
            file: file_label.clone(),
            message: format!("row {line}: {e}"),
        })?;
        let a = parse_cell::<StateId>(record.get(0).unwrap_or(""), &file_label, line, "state_id")?;
        let b = parse_cell::<StateId>(record.get(1).unwrap_or(""), &file_label, line, "neighbor_id")?;
        edges.push((a, b));
    }
    Ok(edges)
}

/// Loads adjacency and enforces symmetry and absence of self-loops.
pub fn load_adjacency_csv(path: &Path) -> Result<super::AdjacencyMap> {
    super::AdjacencyMap::from_edges(&read_adjacency_edges(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Unit;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn pop_schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::new("state_id", Unit::Dimensionless, Role::Key),
            ColumnSchema::new("year", Unit::Dimensionless, Role::Key),
            ColumnSchema::new("pop", Unit::ThousandsOfPersons, Role::Regressor),
        ]
    }

    #[test]
    fn parses_well_formed_file() {
        let f = write_temp("state,year,pop\n".replace("state,", "state_id,").as_str());
        drop(f);
        let f = write_temp("state_id,year,pop\n1,2000,405.69\n1,2001,410.0\n2,2000,17753.9\n");
        let panel = load_csv_table(f.path(), &pop_schema()).unwrap();
        assert_eq!(panel.n_rows(), 3);
        assert_eq!(panel.column("pop").unwrap().unit, Unit::ThousandsOfPersons);
        let at = panel.row_of(RowKey::panel(2, 2000)).unwrap();
        assert_eq!(panel.values("pop").unwrap()[at], Some(17753.9));
    }

    #[test]
    fn duplicate_key_names_the_row() {
        let f = write_temp("state_id,year,pop\n26,2005,100\n26,2005,101\n");
        let err = load_csv_table(f.path(), &pop_schema()).unwrap_err();
        match err {
            Error::DuplicateKey { key, row, .. } => {
                assert!(key.contains("state 26") && key.contains("2005"));
                assert_eq!(row, 3);
            }
            other => panic!("expected duplicate-key error, got {other}"),
        }
    }

    #[test]
    fn empty_cell_becomes_missing() {
        let f = write_temp("state_id,year,pop\n1,2000,\n1,2001,5.0\n");
        let panel = load_csv_table(f.path(), &pop_schema()).unwrap();
        let missing = panel
            .values("pop")
            .unwrap()
            .iter()
            .filter(|v| v.is_none())
            .count();
        assert_eq!(missing, 1);
    }

    #[test]
    fn bad_number_reports_row_and_column() {
        let f = write_temp("state_id,year,pop\n1,2000,abc\n");
        match load_csv_table(f.path(), &pop_schema()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "pop");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn header_mismatch_is_schema_error() {
        let f = write_temp("state_id,year,population\n1,2000,5\n");
        assert!(matches!(
            load_csv_table(f.path(), &pop_schema()).unwrap_err(),
            Error::Schema { .. }
        ));
    }

    #[test]
    fn year_only_table_loads() {
        let schema = vec![
            ColumnSchema::new("year", Unit::Dimensionless, Role::Key),
            ColumnSchema::new("ngi", Unit::MillionMcf, Role::Regressor),
        ];
        let f = write_temp("year,ngi\n1998,53.13\n1999,80.0\n");
        let panel = load_csv_table(f.path(), &schema).unwrap();
        assert_eq!(panel.n_rows(), 2);
        assert!(panel.state_ids().is_empty());
    }

    #[test]
    fn state_names_are_captured() {
        let schema = vec![
            ColumnSchema::new("state_id", Unit::Dimensionless, Role::Key),
            ColumnSchema::new("state_name", Unit::Dimensionless, Role::Key),
            ColumnSchema::new("dist", Unit::Km, Role::Regressor),
        ];
        let f = write_temp("state_id,state_name,dist\n26,Sonora,184\n");
        let panel = load_csv_table(f.path(), &schema).unwrap();
        assert_eq!(panel.state_name(26), Some("Sonora"));
    }
}
