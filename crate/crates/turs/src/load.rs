//! CSV ingestion.
//!
//! A column is numeric when every cell parses as a finite number and
//! categorical when none does; anything in between needs an override.
//! Categorical levels and class labels are indexed in order of first
//! appearance.

use std::collections::BTreeMap;
use std::path::Path;

use turs_core::{Column, Dataset, FeatureKind, FeatureSchema, Value, UNSEEN_LEVEL};

use crate::error::{Error, Result};

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut seen = BTreeMap::new();
    for (i, name) in header.iter().enumerate() {
        if let Some(j) = seen.insert(name.as_str(), i) {
            return Err(Error::Input {
                path: path.to_path_buf(),
                message: format!("duplicate column '{name}' (columns {} and {})", j + 1, i + 1),
            });
        }
    }
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    Ok((header, records))
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn index_levels<'a>(cells: impl Iterator<Item = &'a str>) -> (Vec<String>, Vec<u32>) {
    let mut levels: Vec<String> = Vec::new();
    let mut lookup: BTreeMap<&'a str, u32> = BTreeMap::new();
    let codes = cells
        .map(|cell| {
            *lookup.entry(cell).or_insert_with(|| {
                levels.push(cell.to_string());
                (levels.len() - 1) as u32
            })
        })
        .collect();
    (levels, codes)
}

/// Load a training table. `overrides` forces the kind of named feature columns.
pub fn load_csv(
    path: &Path,
    target_column: &str,
    overrides: &BTreeMap<String, FeatureKind>,
) -> Result<Dataset> {
    let input_err = |message: String| Error::Input {
        path: path.to_path_buf(),
        message,
    };
    let (header, records) = read_table(path)?;
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| input_err(format!("no target column '{target_column}'")))?;
    for name in overrides.keys() {
        if name == target_column || !header.contains(name) {
            return Err(input_err(format!("override for unknown feature column '{name}'")));
        }
    }
    if records.is_empty() {
        return Err(input_err("no data rows".into()));
    }
    for (r, record) in records.iter().enumerate() {
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Cell {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: header[c].clone(),
                    message: "missing value".into(),
                });
            }
        }
    }

    let cells = |c: usize| records.iter().map(move |rec| &rec[c]);
    let mut features = Vec::new();
    let mut columns = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if c == target_idx {
            continue;
        }
        let kind = match overrides.get(name) {
            Some(&kind) => kind,
            None => {
                let numeric = cells(c).filter(|cell| parse_number(cell).is_some()).count();
                if numeric == records.len() {
                    FeatureKind::Numeric
                } else if numeric == 0 {
                    FeatureKind::Categorical
                } else {
                    let row = cells(c).position(|cell| parse_number(cell).is_none()).unwrap();
                    return Err(Error::Cell {
                        path: path.to_path_buf(),
                        row: row + 1,
                        column: name.clone(),
                        message: "column mixes numbers and text; declare its kind".into(),
                    });
                }
            }
        };
        match kind {
            FeatureKind::Numeric => {
                let mut values = Vec::with_capacity(records.len());
                for (r, cell) in cells(c).enumerate() {
                    values.push(parse_number(cell).ok_or_else(|| Error::Cell {
                        path: path.to_path_buf(),
                        row: r + 1,
                        column: name.clone(),
                        message: format!("'{cell}' is not a finite number"),
                    })?);
                }
                features.push(FeatureSchema::numeric(name.clone()));
                columns.push(Column::Numeric(values));
            }
            FeatureKind::Categorical => {
                let (levels, codes) = index_levels(cells(c));
                features.push(FeatureSchema::categorical(name.clone(), levels));
                columns.push(Column::Categorical(codes));
            }
        }
    }
    let (class_labels, target) = index_levels(cells(target_idx));
    Ok(Dataset::new(features, columns, target, class_labels)?)
}

/// Instances read against an existing schema, plus class indices when the
/// file carries a column named `target_column` with known labels.
pub struct Instances {
    pub rows: Vec<Vec<Value>>,
    pub target: Option<Vec<u32>>,
}

/// Read feature rows for prediction. Columns are matched by name; extra
/// columns are ignored; unseen categorical levels are allowed.
pub fn load_instances(
    path: &Path,
    features: &[FeatureSchema],
    class_labels: &[String],
    target_column: Option<&str>,
) -> Result<Instances> {
    let (header, records) = read_table(path)?;
    let mut positions = Vec::with_capacity(features.len());
    for f in features {
        let pos = header.iter().position(|h| *h == f.name).ok_or_else(|| Error::Input {
            path: path.to_path_buf(),
            message: format!("missing feature column '{}'", f.name),
        })?;
        positions.push(pos);
    }
    let mut rows = Vec::with_capacity(records.len());
    for (r, record) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(features.len());
        for (f, &pos) in features.iter().zip(&positions) {
            let cell = &record[pos];
            let cell_err = |message: String| Error::Cell {
                path: path.to_path_buf(),
                row: r + 1,
                column: f.name.clone(),
                message,
            };
            if cell.is_empty() {
                return Err(cell_err("missing value".into()));
            }
            row.push(match f.kind {
                FeatureKind::Numeric => Value::Numeric(
                    parse_number(cell).ok_or_else(|| cell_err(format!("'{cell}' is not a finite number")))?,
                ),
                FeatureKind::Categorical => Value::Level(f.level_index(cell).unwrap_or(UNSEEN_LEVEL)),
            });
        }
        rows.push(row);
    }
    let target = match target_column.and_then(|t| header.iter().position(|h| h == t)) {
        None => None,
        Some(pos) => {
            let mut target = Vec::with_capacity(records.len());
            for (r, record) in records.iter().enumerate() {
                let label = &record[pos];
                let code = class_labels.iter().position(|l| l == label).ok_or_else(|| Error::Cell {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: target_column.unwrap_or_default().to_string(),
                    message: format!("unknown class label '{label}'"),
                })?;
                target.push(code as u32);
            }
            Some(target)
        }
    };
    Ok(Instances { rows, target })
}
