//! Discrete tabular datasets: schema, column storage, CSV round trips,
//! and the family counts every decomposable score is built from.
//!
//! Values are stored as `u8` state indices (cardinality is capped at 256),
//! column major, so counting sweeps are cache friendly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on parent configurations a single counting pass may span.
pub const MAX_FAMILY_CONFIGS: usize = 1 << 26;

pub const MAX_CARDINALITY: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaVariable {
    pub name: String,
    pub states: Vec<String>,
}

/// Variable names and state labels, in column order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<SchemaVariable>,
}

impl Schema {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].states.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::BadSchema(e.to_string()))
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DataError {
    #[error("CSV input has no header line")]
    EmptyCsv,
    #[error("CSV header column {index} is '{found}', schema expects '{expected}'")]
    HeaderMismatch { index: usize, expected: String, found: String },
    #[error("CSV header has {found} columns, schema expects {expected}")]
    ColumnCountMismatch { expected: usize, found: usize },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column '{column}': label '{label}' is not a state of this variable")]
    UnknownLabel { row: usize, column: String, label: String },
    #[error("row {row}, column '{column}': cell '{cell}' is not a state index")]
    InvalidCell { row: usize, column: String, cell: String },
    #[error("column '{column}' has cardinality {card}, the maximum is {max}", max = MAX_CARDINALITY)]
    CardinalityTooLarge { column: String, card: usize },
    #[error("family of '{child}' spans {configs} parent configurations, the maximum is {max}", max = MAX_FAMILY_CONFIGS)]
    FamilyTooLarge { child: String, configs: usize },
    #[error("column {index} has {found} values, expected {expected}")]
    ColumnLengthMismatch { index: usize, expected: usize, found: usize },
    #[error("column '{column}' row {row} holds state {value}, cardinality is {card}")]
    ValueOutOfRange { column: String, row: usize, value: u8, card: usize },
    #[error("schema JSON is invalid: {0}")]
    BadSchema(String),
    #[error("dataset has no rows")]
    NoRows,
}

/// Counts of (parent configuration, child state) pairs for one family.
/// Configurations index row major with the first parent most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyCounts {
    pub child_card: usize,
    pub n_configs: usize,
    counts: Vec<u64>,
}

impl FamilyCounts {
    /// Child-state counts under parent configuration `config`.
    pub fn config(&self, config: usize) -> &[u64] {
        &self.counts[config * self.child_card..(config + 1) * self.child_card]
    }
}

/// Immutable discrete dataset: a schema plus one `u8` column per variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Vec<u8>>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<Vec<u8>>) -> Result<Self, DataError> {
        if columns.len() != schema.n_vars() {
            return Err(DataError::ColumnCountMismatch {
                expected: schema.n_vars(),
                found: columns.len(),
            });
        }
        for v in &schema.variables {
            if v.states.len() > MAX_CARDINALITY {
                return Err(DataError::CardinalityTooLarge {
                    column: v.name.clone(),
                    card: v.states.len(),
                });
            }
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (i, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(DataError::ColumnLengthMismatch {
                    index: i,
                    expected: n_rows,
                    found: col.len(),
                });
            }
            let card = schema.cardinality(i);
            for (row, &v) in col.iter().enumerate() {
                if v as usize >= card {
                    return Err(DataError::ValueOutOfRange {
                        column: schema.variables[i].name.clone(),
                        row,
                        value: v,
                        card,
                    });
                }
            }
        }
        Ok(Dataset { schema, columns, n_rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_vars(&self) -> usize {
        self.schema.n_vars()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// State index of `var` in row `row`.
    pub fn value(&self, row: usize, var: usize) -> u8 {
        self.columns[var][row]
    }

    pub fn column(&self, var: usize) -> &[u8] {
        &self.columns[var]
    }

    /// Parse a CSV with a header line. With a schema, cells are matched
    /// against state labels (and the header against variable names). With
    /// none, cells must be bare state indices and cardinalities are
    /// inferred as max + 1 per column.
    pub fn read_csv(text: &str, schema: Option<&Schema>) -> Result<Self, DataError> {
        let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
        let header = lines.next().filter(|h| !h.is_empty()).ok_or(DataError::EmptyCsv)?;
        let names: Vec<&str> = header.split(',').collect();

        if let Some(schema) = schema {
            if names.len() != schema.n_vars() {
                return Err(DataError::ColumnCountMismatch {
                    expected: schema.n_vars(),
                    found: names.len(),
                });
            }
            for (i, name) in names.iter().enumerate() {
                if *name != schema.variables[i].name {
                    return Err(DataError::HeaderMismatch {
                        index: i,
                        expected: schema.variables[i].name.clone(),
                        found: name.to_string(),
                    });
                }
            }
        }

        let n_vars = names.len();
        let mut cells_by_col: Vec<Vec<&str>> = vec![Vec::new(); n_vars];
        let mut n_rows = 0usize;
        for (row, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != n_vars {
                return Err(DataError::RaggedRow { row, expected: n_vars, found: cells.len() });
            }
            for (c, cell) in cells.into_iter().enumerate() {
                cells_by_col[c].push(cell);
            }
            n_rows += 1;
        }

        let schema = match schema {
            Some(s) => s.clone(),
            None => {
                // Infer each column's cardinality from the indices present.
                let mut vars = Vec::with_capacity(n_vars);
                for (c, col) in cells_by_col.iter().enumerate() {
                    let mut card = 1usize;
                    for (row, cell) in col.iter().enumerate() {
                        let v: usize = cell.parse().map_err(|_| DataError::InvalidCell {
                            row,
                            column: names[c].to_string(),
                            cell: cell.to_string(),
                        })?;
                        if v >= MAX_CARDINALITY {
                            return Err(DataError::CardinalityTooLarge {
                                column: names[c].to_string(),
                                card: v + 1,
                            });
                        }
                        card = card.max(v + 1);
                    }
                    vars.push(SchemaVariable {
                        name: names[c].to_string(),
                        states: (0..card).map(|s| s.to_string()).collect(),
                    });
                }
                Schema { variables: vars }
            }
        };

        let mut columns = Vec::with_capacity(n_vars);
        for (c, col) in cells_by_col.iter().enumerate() {
            let var = &schema.variables[c];
            let mut out = Vec::with_capacity(n_rows);
            for (row, cell) in col.iter().enumerate() {
                let idx = var.states.iter().position(|s| s == cell).ok_or_else(|| {
                    DataError::UnknownLabel {
                        row,
                        column: var.name.clone(),
                        label: cell.to_string(),
                    }
                })?;
                out.push(idx as u8);
            }
            columns.push(out);
        }
        Dataset::new(schema, columns)
    }

    /// Serialize as CSV: header line of variable names, then one line per
    /// row of state labels. An empty dataset yields just the header.
    pub fn write_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.schema.variables.iter().map(|v| v.name.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in 0..self.n_rows {
            for (c, var) in self.schema.variables.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                out.push_str(&var.states[self.value(row, c) as usize]);
            }
            out.push('\n');
        }
        out
    }

    /// Joint counts of the child against every configuration of `parents`
    /// (given in the order that defines the configuration index). One pass
    /// over the rows.
    pub fn count_family(&self, child: usize, parents: &[usize]) -> Result<FamilyCounts, DataError> {
        assert!(child < self.n_vars(), "child index out of range");
        for &p in parents {
            assert!(p < self.n_vars(), "parent index out of range");
            assert_ne!(p, child, "a variable cannot parent itself");
        }
        let child_card = self.schema.cardinality(child);
        let mut product: u128 = 1;
        for &p in parents {
            product = product.saturating_mul(self.schema.cardinality(p) as u128);
        }
        if product > MAX_FAMILY_CONFIGS as u128 {
            return Err(DataError::FamilyTooLarge {
                child: self.schema.variables[child].name.clone(),
                configs: product.min(usize::MAX as u128) as usize,
            });
        }
        let n_configs = product as usize;
        let mut counts = vec![0u64; n_configs * child_card];
        let child_col = &self.columns[child];
        let parent_cols: Vec<(&[u8], usize)> =
            parents.iter().map(|&p| (self.columns[p].as_slice(), self.schema.cardinality(p))).collect();
        for row in 0..self.n_rows {
            let mut config = 0usize;
            for &(col, card) in &parent_cols {
                config = config * card + col[row] as usize;
            }
            counts[config * child_card + child_col[row] as usize] += 1;
        }
        Ok(FamilyCounts { child_card, n_configs, counts })
    }
}
