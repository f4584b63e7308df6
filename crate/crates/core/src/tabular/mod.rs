//! Typed tabular data: schemas, datasets, CSV ingestion and splitting.
//!
//! Cells are stored row-major as `f64`. Categorical cells hold the index of
//! their level in the schema, so every module can route rows through trees
//! without branching on the storage type.

mod csv_io;
mod split;

pub use csv_io::{
    infer_schema, load_csv, load_csv_files, load_csv_with, load_schema, read_records, save_csv, save_schema,
    CsvOptions, DEFAULT_DISTINCT_THRESHOLD,
};
pub use split::split_train_test;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, ColumnKind::Continuous)
    }

    /// Levels of a categorical column, `None` for continuous ones.
    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Continuous => None,
            ColumnKind::Categorical { levels } => Some(levels),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels().map_or(0, <[String]>::len)
    }
}

/// Ordered, validated list of columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct Schema {
    columns: Vec<Column>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        Schema::new(raw.columns)
    }
}

impl From<Schema> for RawSchema {
    fn from(schema: Schema) -> Self {
        RawSchema {
            columns: schema.columns,
        }
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let mut names = HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", col.name)));
            }
            if let Some(levels) = col.levels() {
                if levels.is_empty() {
                    return Err(Error::Schema(format!("column {:?} has no levels", col.name)));
                }
                let mut seen = HashSet::new();
                if let Some(dup) = levels.iter().find(|l| !seen.insert(l.as_str())) {
                    return Err(Error::Schema(format!(
                        "column {:?} repeats level {dup:?}",
                        col.name
                    )));
                }
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Schema without column `j`.
    pub fn without(&self, j: usize) -> Schema {
        let mut columns = self.columns.clone();
        columns.remove(j);
        Schema { columns }
    }

    pub fn level_index(&self, j: usize, level: &str) -> Option<usize> {
        self.columns[j].levels()?.iter().position(|l| l == level)
    }
}

/// An immutable n x d table conforming to a schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    n_rows: usize,
    cells: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major cells, validating every cell.
    pub fn new(schema: Schema, cells: Vec<f64>) -> Result<Self> {
        let d = schema.len();
        if d == 0 {
            return Err(Error::Schema("schema has no columns".into()));
        }
        if cells.len() % d != 0 {
            return Err(Error::Schema(format!(
                "{} cells do not form rows of width {d}",
                cells.len()
            )));
        }
        let n_rows = cells.len() / d;
        for (k, &v) in cells.iter().enumerate() {
            let (row, col) = (k / d, k % d);
            let column = schema.column(col);
            let ok = match column.levels() {
                None => v.is_finite(),
                Some(levels) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < levels.len(),
            };
            if !ok {
                return Err(Error::Parse {
                    row,
                    col,
                    name: column.name.clone(),
                    value: v.to_string(),
                });
            }
        }
        Ok(Dataset {
            schema,
            n_rows,
            cells,
        })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<f64>]) -> Result<Self> {
        let d = schema.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Arity {
                row: bad,
                expected: d,
                found: rows[bad].len(),
            });
        }
        Dataset::new(schema, rows.concat())
    }

    pub fn from_columns(schema: Schema, columns: &[Vec<f64>]) -> Result<Self> {
        let d = schema.len();
        if columns.len() != d {
            return Err(Error::Schema(format!("{} columns for schema of width {d}", columns.len())));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Schema("columns have different lengths".into()));
        }
        let mut cells = Vec::with_capacity(n * d);
        for i in 0..n {
            cells.extend(columns.iter().map(|c| c[i]));
        }
        Dataset::new(schema, cells)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.cells[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.n_cols() + j]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.cells.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Level index of a categorical cell.
    #[inline]
    pub fn level(&self, i: usize, j: usize) -> usize {
        self.value(i, j) as usize
    }

    /// Rows in the given order; indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let mut cells = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: self.schema.clone(),
            n_rows: indices.len(),
            cells,
        }
    }

    /// Appends the rows of `other` below these rows.
    pub fn vstack(&self, other: &Dataset) -> Result<Dataset> {
        if self.schema != other.schema {
            return Err(Error::SchemaMismatch("cannot stack datasets with different schemas".into()));
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Ok(Dataset {
            schema: self.schema.clone(),
            n_rows: self.n_rows + other.n_rows,
            cells,
        })
    }

    /// Removes column `j`, returning the remaining table and the column.
    pub fn split_off_column(&self, j: usize) -> (Dataset, Vec<f64>) {
        let d = self.n_cols();
        let mut cells = Vec::with_capacity(self.n_rows * (d - 1));
        let mut col = Vec::with_capacity(self.n_rows);
        for row in self.rows() {
            cells.extend_from_slice(&row[..j]);
            cells.extend_from_slice(&row[j + 1..]);
            col.push(row[j]);
        }
        let dataset = Dataset {
            schema: self.schema.without(j),
            n_rows: self.n_rows,
            cells,
        };
        (dataset, col)
    }

    /// Per-column (min, max) over the data; categorical columns report
    /// their level-index range.
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n_cols()];
        for row in self.rows() {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        ranges
    }

    /// Per-column sample standard deviation (n - 1 denominator, 0 if n < 2).
    pub fn column_std(&self) -> Vec<f64> {
        (0..self.n_cols())
            .map(|j| sample_std(&self.column(j)).unwrap_or(0.0))
            .collect()
    }

    /// Rows rendered as strings, level names for categorical cells.
    pub fn display_row(&self, i: usize) -> Vec<String> {
        self.row(i)
            .iter()
            .zip(self.schema.columns())
            .map(|(&v, col)| match col.levels() {
                None => v.to_string(),
                Some(levels) => levels[v as usize].clone(),
            })
            .collect()
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with n - 1 denominator; `None` for n < 2.
pub(crate) fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}
