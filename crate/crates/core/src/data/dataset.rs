use std::collections::BTreeSet;
use std::io::{Read, Write};

use crate::data::schema::{MeasurementLevel, MissingPolicy, Schema, VariableSpec};
use crate::error::{Error, Result};

/// Cell storage for one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical(Vec<i64>),
    Numeric(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(v) => v.len(),
            Column::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[i64]> {
        match self {
            Column::Categorical(v) => Some(v),
            Column::Numeric(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&i| v[i]).collect()),
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
        }
    }

    fn format_cell(&self, row: usize) -> String {
        match self {
            Column::Categorical(v) => v[row].to_string(),
            // `Display` for f64 prints the shortest string that round-trips.
            Column::Numeric(v) => v[row].to_string(),
        }
    }
}

/// A rectangular mixed-type table with its schema attached.
///
/// Immutable once built; row identities are the 1-based data-row positions
/// in the source file and survive filtering and splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Column>,
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from in-memory columns, checking shape and category
    /// membership. Row ids default to `1..=n`.
    pub fn from_columns(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        let n = columns.first().map_or(0, Column::len);
        Self::with_row_ids(schema, columns, (1..=n).collect())
    }

    pub fn with_row_ids(mut schema: Schema, columns: Vec<Column>, row_ids: Vec<usize>) -> Result<Self> {
        schema.validate()?;
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} columns supplied for {} schema variables",
                columns.len(),
                schema.len()
            )));
        }
        let n = row_ids.len();
        for (spec, col) in schema.variables.iter_mut().zip(&columns) {
            if col.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            match (spec.level.is_categorical(), col) {
                (true, Column::Categorical(codes)) => {
                    if spec.categories.is_empty() {
                        infer_categories(spec, codes);
                    }
                    let allowed = spec.effective_categories();
                    if let Some((row, &code)) = codes.iter().enumerate().find(|(_, c)| !allowed.contains(c)) {
                        return Err(Error::UnknownCategory {
                            row: row_ids[row],
                            column: spec.name.clone(),
                            code,
                        });
                    }
                }
                (false, Column::Numeric(_)) => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "column `{}` storage does not match level {:?}",
                        spec.name, spec.level
                    )))
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            row_ids,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Option<(&VariableSpec, &Column)> {
        let i = self.schema.index_of(name)?;
        Some((&self.schema.variables[i], &self.columns[i]))
    }

    /// Fewer than two rows: nothing can be analysed.
    pub fn is_degenerate(&self) -> bool {
        self.n_rows() < 2
    }

    /// New dataset holding the given row positions, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Writes the header and all cells; reading the output back with the
    /// same schema reproduces every cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.variables.iter().map(|v| v.name.as_str()))?;
        for row in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| c.format_cell(row)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn infer_categories(spec: &mut VariableSpec, codes: &[i64]) {
    let distinct: BTreeSet<i64> = codes
        .iter()
        .copied()
        .filter(|&c| !spec.is_missing_code(c))
        .collect();
    spec.categories = distinct.into_iter().collect();
}

/// Reads a headed CSV against `schema`.
///
/// Header names must match the schema (any order). Rows holding a missing
/// code of a `drop_row` variable are skipped. Fails when fewer than two rows
/// remain.
pub fn load_dataset<R: Read>(source: R, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let header = reader.headers()?.clone();

    let mut positions = vec![usize::MAX; schema.len()];
    for (pos, name) in header.iter().enumerate() {
        let idx = schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        positions[idx] = pos;
    }
    if let Some(missing) = positions.iter().position(|&p| p == usize::MAX) {
        return Err(Error::MissingColumn(schema.variables[missing].name.clone()));
    }

    let mut columns: Vec<Column> = schema
        .variables
        .iter()
        .map(|v| match v.level {
            MeasurementLevel::Numeric => Column::Numeric(Vec::new()),
            _ => Column::Categorical(Vec::new()),
        })
        .collect();
    let mut row_ids = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut cells = Vec::with_capacity(schema.len());
        let mut drop = false;
        for (spec, &pos) in schema.variables.iter().zip(&positions) {
            let raw = record.get(pos).unwrap_or("");
            let cell = parse_cell(spec, raw, row)?;
            if spec.missing_policy == MissingPolicy::DropRow && cell.is_missing(spec) {
                drop = true;
            }
            cells.push(cell);
        }
        if drop {
            continue;
        }
        for (col, cell) in columns.iter_mut().zip(cells) {
            match (col, cell) {
                (Column::Categorical(v), Cell::Code(c)) => v.push(c),
                (Column::Numeric(v), Cell::Real(x)) => v.push(x),
                _ => unreachable!("cell kind follows the level"),
            }
        }
        row_ids.push(row);
    }

    if row_ids.len() < 2 {
        return Err(Error::TooFewRows {
            n: row_ids.len(),
            min: 2,
        });
    }
    Dataset::with_row_ids(schema.clone(), columns, row_ids)
}

enum Cell {
    Code(i64),
    Real(f64),
}

impl Cell {
    fn is_missing(&self, spec: &VariableSpec) -> bool {
        match *self {
            Cell::Code(c) => spec.is_missing_code(c),
            Cell::Real(x) => spec.missing_codes.iter().any(|&c| c as f64 == x),
        }
    }
}

fn parse_cell(spec: &VariableSpec, raw: &str, row: usize) -> Result<Cell> {
    let err = |expected| Error::ParseCell {
        row,
        column: spec.name.clone(),
        value: raw.to_string(),
        expected,
    };
    match spec.level {
        MeasurementLevel::Numeric => {
            let x: f64 = raw.parse().map_err(|_| err("a real number"))?;
            if !x.is_finite() {
                return Err(err("a finite real number"));
            }
            Ok(Cell::Real(x))
        }
        _ => {
            let code: i64 = raw.parse().map_err(|_| err("an integer category code"))?;
            if !spec.categories.is_empty()
                && !spec.categories.contains(&code)
                && !spec.is_missing_code(code)
            {
                return Err(Error::UnknownCategory {
                    row,
                    column: spec.name.clone(),
                    code,
                });
            }
            Ok(Cell::Code(code))
        }
    }
}
