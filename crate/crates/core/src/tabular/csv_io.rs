use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{Column, Dataset, Schema};
use crate::error::{Error, Result};

/// Columns with at most this many distinct numeric values load as categorical.
pub const DEFAULT_DISTINCT_THRESHOLD: usize = 10;

#[derive(Clone, Debug)]
pub struct CsvOptions {
    /// When false, columns are named `x1..xd`.
    pub has_header: bool,
    pub distinct_threshold: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: true,
            distinct_threshold: DEFAULT_DISTINCT_THRESHOLD,
        }
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Infers column kinds from string records.
///
/// A column is continuous when every non-empty cell is a finite number and
/// it has more than `threshold` distinct values. Otherwise it is categorical
/// with its distinct values as levels, ordered numerically when they are all
/// numbers and lexicographically otherwise.
pub fn infer_schema(header: &[String], records: &[Vec<String>], threshold: usize) -> Result<Schema> {
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    if let Some((row, rec)) = records.iter().enumerate().find(|(_, r)| r.len() != header.len()) {
        return Err(Error::Arity {
            row,
            expected: header.len(),
            found: rec.len(),
        });
    }
    let columns = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let cells = records.iter().map(|r| r[j].trim()).filter(|s| !s.is_empty());
            let parsed: Option<Vec<f64>> = cells.clone().map(parse_finite).collect();
            if let Some(values) = &parsed {
                let distinct: HashSet<u64> = values.iter().map(|v| (v + 0.0).to_bits()).collect();
                if distinct.len() > threshold {
                    return Column::continuous(name.clone());
                }
            }
            let mut levels: Vec<String> = cells
                .collect::<HashSet<_>>()
                .into_iter()
                .map(str::to_owned)
                .collect();
            if parsed.is_some() {
                levels.sort_by(|a, b| {
                    let (x, y) = (parse_finite(a).unwrap(), parse_finite(b).unwrap());
                    x.total_cmp(&y).then_with(|| a.cmp(b))
                });
            } else {
                levels.sort();
            }
            Column::categorical(name.clone(), levels)
        })
        .collect();
    Schema::new(columns)
}

/// Reads the header (or synthesizes one) and all string records.
pub fn read_records(path: &Path, has_header: bool) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let mut header: Vec<String> = if has_header {
        reader.headers()?.iter().map(|h| h.trim().to_owned()).collect()
    } else {
        Vec::new()
    };
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
    }
    if !has_header {
        let width = records.first().map_or(0, Vec::len);
        header = (1..=width).map(|j| format!("x{j}")).collect();
    }
    Ok((header, records))
}

fn parse_records(schema: &Schema, header: &[String], records: &[Vec<String>]) -> Result<Dataset> {
    let d = schema.len();
    if header.len() != d || !header.iter().zip(schema.names()).all(|(h, s)| h == s) {
        return Err(Error::SchemaMismatch(format!(
            "CSV header {header:?} does not match schema columns {:?}",
            schema.names().collect::<Vec<_>>()
        )));
    }
    let mut cells = Vec::with_capacity(records.len() * d);
    for (row, rec) in records.iter().enumerate() {
        if rec.len() != d {
            return Err(Error::Arity {
                row,
                expected: d,
                found: rec.len(),
            });
        }
        for (col, (raw, column)) in rec.iter().zip(schema.columns()).enumerate() {
            let raw = raw.trim();
            let value = match column.levels() {
                None => parse_finite(raw).ok_or_else(|| Error::Parse {
                    row,
                    col,
                    name: column.name.clone(),
                    value: raw.to_owned(),
                })?,
                Some(levels) => levels.iter().position(|l| l == raw).ok_or_else(|| {
                    Error::UnknownLevel {
                        row,
                        col,
                        name: column.name.clone(),
                        value: raw.to_owned(),
                    }
                })? as f64,
            };
            cells.push(value);
        }
    }
    Dataset::new(schema.clone(), cells)
}

/// Loads a headed CSV, inferring the schema unless one is given.
pub fn load_csv(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<Dataset> {
    load_csv_with(path, schema, &CsvOptions::default())
}

pub fn load_csv_with(
    path: impl AsRef<Path>,
    schema: Option<&Schema>,
    options: &CsvOptions,
) -> Result<Dataset> {
    let (header, records) = read_records(path.as_ref(), options.has_header)?;
    let inferred;
    let schema = match schema {
        Some(s) => s,
        None => {
            inferred = infer_schema(&header, &records, options.distinct_threshold)?;
            &inferred
        }
    };
    if !options.has_header && schema.len() == header.len() {
        // Headerless files take their column names from the schema.
        let names: Vec<String> = schema.names().map(str::to_owned).collect();
        return parse_records(schema, &names, &records);
    }
    parse_records(schema, &header, &records)
}

/// Loads several files with one schema inferred from all of their records,
/// so levels seen in only one file are known to every table.
pub fn load_csv_files(paths: &[&Path], options: &CsvOptions) -> Result<Vec<Dataset>> {
    let mut loaded = Vec::with_capacity(paths.len());
    for path in paths {
        loaded.push(read_records(path, options.has_header)?);
    }
    let Some((header, _)) = loaded.first() else {
        return Ok(Vec::new());
    };
    let header = header.clone();
    let all: Vec<Vec<String>> = loaded.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let schema = infer_schema(&header, &all, options.distinct_threshold)?;
    loaded
        .iter()
        .map(|(h, records)| {
            let h = if options.has_header { h } else { &header };
            parse_records(&schema, h, records)
        })
        .collect()
}

/// Writes a headed CSV. Continuous cells use the shortest representation
/// that parses back to the same `f64`.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer.write_record(ds.schema().names())?;
    for i in 0..ds.n_rows() {
        writer.write_record(ds.display_row(i))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn save_schema(schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, schema)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
