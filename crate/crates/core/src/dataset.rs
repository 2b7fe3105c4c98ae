//! Impression datasets and their CSV form.
//!
//! The CSV has a header row. Treatment and outcome columns hold `0`/`1`,
//! numeric covariates hold decimal numbers, and categorical covariates hold
//! free text. Rows with a missing or unparseable required field, or with
//! `final = 1` but `intermediate = 0`, are dropped and counted by reason.
//! Columns not referenced by the model are kept as text so they can serve as
//! group labels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{Design, ModelSpec, RawColumn, RawTable};
use crate::error::{Error, Result};
use crate::model::{ImpressionRecord, ParamLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: ModelSpec,
    pub design: Design,
    /// Raw covariate columns, before categorical expansion.
    pub table: RawTable,
    pub records: Vec<ImpressionRecord>,
}

impl Dataset {
    pub fn layout(&self) -> &ParamLayout {
        &self.design.layout
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Per-record text labels taken from a raw column.
    pub fn labels(&self, column: &str) -> Result<Vec<String>> {
        let col = self
            .table
            .get(column)
            .ok_or_else(|| Error::Schema(format!("no column `{column}` to group by")))?;
        Ok((0..col.len()).map(|i| col.render(i)).collect())
    }

    /// Writes the dataset in the format [`parse_dataset`] reads.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = vec![
            self.spec.treatment.clone(),
            self.spec.intermediate.clone(),
            self.spec.final_outcome.clone(),
        ];
        header.extend(self.table.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![flag(r.d), flag(r.y_tau), flag(r.y)];
            row.extend(self.table.columns.iter().map(|(_, c)| c.render(i)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

/// Row accounting for one ingestion. `rows_in = rows_kept + Σ dropped`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub rows_in: usize,
    pub rows_kept: usize,
    pub dropped: BTreeMap<String, usize>,
}

impl IngestionReport {
    pub fn rows_dropped(&self) -> usize {
        self.dropped.values().sum()
    }
}

const MISSING: &str = "missing_field";
const UNPARSEABLE: &str = "unparseable_field";
const ORDER: &str = "final_without_intermediate";

enum Cell<T> {
    Ok(T),
    Drop(&'static str),
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "nan" | "null")
}

fn parse_flag(s: &str, column: &str) -> Result<Cell<bool>> {
    if is_missing(s) {
        return Ok(Cell::Drop(MISSING));
    }
    match s.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(Cell::Ok(false)),
        Ok(v) if v == 1.0 => Ok(Cell::Ok(true)),
        Ok(v) => Err(Error::Schema(format!("column `{column}` is not binary (found {v})"))),
        Err(_) => Ok(Cell::Drop(UNPARSEABLE)),
    }
}

fn parse_number(s: &str) -> Cell<f64> {
    if is_missing(s) {
        return Cell::Drop(MISSING);
    }
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Ok(v),
        _ => Cell::Drop(UNPARSEABLE),
    }
}

/// Reads a dataset from CSV, expanding covariates according to `spec`.
pub fn parse_dataset(path: &Path, spec: &ModelSpec) -> Result<(Dataset, IngestionReport)> {
    spec.validate()?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(file, spec)
}

/// [`parse_dataset`] over any reader.
pub fn parse_reader<R: std::io::Read>(reader: R, spec: &ModelSpec) -> Result<(Dataset, IngestionReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let outcome_cols = [
        (find(&spec.treatment)?, spec.treatment.as_str()),
        (find(&spec.intermediate)?, spec.intermediate.as_str()),
        (find(&spec.final_outcome)?, spec.final_outcome.as_str()),
    ];
    let required = spec.covariate_columns();
    for c in &required {
        find(c)?;
    }
    let outcome_idx: Vec<usize> = outcome_cols.iter().map(|(i, _)| *i).collect();
    // Every non-outcome column is kept, in file order.
    let kept_cols: Vec<(usize, String, bool)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| !outcome_idx.contains(i))
        .map(|(i, h)| {
            let numeric = required.contains(h) && !spec.categorical.contains_key(h);
            (i, h.clone(), numeric)
        })
        .collect();

    let mut report = IngestionReport {
        rows_in: 0,
        rows_kept: 0,
        dropped: BTreeMap::new(),
    };
    let mut flags: [Vec<bool>; 3] = Default::default();
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); kept_cols.len()];
    let mut text: Vec<Vec<String>> = vec![Vec::new(); kept_cols.len()];

    'rows: for row in rdr.records() {
        let row = row?;
        report.rows_in += 1;
        let field = |i: usize| row.get(i).unwrap_or("");
        let mut drop = |reason: &'static str| {
            *report.dropped.entry(reason.to_string()).or_insert(0) += 1;
        };
        let mut f = [false; 3];
        for (k, (i, name)) in outcome_cols.iter().enumerate() {
            match parse_flag(field(*i), name)? {
                Cell::Ok(v) => f[k] = v,
                Cell::Drop(reason) => {
                    drop(reason);
                    continue 'rows;
                }
            }
        }
        let mut nums = Vec::with_capacity(kept_cols.len());
        for (i, name, is_numeric) in &kept_cols {
            let raw = field(*i);
            if *is_numeric {
                match parse_number(raw) {
                    Cell::Ok(v) => nums.push(v),
                    Cell::Drop(reason) => {
                        drop(reason);
                        continue 'rows;
                    }
                }
            } else {
                if required.contains(name) && is_missing(raw) {
                    drop(MISSING);
                    continue 'rows;
                }
                nums.push(f64::NAN);
            }
        }
        if f[2] && !f[1] {
            drop(ORDER);
            continue;
        }
        for k in 0..3 {
            flags[k].push(f[k]);
        }
        for (j, (i, _, is_numeric)) in kept_cols.iter().enumerate() {
            if *is_numeric {
                numeric[j].push(nums[j]);
            } else {
                text[j].push(field(*i).trim().to_string());
            }
        }
        report.rows_kept += 1;
    }
    if report.rows_kept == 0 {
        return Err(Error::Empty("empty result: no usable rows in dataset".into()));
    }
    let table = RawTable {
        columns: kept_cols
            .iter()
            .zip(numeric.into_iter().zip(text))
            .map(|((_, name, is_numeric), (num, txt))| {
                let col = if *is_numeric {
                    RawColumn::Numeric(num)
                } else {
                    RawColumn::Categorical(txt)
                };
                (name.clone(), col)
            })
            .collect(),
    };
    let design = Design::new(spec, &table.levels())?;
    let [d, y_tau, y] = flags;
    let records = design.records(&d, &y_tau, &y, &table)?;
    design.check_rank(&records)?;
    Ok((
        Dataset {
            spec: spec.clone(),
            design,
            table,
            records,
        },
        report,
    ))
}
