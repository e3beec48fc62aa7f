use super::config::ColumnRoles;
use crate::error::{Result, SfError};
use crate::model::{Dataset, ModelSpec};
use crate::numeric::fmt_f64;
use crate::simulation::RawSample;
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

/// Name of the generated intercept column.
pub const INTERCEPT: &str = "const";

/// Name of a generated treatment × input column.
pub fn interaction_name(treatment: &str, input: &str) -> String {
    format!("{treatment}_{input}")
}

fn is_missing(field: &str) -> bool {
    matches!(field.trim(), "" | "NA" | "NaN" | "nan" | "null" | ".")
}

/// Reads the referenced columns of a headed CSV file into a design-ready
/// [`Dataset`]. Row numbers in errors count data rows from 1.
pub fn ingest_csv(path: &Path, roles: &ColumnRoles, interactions: &[String]) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| SfError::Data(format!("cannot open data file {}: {e}", path.display())))?;
    ingest_reader(file, roles, interactions)
}

pub fn ingest_reader<R: Read>(reader: R, roles: &ColumnRoles, interactions: &[String]) -> Result<Dataset> {
    roles.validate(interactions)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| SfError::Data(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let mut wanted: Vec<&str> = roles.referenced(interactions);
    wanted.sort_unstable();
    wanted.dedup();
    for c in &wanted {
        if !position.contains_key(c) {
            return Err(SfError::Data(format!("column `{c}` not found in the CSV header")));
        }
    }
    let mut columns: HashMap<&str, Vec<f64>> = wanted.iter().map(|c| (*c, Vec::new())).collect();
    let mut missing_rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| SfError::Data(format!("row {row}: {e}")))?;
        let mut missing = false;
        let mut values = Vec::with_capacity(wanted.len());
        for c in &wanted {
            let field = record.get(position[c]).unwrap_or("");
            if is_missing(field) {
                missing = true;
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| SfError::Data(format!("row {row}, column `{c}`: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(SfError::Data(format!("row {row}, column `{c}`: non-finite value")));
            }
            values.push((*c, v));
        }
        if missing {
            missing_rows.push(row);
            continue;
        }
        for (c, v) in values {
            columns.get_mut(c).expect("wanted column").push(v);
        }
    }
    if !missing_rows.is_empty() {
        let shown: Vec<String> = missing_rows.iter().take(20).map(|r| r.to_string()).collect();
        return Err(SfError::Data(format!(
            "{} row(s) with missing values: {}{}",
            missing_rows.len(),
            shown.join(", "),
            if missing_rows.len() > 20 { ", …" } else { "" }
        )));
    }
    let n = columns[roles.output.as_str()].len();
    if n == 0 {
        return Err(SfError::Data("the data file has no rows".into()));
    }
    for c in &roles.log {
        let col = columns.get_mut(c.as_str()).expect("wanted column");
        for (i, v) in col.iter_mut().enumerate() {
            if *v <= 0.0 {
                return Err(SfError::Data(format!(
                    "row {}, column `{c}`: cannot take the logarithm of {v}",
                    i + 1
                )));
            }
            *v = v.ln();
        }
    }
    let col = |c: &str| -> &Vec<f64> { &columns[c] };
    let treatment: Vec<bool> = col(&roles.treatment)
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(SfError::Data(format!(
                    "row {}: treatment `{}` must be 0 or 1, found {v}",
                    i + 1,
                    roles.treatment
                )))
            }
        })
        .collect::<Result<_>>()?;
    let d = |i: usize| if treatment[i] { 1.0 } else { 0.0 };

    // Frontier: intercept, inputs, treatment dummy, treatment × inputs.
    let mut frontier_names = vec![INTERCEPT.to_string()];
    let mut frontier_cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for c in &roles.inputs {
        frontier_names.push(c.clone());
        frontier_cols.push(col(c).clone());
    }
    if roles.treatment_dummy {
        frontier_names.push(roles.treatment.clone());
        frontier_cols.push((0..n).map(d).collect());
    }
    for c in interactions {
        frontier_names.push(interaction_name(&roles.treatment, c));
        frontier_cols.push(col(c).iter().enumerate().map(|(i, v)| v * d(i)).collect());
    }
    // Scale function: the declared determinants (no intercept).
    let scale_names = roles.inefficiency_determinants.clone();
    let scale_cols: Vec<&Vec<f64>> = scale_names.iter().map(|c| col(c)).collect();
    // First stage: intercept, inputs, exogenous determinants, instruments.
    let mut first_names = vec![INTERCEPT.to_string()];
    first_names.extend(roles.inputs.iter().cloned());
    first_names.extend(roles.inefficiency_determinants.iter().filter(|c| **c != roles.treatment).cloned());
    first_names.extend(roles.instruments.iter().cloned());
    let first_cols: Vec<Vec<f64>> = first_names
        .iter()
        .map(|c| if c == INTERCEPT { vec![1.0; n] } else { col(c).clone() })
        .collect();

    let matrix = |cols: &[&Vec<f64>]| DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let spec = ModelSpec {
        treatment: roles.treatment.clone(),
        frontier_columns: frontier_names,
        scale_columns: scale_names,
        first_stage_columns: first_names,
    };
    Dataset::new(
        spec,
        col(&roles.output).clone(),
        matrix(&frontier_cols.iter().collect::<Vec<_>>()),
        matrix(&scale_cols),
        treatment,
        matrix(&first_cols.iter().collect::<Vec<_>>()),
    )
}

/// Column roles that reproduce the simulation design from a CSV written by
/// [`write_raw_csv`].
pub fn simulation_roles() -> (ColumnRoles, Vec<String>) {
    let s = |v: &[&str]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    (
        ColumnRoles {
            output: "y".into(),
            inputs: s(&["x1", "x2"]),
            treatment: "z2".into(),
            inefficiency_determinants: s(&["z1", "z2"]),
            instruments: s(&["w1", "w2"]),
            log: Vec::new(),
            treatment_dummy: false,
        },
        s(&["x1", "x2"]),
    )
}

/// Writes a simulated sample with 17 significant digits per value.
pub fn write_raw_csv<W: Write>(raw: &RawSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SfError::Io(std::io::Error::other(e));
    w.write_record(RawSample::COLUMNS).map_err(io)?;
    for i in 0..raw.y.len() {
        let row = raw.row(i);
        w.write_record(row.iter().enumerate().map(|(k, v)| {
            // The treatment column is written as an integer.
            if k == 4 {
                format!("{}", *v as u8)
            } else {
                fmt_f64(*v)
            }
        }))
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
