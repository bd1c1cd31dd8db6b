//! Delimited numeric tables: one sample per line, comma or whitespace
//! separated, with an optional integer label in the last column.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{dense_labels, LabelledDataset};

/// Load a rectangular numeric table. With `has_label_column` the last field
/// of every line is the class label; labels are remapped to dense 0-based
/// indices with the originals recorded.
pub fn load_delimited(path: &Path, has_label_column: bool) -> Result<LabelledDataset> {
    let text = fs::read_to_string(path)?;
    let name = path.display();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut width = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f.parse().map_err(|_| {
                Error::format(format!(
                    "{name}: non-numeric field {f:?} on line {}",
                    lineno + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::format(format!(
                    "{name}: non-finite value {f:?} on line {}",
                    lineno + 1
                )));
            }
            values.push(v);
        }
        let expected = *width.get_or_insert(values.len());
        if values.len() != expected {
            return Err(Error::format(format!(
                "{name}: line {} has {} fields, expected {expected}",
                lineno + 1,
                values.len()
            )));
        }
        if has_label_column {
            let raw = values.pop().ok_or_else(|| {
                Error::format(format!("{name}: line {} has no label field", lineno + 1))
            })?;
            if raw.fract() != 0.0 || raw.abs() > i64::MAX as f64 {
                return Err(Error::format(format!(
                    "{name}: non-integer label {raw} on line {}",
                    lineno + 1
                )));
            }
            raw_labels.push(raw as i64);
        }
        if values.is_empty() {
            return Err(Error::format(format!(
                "{name}: line {} has no feature fields",
                lineno + 1
            )));
        }
        rows.push(values);
    }

    if rows.is_empty() {
        return Err(Error::format(format!("{name}: no samples")));
    }
    let p = rows[0].len();
    let n = rows.len();
    let mut features = DMatrix::zeros(p, n);
    for (j, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            features[(i, j)] = v;
        }
    }

    if has_label_column {
        let (labels, class_count, originals) = dense_labels(&raw_labels);
        LabelledDataset::new(features, labels, class_count, originals)
    } else {
        LabelledDataset::new(features, vec![0; n], 1, vec![0])
    }
}

/// Write a table with one sample per line, comma separated, appending the
/// raw label as the last column when labels are given. Floats use the
/// shortest round-trip representation.
pub fn write_delimited(
    path: &Path,
    features: &DMatrix<f64>,
    raw_labels: Option<&[i64]>,
) -> Result<()> {
    if let Some(labels) = raw_labels {
        if labels.len() != features.ncols() {
            return Err(Error::invalid(format!(
                "{} labels for {} samples",
                labels.len(),
                features.ncols()
            )));
        }
    }
    let mut out = String::new();
    for j in 0..features.ncols() {
        let mut fields: Vec<String> = (0..features.nrows())
            .map(|i| format!("{}", features[(i, j)]))
            .collect();
        if let Some(labels) = raw_labels {
            fields.push(labels[j].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
