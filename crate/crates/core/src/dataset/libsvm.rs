//! LIBSVM text format: `label idx:val idx:val ...` with 1-based indices on
//! disk and 0-based indices in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DatasetBuilder, SparseDataset};
use crate::error::{FgmError, Result};

/// Reads a LIBSVM file.
///
/// The feature dimension is the largest index seen unless `dim` is given, in
/// which case it must cover every index in the file.
pub fn load_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<SparseDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FgmError::io(path, e))?;
    parse_libsvm(BufReader::new(file), dim).map_err(|e| match e {
        FgmError::Io { source, .. } => FgmError::io(path, source),
        other => other,
    })
}

/// Parses LIBSVM text from any reader. See [`load_libsvm`].
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<SparseDataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels: Vec<(usize, f64, String)> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| FgmError::io("<reader>", e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| FgmError::Label {
            line: lineno,
            label: label_tok.to_string(),
        })?;

        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| FgmError::Parse {
                line: lineno,
                message: format!("expected index:value, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| FgmError::Parse {
                line: lineno,
                message: format!("bad feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(FgmError::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| FgmError::Parse {
                line: lineno,
                message: format!("bad feature value {val:?}"),
            })?;
            if !val.is_finite() {
                return Err(FgmError::Parse {
                    line: lineno,
                    message: format!("non-finite feature value {val}"),
                });
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        row.sort_by_key(|&(j, _)| j);
        if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(FgmError::Parse {
                line: lineno,
                message: format!("feature index {} repeated", pair[0].0 + 1),
            });
        }
        rows.push(row);
        raw_labels.push((lineno, label, label_tok.to_string()));
    }

    let labels = normalize_labels(&raw_labels)?;
    let n_features = match dim {
        Some(d) if d < max_index => {
            return Err(FgmError::argument(format!(
                "dimension {d} is smaller than the largest feature index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };

    let nnz = rows.iter().map(Vec::len).sum();
    let mut builder = DatasetBuilder::with_capacity(n_features, rows.len(), nnz);
    for (row, label) in rows.iter().zip(labels) {
        builder.push_row(row, label)?;
    }
    Ok(builder.finish())
}

/// Accepts ±1 labels as is and remaps an all-{0,1} labelling to ±1.
fn normalize_labels(raw: &[(usize, f64, String)]) -> Result<Vec<f64>> {
    let signed = |v: f64| v == 1.0 || v == -1.0;
    let binary = |v: f64| v == 1.0 || v == 0.0;
    if raw.iter().all(|&(_, v, _)| signed(v)) {
        return Ok(raw.iter().map(|&(_, v, _)| v).collect());
    }
    if raw.iter().all(|&(_, v, _)| binary(v)) {
        log::warn!("labels use the 0/1 convention; remapping 0 to -1");
        return Ok(raw
            .iter()
            .map(|&(_, v, _)| if v == 0.0 { -1.0 } else { 1.0 })
            .collect());
    }
    let (line, _, tok) = raw
        .iter()
        .find(|&&(_, v, _)| !signed(v))
        .expect("some label is not ±1");
    Err(FgmError::Label {
        line: *line,
        label: tok.clone(),
    })
}

/// Writes a dataset in LIBSVM format with shortest round-trip float text.
pub fn write_libsvm(data: &SparseDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FgmError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_rows(data, &mut out).map_err(|e| FgmError::io(path, e))
}

fn write_rows<W: Write>(data: &SparseDataset, out: &mut W) -> std::io::Result<()> {
    for (i, (idx, val)) in data.rows().enumerate() {
        let label = if data.labels()[i] > 0.0 { "+1" } else { "-1" };
        out.write_all(label.as_bytes())?;
        for (&j, &v) in idx.iter().zip(val) {
            write!(out, " {}:{:?}", j + 1, v)?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}
