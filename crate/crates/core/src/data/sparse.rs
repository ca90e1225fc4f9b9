//! Sparse multi-label text format.
//!
//! ```text
//! #labels: 3 #features: 4
//! 0,2 1:0.5 3:1.0
//!  1:2.0
//! ```
//!
//! Each instance line starts with a comma-separated list of label ids
//! (empty when the line starts with whitespace) followed by `idx:value`
//! feature pairs. Indices are zero-based. Without a header the label and
//! feature counts are inferred from the largest ids seen.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use super::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::Matrix;

struct Row {
    labels: Vec<usize>,
    features: Vec<(usize, f64)>,
}

/// Parses the sparse format from any reader.
pub fn read_sparse_multilabel<R: Read>(mut input: R) -> Result<MultiLabelDataset> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::parse(0, format!("input is not valid UTF-8 text: {e}")))?;
    parse_sparse_multilabel(&text)
}

pub fn parse_sparse_multilabel(text: &str) -> Result<MultiLabelDataset> {
    let mut declared_labels = None;
    let mut declared_features = None;
    let mut rows = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some((l, d)) = parse_header(comment, lineno)? {
                declared_labels = l.or(declared_labels);
                declared_features = d.or(declared_features);
            }
            continue;
        }
        rows.push(parse_row(line, lineno, declared_labels, declared_features)?);
    }

    if rows.is_empty() {
        return Err(Error::parse(0, "no instances"));
    }
    let l = declared_labels.unwrap_or_else(|| {
        1 + rows
            .iter()
            .flat_map(|r| r.labels.iter().copied())
            .max()
            .unwrap_or(0)
    });
    let d = declared_features.unwrap_or_else(|| {
        1 + rows
            .iter()
            .flat_map(|r| r.features.iter().map(|f| f.0))
            .max()
            .unwrap_or(0)
    });

    let n = rows.len();
    let mut features = Matrix::zeros(d, n);
    let mut labels = Matrix::from_element(l, n, -1.0);
    for (j, row) in rows.iter().enumerate() {
        for &i in &row.labels {
            labels[(i, j)] = 1.0;
        }
        for &(f, v) in &row.features {
            features[(f, j)] = v;
        }
    }
    MultiLabelDataset::new(features, labels)
}

/// Recognizes `labels: L` and `features: D` fields inside a comment.
fn parse_header(comment: &str, lineno: usize) -> Result<Option<(Option<usize>, Option<usize>)>> {
    let tokens: Vec<&str> = comment
        .split(|c: char| c.is_whitespace() || c == '#')
        .filter(|t| !t.is_empty())
        .collect();
    let mut labels = None;
    let mut features = None;
    let mut found = false;
    let mut it = tokens.iter().peekable();
    while let Some(tok) = it.next() {
        let (key, inline) = match tok.split_once(':') {
            Some((k, v)) => (k, v),
            None => continue,
        };
        let slot = match key.to_ascii_lowercase().as_str() {
            "labels" => &mut labels,
            "features" => &mut features,
            _ => continue,
        };
        let value = if inline.is_empty() {
            it.next().copied().unwrap_or("")
        } else {
            inline
        };
        let parsed: usize = value
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad header count {value:?}")))?;
        if parsed == 0 {
            return Err(Error::parse(lineno, format!("header declares zero {key}")));
        }
        *slot = Some(parsed);
        found = true;
    }
    Ok(found.then_some((labels, features)))
}

fn parse_row(
    line: &str,
    lineno: usize,
    declared_labels: Option<usize>,
    declared_features: Option<usize>,
) -> Result<Row> {
    let mut tokens = line.split_whitespace().peekable();
    let mut labels = Vec::new();
    let starts_with_labels = !line.starts_with(char::is_whitespace)
        && tokens.peek().is_some_and(|t| !t.contains(':'));
    if starts_with_labels {
        let field = tokens.next().unwrap_or("");
        let mut seen = BTreeSet::new();
        for id in field.split(',') {
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(lineno, format!("malformed label id {id:?}")))?;
            if let Some(l) = declared_labels {
                if id >= l {
                    return Err(Error::Range(format!(
                        "line {lineno}: label id {id} >= declared label count {l}"
                    )));
                }
            }
            if seen.insert(id) {
                labels.push(id);
            }
        }
    }

    let mut features = Vec::new();
    let mut seen = BTreeSet::new();
    for tok in tokens {
        let (idx, value) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("malformed feature token {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(lineno, format!("malformed feature index in {tok:?}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::parse(lineno, format!("malformed feature value in {tok:?}")))?;
        if !value.is_finite() {
            return Err(Error::parse(lineno, format!("non-finite feature value in {tok:?}")));
        }
        if let Some(d) = declared_features {
            if idx >= d {
                return Err(Error::Range(format!(
                    "line {lineno}: feature index {idx} >= declared feature count {d}"
                )));
            }
        }
        if !seen.insert(idx) {
            return Err(Error::parse(lineno, format!("duplicate feature index {idx}")));
        }
        features.push((idx, value));
    }
    Ok(Row { labels, features })
}

/// Writes the dataset with an explicit header so that parsing reproduces the
/// exact dimensions. The mask is not part of this format.
pub fn write_sparse_multilabel<W: Write>(ds: &MultiLabelDataset, mut out: W) -> Result<()> {
    writeln!(out, "#labels: {} #features: {}", ds.n_labels(), ds.n_features())?;
    let (x, y) = (ds.features(), ds.labels());
    for j in 0..ds.n_instances() {
        let ids: Vec<String> = (0..ds.n_labels())
            .filter(|&i| y[(i, j)] == 1.0)
            .map(|i| i.to_string())
            .collect();
        let mut line = ids.join(",");
        for i in 0..ds.n_features() {
            let v = x[(i, j)];
            if v != 0.0 {
                line.push_str(&format!(" {i}:{v}"));
            }
        }
        if ids.is_empty() && !line.starts_with(' ') {
            line.insert(0, ' ');
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
