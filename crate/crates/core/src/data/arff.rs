//! Numeric ARFF subset as distributed by the common multi-label dataset
//! repositories: `numeric`/`real`/`integer` attributes, `{0,1}` nominal
//! attributes, dense or sparse data rows. The last `label_count` attributes
//! are labels.

use std::io::{Read, Write};

use super::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Numeric,
    Binary,
}

pub fn read_arff_numeric<R: Read>(mut input: R, label_count: usize) -> Result<MultiLabelDataset> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::parse(0, format!("input is not valid UTF-8 text: {e}")))?;
    parse_arff_numeric(&text, label_count)
}

pub fn parse_arff_numeric(text: &str, label_count: usize) -> Result<MultiLabelDataset> {
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut in_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                continue;
            }
            if lower.starts_with("@data") {
                in_data = true;
                if label_count == 0 || label_count >= names.len() {
                    return Err(Error::config(format!(
                        "label_count {label_count} must be in 1..{} for {} attributes",
                        names.len(),
                        names.len()
                    )));
                }
                continue;
            }
            if lower.starts_with("@attribute") {
                let (name, kind) = parse_attribute(line["@attribute".len()..].trim(), lineno)?;
                names.push(name);
                kinds.push(kind);
                continue;
            }
            return Err(Error::parse(lineno, format!("unexpected header line {line:?}")));
        }
        let values = if line.starts_with('{') {
            parse_sparse_row(line, lineno, kinds.len())?
        } else {
            parse_dense_row(line, lineno, kinds.len())?
        };
        for (a, &v) in values.iter().enumerate() {
            if kinds[a] == Kind::Binary && v != 0.0 && v != 1.0 {
                return Err(Error::Unsupported(format!(
                    "line {lineno}: value {v} outside the {{0,1}} domain of attribute {}",
                    names[a]
                )));
            }
        }
        let d = kinds.len() - label_count;
        for (a, &v) in values.iter().enumerate().skip(d) {
            if v != 0.0 && v != 1.0 {
                return Err(Error::Unsupported(format!(
                    "line {lineno}: label attribute {} has value {v}, expected 0 or 1",
                    names[a]
                )));
            }
        }
        rows.push(values);
    }

    if !in_data {
        return Err(Error::parse(0, "missing @data section"));
    }
    if rows.is_empty() {
        return Err(Error::parse(0, "no data rows"));
    }
    let d = kinds.len() - label_count;
    let n = rows.len();
    let features = Matrix::from_fn(d, n, |i, j| rows[j][i]);
    let labels = Matrix::from_fn(label_count, n, |i, j| {
        if rows[j][d + i] == 1.0 {
            1.0
        } else {
            -1.0
        }
    });
    let feature_names = names[..d].to_vec();
    let label_names = names[d..].to_vec();
    MultiLabelDataset::new(features, labels)?.with_names(Some(feature_names), Some(label_names))
}

fn parse_attribute(rest: &str, lineno: usize) -> Result<(String, Kind)> {
    let (name, tail) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let close = rest[1..]
            .find(q)
            .ok_or_else(|| Error::parse(lineno, "unterminated quoted attribute name"))?;
        (rest[1..1 + close].to_string(), rest[close + 2..].trim())
    } else {
        let split = rest
            .find(char::is_whitespace)
            .ok_or_else(|| Error::parse(lineno, "attribute without a type"))?;
        (rest[..split].to_string(), rest[split..].trim())
    };
    let lower = tail.to_ascii_lowercase();
    match lower.as_str() {
        "numeric" | "real" | "integer" => Ok((name, Kind::Numeric)),
        _ if lower.starts_with('{') && lower.ends_with('}') => {
            let mut domain: Vec<&str> = lower[1..lower.len() - 1]
                .split(',')
                .map(|s| s.trim().trim_matches(|c| c == '\'' || c == '"'))
                .collect();
            domain.sort_unstable();
            if domain == ["0", "1"] {
                Ok((name, Kind::Binary))
            } else {
                Err(Error::Unsupported(format!(
                    "line {lineno}: nominal domain {tail} of attribute {name} (only {{0,1}})"
                )))
            }
        }
        _ => Err(Error::Unsupported(format!(
            "line {lineno}: attribute type {tail:?} of {name}"
        ))),
    }
}

fn parse_value(tok: &str, lineno: usize) -> Result<f64> {
    let tok = tok.trim().trim_matches(|c| c == '\'' || c == '"');
    if tok == "?" {
        return Err(Error::Unsupported(format!("line {lineno}: missing value '?'")));
    }
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(lineno, format!("malformed value {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(lineno, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

fn parse_dense_row(line: &str, lineno: usize, width: usize) -> Result<Vec<f64>> {
    let values = line
        .split(',')
        .map(|t| parse_value(t, lineno))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != width {
        return Err(Error::parse(
            lineno,
            format!("row has {} values, expected {width}", values.len()),
        ));
    }
    Ok(values)
}

fn parse_sparse_row(line: &str, lineno: usize, width: usize) -> Result<Vec<f64>> {
    let inner = line
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| Error::parse(lineno, "unterminated sparse row"))?;
    let mut values = vec![0.0; width];
    let mut seen = vec![false; width];
    for entry in inner.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let mut parts = entry.split_whitespace();
        let (idx, val) = match (parts.next(), parts.next(), parts.next()) {
            (Some(i), Some(v), None) => (i, v),
            _ => return Err(Error::parse(lineno, format!("malformed sparse entry {entry:?}"))),
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(lineno, format!("malformed sparse index {idx:?}")))?;
        if idx >= width {
            return Err(Error::Range(format!(
                "line {lineno}: sparse index {idx} >= attribute count {width}"
            )));
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::parse(lineno, format!("duplicate sparse index {idx}")));
        }
        values[idx] = parse_value(val, lineno)?;
    }
    Ok(values)
}

/// Writes sparse ARFF rows; label attributes are emitted as `{0,1}`.
pub fn write_arff<W: Write>(ds: &MultiLabelDataset, relation: &str, mut out: W) -> Result<()> {
    writeln!(out, "@relation {}", quote(relation))?;
    let d = ds.n_features();
    for i in 0..d {
        let name = ds
            .feature_names()
            .map(|n| n[i].clone())
            .unwrap_or_else(|| format!("f{i}"));
        writeln!(out, "@attribute {} numeric", quote(&name))?;
    }
    for i in 0..ds.n_labels() {
        let name = ds
            .label_names()
            .map(|n| n[i].clone())
            .unwrap_or_else(|| format!("label{i}"));
        writeln!(out, "@attribute {} {{0,1}}", quote(&name))?;
    }
    writeln!(out, "@data")?;
    let (x, y) = (ds.features(), ds.labels());
    for j in 0..ds.n_instances() {
        let mut entries = Vec::new();
        for i in 0..d {
            if x[(i, j)] != 0.0 {
                entries.push(format!("{i} {}", x[(i, j)]));
            }
        }
        for i in 0..ds.n_labels() {
            if y[(i, j)] == 1.0 {
                entries.push(format!("{} 1", d + i));
            }
        }
        writeln!(out, "{{{}}}", entries.join(","))?;
    }
    Ok(())
}

fn quote(name: &str) -> String {
    if name.is_empty() || name.contains(|c: char| c.is_whitespace() || "{},%'\"".contains(c)) {
        format!("'{}'", name.replace('\'', ""))
    } else {
        name.to_string()
    }
}
