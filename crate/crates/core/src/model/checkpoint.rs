//! Plain-text model checkpoints.
//!
//! ```text
//! spmld-checkpoint 1
//! dims <d> <n> <l> <k> <m> <g>
//! hyper <alpha> <beta1> <beta2> <tau>
//! block U <rows> <cols>
//! <row-major values, one matrix row per line>
//! block V ...
//! block W ...
//! block Z0 ...            (one per group)
//! normalizer <d>          (optional)
//! <means>
//! <standard deviations>
//! end
//! ```
//!
//! Floats are written in shortest round-trip exponent form, so reading a
//! checkpoint reproduces the stored values bit for bit.

use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{HyperParams, ModelState};
use crate::data::NormalizerStats;
use crate::error::{Error, Result};
use crate::Matrix;

const MAGIC: &str = "spmld-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: HyperParams,
    pub state: ModelState,
    /// Feature standardization fitted on the training data, if any.
    pub normalizer: Option<NormalizerStats>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let s = &self.state;
        let p = &self.params;
        let mut text = String::new();
        let _ = writeln!(text, "{MAGIC} {VERSION}");
        let _ = writeln!(
            text,
            "dims {} {} {} {} {} {}",
            s.w.nrows(),
            s.v.ncols(),
            s.u.nrows(),
            s.u.ncols(),
            p.m,
            s.z.len()
        );
        let _ = writeln!(
            text,
            "hyper {:e} {:e} {:e} {:e}",
            p.alpha, p.beta1, p.beta2, p.tau
        );
        write_block(&mut text, "U", &s.u);
        write_block(&mut text, "V", &s.v);
        write_block(&mut text, "W", &s.w);
        for (b, z) in s.z.iter().enumerate() {
            write_block(&mut text, &format!("Z{b}"), z);
        }
        if let Some(norm) = &self.normalizer {
            let _ = writeln!(text, "normalizer {}", norm.dim());
            let _ = writeln!(text, "{}", join(&norm.mean));
            let _ = writeln!(text, "{}", join(&norm.std));
        }
        text.push_str("end\n");
        text
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| Error::parse(0, format!("checkpoint is not UTF-8 text: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);

        let header = lines.fields()?;
        if header.len() != 2 || header[0] != MAGIC {
            return Err(lines.error("not a checkpoint file"));
        }
        if header[1] != VERSION.to_string() {
            return Err(Error::Unsupported(format!(
                "checkpoint version {} (expected {VERSION})",
                header[1]
            )));
        }

        let dims = lines.keyed("dims", 6)?;
        let dims: Vec<usize> = dims
            .iter()
            .map(|t| t.parse().map_err(|_| lines.error(format!("bad dimension {t:?}"))))
            .collect::<Result<_>>()?;
        let (d, n, l, k, m, g) = (dims[0], dims[1], dims[2], dims[3], dims[4], dims[5]);

        let hyper = lines.keyed("hyper", 4)?;
        let hyper: Vec<f64> = hyper
            .iter()
            .map(|t| parse_f64(t, &lines))
            .collect::<Result<_>>()?;
        let params = HyperParams {
            alpha: hyper[0],
            beta1: hyper[1],
            beta2: hyper[2],
            tau: hyper[3],
            k,
            m,
            g,
        };

        let u = read_block(&mut lines, "U", l, k)?;
        let v = read_block(&mut lines, "V", k, n)?;
        let w = read_block(&mut lines, "W", d, k)?;
        let z = (0..g)
            .map(|b| read_block(&mut lines, &format!("Z{b}"), l, m))
            .collect::<Result<Vec<_>>>()?;

        let mut normalizer = None;
        let next = lines.fields()?;
        let tail = match next.first().copied() {
            Some("normalizer") => {
                let dim: usize = next
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| lines.error("bad normalizer header"))?;
                if dim != d {
                    return Err(Error::shape(format!(
                        "normalizer dimension {dim} differs from d = {d}"
                    )));
                }
                let mean = read_values(&mut lines, dim)?;
                let std = read_values(&mut lines, dim)?;
                normalizer = Some(NormalizerStats { mean, std });
                lines.fields()?
            }
            _ => next,
        };
        if tail != ["end"] {
            return Err(lines.error("expected 'end'"));
        }

        Ok(Self {
            params,
            state: ModelState { u, v, w, z },
            normalizer,
        })
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_block(text: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(text, "block {name} {} {}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let values: Vec<f64> = row.iter().copied().collect();
        let _ = writeln!(text, "{}", join(&values));
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    current: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            current: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.current, msg)
    }

    fn fields(&mut self) -> Result<Vec<&'a str>> {
        match self.inner.next() {
            Some((i, line)) => {
                self.current = i + 1;
                Ok(line.split_whitespace().collect())
            }
            None => Err(Error::parse(self.current + 1, "unexpected end of checkpoint")),
        }
    }

    fn keyed(&mut self, key: &str, count: usize) -> Result<Vec<&'a str>> {
        let fields = self.fields()?;
        if fields.first() != Some(&key) || fields.len() != count + 1 {
            return Err(self.error(format!("expected '{key}' with {count} values")));
        }
        Ok(fields[1..].to_vec())
    }
}

fn parse_f64(tok: &str, lines: &Lines<'_>) -> Result<f64> {
    tok.parse()
        .map_err(|_| lines.error(format!("bad number {tok:?}")))
}

fn read_values(lines: &mut Lines<'_>, count: usize) -> Result<Vec<f64>> {
    let fields = lines.fields()?;
    if fields.len() != count {
        return Err(lines.error(format!("expected {count} values, found {}", fields.len())));
    }
    fields.iter().map(|t| parse_f64(t, lines)).collect()
}

fn read_block(lines: &mut Lines<'_>, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
    let header = lines.fields()?;
    let ok = header.len() == 4
        && header[0] == "block"
        && header[1] == name
        && header[2].parse::<usize>().ok() == Some(rows)
        && header[3].parse::<usize>().ok() == Some(cols);
    if !ok {
        return Err(lines.error(format!("expected 'block {name} {rows} {cols}'")));
    }
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        let values = read_values(lines, cols)?;
        for (j, v) in values.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}
