use std::fmt;
use std::io::Write;

use statrs::function::beta::beta_reg;

use super::{Goal, Metric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ABetter,
    BBetter,
    NoDifference,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ABetter => "a_better",
            Verdict::BBetter => "b_better",
            Verdict::NoDifference => "no_difference",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub verdict: Verdict,
}

/// Two-sided paired t-test on `a − b` with `len − 1` degrees of freedom.
///
/// A significant positive mean difference favours `a` when the metric is
/// maximized and `b` when it is minimized. Differences that are all zero
/// give `no_difference`; a nonzero constant difference has `p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64, goal: Goal) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "paired samples have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Domain("paired t-test needs at least two samples".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("significance level {alpha} must lie in (0, 1)")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("paired samples must be finite".into()));
    }
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTestResult {
            t: 0.0,
            p: 1.0,
            verdict: Verdict::NoDifference,
        });
    }
    let (mean, sd) = super::report::mean_std(&diffs);
    let n = diffs.len() as f64;
    let (t, p) = if sd == 0.0 {
        (mean.signum() * f64::INFINITY, 0.0)
    } else {
        let t = mean / (sd / n.sqrt());
        let nu = n - 1.0;
        (t, beta_reg(nu / 2.0, 0.5, nu / (nu + t * t)))
    };
    let verdict = if p < alpha {
        match (mean > 0.0, goal) {
            (true, Goal::Maximize) | (false, Goal::Minimize) => Verdict::ABetter,
            _ => Verdict::BBetter,
        }
    } else {
        Verdict::NoDifference
    };
    Ok(TTestResult { t, p, verdict })
}

/// One line of a t-test matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestRow {
    pub method_a: String,
    pub method_b: String,
    pub metric: Metric,
    pub result: TTestResult,
}

/// CSV `method_a,method_b,metric,t,p,verdict`.
pub fn write_t_tests_csv<W: Write>(rows: &[TTestRow], mut out: W) -> Result<()> {
    writeln!(out, "method_a,method_b,metric,t,p,verdict")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{}",
            r.method_a, r.method_b, r.metric, r.result.t, r.result.p, r.result.verdict
        )?;
    }
    Ok(())
}
