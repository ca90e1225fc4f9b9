use std::io::{BufRead, Write};

use super::Metric;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEntry {
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

/// Metric values with optional per-seed samples plus free-form `key,value`
/// notes (label count, skipped units).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub entries: Vec<MetricEntry>,
    pub notes: Vec<(String, String)>,
}

impl MetricsReport {
    pub(crate) fn single(values: &[(Metric, f64)], notes: Vec<(String, String)>) -> Self {
        Self {
            entries: values
                .iter()
                .map(|&(metric, v)| MetricEntry {
                    metric,
                    mean: v,
                    std: 0.0,
                    per_seed: vec![v],
                })
                .collect(),
            notes,
        }
    }

    pub fn get(&self, metric: Metric) -> Option<&MetricEntry> {
        self.entries.iter().find(|e| e.metric == metric)
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.get(metric).map(|e| e.mean)
    }

    pub fn note(&self, key: &str) -> Option<&str> {
        self.notes
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn metrics(&self) -> Vec<Metric> {
        self.entries.iter().map(|e| e.metric).collect()
    }

    /// `# key,value` note lines, then `metric,mean,std,seed_0,…`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.notes {
            writeln!(out, "# {k},{v}")?;
        }
        let seeds = self.entries.iter().map(|e| e.per_seed.len()).max().unwrap_or(0);
        let mut header = String::from("metric,mean,std");
        for s in 0..seeds {
            header.push_str(&format!(",seed_{s}"));
        }
        writeln!(out, "{header}")?;
        for e in &self.entries {
            let mut line = format!("{},{:e},{:e}", e.metric, e.mean, e.std);
            for v in &e.per_seed {
                line.push_str(&format!(",{v:e}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut report = Self::default();
        let mut seen_header = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(note) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = note.trim().split_once(',') {
                    report.notes.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if !seen_header {
                if fields.len() < 3 || fields[..3] != ["metric", "mean", "std"] {
                    return Err(Error::parse(lineno, "expected header 'metric,mean,std,...'"));
                }
                seen_header = true;
                continue;
            }
            if fields.len() < 3 {
                return Err(Error::parse(lineno, "expected at least metric,mean,std"));
            }
            let metric: Metric = fields[0]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("unknown metric {:?}", fields[0])))?;
            let num = |t: &str| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad number {t:?}")))
            };
            report.entries.push(MetricEntry {
                metric,
                mean: num(fields[1])?,
                std: num(fields[2])?,
                per_seed: fields[3..].iter().map(|t| num(t)).collect::<Result<_>>()?,
            });
        }
        if !seen_header {
            return Err(Error::parse(0, "report has no header"));
        }
        Ok(report)
    }
}

/// Pools per-seed reports: per-metric sample mean and sample standard
/// deviation (zero for a single report). Samples keep the input order; the
/// statistics do not depend on it.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::config("cannot aggregate zero reports"))?;
    let keys = first.metrics();
    for r in reports {
        if r.metrics() != keys {
            return Err(Error::shape("reports have different metric keys"));
        }
    }
    let entries = keys
        .iter()
        .enumerate()
        .map(|(i, &metric)| {
            let per_seed: Vec<f64> = reports
                .iter()
                .flat_map(|r| r.entries[i].per_seed.iter().copied())
                .collect();
            let (mean, std) = mean_std(&per_seed);
            MetricEntry {
                metric,
                mean,
                std,
                per_seed,
            }
        })
        .collect();

    let mut notes: Vec<(String, String)> = Vec::new();
    for (k, _) in &first.notes {
        let values: Vec<&str> = reports.iter().filter_map(|r| r.note(k)).collect();
        let joined = if values.iter().all(|v| *v == values[0]) {
            values[0].to_string()
        } else {
            values.join(";")
        };
        notes.push((k.clone(), joined));
    }
    Ok(MetricsReport { entries, notes })
}

/// Sample mean and `n − 1` standard deviation, summed in sorted order.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() < 2 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / (n - 1.0)).sqrt())
}
