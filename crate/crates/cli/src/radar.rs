//! Radar chart of several methods' metric reports, written as plain SVG.

use std::fmt::Write as _;

use spmld::metrics::{Metric, MetricsReport};

use crate::error::CliError;

/// Metrics drawn as axes, all oriented so that larger is better.
pub const AXES: [Metric; 6] = [
    Metric::AvgAuc,
    Metric::InstanceAuc,
    Metric::MacroF1,
    Metric::MicroF1,
    Metric::InstanceF1,
    Metric::Coverage,
];

/// Radius of the worst method on an axis.
pub const INNER_RADIUS: f64 = 0.15;

const SIZE: f64 = 480.0;
const CENTER: f64 = 220.0;
const RADIUS: f64 = 170.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn axis_label(m: Metric) -> String {
    match m {
        Metric::Coverage => "1 - coverage/(l-1)".to_string(),
        other => other.to_string(),
    }
}

/// Value of axis `m` for one report, with coverage rescaled by the label count.
fn oriented(m: Metric, report: &MetricsReport) -> Result<f64, CliError> {
    let v = report
        .mean(m)
        .ok_or_else(|| CliError::user("metrics", format!("report lacks {m}")))?;
    if m != Metric::Coverage {
        return Ok(v);
    }
    let l: f64 = report
        .note("labels")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::user("metrics", "report lacks the labels note needed for coverage"))?;
    Ok(if l > 1.0 { 1.0 - v / (l - 1.0) } else { 1.0 })
}

/// Per-method radii in `[INNER_RADIUS, 1]`, min-max scaled per axis. An axis
/// where every method ties puts everyone on the rim.
pub fn radii(reports: &[&MetricsReport]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut raw = vec![Vec::with_capacity(AXES.len()); reports.len()];
    for &m in &AXES {
        for (row, r) in raw.iter_mut().zip(reports) {
            row.push(oriented(m, r)?);
        }
    }
    let mut out = raw.clone();
    for a in 0..AXES.len() {
        let lo = raw.iter().map(|r| r[a]).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|r| r[a]).fold(f64::NEG_INFINITY, f64::max);
        for (o, r) in out.iter_mut().zip(&raw) {
            o[a] = if hi == lo || r[a] == hi {
                1.0
            } else {
                INNER_RADIUS + (1.0 - INNER_RADIUS) * (r[a] - lo) / (hi - lo)
            };
        }
    }
    Ok(out)
}

/// Angle of axis `i` in degrees, clockwise from the top.
pub fn axis_angle(i: usize) -> f64 {
    360.0 * i as f64 / AXES.len() as f64
}

fn point(angle_deg: f64, r: f64) -> (f64, f64) {
    let t = angle_deg.to_radians();
    (CENTER + RADIUS * r * t.sin(), CENTER - RADIUS * r * t.cos())
}

fn polygon(radii: &[f64]) -> String {
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let (x, y) = point(axis_angle(i), r);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(methods: &[(String, MetricsReport)]) -> Result<String, CliError> {
    let reports: Vec<&MetricsReport> = methods.iter().map(|(_, r)| r).collect();
    let radii = radii(&reports)?;
    let height = CENTER * 2.0 + 24.0 * methods.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{height}" viewBox="0 0 {SIZE} {height}" font-family="sans-serif" font-size="12">"#
    );
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            r##"  <polygon class="grid" points="{}" fill="none" stroke="#ccc"/>"##,
            polygon(&[ring; AXES.len()])
        );
    }
    for (i, &m) in AXES.iter().enumerate() {
        let angle = axis_angle(i);
        let (x, y) = point(angle, 1.0);
        let (lx, ly) = point(angle, 1.12);
        let _ = writeln!(
            svg,
            r##"  <line class="axis" data-angle="{angle}" x1="{CENTER}" y1="{CENTER}" x2="{x:.2}" y2="{y:.2}" stroke="#888"/>"##
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{lx:.2}" y="{ly:.2}" text-anchor="middle">{}</text>"#,
            escape(&axis_label(m))
        );
    }
    for (k, ((name, _), r)) in methods.iter().zip(&radii).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            svg,
            r#"  <polygon class="method" points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2"/>"#,
            polygon(r)
        );
        let y = CENTER * 2.0 + 24.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"  <rect x="20" y="{:.0}" width="14" height="14" fill="{color}"/><text x="42" y="{:.0}">{}</text>"#,
            y,
            y + 12.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
