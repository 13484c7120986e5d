//! Minimal SVG line charts of a results table, one file per metric.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::ResultRow;
use crate::error::Result;
use crate::metrics::{Arch, TrialRecord};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 7] = ["#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn log_scale(metric: &str) -> bool {
    metric.starts_with("mse_")
}

/// Renders one chart of `metric` against SNR. Non-finite points (and
/// non-positive ones on log axes) are skipped.
pub fn render_metric(rows: &[ResultRow], metric: &str) -> String {
    let log = log_scale(metric);
    let mut series: BTreeMap<Arch, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let y = if log { r.mean.log10() } else { r.mean };
        if r.snr_db.is_finite() && y.is_finite() {
            series.entry(r.arch).or_default().push((r.snr_db, y));
        }
    }
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = points.fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 1.0, x1 + 1.0);
    }
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 1.0, y1 + 1.0);
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_Y + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let y_label = if log { format!("log10 {metric}") } else { metric.to_string() };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">SNR (dB)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{y_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        MARGIN_Y - 14.0
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.1}</text>"#,
            px(xv),
            HEIGHT - MARGIN_Y + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            py(yv) + 4.0
        );
    }
    for (k, (arch, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = MARGIN_Y + 16.0 * k as f64 + 8.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, arch.label());
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<metric>.svg` into `dir` for every metric present in `rows`.
pub fn write_charts(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for metric in TrialRecord::METRICS {
        if rows.iter().any(|r| r.metric == metric) {
            let path = dir.join(format!("{metric}.svg"));
            std::fs::write(&path, render_metric(rows, metric))?;
            written.push(path);
        }
    }
    Ok(written)
}
