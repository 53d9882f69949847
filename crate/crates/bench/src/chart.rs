//! SVG line charts of speedup versus thread count.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use crate::error::BenchError;
use crate::grid::BenchReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(usize, f64)>,
}

fn speedup_series(report: &BenchReport) -> Vec<Series> {
    let combos: std::collections::BTreeSet<(String, String)> = report
        .cells
        .iter()
        .map(|c| (c.dataset.clone(), c.return_mode.to_string()))
        .collect();
    let mut groups: BTreeMap<(String, String, String), BTreeMap<usize, f64>> = BTreeMap::new();
    for c in &report.cells {
        if !c.status.is_ok() || c.runs == 0 {
            continue;
        }
        let policy = c.policy.to_string();
        groups
            .entry((c.dataset.clone(), c.return_mode.to_string(), policy))
            .or_default()
            .insert(c.threads, c.mean.as_secs_f64());
    }
    groups
        .into_iter()
        .filter_map(|((dataset, mode, policy), means)| {
            let (_, &base) = means.iter().next()?;
            let label = if combos.len() > 1 {
                format!("{dataset} {mode} {policy}")
            } else {
                policy
            };
            let points = means
                .iter()
                .map(|(&t, &m)| (t, if m > 0.0 { base / m } else { 0.0 }))
                .collect();
            Some(Series { label, points })
        })
        .collect()
}

/// Renders one polyline per policy; y is the speedup over that policy's
/// smallest thread count (normally 1). Output is byte-stable for equal input.
pub fn render_speedup_chart(report: &BenchReport) -> Result<String, BenchError> {
    let series = speedup_series(report);
    if series.is_empty() {
        return Err(BenchError::Chart(
            "report has no successful cells to plot".into(),
        ));
    }
    let mut xs: Vec<usize> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    xs.sort_unstable();
    xs.dedup();
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(1.0f64, f64::max)
        .ceil();
    let y_step = (y_max / 8.0).ceil().max(1.0);
    let y_top = (y_max / y_step).ceil() * y_step;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |t: usize| {
        let i = xs.binary_search(&t).unwrap_or(0);
        if xs.len() == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (xs.len() - 1) as f64
        }
    };
    let y_of = |s: f64| TOP + plot_h * (1.0 - s / y_top);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    let mut y = 0.0;
    while y <= y_top {
        let py = y_of(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y}</text>"#,
            LEFT - 6.0,
            py + 4.0
        );
        y += y_step;
    }
    for &t in &xs {
        let px = x_of(t);
        let _ = writeln!(
            svg,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">threads</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">speedup</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(t, v)| format!("{:.1},{:.1}", x_of(t), y_of(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for &(t, v) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_of(t),
                y_of(v)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_speedup_chart(report: &BenchReport, path: &Path) -> Result<(), BenchError> {
    let svg = render_speedup_chart(report)?;
    std::fs::write(path, svg)?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
