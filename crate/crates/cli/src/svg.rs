//! Error-versus-sweep-point line chart with ci95 whiskers.

use std::fmt::Write as _;

use crate::report::AggregateRecord;

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 80.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#9467bd", "#2ca02c", "#ff7f0e", "#8c564b"];

/// Rows grouped by policy, in order of first appearance.
fn series(rows: &[AggregateRecord]) -> Vec<(&str, Vec<&AggregateRecord>)> {
    let mut out: Vec<(&str, Vec<&AggregateRecord>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(p, _)| *p == r.policy) {
            Some((_, v)) => v.push(r),
            None => out.push((&r.policy, vec![r])),
        }
    }
    for (_, v) in &mut out {
        v.sort_by(|a, b| a.sweep_point.total_cmp(&b.sweep_point));
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Renders the chart. The x axis spans the sweep points, the y axis runs from
/// zero to just above the largest `mean + ci95`.
pub fn render(rows: &[AggregateRecord], title: &str) -> String {
    let groups = series(rows);
    let (mut x_min, mut x_max) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.sweep_point), hi.max(r.sweep_point))
        });
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let y_top = rows
        .iter()
        .map(|r| r.mean_error + r.ci95)
        .fold(0.0f64, f64::max);
    let y_max = if y_top > 0.0 { y_top * 1.1 } else { 1.0 };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + plot_h - y / y_max * plot_h;
    let x_label = if x_max <= 1.0 {
        "coverage fraction s"
    } else {
        "number of questions m"
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="18">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // axes
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y0}"/></g>"#,
        y0 = TOP + plot_h,
        x1 = LEFT + plot_w
    );
    for i in 0..=TICKS {
        let fx = x_min + (x_max - x_min) * i as f64 / TICKS as f64;
        let px = sx(fx);
        let fy = y_max * i as f64 / TICKS as f64;
        let py = sy(fy);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{t}" text-anchor="middle">{}</text>"#,
            fmt_tick(fx),
            b = TOP + plot_h,
            b2 = TOP + plot_h + 6.0,
            t = TOP + plot_h + 22.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{l}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><line x1="{LEFT}" y1="{py:.2}" x2="{r}" y2="{py:.2}" stroke="#dddddd"/><text x="{t}" y="{ty:.2}" text-anchor="end">{}</text>"##,
            fmt_tick(fy),
            l = LEFT - 6.0,
            r = LEFT + plot_w,
            t = LEFT - 10.0,
            ty = py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 25.0
    );
    let _ = writeln!(
        s,
        r#"<text x="25" y="{}" text-anchor="middle" transform="rotate(-90 25 {})">mean error</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (idx, (policy, pts)) in groups.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" data-policy="{}">"#, escape(policy));
        let coords: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.sweep_point), sy(r.mean_error)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for r in pts {
            let (px, lo, hi) = (
                sx(r.sweep_point),
                sy((r.mean_error - r.ci95).max(0.0)),
                sy(r.mean_error + r.ci95),
            );
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{lo:.2}" x2="{px:.2}" y2="{hi:.2}" stroke="{color}"/><line x1="{a:.2}" y1="{lo:.2}" x2="{b:.2}" y2="{lo:.2}" stroke="{color}"/><line x1="{a:.2}" y1="{hi:.2}" x2="{b:.2}" y2="{hi:.2}" stroke="{color}"/><circle cx="{px:.2}" cy="{cy:.2}" r="3" fill="{color}"/>"#,
                a = px - 4.0,
                b = px + 4.0,
                cy = sy(r.mean_error)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let lx = WIDTH - RIGHT + 20.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (idx, (policy, _)) in groups.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let ly = TOP + 20.0 + 24.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            lx + 32.0,
            ly + 4.0,
            escape(policy)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
