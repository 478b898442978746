//! Minimal SVG charts.

use std::fmt::Write;

use super::SweepResult;
use crate::geo::ProximityPrior;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const DASHES: [&str; 4] = ["", "6,3", "2,2", "8,3,2,3"];

fn header(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0).unwrap();
    writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    )
    .unwrap();
    writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, H - BOTTOM).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 10.0).unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{y}" text-anchor="middle" transform="rotate(-90 15 {y})">{y_label}</text>"#,
        y = (TOP + H - BOTTOM) / 2.0
    )
    .unwrap();
    s
}

fn tick(s: &mut String, x: f64, y: f64, label: &str, vertical_axis: bool) {
    if vertical_axis {
        writeln!(s, r#"<line x1="{}" y1="{y:.1}" x2="{x:.1}" y2="{y:.1}" stroke="black"/>"#, x - 4.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, x - 6.0, y + 4.0).unwrap();
    } else {
        writeln!(s, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, y + 4.0).unwrap();
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, y + 18.0).unwrap();
    }
}

/// Bar chart of raw pair counts per distance bucket.
pub fn histogram_svg(prior: &ProximityPrior) -> String {
    let counts = prior.counts();
    let b = prior.bucketing();
    let mut s = header("Consecutive-visit distances", "distance (km)", "pairs");
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let bar = plot_w / counts.len() as f64;
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / max * plot_h;
        writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4"/>"##,
            LEFT + i as f64 * bar,
            H - BOTTOM - h,
            (bar - 1.0).max(0.5),
            h
        )
        .unwrap();
    }
    let step = (counts.len() / 6).max(1);
    for i in (0..counts.len()).step_by(step) {
        let (lo, _) = b.bounds(i);
        tick(&mut s, LEFT + i as f64 * bar, H - BOTTOM, &format!("{lo}"), false);
    }
    for f in [0.0, 0.5, 1.0] {
        tick(&mut s, LEFT, H - BOTTOM - f * plot_h, &format!("{:.0}", f * max), true);
    }
    s.push_str("</svg>\n");
    s
}

/// Acc@k against realized unseen ratio, one line per method and k.
pub fn sweep_svg(sweep: &SweepResult) -> String {
    let mut s = header("Accuracy vs. unseen-POI ratio", "unseen ratio", "accuracy");
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + x * plot_w;
    let py = |y: f64| H - BOTTOM - y * plot_h;
    for f in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        tick(&mut s, px(f), H - BOTTOM, &format!("{f:.1}"), false);
        tick(&mut s, LEFT, py(f), &format!("{f:.1}"), true);
    }
    let methods: Vec<&String> = sweep.slopes.keys().collect();
    let mut legend = 0;
    for (mi, m) in methods.iter().enumerate() {
        for (ki, &k) in sweep.ks.iter().enumerate() {
            let pts: Vec<String> = sweep
                .points
                .iter()
                .filter_map(|p| {
                    let r = p.reports.iter().find(|r| &r.method == *m)?;
                    let a = r.acc_at.get(&k)?;
                    Some(format!("{:.1},{:.1}", px(p.realized_ratio), py(*a)))
                })
                .collect();
            if pts.is_empty() {
                continue;
            }
            let color = COLORS[mi % COLORS.len()];
            let dash = DASHES[ki % DASHES.len()];
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
                pts.join(" ")
            )
            .unwrap();
            let ly = TOP + 14.0 * legend as f64;
            writeln!(
                s,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
                W - 150.0,
                W - 120.0
            )
            .unwrap();
            writeln!(s, r#"<text x="{:.1}" y="{:.1}">{m} Acc@{k}</text>"#, W - 115.0, ly + 4.0).unwrap();
            legend += 1;
        }
    }
    s.push_str("</svg>\n");
    s
}
