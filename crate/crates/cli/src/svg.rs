// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal SVG writers for the scatter heatmaps and purity curves.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

/// Blue (0) through white (0.5) to red (1).
pub fn diverging(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (lo, mid, hi) = ([59.0, 76.0, 192.0], [247.0, 247.0, 247.0], [180.0, 4.0, 38.0]);
    let (a, b, s) = if t < 0.5 { (lo, mid, t * 2.0) } else { (mid, hi, t * 2.0 - 1.0) };
    let c: Vec<u8> = (0..3).map(|i| (a[i] + (b[i] - a[i]) * s).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

const PALETTE: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo > hi {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self { x: range(&mut xs.clone()), y: range(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Points colored by `values` rescaled to `[0, 1]`; the baseline is a black cross.
pub fn heatmap(title: &str, points: &[Vec<f64>], values: &[f64], baseline: &[f64]) -> String {
    let frame = Frame::new(
        points.iter().map(|p| p[0]).chain(std::iter::once(baseline[0])),
        points.iter().map(|p| p[1]).chain(std::iter::once(baseline[1])),
    );
    let hi = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut out = String::new();
    header(&mut out, title);
    for (p, v) in points.iter().zip(values) {
        let t = if hi > 0.0 { v / hi } else { 0.0 };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            frame.px(p[0]),
            frame.py(p[1]),
            diverging(t)
        );
    }
    let (bx, by) = (frame.px(baseline[0]), frame.py(baseline[1]));
    let _ = writeln!(
        out,
        r#"<path d="M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}" stroke="black" stroke-width="2"/>"#,
        bx - 5.0, by - 5.0, bx + 5.0, by + 5.0, bx - 5.0, by + 5.0, bx + 5.0, by - 5.0
    );
    out.push_str("</svg>\n");
    out
}

/// One polyline with standard-error bars per series of `(x, mean, stderr)`.
pub fn curves(title: &str, series: &[(String, Vec<(f64, f64, f64)>)]) -> String {
    let all = || series.iter().flat_map(|(_, s)| s.iter());
    let frame = Frame::new(
        all().map(|p| p.0),
        all().flat_map(|p| [p.1 - p.2, p.1 + p.2]).chain([0.0, 1.0]),
    );
    let mut out = String::new();
    header(&mut out, title);
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.2} {y1:.2} L{x0:.2} {y0:.2} L{x1:.2} {y0:.2}" fill="none" stroke="black"/>"#
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        for p in pts {
            let x = frame.px(p.0);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                frame.py(p.1 - p.2),
                frame.py(p.1 + p.2)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 90.0,
            MARGIN + 14.0 * i as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
