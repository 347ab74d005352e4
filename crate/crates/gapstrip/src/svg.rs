//! Minimal SVG line plots: axes, polylines, shaded horizontal gap strips
//! and node markers. Output depends only on the data.

use std::f64::consts::PI;
use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    /// Node that opens a gap.
    Open,
    /// Node covered by another band.
    Shaded,
    /// Node left closed (symmetry, same slope, unclassified).
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub kind: MarkerKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Figure {
    pub title: String,
    pub y_label: String,
    pub curves: Vec<Vec<(f64, f64)>>,
    /// Spectral gaps `(lower, upper)`, drawn as strips across the plot.
    pub gaps: Vec<(f64, f64)>,
    pub markers: Vec<Marker>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(fig: &Figure) -> String {
    let (x0, x1) = (-PI, PI);
    let ys = fig.curves.iter().flatten().map(|p| p.1).chain(fig.markers.iter().map(|m| m.y));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !(y0.is_finite() && y1.is_finite()) {
        (y0, y1) = (0.0, 1.0);
    }
    let pad = 0.04 * (y1 - y0).max(1e-9);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&fig.title));
    let _ = writeln!(s, r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#);
    for &(lo, hi) in &fig.gaps {
        let (a, b) = (sy(hi.min(y1)), sy(lo.max(y0)));
        if b > a {
            let _ = writeln!(s, r##"<rect x="{LEFT}" y="{a:.2}" width="{pw}" height="{:.2}" fill="#bbbbbb" fill-opacity="0.5"/>"##, b - a);
        }
    }
    // Axes and ticks.
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (k, label) in ["-\u{3c0}", "-\u{3c0}/2", "0", "\u{3c0}/2", "\u{3c0}"].iter().enumerate() {
        let x = sx(-PI + k as f64 * PI / 2.0);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">&#951;</text>"#, LEFT + pw / 2.0, H - 10.0);
    let step = nice_step(y1 - y0);
    let mut t = (y0 / step).ceil() * step;
    while t <= y1 {
        let y = sy(t);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, fmt_tick(t, step));
        t += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );
    let _ = writeln!(s, r#"<g clip-path="url(#plot)" fill="none" stroke-width="1.5">"#);
    for (i, c) in fig.curves.iter().enumerate() {
        let pts: Vec<String> = c.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline stroke="{}" points="{}"/>"#, COLORS[i % COLORS.len()], pts.join(" "));
    }
    let _ = writeln!(s, "</g>");
    for m in &fig.markers {
        let (x, y) = (sx(m.x), sy(m.y));
        let _ = match m.kind {
            MarkerKind::Open => writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="black"/>"#),
            MarkerKind::Shaded => writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="black"/>"#, x - 4.0, y - 4.0),
            MarkerKind::Closed => writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="black"/>"#),
        };
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let v = if t.abs() < 0.5 * step { 0.0 } else { t };
    format!("{v:.digits$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_curves_gaps_and_markers() {
        let fig = Figure {
            title: "a < b".into(),
            y_label: "lambda".into(),
            curves: vec![vec![(-PI, 0.0), (PI, 10.0)], vec![(-PI, 10.0), (PI, 0.0)]],
            gaps: vec![(4.0, 6.0)],
            markers: vec![Marker { x: 0.0, y: 5.0, kind: MarkerKind::Shaded }],
        };
        let svg = render(&fig);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("fill-opacity"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg, render(&fig));
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_step(100.0), 20.0);
        assert_eq!(fmt_tick(1e-17, 0.5), "0.0");
    }
}
