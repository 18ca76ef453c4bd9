//! Self-contained SVG line charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 300.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Curve<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub log_y: bool,
    pub curves: Vec<Curve<'a>>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel(out: &mut String, p: &Panel<'_>, y0: f64) {
    let tr = |v: f64| if p.log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = p
        .curves
        .iter()
        .flat_map(|c| c.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!p.log_y || *y > 0.0))
        .map(|(x, y)| (x, tr(y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        y0 + 20.0,
        esc(p.title)
    );
    let (x0, x1, y_lo, y_hi) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if pts.is_empty() {
        return;
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let sy = |y: f64| y0 + H - PAD + -(y - y_lo) / span(y_lo, y_hi) * (H - 2.0 * PAD);
    let _ = writeln!(
        out,
        r##"<rect x="{PAD}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        y0 + PAD,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let fmt_y = |v: f64| if p.log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for (v, anchor_y) in [(y_lo, sy(y_lo)), (y_hi, sy(y_hi))] {
        let _ = writeln!(out, r#"<text x="{}" y="{anchor_y}" font-size="10" text-anchor="end">{}</text>"#, PAD - 4.0, fmt_y(v));
    }
    for v in [x0, x1] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{v:.2}</text>"#, sx(v), y0 + H - PAD + 14.0);
    }
    for (k, c) in p.curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut line = String::new();
        for &(x, y) in &c.points {
            if x.is_finite() && y.is_finite() && (!p.log_y || y > 0.0) {
                let _ = write!(line, "{:.2},{:.2} ", sx(x), sy(tr(y)));
            }
        }
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, line.trim_end());
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            PAD + 8.0,
            y0 + PAD + 14.0 * (k as f64 + 1.0),
            esc(c.label)
        );
    }
}

/// Panels stacked vertically.
pub fn render(panels: &[Panel<'_>]) -> String {
    let total = H * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total}" viewBox="0 0 {W} {total}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, i as f64 * H);
    }
    out.push_str("</svg>\n");
    out
}
