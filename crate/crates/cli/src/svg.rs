//! Band chart: envelope of the band across thresholds with a midpoint line.

use std::fmt::Write;

use concate_core::ScanResult;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 48.0;

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, tau: f64) -> f64 {
        let span = (self.x1 - self.x0).max(f64::EPSILON);
        LEFT + (tau - self.x0) / span * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y1 - self.y0).max(f64::EPSILON);
        HEIGHT - BOTTOM - (v - self.y0) / span * (HEIGHT - TOP - BOTTOM)
    }
}

fn points(pts: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (i, (x, y)) in pts.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

/// Renders the evaluated rows of a scan. Skipped thresholds are left out of
/// the envelope and marked on the axis.
pub fn band_chart(result: &ScanResult) -> String {
    let bands: Vec<(f64, f64, f64)> = result
        .rows
        .iter()
        .filter_map(|r| r.band.map(|b| (r.tau, b.band_lower, b.band_upper)))
        .collect();
    let taus: Vec<f64> = result.rows.iter().map(|r| r.tau).collect();
    let (mut y0, mut y1) = (0.0f64, 0.0f64);
    for &(_, lo, hi) in &bands {
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    let pad = 0.05 * (y1 - y0).max(1e-9);
    let sc = Scale {
        x0: taus.first().copied().unwrap_or(0.0),
        x1: taus.last().copied().unwrap_or(100.0),
        y0: y0 - pad,
        y1: y1 + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{} band, alpha = {}</text>"#,
        WIDTH / 2.0,
        result.method,
        result.alpha
    );

    let (ax, ay) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<g id="axes" stroke="black"><line x1="{ax}" y1="{ay}" x2="{}" y2="{ay}"/><line x1="{ax}" y1="{TOP}" x2="{ax}" y2="{ay}"/></g>"#,
        WIDTH - RIGHT
    );
    let _ = writeln!(s, r#"<g id="ticks" text-anchor="middle">"#);
    for r in &result.rows {
        let x = sc.x(r.tau);
        let fill = if r.skipped.is_some() { "gray" } else { "black" };
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" fill="{fill}">{}</text>"#,
            ay + 16.0,
            r.tau
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">threshold (%)</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    for v in [sc.y0 + pad, sc.y1 - pad] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            sc.y(v) + 4.0
        );
    }

    let zero = sc.y(0.0);
    let _ = writeln!(
        s,
        r#"<line id="zero" x1="{LEFT}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
        WIDTH - RIGHT
    );

    if !bands.is_empty() {
        let upper = bands.iter().map(|&(t, _, hi)| (sc.x(t), sc.y(hi)));
        let lower = bands.iter().rev().map(|&(t, lo, _)| (sc.x(t), sc.y(lo)));
        let _ = writeln!(
            s,
            r#"<polygon id="envelope" points="{}" fill="steelblue" fill-opacity="0.3" stroke="steelblue"/>"#,
            points(upper.chain(lower))
        );
        let mid = bands.iter().map(|&(t, lo, hi)| (sc.x(t), sc.y(0.5 * (lo + hi))));
        let _ = writeln!(
            s,
            r#"<polyline id="midpoint" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            points(mid)
        );
    }

    if let Some(tau) = result.tipping_tau {
        let x = sc.x(tau);
        let _ = writeln!(
            s,
            r#"<line id="tipping" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{ay}" stroke="firebrick"/>"#
        );
    }
    s.push_str("</svg>\n");
    s
}
