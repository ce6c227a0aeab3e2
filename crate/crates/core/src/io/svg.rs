//! Cell-rectangle heatmap of a phase grid, density `n` across and the family
//! parameter up, with optional transition-line markers on top.

use std::fmt::Write as _;

use crate::sweep::{PhaseGrid, TransitionLine};
use crate::theory::CriticalLine;

const ZERO_VOLUME_RGB: [f64; 3] = [8.0, 48.0, 107.0];
const INFINITE_VOLUME_RGB: [f64; 3] = [173.0, 216.0, 240.0];
const MISSING_FILL: &str = "#808080";
const ANALYTIC_COLOR: &str = "#d62728";

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        Self {
            width: 760.0,
            height: 560.0,
            title: None,
        }
    }
}

const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Dark blue at 0 (zero volume), light blue at 1 (infinite volume).
pub fn ramp(fraction: f64) -> String {
    if fraction.is_nan() {
        return MISSING_FILL.to_string();
    }
    let t = fraction.clamp(0.0, 1.0);
    let ch = |k: usize| (ZERO_VOLUME_RGB[k] + t * (INFINITE_VOLUME_RGB[k] - ZERO_VOLUME_RGB[k])).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

/// Cell boundaries: midpoints between grid values, half a spacing beyond the ends.
fn edges(grid: &[f64]) -> Vec<f64> {
    if grid.len() == 1 {
        let h = 0.5 * grid[0].abs().max(1.0) * 0.1;
        return vec![grid[0] - h, grid[0] + h];
    }
    let mut out = Vec::with_capacity(grid.len() + 1);
    out.push(grid[0] - 0.5 * (grid[1] - grid[0]));
    out.extend(grid.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let k = grid.len() - 1;
    out.push(grid[k] + 0.5 * (grid[k] - grid[k - 1]));
    out
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Frame {
    fn x(&self, n: f64) -> f64 {
        LEFT + (n - self.x0) / (self.x1 - self.x0) * self.plot_w
    }
    fn y(&self, p: f64) -> f64 {
        TOP + (self.y1 - p) / (self.y1 - self.y0) * self.plot_h
    }
    fn contains(&self, n: f64, p: f64) -> bool {
        (self.x0..=self.x1).contains(&n) && (self.y0..=self.y1).contains(&p)
    }
}

/// Standalone SVG document. Byte-identical for identical inputs.
pub fn render_heatmap(
    grid: &PhaseGrid,
    analytic: Option<&CriticalLine>,
    empirical: Option<&TransitionLine>,
    style: &HeatmapStyle,
) -> String {
    let n_edges = edges(&grid.spec.n_grid);
    let p_edges = edges(&grid.spec.param_grid);
    let frame = Frame {
        x0: n_edges[0],
        x1: *n_edges.last().unwrap(),
        y0: p_edges[0],
        y1: *p_edges.last().unwrap(),
        plot_w: style.width - LEFT - RIGHT,
        plot_h: style.height - TOP - BOTTOM,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(title) = &style.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + frame.plot_w / 2.0,
            escape(title)
        );
    }

    let _ = writeln!(s, r#"<g id="cells" shape-rendering="crispEdges">"#);
    for (p, row) in grid.fraction.iter().enumerate() {
        for (j, &f) in row.iter().enumerate() {
            let (xa, xb) = (frame.x(n_edges[j]), frame.x(n_edges[j + 1]));
            let (ya, yb) = (frame.y(p_edges[p + 1]), frame.y(p_edges[p]));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                xa,
                ya,
                xb - xa,
                yb - ya,
                ramp(f)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    // Axes.
    let (bx, by) = (LEFT + frame.plot_w, TOP + frame.plot_h);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        frame.plot_w, frame.plot_h
    );
    for t in nice_ticks(frame.x0, frame.x1, 6) {
        let x = frame.x(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{by:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            by + 5.0,
            by + 19.0,
            label(t)
        );
    }
    for t in nice_ticks(frame.y0, frame.y1, 6) {
        let y = frame.y(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n = N / Omega</text>"#,
        LEFT + frame.plot_w / 2.0,
        by + 42.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + frame.plot_h / 2.0,
        TOP + frame.plot_h / 2.0,
        grid.spec.family.param_name()
    );

    // Overlays.
    if let Some(line) = empirical {
        let _ = writeln!(s, r#"<g id="empirical" fill="white" stroke="black" stroke-width="1">"#);
        for &(p, n) in line.points.iter().filter(|&&(p, n)| frame.contains(n, p)) {
            let (x, y) = (frame.x(n), frame.y(p));
            let _ = writeln!(
                s,
                r#"<path d="M{:.2} {y:.2} L{x:.2} {:.2} L{:.2} {y:.2} L{x:.2} {:.2} Z"/>"#,
                x - 4.5,
                y - 4.5,
                x + 4.5,
                y + 4.5
            );
        }
        let _ = writeln!(s, "</g>");
    }
    if let Some(line) = analytic {
        let _ = writeln!(s, r#"<g id="analytic" fill="{ANALYTIC_COLOR}" stroke="white" stroke-width="0.5">"#);
        for &(p, n) in line.points.iter().filter(|&&(p, n)| frame.contains(n, p)) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5"/>"#, frame.x(n), frame.y(p));
        }
        let _ = writeln!(s, "</g>");
    }

    // Legend: a stepped colour bar plus marker keys.
    let lx = bx + 30.0;
    let steps = 20;
    let bar_h = 160.0;
    let _ = writeln!(s, r#"<g id="legend">"#);
    let _ = writeln!(s, r#"<text x="{lx:.2}" y="{:.2}">fraction infinite</text>"#, TOP + 4.0);
    for k in 0..steps {
        let f = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="18" height="{:.2}" fill="{}"/>"#,
            TOP + 14.0 + k as f64 * bar_h / steps as f64,
            bar_h / steps as f64 + 0.2,
            ramp(f)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{lx:.2}" y="{:.2}" width="18" height="{bar_h:.2}" fill="none" stroke="black"/>"#,
        TOP + 14.0
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">1 (infinite)</text>"#, lx + 24.0, TOP + 22.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">0 (zero)</text>"#, lx + 24.0, TOP + 14.0 + bar_h);
    let mut ky = TOP + bar_h + 50.0;
    if analytic.is_some() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{ANALYTIC_COLOR}"/><text x="{:.2}" y="{:.2}">analytic</text>"#,
            lx + 9.0,
            ky - 4.0,
            lx + 24.0,
            ky
        );
        ky += 20.0;
    }
    if let Some(line) = empirical {
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z" fill="white" stroke="black"/><text x="{:.2}" y="{ky:.2}">empirical ({})</text>"#,
            lx + 4.5,
            ky - 4.0,
            lx + 9.0,
            ky - 8.5,
            lx + 13.5,
            ky - 4.0,
            lx + 9.0,
            ky + 0.5,
            lx + 24.0,
            label(line.level)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
