//! Minimal self-contained SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Dashed horizontal line, e.g. `I_vs = 1`.
    pub reference: Option<f64>,
    pub log_y: bool,
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f4e9c", "#b2401f", "#2d7d2d", "#6b3fa0"];

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            reference: None,
            log_y: false,
        }
    }

    pub fn with_series(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points });
        self
    }

    pub fn with_reference(mut self, y: f64) -> Self {
        self.reference = Some(y);
        self
    }

    pub fn log_scale(mut self) -> Self {
        self.log_y = true;
        self
    }

    fn ty(&self, y: f64) -> Option<f64> {
        let y = if self.log_y {
            if y > 0.0 {
                y.log10()
            } else {
                return None;
            }
        } else {
            y
        };
        y.is_finite().then_some(y)
    }
}

/// Up to ~6 round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(plot: &Plot) -> Result<String, CliError> {
    let npts = plot.series.iter().map(|s| s.points.len()).max().unwrap_or(0);
    if npts < 2 {
        return Err(CliError::TooFewPoints(npts));
    }
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &plot.series {
        for &(x, y) in &s.points {
            if let (true, Some(y)) = (x.is_finite(), plot.ty(y)) {
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(y), ys.1.max(y));
            }
        }
    }
    if let Some(r) = plot.reference.and_then(|r| plot.ty(r)) {
        ys = (ys.0.min(r), ys.1.max(r));
    }
    if !(xs.0 < xs.1) {
        return Err(CliError::TooFewPoints(1));
    }
    if !(ys.0 < ys.1) {
        let pad = ys.0.abs().max(1.0) * 0.05;
        ys = (ys.0 - pad, ys.1 + pad);
    } else {
        let pad = 0.05 * (ys.1 - ys.0);
        ys = (ys.0 - pad, ys.1 + pad);
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - xs.0) / (xs.1 - xs.0) * pw;
    let sy = |y: f64| TOP + (ys.1 - y) / (ys.1 - ys.0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&plot.title));

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    for t in ticks(xs.0, xs.1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            fmt_tick(t)
        );
    }
    for t in ticks(ys.0, ys.1) {
        let y = sy(t);
        let label = if plot.log_y { format!("1e{}", fmt_tick(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(&plot.x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );

    if let Some(r) = plot.reference.and_then(|r| plot.ty(r)) {
        let y = sy(r);
        let _ = writeln!(
            svg,
            r##"<line class="reference" x1="{LEFT}" y1="{y:.3}" x2="{}" y2="{y:.3}" stroke="#888888" stroke-dasharray="6 4"/>"##,
            LEFT + pw
        );
    }

    for (k, s) in plot.series.iter().enumerate() {
        // Non-finite points break the line rather than being dropped silently.
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            match (x.is_finite(), plot.ty(y)) {
                (true, Some(y)) => {
                    let _ = write!(d, "{}{:.3} {:.3} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(svg, r#"<path class="series" d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#, d.trim_end());
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 14.0 + 14.0 * k as f64,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(plot: &Plot, path: &Path) -> Result<(), CliError> {
    let svg = render_svg(plot)?;
    std::fs::write(path, svg).map_err(|source| CliError::Write { path: path.to_owned(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ticks(0.13, 0.61).len(), 5);
    }

    #[test]
    fn one_point_is_refused() {
        let p = Plot::new("t", "x", "y").with_series("a", vec![(0.0, 1.0)]);
        assert!(matches!(render_svg(&p), Err(CliError::TooFewPoints(1))));
    }

    #[test]
    fn log_scale_skips_non_positive() {
        let p = Plot::new("t", "x", "y").log_scale().with_series("a", vec![(0.0, 1.0), (1.0, 0.0), (2.0, 10.0)]);
        let svg = render_svg(&p).unwrap();
        let d = svg.split(r#"class="series" d=""#).nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(d.matches('M').count(), 2);
    }
}
