//! Self-contained SVG charts: line plots, scatter heatmaps and mean ± std
//! bands.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One named curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, left: f64, width: f64) -> Self {
        let (x0, x1) = range(xs);
        let (y0, y1) = range(ys);
        Self {
            x0,
            x1,
            y0,
            y1,
            left,
            top: PAD * 0.6,
            width,
            height: H - PAD * 1.6,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.height
    }
}

/// Data extremes, widened only when the values are all equal.
fn extent(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        let d = 0.5 * (1.0 + lo.abs()) * 1e-3;
        return (lo - d, hi + d);
    }
    (lo, hi)
}

/// Axis range: the data extent with a small margin.
fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = extent(v);
    let m = 0.04 * (hi - lo);
    (lo - m, hi + m)
}

fn header(out: &mut String, title: &str, width: f64) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" viewBox="0 0 {width} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{width}" height="{H}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        f.left, f.top, f.width, f.height
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (f.x0 + t * (f.x1 - f.x0), f.y0 + t * (f.y1 - f.y0));
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            f.top + f.height + 16.0,
            tick(xv)
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            f.left - 4.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        f.left + f.width / 2.0,
        H - 8.0,
        escape(xlabel)
    );
    let _ = write!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        f.top + f.height / 2.0,
        f.top + f.height / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool) {
    let mut d = String::new();
    for &(x, y) in pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(y));
    }
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = write!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
        d.trim_end()
    );
}

fn legend(out: &mut String, f: &Frame, labels: &[(&str, &str)]) {
    for (i, (label, color)) in labels.iter().enumerate() {
        let y = f.top + 14.0 + 16.0 * i as f64;
        let x = f.left + f.width - 150.0;
        let _ = write!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 4.0,
            x + 20.0,
            y - 4.0,
            x + 26.0,
            y,
            escape(label)
        );
    }
}

/// Line chart of several series sharing axes.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let f = Frame::new(all().map(|p| p.0), all().map(|p| p.1), PAD + 16.0, W - PAD * 1.6 - 16.0);
    let mut out = String::new();
    header(&mut out, title, W);
    axes(&mut out, &f, xlabel, ylabel);
    let mut labels = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, &f, &s.points, color, s.dashed);
        labels.push((s.label.as_str(), color));
    }
    legend(&mut out, &f, &labels);
    out.push_str("</svg>\n");
    out
}

/// Mean curves with a shaded ± one standard deviation band per series.
pub fn band_chart(title: &str, xlabel: &str, ylabel: &str, bands: &[(String, Vec<(f64, f64, f64)>)]) -> String {
    let all = || bands.iter().flat_map(|(_, b)| b.iter().copied());
    let f = Frame::new(
        all().map(|p| p.0),
        all().flat_map(|(_, m, s)| [m - s, m + s]),
        PAD + 16.0,
        W - PAD * 1.6 - 16.0,
    );
    let mut out = String::new();
    header(&mut out, title, W);
    axes(&mut out, &f, xlabel, ylabel);
    let mut labels = Vec::new();
    for (i, (label, b)) in bands.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for &(x, m, s) in b {
            let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(m + s));
        }
        for &(x, m, s) in b.iter().rev() {
            let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(m - s));
        }
        let _ = write!(
            out,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            d.trim_end()
        );
        let mean: Vec<(f64, f64)> = b.iter().map(|&(x, m, _)| (x, m)).collect();
        polyline(&mut out, &f, &mean, color, false);
        labels.push((label.as_str(), color));
    }
    legend(&mut out, &f, &labels);
    out.push_str("</svg>\n");
    out
}

/// Colour for `t ∈ [0, 1]` on a blue–white–red ramp.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + 215.0 * s, 80.0 + 175.0 * s, 200.0 + 55.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0 - 35.0 * s, 255.0 - 205.0 * s, 255.0 - 215.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Scattered nodal values drawn as coloured squares, one panel per field,
/// sharing a colour scale.
pub fn heatmap(title: &str, points: &[[f64; 2]], panels: &[(&str, &[f64])]) -> String {
    let count = panels.len().max(1) as f64;
    let panel_w = 300.0;
    let width = panel_w * count + 20.0;
    let (lo, hi) = extent(panels.iter().flat_map(|(_, v)| v.iter().copied()));
    let xs = || points.iter().map(|p| p[0]);
    let ys = || points.iter().map(|p| p[1]);
    let (x0, x1) = range(xs());
    let (y0, y1) = range(ys());
    let avail = H - PAD * 1.6;
    let scale = ((panel_w - 40.0) / (x1 - x0)).min(avail / (y1 - y0));
    let cell = (points.len() as f64).sqrt().max(1.0);
    let size = (((x1 - x0) * (y1 - y0)).sqrt() / cell * scale * 1.2).max(1.5);
    let mut out = String::new();
    header(&mut out, title, width);
    for (k, (name, values)) in panels.iter().enumerate() {
        let left = 20.0 + panel_w * k as f64;
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + (panel_w - 20.0) / 2.0,
            PAD * 0.6 - 6.0 + 14.0,
            escape(name)
        );
        for (p, &v) in points.iter().zip(values.iter()) {
            let cx = left + (p[0] - x0) * scale;
            let cy = PAD * 0.6 + 14.0 + (y1 - p[1]) * scale;
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{size:.2}" height="{size:.2}" fill="{}"/>"#,
                cx - size / 2.0,
                cy - size / 2.0,
                ramp((v - lo) / (hi - lo))
            );
        }
    }
    let _ = write!(
        out,
        r#"<text x="10" y="{:.1}">min {}</text><text x="{:.1}" y="{:.1}" text-anchor="end">max {}</text>"#,
        H - 8.0,
        tick(lo),
        width - 10.0,
        H - 8.0,
        tick(hi)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well_formed(svg: &str) {
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn line_chart_has_one_polyline_per_series() {
        let s = line_chart(
            "loss <total>",
            "epoch",
            "L",
            &[
                Series::new("a", vec![(0.0, 1.0), (1.0, 0.5)]),
                Series::new("b", vec![(0.0, 2.0), (1.0, f64::NAN)]).dashed(),
            ],
        );
        well_formed(&s);
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("&lt;total&gt;"));
    }

    #[test]
    fn constant_data_still_plots() {
        well_formed(&line_chart("flat", "x", "y", &[Series::new("c", vec![(0.0, 1.0), (1.0, 1.0)])]));
        well_formed(&band_chart("b", "x", "y", &[("l".into(), vec![(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)])]));
    }

    #[test]
    fn heatmap_draws_every_node_per_panel() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [1.0, 3.0]];
        let v = [0.0, 1.0, 2.0, 3.0];
        let s = heatmap("u", &pts, &[("pred", &v), ("ref", &v)]);
        well_formed(&s);
        assert_eq!(s.matches("<rect").count(), 1 + 8);
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), "#2850c8");
        assert_eq!(ramp(0.5), "#ffffff");
        assert_eq!(ramp(1.0), "#dc3228");
    }
}
