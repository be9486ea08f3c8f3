//! Minimal deterministic SVG emission: fixed float formatting, no
//! timestamps, nothing environment-dependent, so identical inputs give
//! byte-identical files.

use std::fmt::Write;

pub struct SvgDoc {
    width: f64,
    height: f64,
    body: String,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            fmt(x),
            fmt(y),
            fmt(w),
            fmt(h)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"/>"#,
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            fmt(width)
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        if pts.len() == 1 {
            // Degenerate series: a visible point marker.
            let _ = writeln!(
                self.body,
                r#"<circle cx="{}" cy="{}" r="2.5" fill="{stroke}"/>"#,
                fmt(pts[0].0),
                fmt(pts[0].1)
            );
            return;
        }
        let mut path = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            if i > 0 {
                path.push(' ');
            }
            let _ = write!(path, "{},{}", fmt(*x), fmt(*y));
        }
        let dash = if dashed {
            r#" stroke-dasharray="5,4""#
        } else {
            ""
        };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{path}" fill="none" stroke="{stroke}" stroke-width="{}"{dash}/>"#,
            fmt(width)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="monospace">{}</text>"#,
            fmt(x),
            fmt(y),
            fmt(size),
            xml_escape(content)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" \
             width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            self.body
        )
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A labelled data series for [`line_chart`].
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Axes, ticks, series polylines, and a legend. Ranges come from the data.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (62.0, 16.0, 34.0, 46.0);
    let plot_w = w - ml - mr;
    let plot_h = h - mt - mb;

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let (x0, x1) = padded_range(&xs);
    let (y0, y1) = padded_range(&ys);

    let mut doc = SvgDoc::new(w, h);
    doc.rect(0.0, 0.0, w, h, "#ffffff");
    doc.rect(ml, mt, plot_w, plot_h, "#f7f7f7");
    doc.text(ml, mt - 12.0, 14.0, title);

    let to_px = |x: f64, y: f64| {
        (
            ml + (x - x0) / (x1 - x0) * plot_w,
            mt + (1.0 - (y - y0) / (y1 - y0)) * plot_h,
        )
    };
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let (px, _) = to_px(fx, y0);
        let (_, py) = to_px(x0, fy);
        doc.line(px, mt, px, mt + plot_h, "#dddddd", 1.0);
        doc.line(ml, py, ml + plot_w, py, "#dddddd", 1.0);
        doc.text(px - 12.0, h - mb + 16.0, 10.0, &format!("{fx:.2}"));
        doc.text(6.0, py + 3.0, 10.0, &format!("{fy:.2}"));
    }
    doc.text(ml + plot_w / 2.0 - 12.0, h - 10.0, 11.0, x_label);
    doc.text(6.0, mt - 12.0, 11.0, y_label);

    for s in series {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| to_px(x, y))
            .collect();
        doc.polyline(&pts, s.color, 1.5, s.dashed);
    }
    for (i, s) in series.iter().enumerate() {
        let y = mt + 14.0 + 14.0 * i as f64;
        doc.line(ml + plot_w - 90.0, y - 4.0, ml + plot_w - 70.0, y - 4.0, s.color, 2.0);
        doc.text(ml + plot_w - 64.0, y, 10.0, &s.label);
    }
    doc.finish()
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}
