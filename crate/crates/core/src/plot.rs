//! SVG scatter plots of the feature plane with the decision boundary,
//! margin lines and support vectors, plus an accuracy bar chart.
//!
//! Uniformity runs along the horizontal axis and black pixel rate along the
//! vertical one. The data-to-screen mapping is affine and is written into
//! the document as a comment of the form
//! `<!-- affine sx=.. tx=.. sy=.. ty=.. -->`, meaning
//! `screen_x = sx * uniformity + tx` and `screen_y = sy * black_rate + ty`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::features::FeatureVector;
use crate::label::Label;
use crate::pipeline::ExperimentReport;
use crate::svm::SvmModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
    #[error("plot area {width}x{height} leaves no room inside the {padding}px border")]
    DimensionMismatch {
        width: f64,
        height: f64,
        padding: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub width: f64,
    pub height: f64,
    /// Screen border around the plotting area.
    pub padding: f64,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub good_color: String,
    pub not_good_color: String,
    pub boundary_color: String,
    pub margin_color: String,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 480.0,
            padding: 60.0,
            title: "SVM decision boundary".to_string(),
            x_label: "uniformity".to_string(),
            y_label: "black pixels rate".to_string(),
            good_color: "#1f77b4".to_string(),
            not_good_color: "#d62728".to_string(),
            boundary_color: "#5fb7e5".to_string(),
            margin_color: "#ff7f0e".to_string(),
        }
    }
}

/// Data-space rectangle, horizontal = uniformity, vertical = black rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    /// Bounding box of `pts` grown by 5% of each span on every side.
    pub fn padded(pts: &[(f64, f64)]) -> Option<Self> {
        let first = pts.first()?;
        let mut b = Bounds {
            x_min: first.0,
            x_max: first.0,
            y_min: first.1,
            y_max: first.1,
        };
        for &(x, y) in pts {
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_min = b.y_min.min(y);
            b.y_max = b.y_max.max(y);
        }
        let pad = |lo: f64, hi: f64| {
            let span = hi - lo;
            if span > 0.0 {
                (lo - 0.05 * span, hi + 0.05 * span)
            } else {
                let d = 0.05 * lo.abs().max(1.0);
                (lo - d, hi + d)
            }
        };
        (b.x_min, b.x_max) = pad(b.x_min, b.x_max);
        (b.y_min, b.y_max) = pad(b.y_min, b.y_max);
        Some(b)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// `screen = (sx * x + tx, sy * y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub sx: f64,
    pub tx: f64,
    pub sy: f64,
    pub ty: f64,
}

impl Affine {
    fn fit(b: &Bounds, spec: &PlotSpec) -> Self {
        let sx = (spec.width - 2.0 * spec.padding) / (b.x_max - b.x_min);
        let sy = -(spec.height - 2.0 * spec.padding) / (b.y_max - b.y_min);
        Affine {
            sx,
            tx: spec.padding - sx * b.x_min,
            sy,
            ty: spec.height - spec.padding - sy * b.y_min,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.sx * x + self.tx, self.sy * y + self.ty)
    }

    pub fn invert(&self, sx: f64, sy: f64) -> (f64, f64) {
        ((sx - self.tx) / self.sx, (sy - self.ty) / self.sy)
    }

    /// Parses the `affine` comment of an emitted SVG.
    pub fn from_svg(svg: &str) -> Option<Self> {
        let start = svg.find("<!-- affine ")? + "<!-- affine ".len();
        let end = start + svg[start..].find("-->")?;
        let mut vals = [None; 4];
        for kv in svg[start..end].split_whitespace() {
            let (k, v) = kv.split_once('=')?;
            let slot = ["sx", "tx", "sy", "ty"].iter().position(|n| *n == k)?;
            vals[slot] = Some(v.parse().ok()?);
        }
        Some(Affine {
            sx: vals[0]?,
            tx: vals[1]?,
            sy: vals[2]?,
            ty: vals[3]?,
        })
    }
}

/// A labeled point in raw feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub features: FeatureVector,
    pub label: Label,
}

fn display(v: &FeatureVector) -> (f64, f64) {
    (v.uniformity, v.black_pixel_rate)
}

/// A linear decision function `a * x + b * y = c + level` in display
/// coordinates (x = uniformity, y = black rate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplayLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl DisplayLine {
    /// The model's linear decision function rewritten over raw features.
    pub fn from_model(model: &SvmModel) -> Option<Self> {
        let w = model.weights()?;
        let nz = model.normalizer();
        let (mins, maxs) = (nz.mins(), nz.maxs());
        let r0 = maxs[0] - mins[0];
        let r1 = maxs[1] - mins[1];
        // f = w0 (rate - m0)/r0 + w1 (unif - m1)/r1 - offset
        let a = w[1] / r1;
        let b = w[0] / r0;
        let c = model.offset() + w[0] * mins[0] / r0 + w[1] * mins[1] / r1;
        (a.is_finite() && b.is_finite() && c.is_finite() && (a != 0.0 || b != 0.0))
            .then_some(DisplayLine { a, b, c })
    }

    /// Segment of `a x + b y = c + level` inside `bounds`, if any.
    pub fn clip(&self, level: f64, bounds: &Bounds) -> Option<((f64, f64), (f64, f64))> {
        let rhs = self.c + level;
        let mut hits: Vec<(f64, f64)> = Vec::new();
        if self.b != 0.0 {
            for x in [bounds.x_min, bounds.x_max] {
                let y = (rhs - self.a * x) / self.b;
                if y >= bounds.y_min && y <= bounds.y_max {
                    hits.push((x, y));
                }
            }
        }
        if self.a != 0.0 {
            for y in [bounds.y_min, bounds.y_max] {
                let x = (rhs - self.b * y) / self.a;
                if x >= bounds.x_min && x <= bounds.x_max {
                    hits.push((x, y));
                }
            }
        }
        // the two hits farthest apart along the line direction
        let dir = (self.b, -self.a);
        let key = |p: &(f64, f64)| p.0 * dir.0 + p.1 * dir.1;
        let lo = hits.iter().copied().min_by(|p, q| key(p).total_cmp(&key(q)))?;
        let hi = hits.iter().copied().max_by(|p, q| key(p).total_cmp(&key(q)))?;
        (lo != hi).then_some((lo, hi))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the scatter plot. A linear `model` adds the boundary, dashed
/// margin lines at decision values -1 and +1 and circles around its support
/// vectors; other kernels get the points and a notice comment.
pub fn render_svg(points: &[PlotPoint], model: Option<&SvmModel>, spec: &PlotSpec) -> Result<String, PlotError> {
    if spec.width <= 2.0 * spec.padding || spec.height <= 2.0 * spec.padding {
        return Err(PlotError::DimensionMismatch {
            width: spec.width,
            height: spec.height,
            padding: spec.padding,
        });
    }
    if points.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut coords: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let d = display(&p.features);
        if !(d.0.is_finite() && d.1.is_finite()) {
            return Err(PlotError::NonFinite(i));
        }
        coords.push(d);
    }
    let svs: Vec<(f64, f64)> = model
        .map(|m| {
            let nz = m.normalizer();
            let (mins, maxs) = (nz.mins(), nz.maxs());
            m.support_vectors()
                .iter()
                .map(|v| {
                    let rate = mins[0] + v[0] * (maxs[0] - mins[0]);
                    let unif = mins[1] + v[1] * (maxs[1] - mins[1]);
                    (unif, rate)
                })
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect()
        })
        .unwrap_or_default();
    let all: Vec<(f64, f64)> = coords.iter().chain(&svs).copied().collect();
    let bounds = Bounds::padded(&all).ok_or(PlotError::Empty)?;
    let t = Affine::fit(&bounds, spec);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(s, "<!-- affine sx={} tx={} sy={} ty={} -->", t.sx, t.tx, t.sy, t.ty);
    let _ = writeln!(
        s,
        "<!-- bounds x_min={} x_max={} y_min={} y_max={} -->",
        bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">{}</text>"#,
        spec.width / 2.0,
        spec.padding / 2.0,
        escape(&spec.title)
    );
    axes(&mut s, &bounds, &t, spec);

    if let Some(m) = model {
        match DisplayLine::from_model(m) {
            Some(line) => {
                for (level, class, color, dash) in [
                    (0.0, "boundary", &spec.boundary_color, ""),
                    (-1.0, "margin", &spec.margin_color, r#" stroke-dasharray="6 4""#),
                    (1.0, "margin", &spec.margin_color, r#" stroke-dasharray="6 4""#),
                ] {
                    match line.clip(level, &bounds) {
                        Some((p, q)) => {
                            let (x1, y1) = t.apply(p.0, p.1);
                            let (x2, y2) = t.apply(q.0, q.1);
                            let _ = writeln!(
                                s,
                                r#"<line class="{class}" data-level="{level}" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{color}" stroke-width="2"{dash}/>"#
                            );
                        }
                        None => {
                            let _ = writeln!(s, "<!-- {class} at level {level} lies outside the plotted area -->");
                        }
                    }
                }
            }
            None => {
                let _ = writeln!(
                    s,
                    "<!-- notice: {} kernel has no linear boundary; points only -->",
                    m.kernel_name()
                );
            }
        }
    }

    for (p, &(x, y)) in points.iter().zip(&coords) {
        let (cx, cy) = t.apply(x, y);
        let (class, color) = match p.label {
            Label::Good => ("good", &spec.good_color),
            Label::NotGood => ("not-good", &spec.not_good_color),
        };
        let _ = writeln!(
            s,
            r#"<circle class="point {class}" cx="{cx}" cy="{cy}" r="4" fill="{color}"/>"#
        );
    }
    if model.is_some_and(|m| m.weights().is_some()) {
        for &(x, y) in &svs {
            let (cx, cy) = t.apply(x, y);
            let _ = writeln!(
                s,
                r##"<circle class="support-vector" cx="{cx}" cy="{cy}" r="8" fill="none" stroke="#000000" stroke-width="1.5"/>"##
            );
        }
    }
    legend(&mut s, spec);
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes(s: &mut String, b: &Bounds, t: &Affine, spec: &PlotSpec) {
    let (x0, y0) = t.apply(b.x_min, b.y_min);
    let (x1, y1) = t.apply(b.x_max, b.y_max);
    let _ = writeln!(
        s,
        r##"<rect class="frame" x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#444444"/>"##,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = b.x_min + f * (b.x_max - b.x_min);
        let yv = b.y_min + f * (b.y_max - b.y_min);
        let (sx, _) = t.apply(xv, b.y_min);
        let (_, sy) = t.apply(b.x_min, yv);
        let _ = writeln!(
            s,
            r#"<text x="{sx}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
            y0 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
            x0 - 6.0,
            sy + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        (x0 + x1) / 2.0,
        spec.height - spec.padding / 4.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 {} {})">{}</text>"#,
        spec.padding / 4.0,
        (y0 + y1) / 2.0,
        spec.padding / 4.0,
        (y0 + y1) / 2.0,
        escape(&spec.y_label)
    );
}

fn tick(v: f64) -> String {
    let mag = v.abs();
    if mag != 0.0 && !(1e-3..1e4).contains(&mag) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(s: &mut String, spec: &PlotSpec) {
    let x = spec.width - spec.padding + 6.0;
    for (i, (name, color)) in [("good", &spec.good_color), ("not good", &spec.not_good_color)]
        .into_iter()
        .enumerate()
    {
        let y = spec.padding + 14.0 * i as f64;
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="4" fill="{color}"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10">{name}</text>"#,
            x + 7.0,
            y + 3.0
        );
    }
}

/// Bar chart of test accuracy per configuration. Failed configurations
/// are drawn as empty slots.
pub fn render_accuracy_svg(report: &ExperimentReport, spec: &PlotSpec) -> Result<String, PlotError> {
    if report.outcomes.is_empty() {
        return Err(PlotError::Empty);
    }
    let inner_w = spec.width - 2.0 * spec.padding;
    let inner_h = spec.height - 2.0 * spec.padding;
    if inner_w <= 0.0 || inner_h <= 0.0 {
        return Err(PlotError::DimensionMismatch {
            width: spec.width,
            height: spec.height,
            padding: spec.padding,
        });
    }
    let n = report.outcomes.len() as f64;
    let slot = inner_w / n;
    let base = spec.height - spec.padding;
    let winner = report.winner();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">Test accuracy</text>"#,
        spec.width / 2.0,
        spec.padding / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{base}" x2="{}" y2="{base}" stroke="#444444"/>"##,
        spec.padding,
        spec.width - spec.padding
    );
    for (i, o) in report.outcomes.iter().enumerate() {
        let x = spec.padding + slot * (i as f64 + 0.2);
        let label_x = spec.padding + slot * (i as f64 + 0.5);
        if let Ok(r) = &o.result {
            let h = inner_h * r.accuracy;
            let color = if winner == Some(i) { &spec.margin_color } else { &spec.boundary_color };
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-accuracy="{}" x="{x}" y="{}" width="{}" height="{h}" fill="{color}"/>"#,
                r.accuracy,
                base - h,
                slot * 0.6
            );
            let _ = writeln!(
                s,
                r#"<text x="{label_x}" y="{}" text-anchor="middle" font-size="12">{:.1}%</text>"#,
                base - h - 4.0,
                100.0 * r.accuracy
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{label_x}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            base + 16.0,
            escape(&o.config.describe())
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
