//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadeprune::svm::Point;
use shadeprune::Label;

/// Exhaustive Otsu: for each `t` in `1..=255` partition the raw pixels into
/// `< t` and `>= t`, score the split and keep the first maximum.
///
/// Scores are compared exactly. With `n0, n1` class sizes and `s0, s1`
/// intensity sums, `N^2 * sigma_b^2 = (s0*n1 - s1*n0)^2 / (n0*n1)`.
pub fn brute_force_otsu(pixels: &[u8]) -> Option<u8> {
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 1..=255u16 {
        let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for &p in pixels {
            if u16::from(p) < t {
                n0 += 1;
                s0 += u128::from(p);
            } else {
                n1 += 1;
                s1 += u128::from(p);
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 * n1).abs_diff(s1 * n0);
        let num = diff * diff;
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

/// Floating-point class statistics from first principles for threshold `t`:
/// `(w0, w1, mu0, mu1, var0, var1)` or `None` when a class is empty.
pub fn class_stats(pixels: &[u8], t: usize) -> Option<(f64, f64, f64, f64, f64, f64)> {
    let (a, b): (Vec<f64>, Vec<f64>) = {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &p in pixels {
            if (p as usize) < t {
                a.push(p as f64);
            } else {
                b.push(p as f64);
            }
        }
        (a, b)
    };
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let n = pixels.len() as f64;
    Some((
        a.len() as f64 / n,
        b.len() as f64 / n,
        mean(&a),
        mean(&b),
        two_pass_variance(&a),
        two_pass_variance(&b),
    ))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance, mean first then squared deviations.
pub fn two_pass_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Gray value straight from the formula with round-half-up, in rationals.
pub fn gray_formula(r: u8, g: u8, b: u8) -> u8 {
    // 0.21 r + 0.72 g + 0.07 b = (21 r + 72 g + 7 b) / 100
    let num = 21 * u32::from(r) + 72 * u32::from(g) + 7 * u32::from(b);
    let q = num / 100;
    let rem = num % 100;
    (if rem >= 50 { q + 1 } else { q }) as u8
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Half-width of the widest separating slab for unit normal `w`, or a
/// non-positive value if `w` does not separate.
fn slab(points: &[Point], labels: &[Label], w: Point) -> f64 {
    let mut min_pos = f64::INFINITY;
    let mut max_neg = f64::NEG_INFINITY;
    for (p, l) in points.iter().zip(labels) {
        let v = dot(*p, w);
        match l {
            Label::Good => min_pos = min_pos.min(v),
            Label::NotGood => max_neg = max_neg.max(v),
        }
    }
    (min_pos - max_neg) / 2.0
}

/// Hard-margin SVM in the plane by support-set enumeration.
///
/// The optimal normal is either the direction between one positive and one
/// negative point, or perpendicular to the segment between two points of the
/// same class. Every candidate is scored by its separating slab; the best
/// returns `(unit normal pointing to the positive class, half-width)`.
pub fn hard_margin_oracle(points: &[Point], labels: &[Label]) -> Option<(Point, f64)> {
    let mut candidates: Vec<Point> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = [points[j][0] - points[i][0], points[j][1] - points[i][1]];
            let len = d[0].hypot(d[1]);
            if len == 0.0 {
                continue;
            }
            let u = [d[0] / len, d[1] / len];
            if labels[i] != labels[j] {
                candidates.push(u);
                candidates.push([-u[0], -u[1]]);
            } else {
                candidates.push([-u[1], u[0]]);
                candidates.push([u[1], -u[0]]);
            }
        }
    }
    candidates
        .into_iter()
        .map(|w| (w, slab(points, labels, w)))
        .filter(|(_, m)| *m > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Random linearly separable set in the unit square with both classes
/// present, built around a random line with an empty band of `gap`.
pub fn separable_set(seed: u64, n: usize, gap: f64) -> (Vec<Point>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let w = [theta.cos(), theta.sin()];
    let b = dot(w, [0.5, 0.5]) + rng.gen_range(-0.1..0.1);
    loop {
        let mut pts = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        while pts.len() < n {
            let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let v = dot(w, p) - b;
            if v.abs() < gap / 2.0 {
                continue;
            }
            pts.push(p);
            labels.push(if v > 0.0 { Label::Good } else { Label::NotGood });
        }
        let pos = labels.iter().filter(|l| **l == Label::Good).count();
        if pos > 0 && pos < n {
            return (pts, labels);
        }
    }
}

/// Soft-margin KKT residual of a fitted decision function: the largest
/// amount by which any training row breaks its complementary-slackness
/// condition.
pub fn kkt_residual(alphas: &[f64], margins: &[f64], c: f64) -> f64 {
    let scale = c.max(1.0);
    let mut worst: f64 = 0.0;
    for (&a, &m) in alphas.iter().zip(margins) {
        let v = if a <= 1e-12 * scale {
            (1.0 - m).max(0.0)
        } else if a >= c * (1.0 - 1e-12) {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// A `<line>` from an emitted plot, mapped back to data coordinates.
#[derive(Debug, Clone, Copy)]
pub struct DataSegment {
    pub class: &'static str,
    pub level: f64,
    pub p: (f64, f64),
    pub q: (f64, f64),
}

impl DataSegment {
    pub fn slope(&self) -> f64 {
        (self.q.1 - self.p.1) / (self.q.0 - self.p.0)
    }

    /// Perpendicular distance from `(x, y)` to the segment's line.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (self.q.0 - self.p.0, self.q.1 - self.p.1);
        ((x - self.p.0) * dy - (y - self.p.1) * dx).abs() / dx.hypot(dy)
    }
}

/// Parses the SVG as XML and returns its boundary and margin lines in data
/// coordinates, using the affine transform recorded in the document.
pub fn plot_segments(svg: &str) -> Vec<DataSegment> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed XML");
    let t = shadeprune::plot::Affine::from_svg(svg).expect("affine comment");
    doc.descendants()
        .filter(|n| n.has_tag_name("line"))
        .filter_map(|n| {
            let class = match n.attribute("class")? {
                "boundary" => "boundary",
                "margin" => "margin",
                _ => return None,
            };
            let f = |k: &str| n.attribute(k).unwrap().parse::<f64>().unwrap();
            Some(DataSegment {
                class,
                level: f("data-level"),
                p: t.invert(f("x1"), f("y1")),
                q: t.invert(f("x2"), f("y2")),
            })
        })
        .collect()
}

pub fn count_class(svg: &str, class: &str) -> usize {
    let doc = roxmltree::Document::parse(svg).expect("well-formed XML");
    doc.descendants()
        .filter(|n| n.attribute("class").is_some_and(|c| c.split(' ').any(|x| x == class)))
        .count()
}
