//! Sequential minimal optimization for the soft-margin dual
//!
//! ```text
//! min_a  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Working pairs are chosen with second-order information (maximal violating
//! `i`, then the `j` giving the largest guaranteed decrease). The solver stops
//! once the maximal KKT violation `m(a) - M(a)` drops below the tolerance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::{Kernel, Point};

const TAU: f64 = 1e-12;

/// Above this many rows the kernel is evaluated on demand instead of cached.
const DENSE_GRAM_LIMIT: usize = 4096;

enum Gram<'a> {
    Dense { n: usize, values: Vec<f64> },
    Lazy {
        kernel: &'a dyn Kernel,
        points: &'a [Point],
        diag: Vec<f64>,
    },
}

impl<'a> Gram<'a> {
    fn new(kernel: &'a dyn Kernel, points: &'a [Point]) -> Self {
        let n = points.len();
        if n <= DENSE_GRAM_LIMIT {
            let mut values = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let k = kernel.eval(&points[i], &points[j]);
                    values[i * n + j] = k;
                    values[j * n + i] = k;
                }
            }
            Gram::Dense { n, values }
        } else {
            let diag = points.iter().map(|p| kernel.eval(p, p)).collect();
            Gram::Lazy {
                kernel,
                points,
                diag,
            }
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Gram::Dense { n, values } => values[i * n + j],
            Gram::Lazy { kernel, points, .. } => kernel.eval(&points[i], &points[j]),
        }
    }

    fn diag(&self, i: usize) -> f64 {
        match self {
            Gram::Dense { n, values } => values[i * n + i],
            Gram::Lazy { diag, .. } => diag[i],
        }
    }
}

/// Dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub alphas: Vec<f64>,
    /// Offset `b` of `f(x) = sum a_i y_i K(x_i, x) - b`.
    pub offset: f64,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub gap: f64,
    pub converged: bool,
}

pub struct SmoParams {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

/// Runs SMO until the violation falls below `tolerance` or the iteration
/// budget is spent. `labels` hold `+1.0` / `-1.0`.
pub fn solve(kernel: &dyn Kernel, points: &[Point], labels: &[f64], params: &SmoParams) -> Solution {
    let n = points.len();
    let c = params.c;
    let gram = Gram::new(kernel, points);
    let y = labels;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));

    let mut alpha = vec![0.0; n];
    // gradient of the dual objective: Q a - e
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < params.max_iterations {
        // i: maximal -y_t G_t over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for &t in &order {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // j: second-order choice over the "low" set; gmin tracks the
        // minimal -y_t G_t for the stopping rule
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_decrease = f64::INFINITY;
        if i != usize::MAX {
            let kii = gram.diag(i);
            for &t in &order {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = kii + gram.diag(t) - 2.0 * gram.get(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let decrease = -(b * b) / a;
                    if decrease < best_decrease {
                        best_decrease = decrease;
                        j = t;
                    }
                }
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < params.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = gram.get(i, j);
        let mut quad = gram.diag(i) + gram.diag(j) - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += y[k] * (y[i] * gram.get(i, k) * di + y[j] * gram.get(j, k) * dj);
        }
    }

    Solution {
        offset: offset(&alpha, &grad, y, c),
        alphas: alpha,
        iterations,
        gap,
        converged,
    }
}

/// Average of `y_t G_t` over free multipliers, or the midpoint of the
/// feasible interval when none is free.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
