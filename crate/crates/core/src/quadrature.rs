//! Composite Simpson quadrature with interval doubling.
//!
//! The range is split at caller-supplied breakpoints (kinks or jumps of the
//! integrand) and each smooth piece is refined by doubling its interval
//! count until two successive Simpson estimates agree. Refinement reuses
//! the previous trapezoid sum, so each doubling only evaluates new midpoints.

use thiserror::Error;

/// Successive-estimate tolerance used by model evaluation.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Interval cap per integral.
pub const MAX_INTERVALS: usize = 1 << 20;

const MIN_INTERVALS: usize = 16;

const ENDPOINT_NUDGE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
#[error("quadrature did not converge: {intervals} intervals, last change {change:e}, estimate {estimate}")]
pub struct QuadError {
    pub intervals: usize,
    pub change: f64,
    pub estimate: f64,
}

struct Piece {
    a: f64,
    b: f64,
    n: usize,
    /// Sum of interior and half-weighted end values at spacing (b − a)/n.
    trapezoid_sum: f64,
    simpson: f64,
    done: bool,
}

impl Piece {
    fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    fn refine<F: Fn(f64) -> f64>(&mut self, f: &F) -> f64 {
        let h = self.h();
        let mids: f64 = (0..self.n).map(|i| f(self.a + (i as f64 + 0.5) * h)).sum();
        let old_t = self.trapezoid_sum * h;
        self.trapezoid_sum += mids;
        self.n *= 2;
        let new_t = self.trapezoid_sum * self.h();
        (4.0 * new_t - old_t) / 3.0
    }
}

/// Integrates `f` over `[a, b]`, splitting at every breakpoint strictly
/// inside the range. Stops when the summed change between successive
/// estimates is below `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> Result<f64, QuadError> {
    if b == a {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, breakpoints, tol).map(|v| -v);
    }
    let width = b - a;
    let scale = a.abs().max(b.abs()).max(width);
    // A breakpoint on a range end means the integrand jumps there too.
    let near = |x: f64, end: f64| (x - end).abs() <= ENDPOINT_NUDGE * scale;
    let jump_at_a = breakpoints.iter().any(|&x| near(x, a));
    let jump_at_b = breakpoints.iter().any(|&x| near(x, b));
    let mut cuts: Vec<f64> =
        breakpoints.iter().copied().filter(|&x| x > a + 1e-14 * width && x < b - 1e-14 * width).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * width);

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut pieces: Vec<Piece> = edges
        .windows(2)
        .map(|w| {
            let (pa, pb) = (w[0], w[1]);
            // End values at interior cuts are one-sided limits so a jump
            // sitting on a cut does not leak the neighbouring piece's value
            // into this one. The
            // nudge scales with the coordinates, since a cut computed by the
            // caller can miss the true jump by a few ulps of |x|.
            let nudge = (ENDPOINT_NUDGE * scale).min(0.1 * (pb - pa));
            let left = if pa == a && !jump_at_a { pa } else { pa + nudge };
            let right = if pb == b && !jump_at_b { pb } else { pb - nudge };
            let ends = f(left) + f(right);
            let mut p = Piece { a: pa, b: pb, n: 1, trapezoid_sum: 0.5 * ends, simpson: 0.0, done: false };
            while p.n < MIN_INTERVALS / 2 {
                p.refine(&f);
            }
            p.simpson = p.refine(&f);
            p
        })
        .collect();

    loop {
        let mut change = 0.0;
        let mut intervals = 0;
        for p in pieces.iter_mut().filter(|p| !p.done) {
            let next = p.refine(&f);
            let c = (next - p.simpson).abs();
            p.simpson = next;
            // Each piece gets a share of the tolerance proportional to its length.
            if c < tol * (p.b - p.a) / width {
                p.done = true;
            }
            change += c;
        }
        for p in &pieces {
            intervals += p.n;
        }
        let estimate: f64 = pieces.iter().map(|p| p.simpson).sum();
        if !estimate.is_finite() {
            return Err(QuadError { intervals, change, estimate });
        }
        if pieces.iter().all(|p| p.done) || change < tol {
            return Ok(estimate);
        }
        if intervals >= MAX_INTERVALS {
            return Err(QuadError { intervals, change, estimate });
        }
    }
}
