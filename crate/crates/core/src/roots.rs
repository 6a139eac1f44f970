//! Bracketing root finder (Illinois regula falsi with bisection fallback).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f = {f_lo}, {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {0} iterations")]
    MaxIter(usize),
    #[error("function returned a non-finite value at {0}")]
    NotFinite(f64),
}

/// Finds `x` in `[lo, hi]` with `|f(x)| <= ftol`. `f(lo)` and `f(hi)` must
/// have opposite signs (or one of them must already be within tolerance).
pub fn find_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64, RootError> {
    const MAX_ITER: usize = 500;
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(RootError::NotFinite(x))
        }
    };
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    if f_lo.abs() <= ftol {
        return Ok(lo);
    }
    if f_hi.abs() <= ftol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(RootError::NoBracket { lo, hi, f_lo, f_hi });
    }
    // Which end was retained last step; a repeat halves its stored value.
    let mut side = 0i8;
    for iter in 0..MAX_ITER {
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        // Every fourth step bisects so a stalled secant cannot stall the bracket.
        if !(x > lo && x < hi) || iter % 4 == 3 {
            x = 0.5 * (lo + hi);
        }
        let fx = eval(x)?;
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            let x = 0.5 * (lo + hi);
            let fx = eval(x)?;
            if fx.abs() <= ftol {
                return Ok(x);
            }
            return Err(RootError::MaxIter(iter));
        }
    }
    Err(RootError::MaxIter(MAX_ITER))
}
