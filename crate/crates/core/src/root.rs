//! Root finding for monotone functions on a bracket.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once `|f(x) - target| <= ftol`.
    pub ftol: f64,
    /// Stop once the bracket is narrower than `xtol`.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-12,
            xtol: 1e-15,
            max_iter: 100,
        }
    }
}

/// Solves `f(x) = target` for nondecreasing `f` on `[lo, hi]` with Newton
/// steps, falling back to bisection whenever a step leaves the current
/// bracket or the derivative vanishes.
pub fn safeguarded_newton<F, D>(
    f: F,
    df: D,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    opts: RootOptions,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..opts.max_iter {
        let r = f(x) - target;
        if r.abs() <= opts.ftol {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= opts.xtol {
            return Ok(0.5 * (lo + hi));
        }
        let d = df(x);
        let newton = if d > 0.0 { x - r / d } else { f64::NAN };
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let r = f(x) - target;
    if r.abs() <= opts.ftol {
        Ok(x)
    } else {
        Err(Error::Root(format!(
            "no convergence after {} iterations (residual {r:e})",
            opts.max_iter
        )))
    }
}

/// Plain bisection for nondecreasing `f` on `[lo, hi]`.
pub fn bisect<F>(f: F, target: f64, mut lo: f64, mut hi: f64, opts: RootOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    // Enough halvings to shrink [0,1] below machine resolution.
    let iters = opts.max_iter.max(200);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let r = f(mid) - target;
        if r.abs() <= opts.ftol || hi - lo <= opts.xtol {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
