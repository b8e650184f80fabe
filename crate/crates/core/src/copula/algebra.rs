//! Fold products, n-fold powers and perturbations.

use super::{eval, CopulaSpec, Family};
use crate::error::{domain, Error, Result};

/// Default limit on numeric-fold nesting produced by [`n_fold`].
pub const DEFAULT_FOLD_DEPTH_CAP: usize = 8;

fn fgm_or_pi(theta: f64) -> CopulaSpec {
    if theta == 0.0 {
        CopulaSpec::independence()
    } else {
        CopulaSpec(Family::Fgm { theta })
    }
}

fn mardia_or_named(a: f64, b: f64) -> CopulaSpec {
    match (a, b) {
        (a, b) if a == 0.0 && b == 0.0 => CopulaSpec::independence(),
        (1.0, _) => CopulaSpec::m(),
        (_, 1.0) => CopulaSpec::w(),
        _ => CopulaSpec(Family::Mardia { a, b }),
    }
}

/// Reflection `W * C`, available in closed form for the families that map
/// onto themselves under `(u, v) ↦ (1 - u, v)`.
fn reflect(c: &CopulaSpec) -> Option<CopulaSpec> {
    match c.family() {
        Family::Fgm { theta } => Some(fgm_or_pi(-theta)),
        Family::Gaussian { r } => Some(CopulaSpec(Family::Gaussian { r: -r })),
        _ => None,
    }
}

/// Fold product `c1 * c2`, the copula of `(X₀, X₂)` for a chain whose
/// consecutive copulas are `c1` then `c2`.
///
/// Closed forms are used wherever the pair is closed under `*`; anything
/// else becomes a [`Family::NumericFold`].
pub fn fold(c1: &CopulaSpec, c2: &CopulaSpec) -> CopulaSpec {
    if c1.is_independence() || c2.is_independence() {
        return CopulaSpec::independence();
    }
    if c1.is_m() {
        return c2.clone();
    }
    if c2.is_m() {
        return c1.clone();
    }
    if matches!(c1.family(), Family::Convex { .. }) || matches!(c2.family(), Family::Convex { .. })
    {
        let left = c1.terms();
        let right = c2.terms();
        let mut products = Vec::with_capacity(left.len() * right.len());
        for (w1, a) in &left {
            for (w2, b) in &right {
                products.push((w1 * w2, fold(a, b)));
            }
        }
        return CopulaSpec::convex_unchecked(products);
    }
    if let (Some((a1, b1)), Some((a2, b2))) = (c1.mardia_params(), c2.mardia_params()) {
        return mardia_or_named(a1 * a2 + b1 * b2, a1 * b2 + a2 * b1);
    }
    if c1.is_w() {
        if let Some(r) = reflect(c2) {
            return r;
        }
    }
    if c2.is_w() {
        if let Some(r) = reflect(c1) {
            return r;
        }
    }
    match (c1.family(), c2.family()) {
        (Family::Fgm { theta: t1 }, Family::Fgm { theta: t2 }) => fgm_or_pi(t1 * t2 / 3.0),
        (Family::Gaussian { r: r1 }, Family::Gaussian { r: r2 }) => {
            CopulaSpec(Family::Gaussian { r: r1 * r2 })
        }
        (Family::Fgm { theta }, _) if c2.mardia_params().is_some() => {
            let (a, b) = c2.mardia_params().expect("checked");
            fgm_or_pi((a - b) * theta)
        }
        (_, Family::Fgm { theta }) if c1.mardia_params().is_some() => {
            let (a, b) = c1.mardia_params().expect("checked");
            fgm_or_pi((a - b) * theta)
        }
        _ => CopulaSpec::numeric_fold(c1.clone(), c2.clone()),
    }
}

/// `Cⁿ`, the copula of `(X₀, Xₙ)`, with the default nesting cap.
pub fn n_fold(c: &CopulaSpec, n: u32) -> Result<CopulaSpec> {
    n_fold_with_cap(c, n, DEFAULT_FOLD_DEPTH_CAP)
}

/// `Cⁿ`, failing with a resource error when the result would nest more
/// than `cap` numeric folds.
pub fn n_fold_with_cap(c: &CopulaSpec, n: u32, cap: usize) -> Result<CopulaSpec> {
    if n == 0 {
        return Err(domain("n-fold power needs n >= 1"));
    }
    if n == 1 {
        return Ok(c.clone());
    }
    if c.is_independence() {
        return Ok(CopulaSpec::independence());
    }
    if c.is_m() {
        return Ok(CopulaSpec::m());
    }
    if let Some((a, b)) = c.mardia_params() {
        // (a + b) and (a - b) are the eigenvalues of the composition map.
        let s = (a + b).powi(n as i32);
        let d = (a - b).powi(n as i32);
        return Ok(mardia_or_named((s + d) / 2.0, (s - d) / 2.0));
    }
    match c.family() {
        Family::Fgm { theta } => return Ok(fgm_or_pi(3.0 * (theta / 3.0).powi(n as i32))),
        Family::Gaussian { r } => return Ok(CopulaSpec(Family::Gaussian { r: r.powi(n as i32) })),
        Family::Convex {
            weights,
            components,
        } => {
            if let Some(k) = components.iter().position(CopulaSpec::is_independence) {
                // (αΠ + (1-α)C')ⁿ = (1-α)ⁿ C'ⁿ + (1 - (1-α)ⁿ) Π since Π absorbs.
                let alpha = weights[k];
                let rest = CopulaSpec::convex_unchecked(
                    weights
                        .iter()
                        .zip(components)
                        .enumerate()
                        .filter(|(i, _)| *i != k)
                        .map(|(_, (w, ci))| (w / (1.0 - alpha), ci.clone())),
                );
                let keep = (1.0 - alpha).powi(n as i32);
                let base = n_fold_with_cap(&rest, n, cap)?;
                return Ok(CopulaSpec::convex_unchecked([
                    (keep, base),
                    (1.0 - keep, CopulaSpec::independence()),
                ]));
            }
        }
        _ => {}
    }
    let mut acc = c.clone();
    for _ in 1..n {
        acc = fold(&acc, c);
        if acc.fold_depth() > cap {
            return Err(Error::Resource(format!(
                "{n}-fold power of {} exceeds the numeric fold depth cap of {cap}",
                c.label()
            )));
        }
    }
    Ok(acc)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("perturbation alpha={alpha} is outside [0, 1]")));
    }
    Ok(())
}

/// `C + α(Π - C)`.
pub fn perturb_pi(c: &CopulaSpec, alpha: f64) -> Result<CopulaSpec> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(c.clone());
    }
    if alpha == 1.0 || c.is_independence() {
        return Ok(CopulaSpec::independence());
    }
    if let Family::Fgm { theta } = c.family() {
        return Ok(fgm_or_pi(theta * (1.0 - alpha)));
    }
    if let Some((a, b)) = c.mardia_params() {
        return Ok(mardia_or_named(a * (1.0 - alpha), b * (1.0 - alpha)));
    }
    Ok(CopulaSpec::convex_unchecked([
        (1.0 - alpha, c.clone()),
        (alpha, CopulaSpec::independence()),
    ]))
}

/// `C + α(M - C)`.
pub fn perturb_m(c: &CopulaSpec, alpha: f64) -> Result<CopulaSpec> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(c.clone());
    }
    if alpha == 1.0 {
        return Ok(CopulaSpec::m());
    }
    if let Some((a, b)) = c.mardia_params() {
        return Ok(mardia_or_named(a * (1.0 - alpha) + alpha, b * (1.0 - alpha)));
    }
    Ok(CopulaSpec::convex_unchecked([
        (1.0 - alpha, c.clone()),
        (alpha, CopulaSpec::m()),
    ]))
}

/// `(c1 * c2)(x, y)` by quadrature of the fold integral, bypassing every
/// closed-form rule. Used as the independent oracle for [`fold`].
pub fn numeric_fold_cdf(c1: &CopulaSpec, c2: &CopulaSpec, x: f64, y: f64) -> Result<f64> {
    eval::cdf(&CopulaSpec::numeric_fold(c1.clone(), c2.clone()), x, y)
}
