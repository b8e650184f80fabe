//! Pointwise evaluation: CDF, partial derivatives, AC density and
//! rectangle probabilities, including quadrature for numeric folds.

use rayon::prelude::*;
use serde::Serialize;

use super::{bvn, CopulaSpec, Family, Rect, Smoothness};
use crate::error::{domain, Error, Result};
use crate::normal;
use crate::quadrature::{integrate_panels, panel_edges};

/// Distance from the boundary below which the Gaussian density is refused.
const GAUSSIAN_EDGE: f64 = 1e-15;

fn check_closed(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name}={x} is outside [0, 1]")));
    }
    Ok(())
}

fn check_open(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(domain(format!("{name}={x} is outside (0, 1)")));
    }
    Ok(())
}

/// `C(u, v)`.
///
/// Boundary values are returned exactly: `C(u, 0) = C(0, v) = 0`,
/// `C(u, 1) = u`, `C(1, v) = v`.
pub fn cdf(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    check_closed("u", u)?;
    check_closed("v", v)?;
    cdf_raw(c, u, v)
}

pub(crate) fn cdf_raw(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    if u == 0.0 || v == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(v);
    }
    if v == 1.0 {
        return Ok(u);
    }
    Ok(match c.family() {
        Family::Independence => u * v,
        Family::M => u.min(v),
        Family::W => (u + v - 1.0).max(0.0),
        Family::Fgm { theta } => u * v * (1.0 + theta * (1.0 - u) * (1.0 - v)),
        Family::Mardia { .. } | Family::Frechet { .. } => {
            let (a, b) = c.mardia_params().expect("mardia family");
            a * u.min(v) + b * (u + v - 1.0).max(0.0) + (1.0 - a - b) * u * v
        }
        Family::Gaussian { r } => {
            bvn::bivariate_normal_cdf(normal::inv_cdf(u), normal::inv_cdf(v), *r)
        }
        Family::Amh { theta } => u * v / (1.0 - theta * (1.0 - u) * (1.0 - v)),
        Family::Convex {
            weights,
            components,
        } => {
            let mut s = 0.0;
            for (w, ci) in weights.iter().zip(components) {
                s += w * cdf_raw(ci, u, v)?;
            }
            s
        }
        Family::NumericFold { left, right } => nf_cdf(left, right, u, v)?,
    })
}

/// `C,₁(u, v) = ∂C/∂u`, the transition CDF `P(X₁ <= v | X₀ = u)`.
///
/// At the discontinuities of `M` (`u = v`) and `W` (`u + v = 1`) the
/// value 1 is returned.
pub fn conditional_cdf(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    check_open("u", u)?;
    check_closed("v", v)?;
    d1(c, u, v)
}

/// `C,₂(u, v) = ∂C/∂v`, the reverse-time transition CDF
/// `P(X₀ <= u | X₁ = v)`.
pub fn conditional_cdf_v(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    check_closed("u", u)?;
    check_open("v", v)?;
    d2(c, u, v)
}

pub(crate) fn d1(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    if v <= 0.0 {
        return Ok(0.0);
    }
    if v >= 1.0 {
        return Ok(1.0);
    }
    Ok(match c.family() {
        Family::Independence => v,
        Family::M => indicator(u <= v),
        Family::W => indicator(u + v >= 1.0),
        Family::Fgm { theta } => v + theta * (1.0 - 2.0 * u) * v * (1.0 - v),
        Family::Mardia { .. } | Family::Frechet { .. } => {
            let (a, b) = c.mardia_params().expect("mardia family");
            (1.0 - a - b) * v + a * indicator(u <= v) + b * indicator(u + v >= 1.0)
        }
        Family::Gaussian { r } => {
            let s = (1.0 - r * r).sqrt();
            normal::cdf((normal::inv_cdf(v) - r * normal::inv_cdf(u)) / s)
        }
        Family::Amh { theta } => {
            let d = 1.0 - theta * (1.0 - u) * (1.0 - v);
            v * (1.0 - theta * (1.0 - v)) / (d * d)
        }
        Family::Convex {
            weights,
            components,
        } => {
            let mut s = 0.0;
            for (w, ci) in weights.iter().zip(components) {
                s += w * d1(ci, u, v)?;
            }
            s
        }
        Family::NumericFold { left, right } => {
            if !full_density_available(left) {
                return Err(Error::Unsupported(format!(
                    "conditional CDF of {} needs an absolutely continuous left factor",
                    c.label()
                )));
            }
            let edges = fold_edges(left, right, u, v);
            try_integrate(&edges, |t| Ok(dens(left, u, t)? * d1(right, t, v)?))?
        }
    })
}

pub(crate) fn d2(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u >= 1.0 {
        return Ok(1.0);
    }
    match c.family() {
        Family::Convex {
            weights,
            components,
        } => {
            let mut s = 0.0;
            for (w, ci) in weights.iter().zip(components) {
                s += w * d2(ci, u, v)?;
            }
            Ok(s)
        }
        Family::NumericFold { left, right } => {
            if !full_density_available(right) {
                return Err(Error::Unsupported(format!(
                    "partial derivative in v of {} needs an absolutely continuous right factor",
                    c.label()
                )));
            }
            let edges = fold_edges(left, right, u, v);
            try_integrate(&edges, |t| Ok(d2(left, u, t)? * dens(right, t, v)?))
        }
        // Every closed-form family is exchangeable.
        _ => d1(c, v, u),
    }
}

#[inline]
fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Density of the absolutely continuous part at `(u, v) ∈ (0, 1)²`.
///
/// Singular families contribute nothing (`M` and `W` return 0). Numeric
/// folds are supported only when both factors are absolutely continuous.
pub fn density(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    check_open("u", u)?;
    check_open("v", v)?;
    if uses_gaussian(c) {
        let near = |x: f64| !(GAUSSIAN_EDGE..=1.0 - GAUSSIAN_EDGE).contains(&x);
        if near(u) || near(v) {
            return Err(domain(format!(
                "Gaussian density at ({u}, {v}) is too close to the boundary to evaluate"
            )));
        }
    }
    dens(c, u, v)
}

fn uses_gaussian(c: &CopulaSpec) -> bool {
    match c.family() {
        Family::Gaussian { .. } => true,
        Family::Convex { components, .. } => components.iter().any(uses_gaussian),
        Family::NumericFold { left, right } => uses_gaussian(left) || uses_gaussian(right),
        _ => false,
    }
}

/// True when the copula is absolutely continuous and its density can be
/// evaluated.
pub(crate) fn full_density_available(c: &CopulaSpec) -> bool {
    match c.family() {
        Family::NumericFold { left, right } => {
            full_density_available(left) && full_density_available(right)
        }
        Family::Convex { components, .. } => components.iter().all(full_density_available),
        _ => !c.has_singular_part(),
    }
}

/// True when the AC density (possibly of a copula with a singular part)
/// can be evaluated.
pub(crate) fn ac_density_available(c: &CopulaSpec) -> bool {
    match c.family() {
        Family::NumericFold { .. } => full_density_available(c),
        Family::Convex { components, .. } => components.iter().all(ac_density_available),
        _ => true,
    }
}

pub(crate) fn dens(c: &CopulaSpec, u: f64, v: f64) -> Result<f64> {
    Ok(match c.family() {
        Family::Independence => 1.0,
        Family::M | Family::W => 0.0,
        Family::Fgm { theta } => 1.0 + theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v),
        Family::Mardia { .. } | Family::Frechet { .. } => {
            let (a, b) = c.mardia_params().expect("mardia family");
            (1.0 - a - b).max(0.0)
        }
        Family::Gaussian { r } => gaussian_density(*r, u, v),
        Family::Amh { theta } => {
            let d = 1.0 - theta * (1.0 - u) * (1.0 - v);
            ((1.0 - theta) * d + 2.0 * theta * u * v) / (d * d * d)
        }
        Family::Convex {
            weights,
            components,
        } => {
            let mut s = 0.0;
            for (w, ci) in weights.iter().zip(components) {
                s += w * dens(ci, u, v)?;
            }
            s
        }
        Family::NumericFold { left, right } => {
            if !full_density_available(left) || !full_density_available(right) {
                return Err(Error::DensityUnavailable(format!(
                    "{} has a singular factor",
                    c.label()
                )));
            }
            let edges = fold_edges(left, right, u, v);
            try_integrate(&edges, |t| Ok(dens(left, u, t)? * dens(right, t, v)?))?
        }
    })
}

fn gaussian_density(r: f64, u: f64, v: f64) -> f64 {
    let a = normal::inv_cdf(u);
    let b = normal::inv_cdf(v);
    let s2 = 1.0 - r * r;
    let q = (r * r * (a * a + b * b) - 2.0 * r * a * b) / (2.0 * s2);
    (-q).exp() / s2.sqrt()
}

/// `P(U ∈ (u_lo, u_hi], V ∈ (v_lo, v_hi])`.
///
/// Singular masses of `M` and `W` are computed exactly from interval
/// overlaps; numeric folds integrate a product of two nonnegative
/// increments so the result cannot go meaningfully negative.
pub fn rectangle_probability(c: &CopulaSpec, r: &Rect) -> Result<f64> {
    rect_raw(c, r.u_lo(), r.u_hi(), r.v_lo(), r.v_hi())
}

pub(crate) fn rect_raw(c: &CopulaSpec, ul: f64, uh: f64, vl: f64, vh: f64) -> Result<f64> {
    let m_mass = || (uh.min(vh) - ul.max(vl)).max(0.0);
    let w_mass = || (uh.min(1.0 - vl) - ul.max(1.0 - vh)).max(0.0);
    Ok(match c.family() {
        Family::Independence => (uh - ul) * (vh - vl),
        Family::M => m_mass(),
        Family::W => w_mass(),
        Family::Mardia { .. } | Family::Frechet { .. } => {
            let (a, b) = c.mardia_params().expect("mardia family");
            a * m_mass() + b * w_mass() + (1.0 - a - b) * (uh - ul) * (vh - vl)
        }
        Family::Convex {
            weights,
            components,
        } => {
            let mut s = 0.0;
            for (w, ci) in weights.iter().zip(components) {
                s += w * rect_raw(ci, ul, uh, vl, vh)?;
            }
            s
        }
        Family::NumericFold { left, right } => {
            let mut pts = Vec::with_capacity(8);
            kinks(left, ul, &mut pts);
            kinks(left, uh, &mut pts);
            kinks(right, vl, &mut pts);
            kinks(right, vh, &mut pts);
            let edges = with_smoothness_grid(pts, left.smoothness().max(right.smoothness()));
            try_integrate(&edges, |t| {
                let a = d2(left, uh, t)? - d2(left, ul, t)?;
                let b = d1(right, t, vh)? - d1(right, t, vl)?;
                Ok(a * b)
            })?
        }
        _ => {
            cdf_raw(c, uh, vh)? - cdf_raw(c, ul, vh)? - cdf_raw(c, uh, vl)? + cdf_raw(c, ul, vl)?
        }
    })
}

fn nf_cdf(left: &CopulaSpec, right: &CopulaSpec, x: f64, y: f64) -> Result<f64> {
    let edges = fold_edges(left, right, x, y);
    try_integrate(&edges, |t| Ok(d2(left, x, t)? * d1(right, t, y)?))
}

/// Indicator breakpoints in `t` of `∂₂C(s, t)` (equivalently `∂₁C(t, s)`).
fn kinks(c: &CopulaSpec, s: f64, out: &mut Vec<f64>) {
    if let Some((a, b)) = c.mardia_params() {
        if a > 0.0 {
            out.push(s);
        }
        if b > 0.0 {
            out.push(1.0 - s);
        }
    } else if let Family::Convex { components, .. } = c.family() {
        for ci in components {
            kinks(ci, s, out);
        }
    }
}

fn fold_edges(left: &CopulaSpec, right: &CopulaSpec, x: f64, y: f64) -> Vec<f64> {
    let mut pts = Vec::with_capacity(4);
    kinks(left, x, &mut pts);
    kinks(right, y, &mut pts);
    with_smoothness_grid(pts, left.smoothness().max(right.smoothness()))
}

fn with_smoothness_grid(mut pts: Vec<f64>, s: Smoothness) -> Vec<f64> {
    match s {
        Smoothness::Polynomial => {}
        Smoothness::Smooth => pts.extend([0.25, 0.5, 0.75]),
        Smoothness::EndpointSingular => {
            pts.extend((1..10).map(|k| k as f64 / 10.0));
            for k in 2..=12 {
                let e = 10f64.powi(-k);
                pts.push(e);
                pts.push(1.0 - e);
            }
        }
    }
    panel_edges(pts)
}

fn try_integrate<F>(edges: &[f64], mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut err = None;
    let v = integrate_panels(edges, |t| match f(t) {
        Ok(x) => x,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// AC density sampled at the midpoints `((i + ½)/m, (j + ½)/m)` of an
/// `m × m` grid; `values[i * m + j]` holds cell `(i, j)` with `i` the
/// `u` index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    resolution: usize,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn from_values(resolution: usize, values: Vec<f64>) -> Result<Self> {
        if resolution == 0 || values.len() != resolution * resolution {
            return Err(Error::ResolutionMismatch {
                grid: values.len(),
                decomposition: resolution * resolution,
            });
        }
        if let Some(x) = values.iter().find(|x| x.is_nan() || **x < 0.0) {
            return Err(domain(format!("density grid entries must be >= 0, got {x}")));
        }
        Ok(Self { resolution, values })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Midpoint-rule integral of the density over the unit square.
    pub fn riemann_sum(&self) -> f64 {
        let m = self.resolution as f64;
        self.values.iter().sum::<f64>() / (m * m)
    }
}

/// Evaluates the AC density on the `m × m` midpoint grid.
pub fn density_grid(c: &CopulaSpec, m: usize) -> Result<DensityGrid> {
    if m == 0 {
        return Err(domain("grid resolution must be positive"));
    }
    if !ac_density_available(c) {
        return Err(Error::DensityUnavailable(format!(
            "{} has a singular fold factor",
            c.label()
        )));
    }
    let h = 1.0 / m as f64;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            (0..m)
                .map(|j| dens(c, u, (j as f64 + 0.5) * h).map(|d| d.max(0.0)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DensityGrid {
        resolution: m,
        values: rows.into_iter().flatten().collect(),
    })
}
