//! Bivariate copula families, their evaluation and their fold algebra.
//!
//! A [`CopulaSpec`] is an immutable, validated description of a copula.
//! Closed-form families are evaluated directly; [`Family::NumericFold`]
//! is the fallback produced by [`fold`] when a pair of copulas has no
//! closed-form product, and is evaluated by quadrature of the fold integral
//! `C₁ * C₂(x, y) = ∫₀¹ ∂₂C₁(x, t) ∂₁C₂(t, y) dt`.

mod algebra;
mod axioms;
mod bvn;
pub(crate) mod eval;

pub use algebra::{
    fold, n_fold, n_fold_with_cap, numeric_fold_cdf, perturb_m, perturb_pi, DEFAULT_FOLD_DEPTH_CAP,
};
pub use axioms::{check_copula_axioms, AxiomReport, AxiomViolation};
pub use bvn::bivariate_normal_cdf;
pub use eval::{
    cdf, conditional_cdf, conditional_cdf_v, density, density_grid, rectangle_probability,
    DensityGrid,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of convex weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Serialized form of a copula, tagged by `family`.
///
/// This is the wire format used in configuration files, e.g.
/// `{"family":"fgm","theta":0.6}` or
/// `{"family":"convex","weights":[0.6,0.4],"components":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Independence,
    M,
    W,
    Fgm {
        theta: f64,
    },
    Mardia {
        a: f64,
        b: f64,
    },
    Frechet {
        theta: f64,
    },
    /// Stored by its correlation `r`; a covariance matrix `R` reduces to
    /// `r = R₁₂ / sqrt(R₁₁ R₂₂)`.
    Gaussian {
        r: f64,
    },
    Amh {
        theta: f64,
    },
    Convex {
        weights: Vec<f64>,
        components: Vec<CopulaSpec>,
    },
    NumericFold {
        left: Box<CopulaSpec>,
        right: Box<CopulaSpec>,
    },
}

/// A validated copula description.
///
/// Construct through the named constructors (or deserialize); every value
/// of this type satisfies its family's parameter invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct CopulaSpec(Family);

impl From<CopulaSpec> for Family {
    fn from(c: CopulaSpec) -> Self {
        c.0
    }
}

impl TryFrom<Family> for CopulaSpec {
    type Error = Error;

    fn try_from(f: Family) -> Result<Self> {
        match f {
            Family::Independence => Ok(Self::independence()),
            Family::M => Ok(Self::m()),
            Family::W => Ok(Self::w()),
            Family::Fgm { theta } => Self::fgm(theta),
            Family::Mardia { a, b } => Self::mardia(a, b),
            Family::Frechet { theta } => Self::frechet(theta),
            Family::Gaussian { r } => Self::gaussian(r),
            Family::Amh { theta } => Self::amh(theta),
            Family::Convex {
                weights,
                components,
            } => Self::convex(weights, components),
            Family::NumericFold { left, right } => Ok(Self::numeric_fold(*left, *right)),
        }
    }
}

fn check_unit_param(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
        return Err(Error::InvalidSpec(format!(
            "{name} must lie in [-1, 1], got {value}"
        )));
    }
    Ok(())
}

impl CopulaSpec {
    pub fn independence() -> Self {
        Self(Family::Independence)
    }

    /// Comonotone upper Fréchet–Hoeffding bound `min(u, v)`.
    pub fn m() -> Self {
        Self(Family::M)
    }

    /// Countermonotone lower Fréchet–Hoeffding bound `max(u + v - 1, 0)`.
    pub fn w() -> Self {
        Self(Family::W)
    }

    /// Farlie–Gumbel–Morgenstern copula `uv + θuv(1-u)(1-v)`, `|θ| <= 1`.
    pub fn fgm(theta: f64) -> Result<Self> {
        check_unit_param("FGM theta", theta)?;
        Ok(Self(Family::Fgm { theta }))
    }

    /// Mardia copula `aM + bW + (1-a-b)Π`.
    pub fn mardia(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 || a + b > 1.0 + WEIGHT_SUM_TOL
        {
            return Err(Error::InvalidSpec(format!(
                "Mardia parameters need a, b >= 0 and a + b <= 1, got a={a}, b={b}"
            )));
        }
        Ok(Self(Family::Mardia { a, b }))
    }

    /// Fréchet copula: Mardia with `a = θ²(1+θ)/2`, `b = θ²(1-θ)/2`.
    pub fn frechet(theta: f64) -> Result<Self> {
        check_unit_param("Frechet theta", theta)?;
        Ok(Self(Family::Frechet { theta }))
    }

    /// Gaussian copula with correlation `r`, `|r| < 1`.
    pub fn gaussian(r: f64) -> Result<Self> {
        if !r.is_finite() || r <= -1.0 || r >= 1.0 {
            return Err(Error::InvalidSpec(format!(
                "Gaussian correlation must lie in (-1, 1), got {r}"
            )));
        }
        Ok(Self(Family::Gaussian { r }))
    }

    /// Gaussian copula from a 2×2 covariance matrix `[[s11, s12], [s12, s22]]`.
    pub fn gaussian_from_covariance(s11: f64, s12: f64, s22: f64) -> Result<Self> {
        if !(s11 > 0.0 && s22 > 0.0) {
            return Err(Error::InvalidSpec(
                "covariance diagonal must be positive".into(),
            ));
        }
        Self::gaussian(s12 / (s11 * s22).sqrt())
    }

    /// Ali–Mikhail–Haq copula `uv / (1 - θ(1-u)(1-v))`, `θ ∈ [-1, 1]`.
    pub fn amh(theta: f64) -> Result<Self> {
        check_unit_param("AMH theta", theta)?;
        Ok(Self(Family::Amh { theta }))
    }

    /// Convex combination `Σ wᵢ Cᵢ`.
    ///
    /// Weights must be strictly positive and sum to one within
    /// [`WEIGHT_SUM_TOL`]. Nested combinations are flattened and identical
    /// components merged; a single surviving component is returned as is.
    pub fn convex(weights: Vec<f64>, components: Vec<CopulaSpec>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidSpec(format!(
                "convex combination needs matching non-empty weights and components ({} vs {})",
                weights.len(),
                components.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "convex weights must be strictly positive, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidSpec(format!(
                "convex weights must sum to 1, got {total}"
            )));
        }
        Ok(Self::convex_unchecked(weights.into_iter().zip(components)))
    }

    /// Flattens and merges without re-validating the weights; callers pass
    /// weights that are positive and sum to one by construction.
    pub(crate) fn convex_unchecked(terms: impl IntoIterator<Item = (f64, CopulaSpec)>) -> Self {
        let mut merged: Vec<(f64, CopulaSpec)> = Vec::new();
        let mut push = |w: f64, c: CopulaSpec| {
            if w <= 0.0 {
                return;
            }
            if let Some(slot) = merged.iter_mut().find(|(_, existing)| *existing == c) {
                slot.0 += w;
            } else {
                merged.push((w, c));
            }
        };
        for (w, c) in terms {
            match c.0 {
                Family::Convex {
                    weights,
                    components,
                } => {
                    for (wi, ci) in weights.into_iter().zip(components) {
                        push(w * wi, ci);
                    }
                }
                other => push(w, Self(other)),
            }
        }
        if merged.len() == 1 {
            return merged.pop().expect("one term").1;
        }
        let (weights, components) = merged.into_iter().unzip();
        Self(Family::Convex {
            weights,
            components,
        })
    }

    /// Unevaluated fold product, computed by quadrature on demand.
    pub fn numeric_fold(left: CopulaSpec, right: CopulaSpec) -> Self {
        Self(Family::NumericFold {
            left: Box::new(left),
            right: Box::new(right),
        })
    }

    pub fn family(&self) -> &Family {
        &self.0
    }

    /// Parses the JSON wire form.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("copula specs always serialize")
    }

    /// `(a, b)` when the copula is a member of the Mardia family
    /// (this includes Π, M, W and the Fréchet subfamily).
    pub fn mardia_params(&self) -> Option<(f64, f64)> {
        match self.0 {
            Family::Independence => Some((0.0, 0.0)),
            Family::M => Some((1.0, 0.0)),
            Family::W => Some((0.0, 1.0)),
            Family::Mardia { a, b } => Some((a, b)),
            Family::Frechet { theta } => Some(frechet_params(theta)),
            _ => None,
        }
    }

    /// True for every parameterization that reduces to `uv`.
    pub fn is_independence(&self) -> bool {
        match self.0 {
            Family::Independence => true,
            Family::Fgm { theta } | Family::Amh { theta } | Family::Frechet { theta } => {
                theta == 0.0
            }
            Family::Gaussian { r } => r == 0.0,
            Family::Mardia { a, b } => a == 0.0 && b == 0.0,
            _ => false,
        }
    }

    pub fn is_m(&self) -> bool {
        matches!(self.mardia_params(), Some((a, _)) if a == 1.0)
    }

    pub fn is_w(&self) -> bool {
        matches!(self.mardia_params(), Some((_, b)) if b == 1.0)
    }

    /// Whether the copula measure has a singular component.
    pub fn has_singular_part(&self) -> bool {
        match &self.0 {
            Family::M | Family::W => true,
            Family::Mardia { .. } | Family::Frechet { .. } => {
                let (a, b) = self.mardia_params().expect("mardia family");
                a + b > 0.0
            }
            Family::Convex { components, .. } => components.iter().any(Self::has_singular_part),
            // A fold with an absolutely continuous factor is absolutely
            // continuous.
            Family::NumericFold { left, right } => {
                left.has_singular_part() && right.has_singular_part()
            }
            _ => false,
        }
    }

    /// Nesting depth of numeric folds.
    pub fn fold_depth(&self) -> usize {
        match &self.0 {
            Family::NumericFold { left, right } => 1 + left.fold_depth().max(right.fold_depth()),
            Family::Convex { components, .. } => {
                components.iter().map(Self::fold_depth).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// Convex terms `(weight, component)`; a non-convex spec is one term.
    pub fn terms(&self) -> Vec<(f64, CopulaSpec)> {
        match &self.0 {
            Family::Convex {
                weights,
                components,
            } => weights.iter().copied().zip(components.iter().cloned()).collect(),
            _ => vec![(1.0, self.clone())],
        }
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match &self.0 {
            Family::Independence => "Pi".into(),
            Family::M => "M".into(),
            Family::W => "W".into(),
            Family::Fgm { theta } => format!("FGM({theta})"),
            Family::Mardia { a, b } => format!("Mardia({a},{b})"),
            Family::Frechet { theta } => format!("Frechet({theta})"),
            Family::Gaussian { r } => format!("Gaussian({r})"),
            Family::Amh { theta } => format!("AMH({theta})"),
            Family::Convex {
                weights,
                components,
            } => {
                let parts: Vec<String> = weights
                    .iter()
                    .zip(components)
                    .map(|(w, c)| format!("{w}*{}", c.label()))
                    .collect();
                parts.join(" + ")
            }
            Family::NumericFold { left, right } => {
                format!("({} * {})", left.label(), right.label())
            }
        }
    }

    pub(crate) fn smoothness(&self) -> Smoothness {
        match &self.0 {
            Family::Independence
            | Family::M
            | Family::W
            | Family::Fgm { .. }
            | Family::Mardia { .. }
            | Family::Frechet { .. } => Smoothness::Polynomial,
            Family::Amh { theta } if *theta > 0.9 => Smoothness::EndpointSingular,
            Family::Amh { .. } => Smoothness::Smooth,
            Family::Gaussian { .. } => Smoothness::EndpointSingular,
            Family::Convex { components, .. } => components
                .iter()
                .map(Self::smoothness)
                .max()
                .unwrap_or(Smoothness::Polynomial),
            Family::NumericFold { left, right } => left.smoothness().max(right.smoothness()),
        }
    }
}

pub(crate) fn frechet_params(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    (t2 * (1.0 + theta) / 2.0, t2 * (1.0 - theta) / 2.0)
}

/// How a copula's partial derivatives behave in the integration variable;
/// drives the panel layout of fold quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Smoothness {
    /// Piecewise polynomial between the indicator breakpoints.
    Polynomial,
    /// Analytic on a neighbourhood of `[0, 1]`.
    Smooth,
    /// Analytic inside, with derivative blow-up at `t = 0` or `t = 1`.
    EndpointSingular,
}

/// Axis-aligned event `(u_lo, u_hi] × (v_lo, v_hi]` in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    u_lo: f64,
    u_hi: f64,
    v_lo: f64,
    v_hi: f64,
}

impl Rect {
    pub fn new(u_lo: f64, u_hi: f64, v_lo: f64, v_hi: f64) -> Result<Self> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0;
        if !ok(u_lo, u_hi) || !ok(v_lo, v_hi) {
            return Err(Error::Domain(format!(
                "rectangle ({u_lo},{u_hi}]x({v_lo},{v_hi}] is empty or leaves the unit square"
            )));
        }
        Ok(Self {
            u_lo,
            u_hi,
            v_lo,
            v_hi,
        })
    }

    pub fn u_lo(&self) -> f64 {
        self.u_lo
    }
    pub fn u_hi(&self) -> f64 {
        self.u_hi
    }
    pub fn v_lo(&self) -> f64 {
        self.v_lo
    }
    pub fn v_hi(&self) -> f64 {
        self.v_hi
    }

    /// Lebesgue measure `λ(A)λ(B)`.
    pub fn area(&self) -> f64 {
        (self.u_hi - self.u_lo) * (self.v_hi - self.v_lo)
    }
}
