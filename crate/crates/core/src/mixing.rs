//! Bounds and diagnostics for the ψ′, ψ* and ψ mixing coefficients of
//! copula-based Markov chains.
//!
//! Exact infima and suprema over all Borel rectangles are out of reach, so
//! everything here is either a bound derived from the density of the
//! absolutely continuous part of `Cⁿ` on a grid, a ratio along an explicit
//! family of corner events, or a rule that applies a known theorem to a
//! closed-form family. [`Finding::certified`] separates proofs from
//! numerical evidence.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::copula::{self, eval, CopulaSpec, DensityGrid, Family};
use crate::error::{domain, Error, Result};

/// Corner sizes used by [`classify`].
pub const CLASSIFY_EPSILONS: [f64; 3] = [1e-1, 1e-2, 1e-3];

fn ser_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() && *x > 0.0 {
        s.serialize_str("+inf")
    } else {
        s.serialize_f64(*x)
    }
}

fn ser_extended_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_extended(v, s),
        None => s.serialize_none(),
    }
}

/// Density extremes of the AC part of `Cⁿ` on an `m × m` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityExtrema {
    pub n: u32,
    pub resolution: usize,
    /// Minimum over cell midpoints.
    pub min: f64,
    /// Maximum over cell midpoints.
    #[serde(serialize_with = "ser_extended")]
    pub max: f64,
    /// `min` widened by the per-cell variation bound (see [`grid_bounds`]).
    pub lower_bound: f64,
    #[serde(serialize_with = "ser_extended")]
    pub upper_bound: f64,
}

/// Grid bounds of a density.
///
/// Each cell contributes `f(mid) ∓ h (G_u + G_v)` with `h = 1/(2m)` and
/// `G_u`, `G_v` the largest secant slopes along the cell's edges. This is
/// exact for densities that are multilinear on each cell (FGM, Mardia and
/// their combinations) and a first-order enclosure otherwise. Corners that
/// cannot be evaluated (the Gaussian density at the boundary) give the
/// trivial bounds 0 and +∞.
pub fn grid_bounds(c: &CopulaSpec, m: usize) -> Result<DensityExtrema> {
    let grid = copula::density_grid(c, m)?;
    let step = 1.0 / m as f64;
    let corners: Vec<Vec<f64>> = (0..=m)
        .into_par_iter()
        .map(|i| {
            (0..=m)
                .map(|j| eval::dens(c, i as f64 * step, j as f64 * step).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    let h = 0.5 * step;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for i in 0..m {
        for j in 0..m {
            let (f00, f01, f10, f11) = (
                corners[i][j],
                corners[i][j + 1],
                corners[i + 1][j],
                corners[i + 1][j + 1],
            );
            let mid = grid.get(i, j);
            let gu = (f10 - f00).abs().max((f11 - f01).abs()) / step;
            let gv = (f01 - f00).abs().max((f11 - f10).abs()) / step;
            let slack = h * (gu + gv);
            if slack.is_finite() {
                lower = lower.min(mid - slack);
                upper = upper.max(mid + slack);
            } else {
                lower = lower.min(0.0);
                upper = f64::INFINITY;
            }
        }
    }
    Ok(DensityExtrema {
        n: 1,
        resolution: m,
        min: grid.min(),
        max: grid.max(),
        lower_bound: lower.max(0.0).min(grid.min()),
        upper_bound: upper.max(grid.max()),
    })
}

/// Density extremes of `Cⁿ` on the `m × m` midpoint grid (`m >= 8`).
pub fn density_extrema(c: &CopulaSpec, n: u32, m: usize) -> Result<DensityExtrema> {
    if m < 8 {
        return Err(domain("density extrema need resolution m >= 8"));
    }
    let cn = copula::n_fold(c, n)?;
    let mut e = grid_bounds(&cn, m)?;
    e.n = n;
    Ok(e)
}

/// Lower bound for `ψ′ₙ(C)` from the essential infimum of the AC density
/// of `Cⁿ`, in `[0, 1]`.
pub fn psi_prime_lower_bound(c: &CopulaSpec, n: u32, m: usize) -> Result<f64> {
    Ok(density_extrema(c, n, m)?.lower_bound.clamp(0.0, 1.0))
}

/// Upper bound for `ψ*ₙ(C)`, at least 1; `+∞` when `Cⁿ` has a singular
/// part or its density cannot be bounded on the grid.
pub fn psi_star_upper_bound(c: &CopulaSpec, n: u32, m: usize) -> Result<f64> {
    let cn = copula::n_fold(c, n)?;
    if cn.has_singular_part() {
        return Ok(f64::INFINITY);
    }
    Ok(density_extrema(c, n, m)?.upper_bound.max(1.0))
}

/// Lower envelope `ε₁(u)` and `ε₂(v)` tabulated on the grid midpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsDecomposition {
    eps1: Vec<f64>,
    eps2: Vec<f64>,
}

impl EpsDecomposition {
    pub fn new(eps1: Vec<f64>, eps2: Vec<f64>) -> Result<Self> {
        if eps1.iter().chain(&eps2).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(domain("epsilon tables must be finite and nonnegative"));
        }
        Ok(Self { eps1, eps2 })
    }

    /// Constant tables of length `m`.
    pub fn constant(m: usize, e1: f64, e2: f64) -> Result<Self> {
        Self::new(vec![e1; m], vec![e2; m])
    }

    pub fn eps1(&self) -> &[f64] {
        &self.eps1
    }

    pub fn eps2(&self) -> &[f64] {
        &self.eps2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsCheck {
    /// `c(i, j) >= ε₁(i) + ε₂(j)` at every cell.
    pub holds: bool,
    /// `min ε₁ + min ε₂`; the lag-one ψ′ bound when `holds`.
    pub m_plus_n: f64,
}

impl EpsCheck {
    /// Whether the decomposition certifies ψ′-mixing.
    pub fn applies(&self) -> bool {
        self.holds && self.m_plus_n > 0.0
    }
}

/// Checks `c(u, v) >= ε₁(u) + ε₂(v)` on the grid.
pub fn verify_eps_decomposition(d: &DensityGrid, e: &EpsDecomposition) -> Result<EpsCheck> {
    let m = d.resolution();
    for len in [e.eps1.len(), e.eps2.len()] {
        if len != m {
            return Err(Error::ResolutionMismatch {
                grid: m,
                decomposition: len,
            });
        }
    }
    let holds = (0..m).all(|i| (0..m).all(|j| d.get(i, j) >= e.eps1[i] + e.eps2[j]));
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EpsCheck {
        holds,
        m_plus_n: min(&e.eps1) + min(&e.eps2),
    })
}

/// Corner ratio `P(A × B) / ε²` for the four corner squares of side `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerRatio {
    pub epsilon: f64,
    /// Maximum over the four orientations.
    pub ratio: f64,
    /// `[lower-left, (0,ε]×(1-ε,1], (1-ε,1]×(0,ε], upper-right]`.
    pub orientations: [f64; 4],
}

/// Ratios `P(A × B) / (λ(A) λ(B))` for corner squares of `Cⁿ`.
///
/// The off-diagonal and upper corners are reflected onto `(0, ε]²` by
/// folding with `W` (`P_C((0,ε]×(1-ε,1]) = P_{C*W}((0,ε]²)`), so every
/// event is represented exactly in floating point.
pub fn corner_divergence_scan(c: &CopulaSpec, n: u32, eps_list: &[f64]) -> Result<Vec<CornerRatio>> {
    if let Some(e) = eps_list.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
        return Err(domain(format!("corner size {e} is outside (0, 0.5)")));
    }
    let cn = copula::n_fold(c, n)?;
    let w = CopulaSpec::w();
    let cw = copula::fold(&cn, &w);
    let wc = copula::fold(&w, &cn);
    let wcw = copula::fold(&wc, &w);
    let views = [cn, cw, wc, wcw];
    eps_list
        .iter()
        .map(|&eps| {
            let mut orientations = [0.0; 4];
            for (slot, view) in orientations.iter_mut().zip(&views) {
                let p = eval::rect_raw(view, 0.0, eps, 0.0, eps)?;
                *slot = (p / (eps * eps)).max(0.0);
            }
            Ok(CornerRatio {
                epsilon: eps,
                ratio: orientations.iter().copied().fold(0.0, f64::max),
                orientations,
            })
        })
        .collect()
}

/// `(1 - 3(|θ|/3)ⁿ, 1 + 3(|θ|/3)ⁿ)`: the FGM density envelope, which bounds
/// `ψ′ₙ` from below and `ψ*ₙ` from above.
pub fn fgm_psi_bounds(theta: f64, n: u32) -> Result<(f64, f64)> {
    if !(theta.is_finite() && theta.abs() <= 1.0) {
        return Err(domain(format!("FGM theta={theta} is outside [-1, 1]")));
    }
    if n == 0 {
        return Err(domain("lag must be at least 1"));
    }
    let d = 3.0 * (theta.abs() / 3.0).powi(n as i32);
    Ok((1.0 - d, 1.0 + d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    PsiPrimeMixing,
    PsiStarMixing,
    PsiMixing,
    NotPsiStarMixing,
    Unknown,
}

/// The result that justifies a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Π: every ratio is identically 1.
    Independence,
    /// FGM copulas generate ψ-mixing chains for every `θ ∈ [-1, 1]`.
    FgmPsiMixing,
    /// AMH with `θ < 1` has a bounded density.
    AmhBoundedDensity,
    /// A non-independent Gaussian copula has an unbounded density at every lag.
    GaussianUnboundedDensity,
    /// Mardia with `a + b > 0`: corner ratios grow like `b/ε` or `a/ε`.
    MardiaCornerDivergence,
    /// Mardia with `a + b < 1`: density of the AC part is `1 - a - b > 0`.
    MardiaIndependentPart,
    /// A convex combination inherits non-ψ* from any component,
    /// since `Pⁿ >= wⁿ Pᵢⁿ`.
    ConvexNonPsiStarComponent,
    /// A convex combination containing Π has AC density at least its weight.
    ConvexWithIndependence,
    /// A convex combination containing Π and `M` or `W`: ψ′-mixing but not
    /// ψ-mixing.
    ConvexIndependenceWithBound,
    /// A convex combination of ψ-mixing copulas with `ψ₁ < 1` is ψ-mixing.
    ConvexPsiMixing,
    /// Grid lower bound of the density of `Cⁿ` is positive.
    DensityBoundedBelow,
    /// Grid upper bound of the density of `Cⁿ` is finite and corner ratios
    /// stay bounded.
    DensityBoundedAbove,
    /// Grid maximum of the density of `Cⁿ` keeps growing under refinement.
    DensityUnbounded,
    /// Corner ratios of `Cⁿ` grow as `ε` shrinks.
    CornerDivergence,
    /// Nothing applied; accompanies [`Verdict::Unknown`].
    NoRuleApplies,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Finding {
    pub verdict: Verdict,
    pub rule: Rule,
    /// Proven (closed-form rule) rather than grid evidence.
    pub certified: bool,
    /// Lag whose grid produced the evidence, for grid rules.
    pub lag: Option<u32>,
}

impl Finding {
    fn proof(verdict: Verdict, rule: Rule) -> Self {
        Self {
            verdict,
            rule,
            certified: true,
            lag: None,
        }
    }

    fn evidence(verdict: Verdict, rule: Rule, lag: u32) -> Self {
        Self {
            verdict,
            rule,
            certified: false,
            lag: Some(lag),
        }
    }
}

/// Bounds at one lag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagReport {
    pub n: u32,
    /// `None` when the AC density of `Cⁿ` cannot be evaluated.
    #[serde(serialize_with = "ser_extended_opt")]
    pub density_min: Option<f64>,
    #[serde(serialize_with = "ser_extended_opt")]
    pub density_max: Option<f64>,
    pub psi_prime_lower: f64,
    #[serde(serialize_with = "ser_extended")]
    pub psi_star_upper: f64,
    /// Grid maximum kept growing under 4× refinements.
    pub unbounded_evidence: bool,
    pub corner_scan: Vec<CornerRatio>,
}

/// Outcome of [`classify`]. The top-level bounds are those of the last lag
/// examined; `lags` holds every lag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub copula: String,
    pub resolution: usize,
    pub n: u32,
    #[serde(serialize_with = "ser_extended_opt")]
    pub density_min: Option<f64>,
    #[serde(serialize_with = "ser_extended_opt")]
    pub density_max: Option<f64>,
    pub psi_prime_lower: f64,
    #[serde(serialize_with = "ser_extended")]
    pub psi_star_upper: f64,
    pub corner_scan: Vec<CornerRatio>,
    pub verdicts: Vec<Finding>,
    pub lags: Vec<LagReport>,
    /// Why the lag list stops early, if it does.
    pub truncated: Option<String>,
}

impl MixingReport {
    pub fn has(&self, v: Verdict) -> bool {
        self.verdicts.iter().any(|f| f.verdict == v)
    }
}

fn closed_form_findings(c: &CopulaSpec) -> Vec<Finding> {
    use Rule::*;
    use Verdict::*;
    if c.is_independence() {
        return vec![Finding::proof(PsiMixing, Independence)];
    }
    if let Some((a, b)) = c.mardia_params() {
        let mut out = Vec::new();
        if a + b > 0.0 {
            out.push(Finding::proof(NotPsiStarMixing, MardiaCornerDivergence));
        }
        if a + b < 1.0 {
            out.push(Finding::proof(PsiPrimeMixing, MardiaIndependentPart));
        }
        return out;
    }
    match c.family() {
        Family::Fgm { .. } => vec![Finding::proof(PsiMixing, FgmPsiMixing)],
        Family::Amh { theta } if *theta < 1.0 => {
            vec![Finding::proof(PsiStarMixing, AmhBoundedDensity)]
        }
        Family::Gaussian { .. } => vec![Finding::proof(NotPsiStarMixing, GaussianUnboundedDensity)],
        Family::Convex { components, .. } => convex_findings(components),
        _ => Vec::new(),
    }
}

/// Certified `ψ₁ < 1` bound for a component, when one is known.
fn psi_one_bound(c: &CopulaSpec) -> Option<f64> {
    if c.is_independence() {
        return Some(0.0);
    }
    match c.family() {
        // Envelope (1 ± |θ|) at lag one.
        Family::Fgm { theta } if theta.abs() < 1.0 => Some(theta.abs()),
        _ => None,
    }
}

fn convex_findings(components: &[CopulaSpec]) -> Vec<Finding> {
    use Rule::*;
    use Verdict::*;
    let mut out = Vec::new();
    let component_findings: Vec<Vec<Finding>> =
        components.iter().map(closed_form_findings).collect();
    if component_findings
        .iter()
        .flatten()
        .any(|f| f.certified && f.verdict == NotPsiStarMixing)
    {
        out.push(Finding::proof(NotPsiStarMixing, ConvexNonPsiStarComponent));
    }
    let has_pi = components.iter().any(CopulaSpec::is_independence);
    if has_pi {
        let with_bound = components.iter().any(|c| c.is_m() || c.is_w());
        let rule = if with_bound {
            ConvexIndependenceWithBound
        } else {
            ConvexWithIndependence
        };
        out.push(Finding::proof(PsiPrimeMixing, rule));
    }
    if components.iter().all(|c| psi_one_bound(c).is_some()) {
        out.push(Finding::proof(PsiMixing, ConvexPsiMixing));
    }
    out
}

/// Growth test for the grid maximum at `m/16`, `m/4` and `m`.
fn unbounded_evidence(cn: &CopulaSpec, m: usize, max_at_m: f64) -> Result<bool> {
    if m < 128 || !max_at_m.is_finite() {
        return Ok(!max_at_m.is_finite());
    }
    let a = copula::density_grid(cn, m / 16)?.max();
    let b = copula::density_grid(cn, m / 4)?.max();
    Ok(b >= 1.5 * a && max_at_m >= 1.5 * b && max_at_m > 10.0)
}

fn corner_growth(scan: &[CornerRatio]) -> bool {
    scan.len() >= 2
        && scan.windows(2).all(|w| w[1].ratio >= 2.0 * w[0].ratio)
        && scan.last().map(|r| r.ratio > 10.0).unwrap_or(false)
}

fn lag_report(c: &CopulaSpec, n: u32, m: usize) -> Result<(LagReport, CopulaSpec)> {
    let cn = copula::n_fold(c, n)?;
    let corner_scan = corner_divergence_scan(&cn, 1, &CLASSIFY_EPSILONS).unwrap_or_default();
    let grid = if eval::ac_density_available(&cn) {
        Some(grid_bounds(&cn, m)?)
    } else {
        None
    };
    let (density_min, density_max, psi_prime_lower, mut psi_star_upper, unbounded) = match &grid {
        Some(g) => {
            let unbounded = unbounded_evidence(&cn, m, g.max)?;
            (
                Some(g.min),
                Some(g.max),
                g.lower_bound.clamp(0.0, 1.0),
                if unbounded { f64::INFINITY } else { g.upper_bound.max(1.0) },
                unbounded,
            )
        }
        None => (None, None, 0.0, f64::INFINITY, false),
    };
    if cn.has_singular_part() {
        psi_star_upper = f64::INFINITY;
    }
    Ok((
        LagReport {
            n,
            density_min,
            density_max,
            psi_prime_lower,
            psi_star_upper,
            unbounded_evidence: unbounded,
            corner_scan,
        },
        cn,
    ))
}

/// Applies closed-form theorems, grid rules at lags `1..=n_max`, and
/// convex-combination propagation to `c`.
pub fn classify(c: &CopulaSpec, m: usize, n_max: u32) -> Result<MixingReport> {
    use Rule::*;
    use Verdict::*;
    if m < 8 {
        return Err(domain("classification needs resolution m >= 8"));
    }
    if n_max == 0 {
        return Err(domain("n_max must be at least 1"));
    }
    let mut findings = closed_form_findings(c);
    let mut lags = Vec::new();
    let mut truncated = None;
    for n in 1..=n_max {
        let (lag, cn) = match lag_report(c, n, m) {
            Ok(x) => x,
            Err(e) => {
                truncated = Some(format!("lag {n}: {e}"));
                break;
            }
        };
        if lag.density_min.is_some() {
            if lag.psi_prime_lower > 0.0 {
                findings.push(Finding::evidence(PsiPrimeMixing, DensityBoundedBelow, n));
            }
            if lag.unbounded_evidence {
                findings.push(Finding::evidence(NotPsiStarMixing, DensityUnbounded, n));
            } else if !cn.has_singular_part()
                && lag.psi_star_upper.is_finite()
                && !corner_growth(&lag.corner_scan)
            {
                findings.push(Finding::evidence(PsiStarMixing, DensityBoundedAbove, n));
            }
        }
        if corner_growth(&lag.corner_scan) {
            findings.push(Finding::evidence(NotPsiStarMixing, CornerDivergence, n));
        }
        lags.push(lag);
    }
    let verdicts = reconcile(findings);
    let last = lags.last().cloned();
    Ok(MixingReport {
        copula: c.label(),
        resolution: m,
        n: last.as_ref().map(|l| l.n).unwrap_or(0),
        density_min: last.as_ref().and_then(|l| l.density_min),
        density_max: last.as_ref().and_then(|l| l.density_max),
        psi_prime_lower: last.as_ref().map(|l| l.psi_prime_lower).unwrap_or(0.0),
        psi_star_upper: last.as_ref().map(|l| l.psi_star_upper).unwrap_or(f64::INFINITY),
        corner_scan: last.map(|l| l.corner_scan).unwrap_or_default(),
        verdicts,
        lags,
        truncated,
    })
}

/// Resolves conflicts (ψ-mixing implies ψ*-mixing, so the two can never be
/// reported together with non-ψ*), keeps one finding per verdict
/// (certified first), and falls back to `Unknown`.
fn reconcile(findings: Vec<Finding>) -> Vec<Finding> {
    use Verdict::*;
    let certified = |v: Verdict| findings.iter().any(|f| f.certified && f.verdict == v);
    let star_certified = certified(PsiMixing) || certified(PsiStarMixing);
    let not_star_certified = certified(NotPsiStarMixing);
    let keep = |f: &Finding| match f.verdict {
        PsiMixing | PsiStarMixing => {
            !not_star_certified && (f.certified || star_certified || !findings.iter().any(|g| g.verdict == NotPsiStarMixing))
        }
        NotPsiStarMixing => f.certified || !star_certified,
        _ => true,
    };
    let mut out: Vec<Finding> = Vec::new();
    let mut sorted: Vec<Finding> = findings.iter().copied().filter(keep).collect();
    sorted.sort_by_key(|f| !f.certified);
    for f in sorted {
        if !out.iter().any(|g| g.verdict == f.verdict) {
            out.push(f);
        }
    }
    if out.is_empty() {
        out.push(Finding {
            verdict: Unknown,
            rule: Rule::NoRuleApplies,
            certified: false,
            lag: None,
        });
    }
    out
}
