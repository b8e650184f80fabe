//! Composite Gauss–Legendre quadrature on subintervals of `[0, 1]`.
//!
//! Fold products integrate piecewise-smooth functions whose kinks sit at
//! known points (indicator derivatives of `M` and `W`), so the integral is
//! always taken panel by panel between caller-supplied breakpoints.

use std::sync::OnceLock;

/// Nodes per panel.
pub const NODES: usize = 32;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre
    /// polynomial, starting from the Tricomi approximation of each root.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pn_1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
    (pn, d)
}

/// The shared 32-node rule.
pub fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NODES))
}

/// Sorted, deduplicated panel edges in `[0, 1]` including both ends.
pub fn panel_edges(extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut edges: Vec<f64> = std::iter::once(0.0)
        .chain(std::iter::once(1.0))
        .chain(extra.into_iter().filter(|t| t.is_finite() && *t > 0.0 && *t < 1.0))
        .collect();
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    edges
}

/// Composite integral of `f` over `[0, 1]` split at `edges` (as returned by
/// [`panel_edges`]).
pub fn integrate_panels<F: FnMut(f64) -> f64>(edges: &[f64], mut f: F) -> f64 {
    let gl = rule();
    edges
        .windows(2)
        .map(|w| gl.integrate(w[0], w[1], &mut f))
        .sum()
}
