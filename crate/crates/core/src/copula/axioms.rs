//! Lattice check of the copula axioms: groundedness, uniform margins and
//! 2-increasingness.

use rayon::prelude::*;
use serde::Serialize;

use super::{eval, CopulaSpec};
use crate::error::{domain, Result};

/// Slack allowed on negative cell masses (quadrature and rounding noise).
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxiomViolation {
    NotGrounded { u: f64, v: f64, value: f64 },
    Margin { u: f64, v: f64, value: f64, expected: f64 },
    NegativeMass { i: usize, j: usize, mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub resolution: usize,
    /// Smallest lattice cell mass seen.
    pub min_cell_mass: f64,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the axioms on the `(m+1) × (m+1)` lattice `{i/m}`.
pub fn check_copula_axioms(c: &CopulaSpec, m: usize) -> Result<AxiomReport> {
    if m < 2 {
        return Err(domain("axiom check needs resolution m >= 2"));
    }
    let step = |i: usize| i as f64 / m as f64;
    let mut violations = Vec::new();
    for i in 0..=m {
        let x = step(i);
        for (u, v) in [(0.0, x), (x, 0.0)] {
            let value = eval::cdf(c, u, v)?;
            if value != 0.0 {
                violations.push(AxiomViolation::NotGrounded { u, v, value });
            }
        }
        for (u, v) in [(x, 1.0), (1.0, x)] {
            let value = eval::cdf(c, u, v)?;
            if value != x {
                violations.push(AxiomViolation::Margin {
                    u,
                    v,
                    value,
                    expected: x,
                });
            }
        }
    }
    let masses: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| eval::rect_raw(c, step(i), step(i + 1), step(j), step(j + 1)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut min_cell_mass = f64::INFINITY;
    for (i, row) in masses.iter().enumerate() {
        for (j, &mass) in row.iter().enumerate() {
            min_cell_mass = min_cell_mass.min(mass);
            if mass.is_nan() || mass < -MASS_TOL {
                violations.push(AxiomViolation::NegativeMass { i, j, mass });
            }
        }
    }
    Ok(AxiomReport {
        resolution: m,
        min_cell_mass,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fgm_one_is_a_copula() {
        let r = check_copula_axioms(&CopulaSpec::fgm(1.0).unwrap(), 64).unwrap();
        assert!(r.is_valid(), "{:?}", r.violations.first());
    }

    #[test]
    fn gaussian_fold_is_a_copula() {
        let g = CopulaSpec::gaussian(0.9).unwrap();
        let nf = CopulaSpec::numeric_fold(g.clone(), g);
        let r = check_copula_axioms(&nf, 32).unwrap();
        assert!(r.is_valid(), "{:?}", r.violations.first());
    }

    #[test]
    fn singular_families_pass() {
        for c in [
            CopulaSpec::m(),
            CopulaSpec::w(),
            CopulaSpec::frechet(-0.4).unwrap(),
            CopulaSpec::numeric_fold(CopulaSpec::w(), CopulaSpec::amh(0.95).unwrap()),
        ] {
            let r = check_copula_axioms(&c, 16).unwrap();
            assert!(r.is_valid(), "{}: {:?}", c.label(), r.violations.first());
        }
    }

    #[test]
    fn rejects_tiny_resolution() {
        assert!(check_copula_axioms(&CopulaSpec::m(), 1).is_err());
    }
}
