//! Stationary copula-based Markov chains.
//!
//! `U₁` is uniform and each `U_t` is drawn from the transition law
//! `P(U_t <= v | U_{t-1} = u) = C,₁(u, v)`: by inverting the conditional
//! CDF for absolutely continuous families, by explicit mixture branches for
//! the Mardia family, and by selecting a component first for convex
//! combinations.

use std::cell::RefCell;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::copula::{eval, CopulaSpec, Family};
use crate::error::{domain, Error, Result};
use crate::normal;
use crate::rng::{self, Purpose};
use crate::root::{bisect, safeguarded_newton, RootOptions};

/// Smallest distance from {0, 1} kept by the sampler.
const EDGE: f64 = 1.0 / (1u64 << 53) as f64;

/// Common marginal distribution `G` of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    Uniform01,
    Normal { mu: f64, sigma: f64 },
}

impl MarginalSpec {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        let m = Self::Normal { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Normal { mu, sigma } = *self {
            if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
                return Err(domain(format!(
                    "normal marginal needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                )));
            }
        }
        Ok(())
    }

    /// `G⁻¹(u)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Uniform01 => u,
            Self::Normal { mu, sigma } => mu + sigma * normal::inv_cdf(u),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform01 => 0.5,
            Self::Normal { mu, .. } => mu,
        }
    }

    /// `E[Y²]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Uniform01 => 1.0 / 3.0,
            Self::Normal { mu, sigma } => mu * mu + sigma * sigma,
        }
    }
}

/// A simulated chain: the uniform path and its image under `G⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSample {
    pub copula: CopulaSpec,
    pub marginal: MarginalSpec,
    pub seed: u64,
    pub uniforms: Vec<f64>,
    pub values: Vec<f64>,
}

impl ChainSample {
    pub fn len(&self) -> usize {
        self.uniforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uniforms.is_empty()
    }

    /// Writes `t,u,y` rows (t starting at 1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["t", "u", "y"])?;
        for (t, (u, y)) in self.uniforms.iter().zip(&self.values).enumerate() {
            w.write_record([(t + 1).to_string(), fmt_float(*u), fmt_float(*y)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV writer with the crate's dialect: LF line endings, minimal quoting.
pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Transition kernel compiled once per chain.
#[derive(Debug, Clone)]
enum Kernel {
    Independence,
    Fgm(f64),
    /// `(a, b)`: copy with probability `a`, flip with probability `b`,
    /// otherwise fresh.
    Mardia(f64, f64),
    Gaussian(f64),
    Inversion(CopulaSpec),
    Convex(Vec<f64>, Vec<Kernel>),
}

impl Kernel {
    fn compile(c: &CopulaSpec) -> Result<Self> {
        if c.is_independence() {
            return Ok(Self::Independence);
        }
        if let Some((a, b)) = c.mardia_params() {
            return Ok(Self::Mardia(a, b));
        }
        Ok(match c.family() {
            Family::Fgm { theta } => Self::Fgm(*theta),
            Family::Gaussian { r } => Self::Gaussian(*r),
            Family::Amh { .. } => Self::Inversion(c.clone()),
            Family::NumericFold { left, .. } => {
                if !eval::full_density_available(left) {
                    return Err(Error::Unsupported(format!(
                        "cannot sample {}: its conditional CDF needs an absolutely continuous left factor",
                        c.label()
                    )));
                }
                Self::Inversion(c.clone())
            }
            Family::Convex {
                weights,
                components,
            } => {
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                let kernels = components.iter().map(Self::compile).collect::<Result<_>>()?;
                Self::Convex(cumulative, kernels)
            }
            _ => unreachable!("mardia-family members are handled above"),
        })
    }

    /// Next state from `u`, using `w` as the chain uniform `W_t`.
    fn step(&self, u: f64, w: f64, selectors: &mut ChaCha8Rng) -> Result<f64> {
        let v = match self {
            Self::Independence => w,
            Self::Fgm(theta) => fgm_step(*theta, u, w)?,
            Self::Mardia(a, b) => {
                let s = rng::open01(selectors);
                let fresh = 1.0 - a - b;
                if s < fresh {
                    w
                } else if s < fresh + a {
                    u
                } else {
                    1.0 - u
                }
            }
            Self::Gaussian(r) => {
                let s = (1.0 - r * r).sqrt();
                normal::cdf(r * normal::inv_cdf(u) + s * normal::inv_cdf(w))
            }
            Self::Inversion(c) => inversion_step(c, u, w)?,
            Self::Convex(cumulative, kernels) => {
                let s = rng::open01(selectors);
                let k = cumulative
                    .iter()
                    .position(|&c| s < c)
                    .unwrap_or(kernels.len() - 1);
                return kernels[k].step(u, w, selectors);
            }
        };
        Ok(v.clamp(EDGE, 1.0 - EDGE))
    }
}

/// Solves `v + θ(1-2u)v(1-v) = w`, the FGM conditional CDF equation.
pub fn fgm_step(theta: f64, u: f64, w: f64) -> Result<f64> {
    let k = theta * (1.0 - 2.0 * u);
    if k == 0.0 {
        return Ok(w);
    }
    safeguarded_newton(
        |v| v + k * v * (1.0 - v),
        |v| 1.0 + k * (1.0 - 2.0 * v),
        w,
        0.0,
        1.0,
        RootOptions::default(),
    )
}

fn inversion_step(c: &CopulaSpec, u: f64, w: f64) -> Result<f64> {
    let failure = RefCell::new(None);
    let v = bisect(
        |x| match eval::d1(c, u, x) {
            Ok(y) => y,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                // Steer the bracket somewhere harmless; the error wins anyway.
                f64::INFINITY
            }
        },
        w,
        0.0,
        1.0,
        RootOptions::default(),
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Chain of length `n` with uniform marginal (replication 0 of `seed`).
pub fn sample_chain(c: &CopulaSpec, n: usize, seed: u64) -> Result<ChainSample> {
    sample_chain_rep(c, n, seed, 0)
}

/// Chain of length `n` drawn from the streams of replication `rep`.
pub fn sample_chain_rep(c: &CopulaSpec, n: usize, seed: u64, rep: u64) -> Result<ChainSample> {
    if n == 0 {
        return Err(domain("chain length must be at least 1"));
    }
    let kernel = Kernel::compile(c)?;
    let mut chain = rng::stream(seed, rep, Purpose::ChainUniforms);
    let mut selectors = rng::stream(seed, rep, Purpose::Selectors);
    let mut uniforms = Vec::with_capacity(n);
    let mut u = rng::open01(&mut chain);
    uniforms.push(u);
    for _ in 1..n {
        let w = rng::open01(&mut chain);
        u = kernel.step(u, w, &mut selectors)?;
        uniforms.push(u);
    }
    Ok(ChainSample {
        copula: c.clone(),
        marginal: MarginalSpec::Uniform01,
        seed,
        values: uniforms.clone(),
        uniforms,
    })
}

/// Transforms a uniform-marginal chain by `G⁻¹`.
pub fn apply_marginal(s: ChainSample, m: MarginalSpec) -> Result<ChainSample> {
    if s.marginal != MarginalSpec::Uniform01 {
        return Err(domain("apply_marginal expects a chain with uniform marginal"));
    }
    m.validate()?;
    let values = s.uniforms.iter().map(|&u| m.quantile(u)).collect();
    Ok(ChainSample {
        marginal: m,
        values,
        ..s
    })
}

/// I.i.d. standard normals from replication 0 of `seed`.
pub fn sample_iid_normal(n: usize, seed: u64) -> Vec<f64> {
    sample_iid_normal_rep(n, seed, 0)
}

pub fn sample_iid_normal_rep(n: usize, seed: u64, rep: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, rep, Purpose::IidNormal);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fgm_at_half_returns_w() {
        for w in [0.01, 0.3, 0.77, 0.999] {
            assert_eq!(fgm_step(0.9, 0.5, w).unwrap(), w);
        }
    }

    #[test]
    fn fgm_inverts_conditional_cdf() {
        let v = fgm_step(0.6, 0.2, 0.4864).unwrap();
        assert!((v - 0.4).abs() < 1e-10);
        let c = CopulaSpec::fgm(-0.8).unwrap();
        for &(u, w) in &[(0.1, 0.2), (0.9, 0.95), (0.3, 1e-9)] {
            let v = fgm_step(-0.8, u, w).unwrap();
            assert!((eval::conditional_cdf(&c, u, v).unwrap() - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn comonotone_chain_is_constant() {
        let s = sample_chain(&CopulaSpec::mardia(1.0, 0.0).unwrap(), 50, 3).unwrap();
        assert!(s.uniforms.iter().all(|&u| u == s.uniforms[0]));
    }

    #[test]
    fn inversion_residual() {
        let c = CopulaSpec::amh(0.8).unwrap();
        for &(u, w) in &[(0.2, 0.5), (0.95, 0.01), (0.01, 0.99)] {
            let v = inversion_step(&c, u, w).unwrap();
            assert!((eval::conditional_cdf(&c, u, v).unwrap() - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn singular_left_factor_cannot_be_sampled() {
        let nf = CopulaSpec::numeric_fold(CopulaSpec::w(), CopulaSpec::amh(0.5).unwrap());
        assert!(matches!(sample_chain(&nf, 5, 1), Err(Error::Unsupported(_))));
        let ok = CopulaSpec::numeric_fold(CopulaSpec::amh(0.5).unwrap(), CopulaSpec::w());
        assert_eq!(sample_chain(&ok, 5, 1).unwrap().len(), 5);
    }

    #[test]
    fn marginal_transform() {
        let m = MarginalSpec::normal(30.0, 1.0).unwrap();
        assert_eq!(m.quantile(0.5), 30.0);
        let z = MarginalSpec::normal(0.0, 1.0).unwrap().quantile(0.975);
        assert!((z - 1.959_964).abs() < 1e-6);
        assert_eq!(MarginalSpec::Uniform01.quantile(0.3), 0.3);
        assert!(MarginalSpec::normal(0.0, 0.0).is_err());
    }

    #[test]
    fn iid_normals() {
        assert!(sample_iid_normal(0, 1).is_empty());
        assert_eq!(sample_iid_normal(10, 9), sample_iid_normal(10, 9));
        let x = sample_iid_normal(100_000, 11);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.03);
    }

    #[test]
    fn csv_round_trips() {
        let s = apply_marginal(
            sample_chain(&CopulaSpec::fgm(0.6).unwrap(), 4, 5).unwrap(),
            MarginalSpec::normal(30.0, 1.0).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,u,y\n1,"));
        assert!(!text.contains('\r'));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for (rec, (u, y)) in rdr.records().zip(s.uniforms.iter().zip(&s.values)) {
            let rec = rec.unwrap();
            assert_eq!(rec[1].parse::<f64>().unwrap(), *u);
            assert_eq!(rec[2].parse::<f64>().unwrap(), *y);
        }
    }
}
