//! Kernel-based robust estimator of the marginal mean of a stationary
//! sequence, with a confidence interval that needs no long-run variance
//! estimate, plus the Monte Carlo diagnostics around it.
//!
//! Given observations `Y₁..Yₙ` and independent standard normals
//! `X₁..Xₙ`:
//!
//! ```text
//! h   = ( mean(Y²) / (n √2 mean(Y)²) )^(1/5)
//! r̃   = (1/(n h)) Σ Yᵢ exp(-½ (Xᵢ/h)²)
//! μ̂   = r̃ √(1 + h²)
//! CI  = μ̂ ± z · ( mean(Y²) / (n h √2) )^(1/2)
//! ```

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::copula::CopulaSpec;
use crate::error::{domain, Error, Result};
use crate::normal;
use crate::sampler::{self, csv_writer, fmt_float, MarginalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustMeanResult {
    pub n: usize,
    pub h: f64,
    pub r_tilde: f64,
    pub mu_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub z: f64,
    pub mean_y_sq: f64,
}

impl RobustMeanResult {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }

    pub fn covers(&self, mu: f64) -> bool {
        self.ci_lo <= mu && mu <= self.ci_hi
    }
}

fn moments(y: &[f64]) -> Result<(f64, f64)> {
    if y.is_empty() {
        return Err(Error::DegenerateSample("empty sample".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mean_sq = y.iter().map(|v| v * v).sum::<f64>() / n;
    Ok((mean, mean_sq))
}

fn bandwidth_from(mean: f64, mean_sq: f64, n: usize) -> Result<f64> {
    if mean == 0.0 {
        return Err(Error::DegenerateSample(
            "bandwidth is undefined for a sample with zero mean".into(),
        ));
    }
    let h = (mean_sq / (n as f64 * std::f64::consts::SQRT_2 * mean * mean)).powf(0.2);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::DegenerateSample(format!("bandwidth {h} is not positive and finite")));
    }
    Ok(h)
}

/// `hₙ = (mean(y²) / (n √2 mean(y)²))^(1/5)`.
pub fn bandwidth(y: &[f64]) -> Result<f64> {
    let (mean, mean_sq) = moments(y)?;
    bandwidth_from(mean, mean_sq, y.len())
}

/// Bandwidth from the population moments of `m` rather than a sample.
pub fn population_bandwidth(m: &MarginalSpec, n: usize) -> Result<f64> {
    bandwidth_from(m.mean(), m.second_moment(), n)
}

/// Estimator and confidence interval at confidence `level`.
pub fn robust_mean(y: &[f64], x: &[f64], level: f64) -> Result<RobustMeanResult> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    let (mean, mean_sq) = moments(y)?;
    let h = bandwidth_from(mean, mean_sq, y.len())?;
    robust_mean_with_bandwidth(y, x, level, h)
}

/// As [`robust_mean`] with a caller-chosen bandwidth.
pub fn robust_mean_with_bandwidth(
    y: &[f64],
    x: &[f64],
    level: f64,
    h: f64,
) -> Result<RobustMeanResult> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("confidence level {level} is outside (0, 1)")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(domain(format!("bandwidth {h} must be positive")));
    }
    let (_, mean_sq) = moments(y)?;
    let n = y.len();
    let nf = n as f64;
    let kernel_sum: f64 = y
        .iter()
        .zip(x)
        .map(|(yi, xi)| {
            let s = xi / h;
            yi * (-0.5 * s * s).exp()
        })
        .sum();
    let r_tilde = kernel_sum / (nf * h);
    let mu_hat = r_tilde * (1.0 + h * h).sqrt();
    let z = normal::two_sided_critical(level);
    let half = z * (mean_sq / (nf * h * std::f64::consts::SQRT_2)).sqrt();
    Ok(RobustMeanResult {
        n,
        h,
        r_tilde,
        mu_hat,
        ci_lo: mu_hat - half,
        ci_hi: mu_hat + half,
        z,
        mean_y_sq: mean_sq,
    })
}

/// Seed of replication `rep` under master seed `seed`; replication 0 uses
/// the master seed itself so single runs can be regenerated directly.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    if rep == 0 {
        return seed;
    }
    // SplitMix64 finalizer over the pair.
    let mut z = seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One replication of the study: chain `Y` from `c` with marginal `m`,
/// independent normals `X`, both drawn from `seed`.
pub fn study_replication(
    c: &CopulaSpec,
    m: &MarginalSpec,
    n: usize,
    level: f64,
    seed: u64,
) -> Result<RobustMeanResult> {
    let chain = sampler::apply_marginal(sampler::sample_chain(c, n, seed)?, *m)?;
    let x = sampler::sample_iid_normal(n, seed);
    robust_mean(&chain.values, &x, level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub rep: u64,
    pub seed: u64,
    pub result: RobustMeanResult,
    pub covered: bool,
}

/// `reps` replications (run in parallel; the output order is by replication).
pub fn run_replications(
    c: &CopulaSpec,
    m: &MarginalSpec,
    n: usize,
    reps: u64,
    level: f64,
    seed: u64,
) -> Result<Vec<Replication>> {
    let mu = m.mean();
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s = replication_seed(seed, rep);
            let result = study_replication(c, m, n, level, s)?;
            Ok(Replication {
                rep,
                seed: s,
                covered: result.covers(mu),
                result,
            })
        })
        .collect()
}

/// Fraction of `reps >= 200` replications whose interval covers the
/// marginal mean.
pub fn coverage_experiment(
    c: &CopulaSpec,
    m: &MarginalSpec,
    n: usize,
    reps: u64,
    level: f64,
    seed: u64,
) -> Result<f64> {
    if reps < 200 {
        return Err(domain(format!("coverage needs at least 200 replications, got {reps}")));
    }
    let rows = run_replications(c, m, n, reps, level, seed)?;
    Ok(rows.iter().filter(|r| r.covered).count() as f64 / reps as f64)
}

/// `n var(Ȳₙ)` and `n hₙ var(Ȳₙ)` across sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceDiagnostic {
    pub sizes: Vec<usize>,
    pub nvar: Vec<f64>,
    pub nhvar: Vec<f64>,
    pub replications: u64,
}

/// Estimates `var(Ȳₙ)` from `reps >= 30` independent chains per size.
/// `hₙ` uses the population moments of `m`.
pub fn variance_diagnostic(
    c: &CopulaSpec,
    m: &MarginalSpec,
    sizes: &[usize],
    reps: u64,
    seed: u64,
) -> Result<VarianceDiagnostic> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(domain("sizes must be positive and strictly increasing"));
    }
    if reps < 30 {
        return Err(domain(format!("variance diagnostic needs at least 30 replications, got {reps}")));
    }
    let mut nvar = Vec::with_capacity(sizes.len());
    let mut nhvar = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let means: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let rep = ((k as u64) << 32) | r;
                let s = sampler::sample_chain_rep(c, n, seed, rep)?;
                let total: f64 = s.uniforms.iter().map(|&u| m.quantile(u)).sum();
                Ok(total / n as f64)
            })
            .collect::<Result<_>>()?;
        let grand = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let h = population_bandwidth(m, n)?;
        nvar.push(n as f64 * var);
        nhvar.push(n as f64 * h * var);
    }
    Ok(VarianceDiagnostic {
        sizes: sizes.to_vec(),
        nvar,
        nhvar,
        replications: reps,
    })
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub copula: String,
    pub seed: u64,
    pub result: RobustMeanResult,
    pub covered: bool,
}

/// Writes `copula,n,seed,h,r_tilde,mu_hat,ci_lo,ci_hi,covered`.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "copula", "n", "seed", "h", "r_tilde", "mu_hat", "ci_lo", "ci_hi", "covered",
    ])?;
    for row in rows {
        let r = &row.result;
        w.write_record([
            row.copula.clone(),
            r.n.to_string(),
            row.seed.to_string(),
            fmt_float(r.h),
            fmt_float(r.r_tilde),
            fmt_float(r.mu_hat),
            fmt_float(r.ci_lo),
            fmt_float(r.ci_hi),
            u8::from(row.covered).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
