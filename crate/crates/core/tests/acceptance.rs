//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use psimix::copula::{self, CopulaSpec};
use psimix::experiment;
use psimix::mixing::{self, Verdict};
use psimix::robust;
use psimix::sampler::{self, MarginalSpec};
use psimix::Result;

const SEED: u64 = 20140601;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Name, check, and wall-clock budget in seconds.
type Criterion = (&'static str, fn() -> Result<Outcome>, Option<u64>);

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

/// Gauss-Legendre nodes and weights on [0, 1] by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// `Cⁿ(x, y)` by Nyström iteration of the fold for a copula with density
/// `dens` and `∂₂C = d2`: `∂₂Cᵏ⁺¹(x, t) = ∫ ∂₂Cᵏ(x, s) c(s, t) ds`, then
/// `Cⁿ(x, y) = ∫₀ʸ ∂₂Cⁿ(x, t) dt`. Exact for polynomial copulas.
fn nystrom_power(
    d2: &dyn Fn(f64, f64) -> f64,
    dens: &dyn Fn(f64, f64) -> f64,
    n: u32,
    x: f64,
    y: f64,
) -> f64 {
    let gl = gauss_legendre(20);
    let mut g: Vec<f64> = gl.iter().map(|&(s, _)| d2(x, s)).collect();
    for _ in 1..n.saturating_sub(1) {
        g = gl
            .iter()
            .map(|&(t, _)| gl.iter().zip(&g).map(|(&(s, w), gs)| w * gs * dens(s, t)).sum())
            .collect();
    }
    let g_at = |t: f64| -> f64 {
        if n == 1 {
            d2(x, t)
        } else {
            gl.iter().zip(&g).map(|(&(s, w), gs)| w * gs * dens(s, t)).sum()
        }
    };
    gl.iter().map(|&(t, w)| w * y * g_at(t * y)).sum()
}

fn grid33() -> impl Iterator<Item = (f64, f64)> {
    (0..=32).flat_map(|i| (0..=32).map(move |j| (i as f64 / 32.0, j as f64 / 32.0)))
}

fn criterion_1() -> Result<Outcome> {
    let fgm = |t| CopulaSpec::fgm(t).unwrap();
    let cases: Vec<(&str, CopulaSpec, CopulaSpec, bool)> = vec![
        ("Pi*FGM", CopulaSpec::independence(), fgm(0.6), false),
        ("Gauss*Pi", CopulaSpec::gaussian(0.5)?, CopulaSpec::independence(), false),
        ("M*AMH", CopulaSpec::m(), CopulaSpec::amh(0.5)?, true),
        ("FGM*M", fgm(-0.7), CopulaSpec::m(), true),
        ("W*W", CopulaSpec::w(), CopulaSpec::w(), true),
        ("FGM*FGM", fgm(0.6), fgm(-0.8), false),
        ("FGM(1)*FGM(1)", fgm(1.0), fgm(1.0), false),
        ("Mardia*Mardia", CopulaSpec::mardia(0.3, 0.2)?, CopulaSpec::mardia(0.1, 0.4)?, true),
        ("Frechet*Frechet", CopulaSpec::frechet(0.6)?, CopulaSpec::frechet(-0.5)?, true),
    ];
    let mut worst = Vec::new();
    let mut pass = true;
    for (name, a, b, singular) in cases {
        let closed = copula::fold(&a, &b);
        if closed.fold_depth() != 0 {
            return outcome(false, format!("{name} has no closed form"));
        }
        let mut err: f64 = 0.0;
        for (u, v) in grid33() {
            let q = copula::numeric_fold_cdf(&a, &b, u, v)?;
            err = err.max((copula::cdf(&closed, u, v)? - q).abs());
        }
        let tol = if singular { 1e-6 } else { 1e-8 };
        pass &= err <= tol;
        worst.push(format!("{name} {err:.1e}"));
    }
    outcome(pass, format!("max |closed - quadrature|: {}", worst.join(", ")))
}

fn criterion_2() -> Result<Outcome> {
    let mut err: f64 = 0.0;
    for theta in [-1.0, -0.5, 0.5, 1.0] {
        let c = CopulaSpec::fgm(theta)?;
        let d2 = move |u: f64, v: f64| u + theta * u * (1.0 - u) * (1.0 - 2.0 * v);
        let dens = move |s: f64, t: f64| 1.0 + theta * (1.0 - 2.0 * s) * (1.0 - 2.0 * t);
        for n in 1..=5 {
            let cn = copula::n_fold(&c, n)?;
            if cn.fold_depth() != 0 {
                return outcome(false, format!("n_fold(FGM({theta}), {n}) is not closed"));
            }
            for (u, v) in grid33() {
                let oracle = nystrom_power(&d2, &dens, n, u, v);
                err = err.max((copula::cdf(&cn, u, v)? - oracle).abs());
            }
        }
    }
    outcome(err <= 1e-7, format!("max |n_fold - iterated quadrature| = {err:.1e}"))
}

fn criterion_3() -> Result<Outcome> {
    let c = CopulaSpec::convex(
        vec![0.6, 0.4],
        vec![CopulaSpec::fgm(1.0)?, CopulaSpec::independence()],
    )?;
    let d2 = |u: f64, v: f64| 0.6 * (u + u * (1.0 - u) * (1.0 - 2.0 * v)) + 0.4 * u;
    let dens = |s: f64, t: f64| 0.6 * (1.0 + (1.0 - 2.0 * s) * (1.0 - 2.0 * t)) + 0.4;
    let mut err_fold: f64 = 0.0;
    let mut err_quad: f64 = 0.0;
    let mut iterated = c.clone();
    for n in 1..=4u32 {
        if n > 1 {
            iterated = copula::fold(&iterated, &c);
        }
        let cn = copula::n_fold(&c, n)?;
        for (u, v) in grid33() {
            let x = copula::cdf(&cn, u, v)?;
            err_fold = err_fold.max((x - copula::cdf(&iterated, u, v)?).abs());
            err_quad = err_quad.max((x - nystrom_power(&d2, &dens, n, u, v)).abs());
        }
    }
    outcome(
        err_fold <= 1e-8 && err_quad <= 1e-8,
        format!("vs fold iteration {err_fold:.1e}, vs quadrature iteration {err_quad:.1e}"),
    )
}

fn criterion_4() -> Result<Outcome> {
    let theta = 0.6;
    let c = CopulaSpec::fgm(theta)?;
    let m = 1024;
    let e1 = mixing::density_extrema(&c, 1, m)?;
    let mut pass = (0.39..=0.4).contains(&e1.lower_bound) && (1.6..=1.61).contains(&e1.upper_bound);
    let mut detail = format!("n=1 bounds [{:.6}, {:.6}]", e1.lower_bound, e1.upper_bound);
    for n in 1..=4 {
        let e = mixing::density_extrema(&c, n, m)?;
        let d = 3.0 * (theta / 3.0f64).powi(n as i32);
        pass &= e.lower_bound <= e.min && e.max <= e.upper_bound;
        pass &= e.min >= 1.0 - d - 1e-12 && e.max <= 1.0 + d + 1e-12;
        pass &= mixing::psi_prime_lower_bound(&c, n, m)? <= 1.0 - d + 1e-12;
        pass &= mixing::psi_star_upper_bound(&c, n, m)? >= 1.0 + d - 1e-12;
    }
    let up = mixing::psi_star_upper_bound(&CopulaSpec::fgm(1.0)?, 2, m)?;
    pass &= up < 2.0;
    detail.push_str(&format!("; n<=4 inside envelope; theta=1, n=2 upper {up:.6}"));
    outcome(pass, detail)
}

fn criterion_5() -> Result<Outcome> {
    let c = CopulaSpec::mardia(0.3, 0.3)?;
    let eps = [1e-1, 1e-2, 1e-3];
    let scan = mixing::corner_divergence_scan(&c, 1, &eps)?;
    let err = scan
        .iter()
        .map(|r| (r.ratio - (0.4 + 0.3 / r.epsilon)).abs())
        .fold(0.0, f64::max);
    let report = mixing::classify(&c, 64, 2)?;
    let not_star = report.has(Verdict::NotPsiStarMixing);
    outcome(
        err <= 1e-12 && not_star,
        format!("max |ratio - (0.4 + 0.3/eps)| = {err:.1e}; NotPsiStarMixing: {not_star}"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let c = CopulaSpec::gaussian(FRAC_1_SQRT_2)?;
    let maxima: Vec<f64> = [64, 256, 1024]
        .iter()
        .map(|&m| copula::density_grid(&c, m).map(|g| g.max()))
        .collect::<Result<_>>()?;
    let increasing = maxima.windows(2).all(|w| w[1] > w[0]);
    let big = maxima[2] > 1e3;
    let mut verdicts = true;
    for r in [FRAC_1_SQRT_2, 0.5, -0.3] {
        verdicts &= mixing::classify(&CopulaSpec::gaussian(r)?, 128, 1)?.has(Verdict::NotPsiStarMixing);
    }
    outcome(
        increasing && big && verdicts,
        format!(
            "grid maxima {:.2} / {:.2} / {:.2} (increasing: {increasing}, > 1e3: {big}); classifier NotPsiStarMixing: {verdicts}",
            maxima[0], maxima[1], maxima[2]
        ),
    )
}

fn criterion_7() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for theta in [0.25, 0.5, 0.75, -1.0, -0.5] {
        let max = copula::density_grid(&CopulaSpec::amh(theta)?, 1024)?.max();
        let bound = if theta > 0.0 {
            (1.0 + theta * theta) / (1.0 - theta).powi(3)
        } else {
            1.0 + theta * theta
        };
        pass &= max <= bound + 1e-9;
        parts.push(format!("theta {theta}: max {max:.4} (bound {bound:.4})"));
    }
    outcome(pass, parts.join(", "))
}

fn ks_uniform(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max)
}

fn criterion_8() -> Result<Outcome> {
    let start = Instant::now();
    let s = sampler::sample_chain(&CopulaSpec::fgm(0.6)?, 100_000, SEED)?;
    let ks = ks_uniform(&s.uniforms);
    let pairs = (s.len() - 1) as f64;
    let joint = s.uniforms.windows(2).filter(|w| w[0] <= 0.5 && w[1] <= 0.5).count() as f64 / pairs;
    let s = sampler::sample_chain(&CopulaSpec::mardia(0.3, 0.2)?, 100_000, SEED)?;
    let copies = s.uniforms.windows(2).filter(|w| w[1] == w[0]).count() as f64 / pairs;
    let flips = s.uniforms.windows(2).filter(|w| w[1] == 1.0 - w[0]).count() as f64 / pairs;
    let elapsed = start.elapsed();
    outcome(
        ks <= 0.01
            && (joint - 0.2875).abs() <= 0.01
            && (copies - 0.3).abs() <= 0.01
            && (flips - 0.2).abs() <= 0.01
            && elapsed < Duration::from_secs(20),
        format!("KS {ks:.4}, joint {joint:.4}, copy {copies:.4}, flip {flips:.4}"),
    )
}

fn criterion_9() -> Result<Outcome> {
    let cfg = experiment::study_config(SEED, 200);
    let mut pass = true;
    let mut parts = Vec::new();
    for name in cfg.table_names() {
        let c = cfg.resolve(&name)?;
        let reps = robust::run_replications(&c, &cfg.marginal, 20_000, 200, cfg.level, SEED)?;
        let coverage = reps.iter().filter(|r| r.covered).count() as f64 / reps.len() as f64;
        let (lo, hi) = reps.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
            let w = r.result.half_width();
            (lo.min(w), hi.max(w))
        });
        pass &= coverage >= 0.9 && lo > 0.6 && hi < 1.4;
        parts.push(format!("{name} cover {coverage:.3} hw [{lo:.3}, {hi:.3}]"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Result<Outcome> {
    let m = MarginalSpec::normal(30.0, 1.0)?;
    let reps = robust::run_replications(&CopulaSpec::independence(), &m, 5000, 500, 0.95, SEED)?;
    let mu: Vec<f64> = reps.iter().map(|r| r.result.mu_hat).collect();
    let k = mu.len() as f64;
    let mean = mu.iter().sum::<f64>() / k;
    let var = mu.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    let z = (mean - 30.0) / se;
    outcome(z.abs() <= 3.0, format!("mean mu_hat {mean:.4}, se {se:.4}, z = {z:.2}"))
}

fn criterion_11() -> Result<Outcome> {
    let m = MarginalSpec::normal(30.0, 1.0)?;
    let d = robust::variance_diagnostic(&CopulaSpec::fgm(0.6)?, &m, &[100, 1000, 20_000], 100, SEED)?;
    let decreasing = d.nhvar.windows(2).all(|w| w[1] < w[0]);
    let cols: Vec<String> = d
        .sizes
        .iter()
        .zip(&d.nhvar)
        .map(|(n, v)| format!("n={n}: {v:.4}"))
        .collect();
    outcome(decreasing, format!("nhvar {}", cols.join(", ")))
}

fn criterion_12() -> Result<Outcome> {
    let bin = env!("CARGO_BIN_EXE_psimix");
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/study.json");
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for dir in &dirs {
        let status = Command::new(bin)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .arg("table4")
            .output()?
            .status;
        if !status.success() {
            return outcome(false, format!("table4 exited with {status}"));
        }
    }
    let mut same = true;
    for file in ["table4.csv", "table4_replications.csv"] {
        same &= fs::read(dirs[0].path().join(file))? == fs::read(dirs[1].path().join(file))?;
    }
    outcome(same, "two table4 runs byte-identical")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("fold-oracle equivalence", criterion_1, Some(10)),
        ("FGM n-fold formula", criterion_2, Some(30)),
        ("perturbation propagation", criterion_3, None),
        ("FGM psi envelopes", criterion_4, None),
        ("Mardia corner divergence", criterion_5, None),
        ("Gaussian unboundedness", criterion_6, None),
        ("AMH density bound", criterion_7, None),
        ("sampler law", criterion_8, Some(20)),
        ("robust-mean study coverage", criterion_9, Some(600)),
        ("estimator calibration", criterion_10, None),
        ("variance condition", criterion_11, None),
        ("table determinism", criterion_12, None),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => {
                let in_time = limit.is_none_or(|l| secs < l as f64);
                let mut detail = o.detail;
                if !in_time {
                    detail.push_str(&format!("; over the {}s budget", limit.unwrap()));
                }
                (o.pass && in_time, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {detail} ({secs:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
