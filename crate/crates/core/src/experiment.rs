//! Configuration-driven experiments: the robust-mean study table, chain
//! exports and figure data.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::copula::{self, CopulaSpec};
use crate::error::{Error, Result};
use crate::robust::{self, Replication, ResultRow};
use crate::sampler::{self, csv_writer, fmt_float, MarginalSpec};

pub const SCHEMA: &str = "psimix-experiment/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCopula {
    pub name: String,
    pub copula: CopulaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Pi,
    M,
}

/// `base + alpha (Π - base)` or `base + alpha (M - base)`, registered
/// under `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub name: String,
    pub base: String,
    pub kind: PerturbationKind,
    pub alpha: f64,
}

fn default_replications() -> u64 {
    1
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub copulas: Vec<NamedCopula>,
    pub marginal: MarginalSpec,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Copula names (in row order) for the study table; defaults to every
    /// copula followed by every perturbation.
    #[serde(default)]
    pub table: Option<Vec<String>>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(config_err(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        self.marginal
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(config_err("sizes must be a nonempty list of positive lengths"));
        }
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(config_err(format!("level {} is outside (0, 1)", self.level)));
        }
        let mut seen = HashMap::new();
        for name in self.names() {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(config_err(format!("duplicate copula name {name:?}")));
            }
        }
        for p in &self.perturbations {
            if !(0.0..=1.0).contains(&p.alpha) {
                return Err(config_err(format!(
                    "perturbation {:?}: alpha {} is outside [0, 1]",
                    p.name, p.alpha
                )));
            }
        }
        for name in self.table_names() {
            self.resolve(&name)?;
        }
        Ok(())
    }

    /// Every declared name: copulas, then perturbations.
    pub fn names(&self) -> Vec<String> {
        self.copulas
            .iter()
            .map(|c| c.name.clone())
            .chain(self.perturbations.iter().map(|p| p.name.clone()))
            .collect()
    }

    pub fn table_names(&self) -> Vec<String> {
        self.table.clone().unwrap_or_else(|| self.names())
    }

    /// The copula registered under `name`.
    pub fn resolve(&self, name: &str) -> Result<CopulaSpec> {
        self.resolve_depth(name, 0)
    }

    fn resolve_depth(&self, name: &str, depth: usize) -> Result<CopulaSpec> {
        if depth > self.perturbations.len() {
            return Err(config_err(format!("perturbation cycle through {name:?}")));
        }
        if let Some(c) = self.copulas.iter().find(|c| c.name == name) {
            return Ok(c.copula.clone());
        }
        if let Some(p) = self.perturbations.iter().find(|p| p.name == name) {
            let base = self.resolve_depth(&p.base, depth + 1)?;
            let out = match p.kind {
                PerturbationKind::Pi => copula::perturb_pi(&base, p.alpha),
                PerturbationKind::M => copula::perturb_m(&base, p.alpha),
            };
            return out.map_err(|e| config_err(e.to_string()));
        }
        Err(config_err(format!("unknown copula name {name:?}")))
    }
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidSpec(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

/// One study-table cell: the estimate from replication 0 and coverage over
/// all replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table4Row {
    pub copula: String,
    pub n: usize,
    pub first: Replication,
    pub coverage: f64,
    pub replications: Vec<Replication>,
}

/// Runs the study for every table copula and size. All cells share the
/// replication seeds derived from `seed`.
pub fn table4(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Table4Row>> {
    let mut rows = Vec::new();
    for name in cfg.table_names() {
        let c = cfg.resolve(&name)?;
        for &n in &cfg.sizes {
            let reps = robust::run_replications(
                &c,
                &cfg.marginal,
                n,
                cfg.replications,
                cfg.level,
                seed,
            )?;
            let coverage = reps.iter().filter(|r| r.covered).count() as f64 / reps.len() as f64;
            rows.push(Table4Row {
                copula: name.clone(),
                n,
                first: reps[0].clone(),
                coverage,
                replications: reps,
            });
        }
    }
    Ok(rows)
}

/// Writes the study table: the results columns plus `coverage`.
pub fn write_table4_csv<W: Write>(rows: &[Table4Row], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "copula", "n", "seed", "h", "r_tilde", "mu_hat", "ci_lo", "ci_hi", "covered", "coverage",
    ])?;
    for row in rows {
        let r = &row.first.result;
        w.write_record([
            row.copula.clone(),
            r.n.to_string(),
            row.first.seed.to_string(),
            fmt_float(r.h),
            fmt_float(r.r_tilde),
            fmt_float(r.mu_hat),
            fmt_float(r.ci_lo),
            fmt_float(r.ci_hi),
            u8::from(row.first.covered).to_string(),
            fmt_float(row.coverage),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Every replication of every cell in the results-CSV format.
pub fn write_table4_replications_csv<W: Write>(rows: &[Table4Row], out: W) -> Result<()> {
    let flat: Vec<ResultRow> = rows
        .iter()
        .flat_map(|row| {
            row.replications.iter().map(|r| ResultRow {
                copula: row.copula.clone(),
                seed: r.seed,
                result: r.result,
                covered: r.covered,
            })
        })
        .collect();
    robust::write_results_csv(&flat, out)
}

/// Human-readable rendering of the study table.
pub fn format_table4(rows: &[Table4Row]) -> String {
    let mut s = format!(
        "{:<24} {:>7} {:>10} {:>22} {:>9}\n",
        "copula", "n", "mu_hat", "CI", "coverage"
    );
    for row in rows {
        let r = &row.first.result;
        s.push_str(&format!(
            "{:<24} {:>7} {:>10.4} {:>22} {:>9.3}\n",
            row.copula,
            r.n,
            r.mu_hat,
            format!("({:.2}, {:.2})", r.ci_lo, r.ci_hi),
            row.coverage
        ));
    }
    s
}

/// Writes `u,v,C(u,v)` on the `(k+1) × (k+1)` lattice `{i/k}`.
pub fn write_surface_csv<W: Write>(c: &CopulaSpec, k: usize, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["u", "v", "C"])?;
    for i in 0..=k {
        let u = i as f64 / k as f64;
        for j in 0..=k {
            let v = j as f64 / k as f64;
            w.write_record([fmt_float(u), fmt_float(v), fmt_float(copula::cdf(c, u, v)?)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes consecutive pairs `t,y_t,y_next` of a chain.
pub fn write_pairs_csv<W: Write>(s: &sampler::ChainSample, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["t", "y_t", "y_next"])?;
    for (t, pair) in s.values.windows(2).enumerate() {
        w.write_record([(t + 1).to_string(), fmt_float(pair[0]), fmt_float(pair[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// What a figure id produces.
#[derive(Debug, Clone)]
enum FigureItem {
    Surface(&'static str, CopulaSpec),
    Chain(&'static str, CopulaSpec),
}

/// Figure ids 1 to 4: copula surfaces and simulated chains.
const SURFACE_GRID: usize = 100;
const FIGURE_CHAIN_LEN: usize = 500;

fn figure_items(id: u32) -> Result<Vec<FigureItem>> {
    use FigureItem::*;
    let fgm6 = CopulaSpec::fgm(0.6)?;
    let fgm4 = CopulaSpec::fgm(0.4)?;
    let fr6 = CopulaSpec::frechet(0.6)?;
    Ok(match id {
        1 => vec![
            Surface("fgm_0.6", fgm6.clone()),
            Surface("fgm_0.6_pi_0.4", copula::perturb_pi(&fgm6, 0.4)?),
        ],
        2 => vec![
            Chain("fgm_0.4", fgm4.clone()),
            Chain("fgm_0.4_m_0.7", copula::perturb_m(&fgm4, 0.7)?),
        ],
        3 => vec![
            Chain("frechet_0.6", fr6.clone()),
            Chain("frechet_0.6_pi_0.7", copula::perturb_pi(&fr6, 0.7)?),
            Chain("frechet_0.6_m_0.7", copula::perturb_m(&fr6, 0.7)?),
        ],
        4 => vec![
            Surface("frechet_0.6", fr6.clone()),
            Surface("frechet_0.6_pi_0.4", copula::perturb_pi(&fr6, 0.4)?),
            Surface("frechet_0.6_m_0.4", copula::perturb_m(&fr6, 0.4)?),
        ],
        other => return Err(config_err(format!("unknown figure id {other} (expected 1-4)"))),
    })
}

/// Writes the data files behind figure `id` into `dir` and returns their
/// paths. Chains use a standard normal marginal and `seed`.
pub fn figure_data(id: u32, dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    let items = figure_items(id)?;
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let std_normal = MarginalSpec::normal(0.0, 1.0)?;
    for item in items {
        match item {
            FigureItem::Surface(tag, c) => {
                let p = dir.join(format!("fig{id}_{tag}_surface.csv"));
                write_surface_csv(&c, SURFACE_GRID, fs::File::create(&p)?)?;
                paths.push(p);
            }
            FigureItem::Chain(tag, c) => {
                let s = sampler::apply_marginal(
                    sampler::sample_chain(&c, FIGURE_CHAIN_LEN, seed)?,
                    std_normal,
                )?;
                let p = dir.join(format!("fig{id}_{tag}_chain.csv"));
                s.write_csv(fs::File::create(&p)?)?;
                paths.push(p);
                let p = dir.join(format!("fig{id}_{tag}_pairs.csv"));
                write_pairs_csv(&s, fs::File::create(&p)?)?;
                paths.push(p);
            }
        }
    }
    Ok(paths)
}

/// The robust-mean study: FGM(0.6), its M-perturbation, Fréchet(0.6), and
/// the Fréchet copula perturbed towards FGM(0.6), all with α = 0.4 and a
/// Normal(30, 1) marginal.
pub fn study_config(seed: u64, replications: u64) -> ExperimentConfig {
    let fgm = CopulaSpec::fgm(0.6).expect("valid");
    let fr = CopulaSpec::frechet(0.6).expect("valid");
    let perturbed_frechet =
        CopulaSpec::convex(vec![0.6, 0.4], vec![fr.clone(), fgm.clone()]).expect("valid");
    ExperimentConfig {
        schema: SCHEMA.into(),
        copulas: vec![
            NamedCopula {
                name: "fgm".into(),
                copula: fgm,
            },
            NamedCopula {
                name: "frechet".into(),
                copula: fr,
            },
            NamedCopula {
                name: "frechet_perturbed".into(),
                copula: perturbed_frechet,
            },
        ],
        marginal: MarginalSpec::Normal {
            mu: 30.0,
            sigma: 1.0,
        },
        sizes: vec![100, 5000, 10000, 20000],
        perturbations: vec![Perturbation {
            name: "fgm_m_perturbed".into(),
            base: "fgm".into(),
            kind: PerturbationKind::M,
            alpha: 0.4,
        }],
        seed,
        replications,
        level: 0.95,
        table: Some(vec![
            "fgm".into(),
            "fgm_m_perturbed".into(),
            "frechet".into(),
            "frechet_perturbed".into(),
        ]),
        outputs: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{"schema":"psimix-experiment/1",
            "copulas":[{"name":"fgm","copula":{"family":"fgm","theta":0.6}}],
            "marginal":{"kind":"normal","mu":30,"sigma":1},
            "sizes":[50],
            "perturbations":[{"name":"fgm_m","base":"fgm","kind":"m","alpha":0.4},
                             {"name":"fgm_m_pi","base":"fgm_m","kind":"pi","alpha":0.5}],
            "seed":3}"#
            .into()
    }

    #[test]
    fn parse_and_resolve() {
        let cfg = ExperimentConfig::from_json(&minimal()).unwrap();
        assert_eq!(cfg.replications, 1);
        assert_eq!(cfg.level, 0.95);
        assert_eq!(cfg.names(), vec!["fgm", "fgm_m", "fgm_m_pi"]);
        let c = cfg.resolve("fgm_m").unwrap();
        assert_eq!(c.terms().len(), 2);
        assert!(cfg.resolve("nope").is_err());
        let c = cfg.resolve("fgm_m_pi").unwrap();
        assert_eq!(c.terms().len(), 3);
    }

    #[test]
    fn config_errors() {
        let bad_schema = minimal().replace("psimix-experiment/1", "v0");
        assert!(matches!(ExperimentConfig::from_json(&bad_schema), Err(Error::Config(_))));
        let bad_alpha = minimal().replace("\"alpha\":0.4", "\"alpha\":1.4");
        assert!(ExperimentConfig::from_json(&bad_alpha).is_err());
        let bad_base = minimal().replace("\"base\":\"fgm\"", "\"base\":\"zzz\"");
        assert!(ExperimentConfig::from_json(&bad_base).is_err());
        let bad_weights = minimal().replace(
            r#"{"family":"fgm","theta":0.6}"#,
            r#"{"family":"convex","weights":[0.5,0.6],"components":[{"family":"m"},{"family":"w"}]}"#,
        );
        let e = ExperimentConfig::from_json(&bad_weights).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let dup = minimal().replace("\"name\":\"fgm_m\"", "\"name\":\"fgm\"");
        assert!(ExperimentConfig::from_json(&dup).is_err());
    }

    #[test]
    fn study_config_round_trips() {
        let cfg = study_config(11, 1);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.table_names().len(), 4);
    }

    #[test]
    fn table_shape() {
        let mut cfg = study_config(5, 2);
        cfg.sizes = vec![100, 200];
        let rows = table4(&cfg, cfg.seed).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.replications.len() == 2));
        // Common seeds across copulas and sizes.
        assert!(rows.iter().all(|r| r.first.seed == 5));
    }

    #[test]
    fn unknown_figure_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("figs");
        assert!(figure_data(9, &target, 1).is_err());
        assert!(!target.exists());
    }

    #[test]
    fn figure_one_surfaces() {
        let dir = tempfile::tempdir().unwrap();
        let paths = figure_data(1, dir.path(), 1).unwrap();
        assert_eq!(paths.len(), 2);
        let text = fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(text.lines().count(), 1 + 101 * 101);
    }
}
