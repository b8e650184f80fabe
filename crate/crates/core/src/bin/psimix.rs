use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psimix::copula::{self, CopulaSpec};
use psimix::experiment::{self, ExperimentConfig};
use psimix::mixing::{self, MixingReport};
use psimix::sampler::{self, MarginalSpec};
use psimix::{Error, Result};

#[derive(Parser)]
#[command(name = "psimix", version, about = "Copula-based Markov chains: sampling, mixing bounds and the robust-mean study")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config `outputs`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a chain and write `t,u,y` to `<out>/chain_<name>.csv`.
    Simulate {
        /// Copula name from the config, or an inline JSON spec.
        #[arg(long)]
        copula: String,
        #[arg(long)]
        n: usize,
    },
    /// Classify the mixing behaviour of a copula over lags `1..=n_max`.
    Mixing {
        #[arg(long)]
        copula: String,
        #[arg(long, default_value_t = 4)]
        n_max: u32,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Robust-mean study table.
    Table4,
    /// Data behind figures 1-4.
    FigureData {
        #[arg(long)]
        figure: u32,
    },
    /// Print the fold `left * right`, or the n-fold power of `copula`.
    Fold {
        #[arg(long, requires = "right", conflicts_with = "copula")]
        left: Option<String>,
        #[arg(long)]
        right: Option<String>,
        #[arg(long, requires = "n")]
        copula: Option<String>,
        #[arg(long)]
        n: Option<u32>,
    },
    /// Check groundedness, margins and 2-increasingness on a grid.
    Check {
        #[arg(long)]
        copula: String,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
}

struct Ctx {
    config: Option<ExperimentConfig>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn config(&self) -> Result<&ExperimentConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config".into()))
    }

    fn seed(&self) -> Result<u64> {
        match (self.seed, &self.config) {
            (Some(s), _) => Ok(s),
            (None, Some(c)) => Ok(c.seed),
            (None, None) => Err(Error::Config("no seed: pass --seed or --config".into())),
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| self.config.as_ref().and_then(|c| c.outputs.clone()))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// A config name, or an inline JSON spec when the argument starts with `{`.
    fn copula(&self, arg: &str) -> Result<(String, CopulaSpec)> {
        if arg.trim_start().starts_with('{') {
            let c: CopulaSpec = serde_json::from_str(arg)
                .map_err(|e| Error::Config(format!("invalid copula JSON: {e}")))?;
            return Ok((c.label(), c));
        }
        let c = self.config()?.resolve(arg)?;
        Ok((arg.to_string(), c))
    }

    fn marginal(&self) -> MarginalSpec {
        self.config
            .as_ref()
            .map(|c| c.marginal)
            .unwrap_or(MarginalSpec::Uniform01)
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || "._-".contains(ch) { ch } else { '_' })
        .collect()
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::File::create(path)?)
}

fn fmt_bound(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_infinite() => "+inf".into(),
        Some(v) => format!("{v:.6}"),
        None => "n/a".into(),
    }
}

fn mixing_table(r: &MixingReport) -> String {
    let mut s = format!("{} (m = {})\n", r.copula, r.resolution);
    s.push_str(&format!(
        "{:>3} {:>12} {:>12} {:>12} {:>12} {:>10}\n",
        "n", "dens_min", "dens_max", "psi'_lower", "psi*_upper", "unbounded"
    ));
    for l in &r.lags {
        s.push_str(&format!(
            "{:>3} {:>12} {:>12} {:>12.6} {:>12} {:>10}\n",
            l.n,
            fmt_bound(l.density_min),
            fmt_bound(l.density_max),
            l.psi_prime_lower,
            fmt_bound(Some(l.psi_star_upper)),
            l.unbounded_evidence
        ));
    }
    for f in &r.verdicts {
        let basis = match (f.certified, f.lag) {
            (true, _) => "certified".to_string(),
            (false, Some(n)) => format!("grid evidence at n={n}"),
            (false, None) => "grid evidence".to_string(),
        };
        s.push_str(&format!("verdict: {:?} ({:?}, {basis})\n", f.verdict, f.rule));
    }
    if let Some(t) = &r.truncated {
        s.push_str(&format!("truncated: {t}\n"));
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let config = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let ctx = Ctx {
        config,
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Simulate { copula, n } => {
            let (name, c) = ctx.copula(&copula)?;
            let seed = ctx.seed()?;
            let s = sampler::sample_chain(&c, n, seed)?;
            let s = sampler::apply_marginal(s, ctx.marginal())?;
            let path = ctx.out_dir().join(format!("chain_{}.csv", file_stem(&name)));
            s.write_csv(create(&path)?)?;
            println!("{}", path.display());
        }
        Command::Mixing {
            copula,
            n_max,
            resolution,
        } => {
            let (name, c) = ctx.copula(&copula)?;
            let report = mixing::classify(&c, resolution, n_max)?;
            let path = ctx.out_dir().join(format!("mixing_{}.json", file_stem(&name)));
            create(&path)?.write_all((serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
            print!("{}", mixing_table(&report));
            println!("{}", path.display());
            if let Some(t) = report.truncated {
                return Err(Error::DensityUnavailable(t));
            }
        }
        Command::Table4 => {
            let cfg = ctx.config()?;
            let rows = experiment::table4(cfg, ctx.seed()?)?;
            let dir = ctx.out_dir();
            experiment::write_table4_csv(&rows, create(&dir.join("table4.csv"))?)?;
            experiment::write_table4_replications_csv(
                &rows,
                create(&dir.join("table4_replications.csv"))?,
            )?;
            print!("{}", experiment::format_table4(&rows));
        }
        Command::FigureData { figure } => {
            let seed = ctx.seed.or(ctx.config.as_ref().map(|c| c.seed)).unwrap_or(1);
            for p in experiment::figure_data(figure, &ctx.out_dir(), seed)? {
                println!("{}", p.display());
            }
        }
        Command::Fold {
            left,
            right,
            copula: base,
            n,
        } => {
            let c = match (left, right, base, n) {
                (Some(l), Some(r), None, None) => {
                    copula::fold(&ctx.copula(&l)?.1, &ctx.copula(&r)?.1)
                }
                (None, None, Some(b), Some(n)) => copula::n_fold(&ctx.copula(&b)?.1, n)?,
                _ => {
                    return Err(Error::Config(
                        "fold needs either --left and --right, or --copula and --n".into(),
                    ))
                }
            };
            println!("{}", serde_json::to_string(&c)?);
        }
        Command::Check { copula, resolution } => {
            let (_, c) = ctx.copula(&copula)?;
            let report = copula::check_copula_axioms(&c, resolution)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_valid() {
                return Err(Error::Domain(format!(
                    "{} axiom violation(s)",
                    report.violations.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("psimix: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
