use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coalescent_core::experiments::{self as defaults, execute, Experiment, ExperimentConfig, Format, Source, ToleranceOverride};
use coalescent_core::Error;

#[derive(Parser, Debug)]
#[command(name = "coalescent", version, about = "Genealogies of multitype CSBPs: forest laws, merger rates and their checks")]
struct Cli {
    /// RNG seed (overrides the config file for `run`)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true, env = "COALESCENT_THREADS")]
    threads: Option<usize>,
    /// Write the table here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Absolute quadrature tolerance override
    #[arg(long, global = true, requires = "tol_rel")]
    tol_abs: Option<f64>,
    /// Relative quadrature tolerance override
    #[arg(long, global = true, requires = "tol_abs")]
    tol_rel: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mechanism checks
    #[command(subcommand)]
    Mechanism(MechanismCmd),
    /// Laplace exponent and its derivatives
    #[command(subcommand)]
    Laplace(LaplaceCmd),
    /// Labelled ancestral forests
    #[command(subcommand)]
    Forest(ForestCmd),
    /// ℙ(For = H, Z(T) ≻ k) for every forest on a mesh
    #[command(name = "forest-law-p")]
    ForestLawP(ForestLawPArgs),
    /// Probability that a k-sample has a single time-0 ancestor (d = 1)
    Mrca(MrcaArgs),
    /// Local merger rates at population x
    Rates(RatesArgs),
    /// Typed Λ-coalescent simulation
    #[command(subcommand)]
    Coalescent(CoalescentCmd),
    /// Identity checks with acceptance bands
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Particle-system Monte Carlo
    #[command(subcommand)]
    Particle(ParticleCmd),
    /// Run a JSON experiment config
    Run {
        config: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum MechanismCmd {
    /// Print invariant checks for a mechanism file or preset
    Validate { mech: String },
}

#[derive(Subcommand, Debug)]
enum LaplaceCmd {
    /// Table of D^α u_i(t, λ)
    Eval {
        #[arg(long)]
        mech: String,
        #[arg(long)]
        t: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        degree: u32,
    },
}

#[derive(Subcommand, Debug)]
enum ForestCmd {
    /// List every forest with sample size k, depth m and d types
    Enumerate {
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        count_only: bool,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Energies and ℚ-laws of every forest at fixed λ
    Law {
        #[arg(long)]
        mech: String,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        mesh: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        cap: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct ForestLawPArgs {
    #[arg(long)]
    mech: String,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    mesh: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<f64>,
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Args, Debug)]
struct MrcaArgs {
    #[arg(long)]
    mech: String,
    #[arg(long)]
    k: u32,
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: f64,
    #[arg(long)]
    x: f64,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[arg(long)]
    mech: String,
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u32>,
    /// Merging group; omit with --c for the full table
    #[arg(long, value_delimiter = ',', requires = "c")]
    alpha: Option<Vec<u32>>,
    /// Type of the merged block (1-based)
    #[arg(long, requires = "alpha")]
    c: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum CoalescentCmd {
    /// Event log of independent runs
    Simulate {
        /// kingman:β, bolthausen-sznitman or beta:a
        #[arg(long, conflicts_with = "mech")]
        fixture: Option<String>,
        #[arg(long, requires = "x")]
        mech: Option<String>,
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long)]
        horizon: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Gamma mixture and gamma-factorial identities
    Gamma {
        #[arg(long, value_delimiter = ',')]
        js: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        zs: Option<Vec<f64>>,
    },
    /// Continuous Poissonization by Monte Carlo
    Mixture {
        /// deterministic:z…, exponential:rate, feller:β:T:x or a JSON file
        #[arg(long)]
        fixture: String,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        events: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        replicas: u64,
    },
    /// Discrete Poissonization by exact enumeration
    Discrete {
        /// GW model file or fixed:n…
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        /// full, first:T:M, contains:T:M, same-ancestor:G
        #[arg(long, value_delimiter = ',')]
        events: Vec<String>,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Enumerated forest energies against the jet partition function
    Partition {
        #[arg(long)]
        mech: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long = "T", visible_alias = "horizon")]
        horizon: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        max_total: u32,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Small-time forest probabilities against local merger rates
    SmallTime {
        #[arg(long)]
        mech: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<u32>,
        #[arg(long)]
        c: usize,
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
    },
    /// u(t, u(s, θ)) = u(t + s, θ)
    Semigroup {
        #[arg(long)]
        mech: String,
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
    },
}

#[derive(Subcommand, Debug)]
enum ParticleCmd {
    /// MRCA probability over a grid of particle scales
    Mrca {
        #[arg(long)]
        mech: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long = "T", visible_alias = "horizon")]
        horizon: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, default_value_t = 100_000)]
        replicas: u64,
        /// Analytic value to compare against
        #[arg(long)]
        reference: Option<f64>,
    },
}

fn named<T>(s: String) -> Source<T> {
    Source::Named(s)
}

fn experiment(cmd: Command) -> Experiment {
    match cmd {
        Command::Mechanism(MechanismCmd::Validate { mech }) => Experiment::MechanismValidate { mech: named(mech) },
        Command::Laplace(LaplaceCmd::Eval { mech, t, lambda, degree }) => Experiment::LaplaceEval {
            mech: named(mech),
            t,
            lambda,
            degree,
        },
        Command::Forest(ForestCmd::Enumerate { d, k, m, count_only, cap }) => {
            Experiment::ForestEnumerate { d, k, m, count_only, cap }
        }
        Command::Forest(ForestCmd::Law { mech, k, mesh, x, lambda, cap }) => Experiment::ForestLaw {
            mech: named(mech),
            k,
            mesh,
            x,
            lambda,
            cap,
        },
        Command::ForestLawP(a) => Experiment::ForestLawP {
            mech: named(a.mech),
            k: a.k,
            mesh: a.mesh,
            x: a.x,
            cap: a.cap,
        },
        Command::Mrca(a) => Experiment::Mrca {
            mech: named(a.mech),
            k: a.k,
            horizon: a.horizon,
            x: a.x,
        },
        Command::Rates(a) => Experiment::Rates {
            mech: named(a.mech),
            x: a.x,
            k: a.k,
            alpha: a.alpha,
            c: a.c,
        },
        Command::Coalescent(CoalescentCmd::Simulate { fixture, mech, x, k, runs, horizon }) => {
            Experiment::CoalescentSimulate {
                fixture,
                mech: mech.map(named),
                x,
                k,
                runs,
                horizon,
            }
        }
        Command::Verify(v) => match v {
            VerifyCmd::Gamma { js, zs } => Experiment::VerifyGamma {
                js: js.unwrap_or_else(defaults::default_js),
                zs: zs.unwrap_or_else(defaults::default_zs),
                factorial: defaults::default_factorial(),
            },
            VerifyCmd::Mixture { fixture, k, events, replicas } => Experiment::VerifyMixture {
                fixture: named(fixture),
                k,
                events,
                replicas,
            },
            VerifyCmd::Discrete { model, k, events, cap } => Experiment::VerifyDiscrete {
                model: named(model),
                k,
                events,
                cap,
            },
            VerifyCmd::Partition { mech, x, lambda, horizon, m, max_total, cap } => Experiment::VerifyPartition {
                mech: named(mech),
                x,
                lambda,
                horizon,
                m,
                ks: None,
                max_total,
                cap,
            },
            VerifyCmd::SmallTime { mech, x, k, alpha, c, t_grid } => Experiment::VerifySmallTime {
                mech: named(mech),
                x,
                k,
                alpha,
                c,
                t_grid: t_grid.unwrap_or_else(defaults::default_t_grid),
            },
            VerifyCmd::Semigroup { mech, s, t } => {
                Experiment::VerifySemigroup {
                    mech: named(mech),
                    s: s.unwrap_or_else(defaults::default_times),
                    t: t.unwrap_or_else(defaults::default_times),
                    theta: None,
                }
            }
        },
        Command::Particle(ParticleCmd::Mrca { mech, x, horizon, k, n, replicas, reference }) => {
            Experiment::ParticleMrca {
                mech: named(mech),
                x,
                horizon,
                k,
                n: n.unwrap_or_else(defaults::default_n_grid),
                replicas,
                reference,
            }
        }
        Command::Run { .. } => unreachable!("handled by the caller"),
    }
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, Error> {
    let tolerance = match (cli.tol_abs, cli.tol_rel) {
        (Some(abs), Some(rel)) => Some(ToleranceOverride { abs, rel, max_intervals: None }),
        _ => None,
    };
    let format = cli.format.map(|f| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    });
    let mut config = match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        cmd => ExperimentConfig::new(experiment(cmd)),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    if cli.out.is_some() {
        config.output = cli.out;
    }
    if let Some(f) = format {
        config.format = f;
    }
    if tolerance.is_some() {
        config.tolerance = tolerance;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<bool, Error> {
    let config = build_config(cli)?;
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (text, passed) = execute(&config)?;
    match &config.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(passed != Some(false))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed: a value is outside its acceptance band");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
