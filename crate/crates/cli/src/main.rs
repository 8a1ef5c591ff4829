use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polymer_ldp::config::{FunctionalGrid, GammaCase, SandwichGrid};
use polymer_ldp::{report, CliError, Experiment, ExperimentConfig, LambdaSource, Method};
use polymer_ldp_core::TailSpec;

#[derive(Parser)]
#[command(name = "polymer-ldp", version, about = "Directed polymer lower-tail experiments")]
struct Cli {
    /// Root seed; overrides the seed of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory under which run directories are created.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
    /// Sample fields and compute ln Z(T) and the last-passage value.
    Simulate {
        #[command(flatten)]
        models: Models,
        #[arg(long = "horizon", short = 'T', required = true, num_args = 1..)]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        replicas: usize,
        /// Compare every field against brute-force path enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Build the doubling path family and verify its counting bounds.
    Gamma {
        #[arg(long)]
        dim: usize,
        #[arg(long = "horizon", short = 'M')]
        horizon: usize,
        #[arg(long)]
        no_verify: bool,
        #[arg(long)]
        facts_up_to: Option<u32>,
        #[arg(long)]
        dump_paths: Option<PathBuf>,
    },
    /// Evaluate rate functionals, the sandwich bounds, level solutions and the regime.
    Rate {
        #[command(flatten)]
        models: Models,
        /// Tabulate F(z) on [2, z_max].
        #[arg(long)]
        functional_max: Option<f64>,
        /// Check the sandwich bounds for η up to this value.
        #[arg(long)]
        sandwich_max: Option<f64>,
        /// Solve F(η) = T for each listed T.
        #[arg(long, num_args = 1..)]
        eta_for: Vec<f64>,
        #[arg(long)]
        classify: bool,
    },
    /// Estimate Q(ln Z(T) <= (λ̂ - ε) T).
    RareEvent {
        #[command(flatten)]
        models: Models,
        #[arg(long = "horizon", short = 'T')]
        horizon: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, num_args = 1.., default_values_t = [MethodArg::Mc])]
        method: Vec<MethodArg>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Cone depth; defaults to floor(η^{1/d}).
        #[arg(long)]
        m: Option<usize>,
        /// Cone tilt parameter.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[command(flatten)]
        lambda: LambdaArgs,
        #[arg(long)]
        check_exact: bool,
    },
    /// Print the summary table of a results file.
    Summarize {
        results: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Write plot-ready CSV columns for a results file.
    PlotData {
        results: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Models {
    /// TOML file holding one tail model; repeatable.
    #[arg(long = "model", required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct LambdaArgs {
    /// Use this value for λ̂.
    #[arg(long, conflicts_with_all = ["lambda_horizon", "lambda_exact"])]
    lambda: Option<f64>,
    /// Estimate λ̂ from replicas at this horizon.
    #[arg(long)]
    lambda_horizon: Option<usize>,
    #[arg(long, default_value_t = 64)]
    lambda_replicas: usize,
    /// Exact E ln Z(T)/T at this horizon (two-point fields only).
    #[arg(long, conflicts_with = "lambda_horizon")]
    lambda_exact: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
    Cone,
}

fn load_models(models: &Models) -> Result<Vec<TailSpec>, CliError> {
    models
        .files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(p.display().to_string(), e))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn lambda_source(args: &LambdaArgs) -> LambdaSource {
    match (args.lambda, args.lambda_exact, args.lambda_horizon) {
        (Some(value), _, _) => LambdaSource::Fixed { value },
        (None, Some(horizon), _) => LambdaSource::ExactMean { horizon },
        (None, None, h) => LambdaSource::Estimate { horizon: h.unwrap_or(64), replicas: args.lambda_replicas },
    }
}

fn absolute(p: &Path) -> Result<String, CliError> {
    let cwd = std::env::current_dir().map_err(|e| CliError::Io("current directory".into(), e))?;
    Ok(cwd.join(p).display().to_string())
}

fn build_config(seed: u64, command: Command) -> Result<ExperimentConfig, CliError> {
    let (models, experiment) = match command {
        Command::Run { .. } | Command::Summarize { .. } | Command::PlotData { .. } => unreachable!("handled by caller"),
        Command::Simulate { models, horizons, replicas, oracle } => {
            (load_models(&models)?, Experiment::Simulate { horizons, replicas, oracle })
        }
        Command::Gamma { dim, horizon, no_verify, facts_up_to, dump_paths } => {
            let dump_paths = dump_paths.as_deref().map(absolute).transpose()?;
            let case = GammaCase { dim, horizon, verify: !no_verify, facts_up_to, dump_paths };
            (Vec::new(), Experiment::Gamma { cases: vec![case] })
        }
        Command::Rate { models, functional_max, sandwich_max, eta_for, classify } => (
            load_models(&models)?,
            Experiment::Rate {
                functional: functional_max.map(|z_max| FunctionalGrid { z_min: 2.0, z_max, per_decade: 8, rel_tol: 1e-8 }),
                sandwich: sandwich_max.map(|eta_max| SandwichGrid { eta_max, points: Vec::new() }),
                eta_for,
                classify,
            },
        ),
        Command::RareEvent { models, horizon, eps, method, n, m, eta, lambda, check_exact } => {
            let methods = method
                .iter()
                .map(|k| match k {
                    MethodArg::Exact => Method::Exact,
                    MethodArg::Mc => Method::Mc,
                    MethodArg::Cone => Method::Cone { m, eta },
                })
                .collect();
            (
                load_models(&models)?,
                Experiment::RareEvent { horizon, eps, methods, n, lambda: lambda_source(&lambda), check_exact },
            )
        }
    };
    let text = toml::to_string(&ExperimentConfig { seed, models, experiment }).expect("config serializes");
    ExperimentConfig::from_toml(&text)
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let config = match cli.command {
        Command::Summarize { results, csv } => {
            let rows = report::summary_rows(&report::read_results(&results)?);
            let text = if csv { report::render_csv(&rows)? } else { report::render_text(&rows) };
            print!("{text}");
            return Ok(true);
        }
        Command::PlotData { results, output } => {
            let text = report::render_plot(&report::plot_rows(&report::read_results(&results)?))?;
            match output {
                Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))?,
                None => print!("{text}"),
            }
            return Ok(true);
        }
        Command::Run { config } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            config
        }
        command => build_config(cli.seed.unwrap_or(0), command)?,
    };
    let report = polymer_ldp::run(&config, &cli.out)?;
    for (name, passed, detail) in report.output.checks() {
        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    println!("{}", report.dir.display());
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
