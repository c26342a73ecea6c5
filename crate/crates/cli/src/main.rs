use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use higarrote::datasets::IDS;
use higarrote::garrote::{GridRange, ScopeChoice};
use higarrote::hyperfit::DEFAULT_SEED;
use higarrote::reproduce::reproduce_many;
use higarrote::{higarrote as fit, read_design, DesignConfig, Error, GarroteOptions, HeredityMode, Report, SimSpec};

#[derive(Parser)]
#[command(
    name = "higarrote",
    version,
    about = "Heredity-constrained nonnegative garrote for designed experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a design given as CSV plus a JSON or TOML config.
    Analyze {
        design: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: FitFlags,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun bundled case studies and check them against published results.
    Reproduce {
        /// Dataset id, or `all`.
        #[arg(default_value = "all")]
        which: String,
        #[command(flatten)]
        flags: FitFlags,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Monte Carlo study on a bundled design.
    Simulate {
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Per-replication CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        flags: FitFlags,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// List bundled datasets.
    Datasets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Heredity {
    Weak,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Auto,
    MainOnly,
    #[value(name = "main-2fi")]
    Main2fi,
}

#[derive(clap::Args, Clone)]
struct FitFlags {
    #[arg(long, value_enum)]
    heredity: Option<Heredity>,
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
    /// Seed for the hyperparameter start points.
    #[arg(long, env = "HIGARROTE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Use the budget interval [0.1, n-1] instead of [0.1, 0.3(n-1)].
    #[arg(long)]
    wide_grid: bool,
    /// Keep coded columns unscaled.
    #[arg(long)]
    no_standardize: bool,
}

impl FitFlags {
    fn apply(&self, o: &mut GarroteOptions) {
        if let Some(h) = self.heredity {
            o.heredity = match h {
                Heredity::Weak => HeredityMode::Weak,
                Heredity::Strong => HeredityMode::Strong,
            };
        }
        if let Some(s) = self.scope {
            o.scope = match s {
                ScopeArg::Auto => ScopeChoice::Auto,
                ScopeArg::MainOnly => ScopeChoice::MainOnly,
                ScopeArg::Main2fi => ScopeChoice::Main2fi,
            };
        }
        o.fit.seed = self.seed.unwrap_or(DEFAULT_SEED);
        if let Some(g) = self.grid_points {
            o.grid_points = g;
        }
        if self.wide_grid {
            o.grid_range = GridRange::Wide;
        }
        if self.no_standardize {
            o.standardize = false;
        }
    }
}

fn emit(text: String, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Analyze {
            design,
            config,
            flags,
            output,
            out,
        } => {
            let cfg = DesignConfig::load(&config)?;
            let table = read_design(&design, &cfg)?;
            let mut opts = GarroteOptions::default();
            if let Some(s) = cfg.scope {
                opts.scope = s;
            }
            if let Some(h) = cfg.heredity {
                opts.heredity = h;
            }
            flags.apply(&mut opts);
            let report = fit(&table, &opts)?;
            let name = cfg.name.clone().unwrap_or_else(|| design.display().to_string());
            let r = Report::new(&name, &report);
            let text = match output {
                Output::Json => r.to_json()? + "\n",
                Output::Text => r.to_text(),
            };
            emit(text, out.as_ref())?;
            Ok(true)
        }
        Command::Reproduce { which, flags, output } => {
            let verdicts = reproduce_many(&which, |o| flags.apply(o))?;
            match output {
                Output::Json => println!("{}", serde_json::to_string_pretty(&verdicts)?),
                Output::Text => {
                    for v in &verdicts {
                        print!("{}", v.to_text());
                    }
                    let passed = verdicts.iter().filter(|v| v.passed).count();
                    println!("{passed}/{} datasets passed", verdicts.len());
                }
            }
            Ok(verdicts.iter().all(|v| v.passed))
        }
        Command::Simulate {
            spec,
            csv,
            flags,
            output,
        } => {
            let spec: SimSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).map_err(|e| {
                        Error::Config(format!(
                            "{}: line {}, column {}: {e}",
                            p.display(),
                            e.line(),
                            e.column()
                        ))
                    })?
                }
                None => SimSpec::default(),
            };
            let mut opts = GarroteOptions::default();
            flags.apply(&mut opts);
            let summary = higarrote::run_simulation(&spec, &opts)?;
            if let Some(p) = csv {
                emit(summary.replications_csv()?, Some(&p))?;
            }
            match output {
                Output::Json => {
                    let mut v = serde_json::to_value(&summary)?;
                    if let Some(o) = v.as_object_mut() {
                        o.remove("replications");
                    }
                    println!("{}", serde_json::to_string_pretty(&v)?);
                }
                Output::Text => {
                    println!(
                        "{} replications, sd {}, seed {}; exact recovery {:.2}",
                        spec.replications, spec.sd, spec.seed, summary.exact_recovery
                    );
                    println!(
                        "{:<8} {:>9} {:>10} {:>10} {:>10}",
                        "effect", "frequency", "q1", "median", "q3"
                    );
                    for e in &summary.effects {
                        println!(
                            "{:<8} {:>9.2} {:>10.3} {:>10.3} {:>10.3}",
                            e.label, e.frequency, e.q1, e.median, e.q3
                        );
                    }
                }
            }
            Ok(true)
        }
        Command::Datasets => {
            for id in IDS {
                println!("{id}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("HIGARROTE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .or_else(|| info.payload().downcast_ref::<&str>().copied())
            .unwrap_or("");
        if msg.contains("Broken pipe") {
            std::process::exit(0);
        }
        default_hook(info)
    }));
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let input = e.downcast_ref::<Error>().is_some_and(Error::is_input_error)
                || e.downcast_ref::<std::io::Error>().is_some();
            ExitCode::from(if input { 2 } else { 1 })
        }
    }
}
