//! `flightcell`: calibrate a pack model, extract motion profiles from flight
//! logs, and assess motion-induced degradation against constant-current
//! baselines.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use failure::CliError;

#[derive(Parser, Debug)]
#[command(name = "flightcell", version, about = "Flight-profile battery degradation pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Parameter set JSON.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate free parameters from measured voltage traces.
    Calibrate {
        /// Calibration problem JSON.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Turn a flight log into one reconstructed profile per motion.
    Extract {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Label intervals JSON; threshold segmentation otherwise.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Use the bundled synthetic flight log.
        #[arg(long)]
        synthetic: bool,
        /// Length of each reconstructed profile, s.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Replay one profile with degradation and write its health report.
    Replay {
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        tag: Option<String>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Write per-cycle voltage traces.
        #[arg(long)]
        traces: bool,
    },
    /// Replay baselines and motion profiles, fit and normalize.
    Assess {
        /// Motion profile CSVs (default: every profile in the profile dir).
        #[arg(long = "profile")]
        profiles: Vec<PathBuf>,
        #[arg(long)]
        profile_dir: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Baseline currents, A.
        #[arg(long, value_delimiter = ',')]
        baselines: Option<Vec<f64>>,
        /// Baselines as C-rates instead of amps.
        #[arg(long, value_delimiter = ',')]
        baseline_c_rates: Option<Vec<f64>>,
        #[arg(long)]
        baseline_duration: Option<f64>,
    },
    /// Rebuild the comparison table and plot data from saved reports.
    Report {
        #[arg(long)]
        reports: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let g = cli.global;
    if g.output.is_some() {
        cfg.output_dir = g.output;
    }
    if g.params.is_some() {
        cfg.parameters = g.params;
    }
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if let Some(n) = g.jobs {
        if n == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Calibrate { problem, budget } => {
            cfg.calibrate.problem = problem.or(cfg.calibrate.problem);
            cfg.calibrate.budget = budget.or(cfg.calibrate.budget);
            commands::calibrate(&cfg)
        }
        Command::Extract {
            log,
            labels,
            synthetic,
            duration,
        } => {
            let e = &mut cfg.extract;
            e.log = log.or(e.log.take());
            e.labels = labels.or(e.labels.take());
            e.synthetic |= synthetic;
            if let Some(d) = duration {
                e.target_duration_s = d;
            }
            commands::extract(&cfg)
        }
        Command::Replay {
            profile,
            tag,
            repetitions,
            traces,
        } => {
            let r = &mut cfg.replay;
            r.profile = profile.or(r.profile.take());
            r.tag = tag.or(r.tag.take());
            if let Some(n) = repetitions {
                r.repetitions = n;
            }
            r.traces |= traces;
            commands::replay(&cfg)
        }
        Command::Assess {
            profiles,
            profile_dir,
            repetitions,
            baselines,
            baseline_c_rates,
            baseline_duration,
        } => {
            let a = &mut cfg.assess;
            if !profiles.is_empty() {
                a.profiles = profiles;
            }
            a.profile_dir = profile_dir.or(a.profile_dir.take());
            if let Some(n) = repetitions {
                a.repetitions = n;
            }
            if let Some(b) = baselines {
                a.baseline_currents = b;
                a.baseline_c_rates.clear();
            }
            if let Some(c) = baseline_c_rates {
                a.baseline_c_rates = c;
            }
            if let Some(d) = baseline_duration {
                a.baseline_duration_s = d;
            }
            commands::assess(&cfg)
        }
        Command::Report { reports } => {
            cfg.report.reports = reports.or(cfg.report.reports);
            commands::report(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let err = CliError::config(e.to_string().lines().next().unwrap_or("bad arguments").to_string());
                eprintln!("{}", err.json_line());
                return ExitCode::from(2);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_line());
            ExitCode::from(e.exit as u8)
        }
    }
}
