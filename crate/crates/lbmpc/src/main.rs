use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lbmpc::config::{ControllerKind, RunConfig};
use lbmpc::harness::{self, ExperimentResult};
use lbmpc::io;

#[derive(Parser)]
#[command(name = "lbmpc", version, about = "Learning-based MPC for multirotors: simulation and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set admm.rho=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    controller: Option<ControllerKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> lbmpc::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg = cfg.with_overrides(&self.overrides)?;
        if let Some(c) = self.controller {
            cfg.controller = c;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// One experiment at `trajectory.omega` (FB, or FB then LB).
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        omega: Option<f64>,
        /// Train LB on this dataset instead of collecting one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Experiments over `trajectory.omegas`.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rates replacing `trajectory.omegas`.
        #[arg(long, value_delimiter = ',')]
        omegas: Option<Vec<f64>>,
    },
    /// Run FB and write a Latin-hypercube training set.
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        omega: Option<f64>,
        /// Dataset path; defaults to `<out>/dataset.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Recompute metrics from an output directory's logs.
    Report {
        #[arg(default_value = "out")]
        dir: PathBuf,
    },
    /// Print the default config.
    InitConfig,
}

fn finish(out: &std::path::Path, cfg: &RunConfig, result: &ExperimentResult) -> lbmpc::Result<bool> {
    harness::write_outputs(out, cfg, result)?;
    print!("{}", harness::format_report(&result.report(cfg)));
    println!("outputs in {}", out.display());
    Ok(!result.any_failed())
}

fn execute(cli: Cli) -> lbmpc::Result<bool> {
    match cli.command {
        Command::Run { common, omega, dataset } => {
            let cfg = common.load()?;
            let omega = omega.unwrap_or(cfg.trajectory.omega);
            let result = match (dataset, cfg.controller) {
                (Some(path), ControllerKind::LbMpc) => {
                    let ds = io::load_dataset(&path)?;
                    let lb = harness::run_learned(&cfg, omega, &ds)?;
                    ExperimentResult { runs: vec![lb], datasets: Vec::new() }
                }
                (Some(_), ControllerKind::FbMpc) => {
                    return Err(lbmpc::Error::Config("--dataset only applies to lb_mpc".into()))
                }
                (None, _) => harness::run_experiment(&cfg, &[omega])?,
            };
            finish(&common.out, &cfg, &result)
        }
        Command::Sweep { common, omegas } => {
            let mut cfg = common.load()?;
            if let Some(w) = omegas {
                cfg.trajectory.omegas = w;
            }
            let result = harness::run_experiment(&cfg, &cfg.trajectory.omegas.clone())?;
            finish(&common.out, &cfg, &result)
        }
        Command::Collect { common, omega, dataset } => {
            let cfg = common.load()?;
            let omega = omega.unwrap_or(cfg.trajectory.omega);
            let fb = harness::run_nominal(&cfg, omega)?;
            let ds = harness::collect_training_data(&fb.outcome.log, cfg.gp.n_data, cfg.seed)?;
            std::fs::create_dir_all(&common.out)?;
            let path = dataset.unwrap_or_else(|| common.out.join("dataset.csv"));
            io::save_dataset(&ds, &path)?;
            println!("{} samples written to {}", ds.len(), path.display());
            Ok(!fb.report.failed())
        }
        Command::Report { dir } => {
            let (report, runs) = harness::report_from_dir(&dir)?;
            harness::write_summary(&dir, &report)?;
            let logs: Vec<_> = runs.iter().map(|(r, l)| (r.clone(), l)).collect();
            harness::emit_plot_data(&dir.join("plots"), &logs)?;
            print!("{}", harness::format_report(&report));
            Ok(report.runs.iter().all(|r| !r.failed()))
        }
        Command::InitConfig => {
            print!("{}", RunConfig::default().to_toml());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more runs failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
