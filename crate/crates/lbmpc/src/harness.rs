//! Experiment runner: training-data collection, FB/LB runs, metrics and the
//! output bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lbmpc_core::gp::{GpDataset, GpModel};
use lbmpc_core::{StateVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed_loop::{control_ticks, loop_setup, make_controller, run_closed_loop, RunOutcome, RunStatus};
use crate::config::{ControllerKind, RunConfig};
use crate::io::{self, TrajectoryLog};
use crate::timing::TimingStats;
use crate::{Error, Result};

/// Stream offsets so training noise, sampling and evaluation noise differ.
const COLLECT_STREAM: u64 = 0x5eed_0001;
const EVAL_STREAM: u64 = 0x5eed_0002;

/// Latin hypercube over the log's time axis: `n` equal strata of ticks, one
/// uniformly drawn tick per stratum.
pub fn lhs_ticks(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Config("at least one training point is needed".into()));
    }
    if len < n {
        return Err(Error::Config(format!("log has {len} ticks, fewer than the {n} requested samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|k| {
            // stratum [k len / n, (k + 1) len / n), never empty since len >= n
            let (lo, hi) = (k * len / n, (k + 1) * len / n);
            rng.gen_range(lo..hi)
        })
        .collect())
}

pub fn collect_training_data(log: &TrajectoryLog, n: usize, seed: u64) -> Result<GpDataset> {
    let mut ds = GpDataset::default();
    for tick in lhs_ticks(log.len(), n, seed)? {
        let row = &log.rows[tick];
        ds.push(StateVector::from(row.z), Vector3::from(row.d_hat));
    }
    Ok(ds)
}

/// Metrics of one closed-loop run, all recomputable from its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub controller: ControllerKind,
    pub omega: f64,
    pub ticks: usize,
    /// Ticks at or after the warm-up that enter the error metrics.
    pub scored_ticks: usize,
    pub rmse: f64,
    pub max_error: f64,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    /// Ticks whose solve stopped at the iteration cap.
    pub max_iter_fraction: f64,
    /// Fraction of ticks with `c <= c_max`.
    pub thrust_satisfied: f64,
    /// Fraction of ticks with tilt `<= theta_max`.
    pub tilt_satisfied: f64,
    pub status: String,
    pub error: Option<String>,
}

impl RunReport {
    pub fn from_log(
        log: &TrajectoryLog,
        controller: ControllerKind,
        omega: f64,
        cfg: &RunConfig,
        status: &RunStatus,
    ) -> Self {
        let warmup = cfg.sim.warmup;
        // tick times are i / ctrl_hz; compare in ticks to avoid rounding at the edge
        let first = (warmup * cfg.rates.ctrl_hz as f64).round() as usize;
        let scored = log.rows.iter().skip(first);
        let (mut sq, mut max_error, mut scored_ticks) = (0.0, 0.0_f64, 0);
        for row in scored {
            let e = row.position_error();
            sq += e * e;
            max_error = max_error.max(e);
            scored_ticks += 1;
        }
        let n = log.len();
        let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
        let iters: usize = log.rows.iter().map(|r| r.iterations).sum();
        let c = &cfg.constraints;
        let (status, error) = match status {
            RunStatus::Completed => ("completed".to_string(), None),
            RunStatus::Failed(e) => ("failed".to_string(), Some(e.clone())),
        };
        Self {
            controller,
            omega,
            ticks: n,
            scored_ticks,
            rmse: if scored_ticks == 0 { f64::NAN } else { (sq / scored_ticks as f64).sqrt() },
            max_error,
            mean_iterations: if n == 0 { 0.0 } else { iters as f64 / n as f64 },
            max_iterations: log.rows.iter().map(|r| r.iterations).max().unwrap_or(0),
            max_iter_fraction: frac(log.rows.iter().filter(|r| r.status == "max-iters").count()),
            thrust_satisfied: frac(log.rows.iter().filter(|r| r.c <= c.c_max).count()),
            tilt_satisfied: frac(log.rows.iter().filter(|r| r.tilt() <= c.theta_max).count()),
            status,
            error,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// File stem used for this run's log and path files.
    pub fn stem(&self) -> String {
        run_stem(self.controller, self.omega)
    }
}

pub fn run_stem(controller: ControllerKind, omega: f64) -> String {
    format!("{}_w{omega:.3}", controller.as_str())
}

/// Parse a stem written by [`run_stem`].
pub fn parse_stem(stem: &str) -> Option<(ControllerKind, f64)> {
    let (kind, w) = stem.rsplit_once("_w")?;
    Some((kind.parse().ok()?, w.parse().ok()?))
}

/// Per-run wall-clock statistics, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTimingReport {
    pub controller: ControllerKind,
    pub omega: f64,
    pub solve: TimingStats,
    pub precompute: TimingStats,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub report: RunReport,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    /// Training sets drawn for the learned runs, keyed by omega.
    pub datasets: Vec<(f64, GpDataset)>,
}

/// Deterministic part of an experiment; timing lives beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub seed: u64,
    pub runs: Vec<RunReport>,
}

impl ExperimentResult {
    pub fn report(&self, cfg: &RunConfig) -> ExperimentReport {
        ExperimentReport {
            schema_version: crate::config::SCHEMA_VERSION,
            seed: cfg.seed,
            runs: self.runs.iter().map(|r| r.report.clone()).collect(),
        }
    }

    pub fn timing(&self) -> Vec<RunTimingReport> {
        self.runs
            .iter()
            .map(|r| RunTimingReport {
                controller: r.report.controller,
                omega: r.report.omega,
                solve: r.outcome.timing.solve_stats(),
                precompute: r.outcome.timing.precompute_stats(),
            })
            .collect()
    }

    pub fn any_failed(&self) -> bool {
        self.runs.iter().any(|r| r.report.failed())
    }

    pub fn find(&self, controller: ControllerKind, omega: f64) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.report.controller == controller && r.report.omega == omega)
    }
}

/// One closed-loop run of `controller` at `omega`, with an optional model.
pub fn run_single(cfg: &RunConfig, controller: ControllerKind, omega: f64, gp: Option<GpModel>, seed: u64) -> Result<RunRecord> {
    let mut setup = loop_setup(cfg, omega)?;
    setup.seed = seed;
    let mut ctrl = make_controller(cfg, cfg.reference(omega)?, control_ticks(&setup), gp)?;
    let outcome = run_closed_loop(&mut ctrl, &setup)?;
    let report = RunReport::from_log(&outcome.log, controller, omega, cfg, &outcome.status);
    log::info!(
        "{} w={omega}: rmse {:.4} m, {} ticks, {}",
        controller.as_str(),
        report.rmse,
        report.ticks,
        report.status
    );
    Ok(RunRecord { report, outcome })
}

/// The nominal run used both as the FB result and as the LB data source.
pub fn run_nominal(cfg: &RunConfig, omega: f64) -> Result<RunRecord> {
    run_single(cfg, ControllerKind::FbMpc, omega, None, cfg.seed)
}

pub fn fit_model(cfg: &RunConfig, dataset: &GpDataset) -> Result<GpModel> {
    Ok(GpModel::fit(dataset, cfg.gp.kernel())?)
}

/// FB alone, or FB, then collection and fitting, then LB. A failed FB run
/// still yields a dataset if its log is long enough.
pub fn run_experiment_at(cfg: &RunConfig, omega: f64) -> Result<ExperimentResult> {
    let fb = run_nominal(cfg, omega)?;
    if cfg.controller == ControllerKind::FbMpc {
        return Ok(ExperimentResult { runs: vec![fb], datasets: Vec::new() });
    }
    let dataset = collect_training_data(&fb.outcome.log, cfg.gp.n_data, cfg.seed ^ COLLECT_STREAM)?;
    let lb = run_learned(cfg, omega, &dataset)?;
    Ok(ExperimentResult { runs: vec![fb, lb], datasets: vec![(omega, dataset)] })
}

/// LB run from an existing dataset.
pub fn run_learned(cfg: &RunConfig, omega: f64, dataset: &GpDataset) -> Result<RunRecord> {
    let gp = fit_model(cfg, dataset)?;
    run_single(cfg, ControllerKind::LbMpc, omega, Some(gp), cfg.seed ^ EVAL_STREAM)
}

/// Experiments at each rate in `omegas`, in order. Failed runs are kept.
pub fn run_experiment(cfg: &RunConfig, omegas: &[f64]) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut all = ExperimentResult { runs: Vec::new(), datasets: Vec::new() };
    for &omega in omegas {
        let r = run_experiment_at(cfg, omega)?;
        all.runs.extend(r.runs);
        all.datasets.extend(r.datasets);
    }
    Ok(all)
}

pub const PATH_HEADER: &str = "t,x,z,ref_x,ref_z";
pub const RMSE_HEADER: &str = "omega,fb_rmse,lb_rmse,reduction";

/// `x/z` path against the reference.
pub fn path_csv(log: &TrajectoryLog) -> String {
    let mut s = String::from(PATH_HEADER);
    s.push('\n');
    for r in &log.rows {
        let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?}", r.t, r.z[0], r.z[2], r.reference[0], r.reference[2]);
    }
    s
}

/// One row per omega; a missing controller leaves its column empty.
pub fn rmse_table(runs: &[RunReport]) -> String {
    let mut omegas: Vec<f64> = runs.iter().map(|r| r.omega).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let mut s = String::from(RMSE_HEADER);
    s.push('\n');
    for w in omegas {
        let get = |k| runs.iter().find(|r| r.omega == w && r.controller == k).map(|r| r.rmse);
        let (fb, lb) = (get(ControllerKind::FbMpc), get(ControllerKind::LbMpc));
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
        let reduction = match (fb, lb) {
            (Some(f), Some(l)) => format!("{:?}", 1.0 - l / f),
            _ => String::new(),
        };
        let _ = writeln!(s, "{w:?},{},{},{reduction}", cell(fb), cell(lb));
    }
    s
}

/// Plot bundle under `dir`: `path_<stem>.csv` per run and `rmse_vs_omega.csv`.
pub fn emit_plot_data(dir: &Path, runs: &[(RunReport, &TrajectoryLog)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (report, log) in runs {
        let path = dir.join(format!("path_{}.csv", report.stem()));
        fs::write(&path, path_csv(log))?;
        written.push(path);
    }
    let reports: Vec<RunReport> = runs.iter().map(|(r, _)| r.clone()).collect();
    let table = dir.join("rmse_vs_omega.csv");
    fs::write(&table, rmse_table(&reports))?;
    written.push(table);
    Ok(written)
}

/// Output layout:
///
/// ```text
/// out/config.toml           resolved configuration
/// out/summary.json          ExperimentReport
/// out/timing.json           wall-clock statistics
/// out/logs/<stem>.csv       trajectory logs
/// out/datasets/w<omega>.csv training sets
/// out/plots/...             plot bundle
/// ```
pub fn write_outputs(out: &Path, cfg: &RunConfig, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(out.join("logs"))?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    for run in &result.runs {
        run.outcome.log.save(&out.join("logs").join(format!("{}.csv", run.report.stem())))?;
    }
    if !result.datasets.is_empty() {
        fs::create_dir_all(out.join("datasets"))?;
        for (omega, ds) in &result.datasets {
            io::save_dataset(ds, &out.join("datasets").join(format!("w{omega:.3}.csv")))?;
        }
    }
    write_summary(out, &result.report(cfg))?;
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&result.timing())?)?;
    let runs: Vec<(RunReport, &TrajectoryLog)> =
        result.runs.iter().map(|r| (r.report.clone(), &r.outcome.log)).collect();
    emit_plot_data(&out.join("plots"), &runs)?;
    Ok(())
}

pub fn write_summary(out: &Path, report: &ExperimentReport) -> Result<()> {
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// Recompute every run's metrics from an output directory's logs and
/// config. A log shorter than its planned run is reported as failed.
pub fn report_from_dir(out: &Path) -> Result<(ExperimentReport, Vec<(RunReport, TrajectoryLog)>)> {
    let cfg = RunConfig::load(&out.join("config.toml"))?;
    let mut entries: Vec<PathBuf> = fs::read_dir(out.join("logs"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    let mut runs = Vec::new();
    for path in entries {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let Some((kind, omega)) = parse_stem(stem) else {
            log::warn!("skipping {}: not a run log name", path.display());
            continue;
        };
        let log = TrajectoryLog::load(&path)?;
        let planned = control_ticks(&loop_setup(&cfg, omega)?);
        let status = if log.len() == planned {
            RunStatus::Completed
        } else {
            RunStatus::Failed(format!("log has {} of {planned} ticks", log.len()))
        };
        runs.push((RunReport::from_log(&log, kind, omega, &cfg, &status), log));
    }
    // same order as the run loop: by omega, FB before LB
    runs.sort_by(|a, b| a.0.omega.total_cmp(&b.0.omega).then((a.0.controller as u8).cmp(&(b.0.controller as u8))));
    let report = ExperimentReport {
        schema_version: crate::config::SCHEMA_VERSION,
        seed: cfg.seed,
        runs: runs.iter().map(|(r, _)| r.clone()).collect(),
    };
    Ok((report, runs))
}

fn metres(v: f64) -> String {
    if v.abs() < 1e3 {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

/// Fixed-width table for the terminal.
pub fn format_report(report: &ExperimentReport) -> String {
    let mut s = format!(
        "{:<8} {:>6} {:>9} {:>9} {:>8} {:>6} {:>8} {:>8}  status\n",
        "ctrl", "omega", "rmse[m]", "max[m]", "iters", "maxit", "c<=cmax", "tilt<=th"
    );
    for r in &report.runs {
        let _ = writeln!(
            s,
            "{:<8} {:>6.2} {:>9} {:>9} {:>8.2} {:>6} {:>8.4} {:>8.4}  {}",
            r.controller.as_str(),
            r.omega,
            metres(r.rmse),
            metres(r.max_error),
            r.mean_iterations,
            r.max_iterations,
            r.thrust_satisfied,
            r.tilt_satisfied,
            r.error.as_deref().unwrap_or(&r.status)
        );
    }
    s
}
