use std::fs;
use std::process::Command;

use lbmpc::config::{ControllerKind, RunConfig};
use lbmpc::harness::{self, report_from_dir, run_experiment, write_outputs, RMSE_HEADER};
use lbmpc::io::{self, TrajectoryLog};

fn short(controller: ControllerKind) -> RunConfig {
    let mut cfg = RunConfig { controller, ..RunConfig::default() };
    cfg.sim.duration = Some(4.0);
    cfg
}

#[test]
fn report_recomputed_from_csv_matches() {
    let cfg = short(ControllerKind::LbMpc);
    let result = run_experiment(&cfg, &[1.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &cfg, &result).unwrap();
    let (report, _) = report_from_dir(dir.path()).unwrap();
    let live = result.report(&cfg);
    assert_eq!(report.runs.len(), live.runs.len());
    for (a, b) in report.runs.iter().zip(&live.runs) {
        assert_eq!((a.controller, a.omega, a.ticks), (b.controller, b.omega, b.ticks));
        assert!((a.rmse - b.rmse).abs() <= 1e-12);
        assert!((a.max_error - b.max_error).abs() <= 1e-12);
        assert_eq!(a.status, b.status);
    }
    // the summary on disk is the in-process report
    let on_disk: harness::ExperimentReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, live);
}

#[test]
fn nothing_to_learn_without_drag() {
    let mut cfg = short(ControllerKind::LbMpc);
    cfg.sim.drag = [0.0; 3];
    // zero disturbance: training targets are zero up to rounding
    cfg.gp.measurement_noise_std = 0.0;
    let result = run_experiment(&cfg, &[1.0]).unwrap();
    let fb = &result.find(ControllerKind::FbMpc, 1.0).unwrap().report;
    let lb = &result.find(ControllerKind::LbMpc, 1.0).unwrap().report;
    assert!((lb.rmse - fb.rmse).abs() <= 0.05 * fb.rmse, "fb {} lb {}", fb.rmse, lb.rmse);
}

#[test]
fn noise_alone_is_learned_as_a_disturbance() {
    // with no drag the targets are pure measurement noise, which the model
    // fits at the default hyperparameters; LB then trails FB
    let mut cfg = short(ControllerKind::LbMpc);
    cfg.sim.drag = [0.0; 3];
    let result = run_experiment(&cfg, &[1.0]).unwrap();
    let fb = &result.find(ControllerKind::FbMpc, 1.0).unwrap().report;
    let lb = &result.find(ControllerKind::LbMpc, 1.0).unwrap().report;
    assert!(lb.rmse > fb.rmse && lb.rmse < 0.05, "fb {} lb {}", fb.rmse, lb.rmse);
}

#[test]
fn fb_pipeline_is_the_lb_training_run() {
    let fb = run_experiment(&short(ControllerKind::FbMpc), &[0.5]).unwrap();
    let lb = run_experiment(&short(ControllerKind::LbMpc), &[0.5]).unwrap();
    assert_eq!(fb.runs.len(), 1);
    assert_eq!(fb.runs[0].outcome.log, lb.runs[0].outcome.log);
    assert_eq!(fb.runs[0].report, lb.runs[0].report);
}

#[test]
fn report_is_deterministic() {
    let cfg = short(ControllerKind::LbMpc);
    let a = run_experiment(&cfg, &[1.5]).unwrap().report(&cfg);
    let b = run_experiment(&cfg, &[1.5]).unwrap().report(&cfg);
    assert_eq!(a, b);
}

#[test]
fn learned_runs_respect_the_thrust_limits() {
    let cfg = short(ControllerKind::LbMpc);
    let result = run_experiment(&cfg, &[1.0, 1.5]).unwrap();
    for run in &result.runs {
        assert!(run.report.thrust_satisfied >= cfg.constraints.p_ball, "{:?}", run.report);
        assert!(run.report.tilt_satisfied >= cfg.constraints.p_cone, "{:?}", run.report);
    }
}

#[test]
fn plot_bundle_round_trips() {
    let cfg = short(ControllerKind::FbMpc);
    let result = run_experiment(&cfg, &[1.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = result.runs.iter().map(|r| (r.report.clone(), &r.outcome.log)).collect();
    let files = harness::emit_plot_data(dir.path(), &runs).unwrap();
    assert_eq!(files.len(), 2);
    let text = fs::read_to_string(&files[0]).unwrap();
    let mut rewritten = String::new();
    for line in text.lines() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[0] == "t" {
            rewritten.push_str(line);
        } else {
            let nums: Vec<String> = cells.iter().map(|c| format!("{:?}", c.parse::<f64>().unwrap())).collect();
            rewritten.push_str(&nums.join(","));
        }
        rewritten.push('\n');
    }
    assert_eq!(rewritten, text);
    let table = fs::read_to_string(dir.path().join("rmse_vs_omega.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with(RMSE_HEADER));
}

#[test]
fn dataset_from_a_log_on_disk() {
    let cfg = short(ControllerKind::FbMpc);
    let fb = harness::run_nominal(&cfg, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fb.csv");
    fb.outcome.log.save(&path).unwrap();
    let log = TrajectoryLog::load(&path).unwrap();
    let ds = harness::collect_training_data(&log, 10, 3).unwrap();
    io::save_dataset(&ds, &dir.path().join("ds.csv")).unwrap();
    assert_eq!(io::load_dataset(&dir.path().join("ds.csv")).unwrap(), ds);
    assert_eq!(ds, harness::collect_training_data(&fb.outcome.log, 10, 3).unwrap());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lbmpc"))
}

#[test]
fn cli_run_collect_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = cli()
        .args(["sweep", "--omegas", "0.5,1.5", "--set", "sim.duration=2.0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("logs/lb_mpc_w1.500.csv").exists());
    let cfg = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(cfg.sim.duration, Some(2.0));
    let before = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(cli().arg("report").arg(&out).status().unwrap().success());
    assert_eq!(fs::read_to_string(out.join("summary.json")).unwrap(), before);

    let ds = dir.path().join("train.csv");
    let status = cli()
        .args(["collect", "--set", "sim.duration=2.0", "--set", "gp.n_data=7", "--dataset"])
        .arg(&ds)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(io::load_dataset(&ds).unwrap().len(), 7);
    let status = cli()
        .args(["run", "--controller", "lb", "--set", "sim.duration=2.0", "--dataset"])
        .arg(&ds)
        .arg("--out")
        .arg(dir.path().join("lb"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // destabilizing drag makes the run fail
    let status = cli()
        .args(["run", "--controller", "fb_mpc", "--omega", "1.5"])
        .args(["--set", "sim.drag=[200.0, 200.0, 200.0]", "--set", "sim.drag_sign=\"literal\"", "--set", "sim.duration=5.0"])
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = cli().args(["run", "--set", "mpc.horizon=0"]).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = cli().args(["run", "--set", "nope.key=1"]).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
