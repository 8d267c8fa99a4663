//! Fixed-step two-rate closed loop: plans at the precompute rate, ADMM
//! solves at the control rate, RK4 integration at the simulation rate.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use lbmpc_core::conic::ConstraintConfig;
use lbmpc_core::flat::{
    discretize_flat, tracking_cost, tracking_linear_cost, FlatLti, ReferenceGenerator, ReferenceTrajectory,
    TrackingWeights,
};
use lbmpc_core::gp::{linearize, linearize_mean, GpModel, LinGpStage};
use lbmpc_core::sim::{
    acceleration, attitude_feedback, flat_state_of, flat_to_command, measure_disturbance, step, Command, DragModel,
    FlatCommand, SimState,
};
use lbmpc_core::solver::{precompute, solve, AdmmSettings, AdmmWorkspace, SolveResult, SolveStatus, SolverPlan};
use lbmpc_core::{StateVector, Vector3, GRAVITY};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AccelFeedback, Rates, RunConfig};
use crate::io::{LogRow, TrajectoryLog};
use crate::timing::TimingStats;
use crate::{Error, Result};

/// Everything needed to build plans; shared with the precompute thread.
#[derive(Debug, Clone)]
pub struct PlanBuilder {
    pub lti: FlatLti,
    pub weights: TrackingWeights,
    pub constraints: ConstraintConfig,
    pub rho: f64,
    pub horizon: usize,
    pub gp: Option<Arc<GpModel>>,
    pub reference: Arc<ReferenceTrajectory>,
}

impl PlanBuilder {
    /// Stage data for the window starting at control tick `tick`. Without a
    /// model every stage is deterministic: zero mean, zero variance.
    pub fn linearizations(&self, tick: usize) -> Result<(Vec<LinGpStage>, Vec<StateVector>)> {
        let refs: Vec<StateVector> =
            (0..=self.horizon).map(|k| self.reference.states[tick + k].to_vector()).collect();
        let lin = match &self.gp {
            Some(gp) => refs.iter().map(|z| linearize(gp, z)).collect::<lbmpc_core::Result<_>>()?,
            None => refs.iter().map(|z| LinGpStage::zero(*z)).collect(),
        };
        Ok((lin, refs))
    }

    pub fn build(&self, tick: usize) -> Result<SolverPlan> {
        let (lin, refs) = self.linearizations(tick)?;
        let cost = tracking_cost(&self.reference, tick, self.horizon, &self.weights)?;
        Ok(precompute(&self.lti, &lin, &refs, &cost, &self.constraints, self.rho)?)
    }
}

/// High-rate side: one workspace, one writer.
#[derive(Debug, Clone)]
pub struct Controller {
    pub builder: Arc<PlanBuilder>,
    pub settings: AdmmSettings,
    pub attitude_gain: f64,
    pub accel_feedback: AccelFeedback,
    ws: AdmmWorkspace,
    started: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub command: FlatCommand,
    pub solve: SolveResult,
}

impl Controller {
    pub fn new(builder: Arc<PlanBuilder>, settings: AdmmSettings, attitude_gain: f64, accel_feedback: AccelFeedback) -> Self {
        let ws = AdmmWorkspace::new(builder.horizon);
        Self { builder, settings, attitude_gain, accel_feedback, ws, started: false }
    }

    /// Model disturbance mean at `z` (zero without a model).
    pub fn disturbance_mean(&self, z: &StateVector) -> Vector3 {
        self.builder.gp.as_ref().map_or_else(Vector3::zeros, |gp| gp.predict_mean(z))
    }

    /// Solve at control tick `tick` from the measured flat state `z0` and
    /// map the first stage to a command.
    pub fn control(&mut self, plan: &SolverPlan, tick: usize, z0: &StateVector) -> Result<ControlOutput> {
        let b = &self.builder;
        let linear = tracking_linear_cost(&b.reference, tick, b.horizon, &b.weights)?;
        if self.started {
            self.ws.shift();
        }
        self.started = true;
        let res = solve(plan, &mut self.ws, z0, &linear, &self.settings)?;
        if res.status == SolveStatus::Diverged {
            return Err(Error::Diverged(tick));
        }
        let z1 = res.states[1];
        let mean = b.gp.as_ref().map(|gp| linearize_mean(gp, &z1));
        let command = flat_to_command(&z1, &res.input, mean.as_ref())?;
        Ok(ControlOutput { command, solve: res })
    }
}

/// Latest published plan and the control tick it was built for.
#[derive(Debug, Default)]
pub struct PlanSlot {
    inner: Mutex<Option<(usize, Arc<SolverPlan>)>>,
    ready: Condvar,
}

impl PlanSlot {
    /// Publish, waiting until the previous plan has been taken.
    pub fn publish(&self, tick: usize, plan: Arc<SolverPlan>) {
        let mut slot = self.inner.lock().expect("plan slot poisoned");
        while slot.is_some() {
            slot = self.ready.wait(slot).expect("plan slot poisoned");
        }
        *slot = Some((tick, plan));
        self.ready.notify_all();
    }

    /// Take the plan for `tick`, blocking until it is published.
    pub fn take(&self, tick: usize) -> Arc<SolverPlan> {
        let mut slot = self.inner.lock().expect("plan slot poisoned");
        loop {
            if let Some((t, _)) = slot.as_ref() {
                assert_eq!(*t, tick, "plans are published in tick order");
                let (_, plan) = slot.take().expect("checked above");
                self.ready.notify_all();
                return plan;
            }
            slot = self.ready.wait(slot).expect("plan slot poisoned");
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSetup {
    pub rates: Rates,
    pub duration: f64,
    pub drag: DragModel,
    pub measurement_noise_std: f64,
    pub initial_offset: Vector3,
    pub seed: u64,
    pub threaded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Completed)
    }
}

/// Wall-clock timings; kept apart from the deterministic log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTiming {
    pub solve: Vec<f64>,
    pub precompute: Vec<f64>,
}

impl RunTiming {
    pub fn solve_stats(&self) -> TimingStats {
        TimingStats::from_samples(&self.solve)
    }

    pub fn precompute_stats(&self) -> TimingStats {
        TimingStats::from_samples(&self.precompute)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: TrajectoryLog,
    pub status: RunStatus,
    pub timing: RunTiming,
}

/// Controller for `cfg` tracking `generator` over `ticks` control ticks.
pub fn make_controller(cfg: &RunConfig, generator: ReferenceGenerator, ticks: usize, gp: Option<GpModel>) -> Result<Controller> {
    let dt = cfg.rates.ctrl_dt();
    let horizon = cfg.mpc.horizon;
    let reference = ReferenceTrajectory::sample(generator, 0.0, dt, ticks + horizon + 1)?;
    let builder = PlanBuilder {
        lti: discretize_flat(dt)?,
        weights: cfg.weights()?,
        constraints: cfg.constraints.into(),
        rho: cfg.admm.rho,
        horizon,
        gp: gp.map(Arc::new),
        reference: Arc::new(reference),
    };
    Ok(Controller::new(Arc::new(builder), cfg.admm.settings(), cfg.mpc.attitude_gain, cfg.mpc.accel_feedback))
}

pub fn loop_setup(cfg: &RunConfig, omega: f64) -> Result<LoopSetup> {
    Ok(LoopSetup {
        rates: cfg.rates,
        duration: cfg.duration(omega),
        drag: cfg.sim.drag_model()?,
        measurement_noise_std: cfg.gp.measurement_noise_std,
        initial_offset: Vector3::from(cfg.sim.initial_offset),
        seed: cfg.seed,
        threaded: cfg.sim.threaded,
    })
}

/// Number of control ticks in `duration`.
pub fn control_ticks(setup: &LoopSetup) -> usize {
    (setup.duration * setup.rates.ctrl_hz as f64).round() as usize
}

/// Start on the reference, hovering in its attitude, shifted by the offset.
fn initial_state(controller: &Controller, offset: &Vector3) -> Result<SimState> {
    let reference = &controller.builder.reference;
    let (z, u) = (reference.states[0].to_vector(), reference.inputs[0].to_vector());
    let attitude = flat_to_command(&z, &u, None)?.attitude;
    Ok(SimState { p: reference.states[0].p + offset, v: reference.states[0].v, rot: attitude, t: 0.0 })
}

struct LoopState {
    sim: SimState,
    last: Command,
    rng: ChaCha8Rng,
    log: TrajectoryLog,
    timing: RunTiming,
}

impl LoopState {
    fn measured_flat_state(&self, controller: &Controller, setup: &LoopSetup, tick: usize) -> StateVector {
        let acc = if tick == 0 {
            controller.builder.reference.states[0].a
        } else {
            match controller.accel_feedback {
                AccelFeedback::Truth => acceleration(&self.sim, &self.last, &setup.drag),
                AccelFeedback::Command => {
                    let nominal = self.sim.rot.column(2) * self.last.c - Vector3::z() * GRAVITY;
                    nominal + controller.disturbance_mean(&flat_state_of(&self.sim, &nominal))
                }
            }
        };
        flat_state_of(&self.sim, &acc)
    }

    fn tick(&mut self, controller: &mut Controller, plan: &SolverPlan, setup: &LoopSetup, tick: usize) -> Result<()> {
        let z0 = self.measured_flat_state(controller, setup, tick);
        let started = Instant::now();
        let out = controller.control(plan, tick, &z0)?;
        self.timing.solve.push(started.elapsed().as_secs_f64());
        let feedback = attitude_feedback(&self.sim.rot, &out.command.attitude, controller.attitude_gain);
        let cmd = Command { c: out.command.cmd.c, omega: out.command.cmd.omega + feedback };
        let acc = acceleration(&self.sim, &cmd, &setup.drag);
        let sample = measure_disturbance(&self.sim, &cmd, &acc, setup.measurement_noise_std, &mut self.rng);
        let zb = self.sim.rot.column(2);
        self.log.rows.push(LogRow {
            t: tick as f64 * setup.rates.ctrl_dt(),
            z: sample.z.into(),
            c: cmd.c,
            thrust_dir: [zb.x, zb.y, zb.z],
            omega: cmd.omega.into(),
            reference: controller.builder.reference.states[tick].to_vector().into(),
            iterations: out.solve.iterations,
            primal_residual: out.solve.primal_residual,
            dual_residual: out.solve.dual_residual,
            status: out.solve.status.as_str().to_string(),
            d_hat: sample.d_hat.into(),
        });
        let dt = 1.0 / setup.rates.sim_hz as f64;
        for _ in 0..setup.rates.substeps() {
            self.sim = step(&self.sim, &cmd, &setup.drag, dt)?;
        }
        self.last = cmd;
        Ok(())
    }
}

/// Run the closed loop. Failures end the run early and are reported in the
/// status; the partial log is kept.
pub fn run_closed_loop(controller: &mut Controller, setup: &LoopSetup) -> Result<RunOutcome> {
    let ticks = control_ticks(setup);
    if controller.builder.reference.len() < ticks + controller.builder.horizon + 1 {
        return Err(Error::Config("reference shorter than the run".into()));
    }
    let mut state = LoopState {
        sim: initial_state(controller, &setup.initial_offset)?,
        last: Command::hover(),
        rng: ChaCha8Rng::seed_from_u64(setup.seed),
        log: TrajectoryLog::default(),
        timing: RunTiming::default(),
    };
    let every = setup.rates.plan_every();
    let result = if setup.threaded {
        run_threaded(controller, setup, &mut state, ticks, every)
    } else {
        let mut plan = None;
        let mut result = Ok(());
        for tick in 0..ticks {
            if tick % every == 0 {
                let started = Instant::now();
                match controller.builder.build(tick) {
                    Ok(p) => plan = Some(p),
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
                state.timing.precompute.push(started.elapsed().as_secs_f64());
            }
            if let Err(e) = state.tick(controller, plan.as_ref().expect("built at tick 0"), setup, tick) {
                result = Err(e);
                break;
            }
        }
        result
    };
    let status = match result {
        Ok(()) => RunStatus::Completed,
        Err(e) => {
            log::warn!("run stopped at t = {:.2} s: {e}", state.log.len() as f64 * setup.rates.ctrl_dt());
            RunStatus::Failed(e.to_string())
        }
    };
    Ok(RunOutcome { log: state.log, status, timing: state.timing })
}

fn run_threaded(controller: &mut Controller, setup: &LoopSetup, state: &mut LoopState, ticks: usize, every: usize) -> Result<()> {
    let slot = PlanSlot::default();
    let builder = controller.builder.clone();
    let stop = std::sync::atomic::AtomicBool::new(false);
    std::thread::scope(|scope| {
        let producer = scope.spawn(|| -> (Vec<f64>, Result<()>) {
            let mut times = Vec::new();
            for tick in (0..ticks).step_by(every) {
                if stop.load(std::sync::atomic::Ordering::Relaxed) {
                    break;
                }
                let started = Instant::now();
                match builder.build(tick) {
                    Ok(plan) => {
                        times.push(started.elapsed().as_secs_f64());
                        slot.publish(tick, Arc::new(plan));
                    }
                    Err(e) => return (times, Err(e)),
                }
            }
            (times, Ok(()))
        });
        let mut result = Ok(());
        let mut plan: Option<Arc<SolverPlan>> = None;
        for tick in 0..ticks {
            if tick % every == 0 {
                if producer.is_finished() && slot.inner.lock().expect("plan slot poisoned").is_none() {
                    // the producer failed before publishing this plan
                    break;
                }
                plan = Some(slot.take(tick));
            }
            if let Err(e) = state.tick(controller, plan.as_ref().expect("taken at tick 0"), setup, tick) {
                result = Err(e);
                break;
            }
        }
        stop.store(true, std::sync::atomic::Ordering::Relaxed);
        // unblock a producer waiting to publish
        let _ = slot.inner.lock().expect("plan slot poisoned").take();
        slot.ready.notify_all();
        let (times, produced) = producer.join().expect("precompute thread panicked");
        state.timing.precompute = times;
        result.and(produced)
    })
}
