//! Versioned run configuration.
//!
//! Every physical and solver parameter lives here; the defaults below are
//! the documented schema defaults (see `configs/default.toml`). Unknown keys
//! are rejected.

use std::path::Path;

use lbmpc_core::conic::ConstraintConfig;
use lbmpc_core::flat::{ReferenceGenerator, ReferenceKind, TrackingWeights};
use lbmpc_core::gp::SeKernelParams;
use lbmpc_core::solver::AdmmSettings;
use lbmpc_core::sim::DragModel;
use lbmpc_core::{StateVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Nominal flat MPC, no disturbance model.
    FbMpc,
    /// Learning-based MPC: GP disturbance model trained on an FB run.
    LbMpc,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FbMpc => "fb_mpc",
            Self::LbMpc => "lb_mpc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fb_mpc" | "fb" => Ok(Self::FbMpc),
            "lb_mpc" | "lb" => Ok(Self::LbMpc),
            _ => Err(Error::Config(format!("unknown controller `{s}`"))),
        }
    }
}

/// Terminal weight of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    /// Infinite-horizon cost-to-go of the stage weights.
    Riccati,
    /// `Q_f = Q`.
    Stage,
}

/// Source of the acceleration entry of the measured flat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelFeedback {
    /// `c z_B - g e_z + mu(z)` from the applied command and the model.
    Command,
    /// Simulator truth.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragSign {
    /// `-R D R' v`.
    Damping,
    /// `+R D R' v`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub kind: String,
    /// m.
    pub amplitude: f64,
    /// Single-run angular rate, rad/s.
    pub omega: f64,
    /// Sweep rates, rad/s.
    pub omegas: Vec<f64>,
    pub center: [f64; 3],
    pub psi: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            kind: "figure8".into(),
            amplitude: 0.5,
            omega: 1.0,
            omegas: vec![0.5, 1.0, 1.5],
            center: [0.0, 0.0, 1.0],
            psi: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub horizon: usize,
    pub q_diag: [f64; 10],
    pub r_diag: [f64; 4],
    pub terminal: Terminal,
    pub accel_feedback: AccelFeedback,
    /// Attitude-error feedback gain added to the feed-forward body rates, 1/s.
    pub attitude_gain: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            q_diag: [100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0],
            r_diag: [0.1; 4],
            terminal: Terminal::Riccati,
            accel_feedback: AccelFeedback::Command,
            attitude_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub sim_hz: u32,
    pub ctrl_hz: u32,
    pub precompute_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self { sim_hz: 1000, ctrl_hz: 100, precompute_hz: 10 }
    }
}

impl Rates {
    pub fn substeps(&self) -> usize {
        (self.sim_hz / self.ctrl_hz) as usize
    }

    pub fn plan_every(&self) -> usize {
        (self.ctrl_hz / self.precompute_hz) as usize
    }

    pub fn ctrl_dt(&self) -> f64 {
        1.0 / self.ctrl_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsConfig {
    /// m/s².
    pub c_max: f64,
    /// rad.
    pub theta_max: f64,
    pub p_ball: f64,
    pub p_cone: f64,
    pub mean_only_cone: bool,
}

impl Default for ConstraintsConfig {
    fn default() -> Self {
        let c = ConstraintConfig::default();
        Self {
            c_max: c.c_max,
            theta_max: c.theta_max,
            p_ball: c.p_ball,
            p_cone: c.p_cone,
            mean_only_cone: c.mean_only_cone,
        }
    }
}

impl From<ConstraintsConfig> for ConstraintConfig {
    fn from(c: ConstraintsConfig) -> Self {
        Self {
            c_max: c.c_max,
            theta_max: c.theta_max,
            p_ball: c.p_ball,
            p_cone: c.p_cone,
            mean_only_cone: c.mean_only_cone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    /// (m/s²)².
    pub signal_var: f64,
    /// (m/s²)².
    pub noise_var: f64,
    pub length_scales: [f64; 10],
    /// Training points drawn from the FB run.
    pub n_data: usize,
    /// Std of the additive noise on disturbance measurements, m/s².
    pub measurement_noise_std: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        let p = SeKernelParams::default();
        let mut length_scales = [0.0; 10];
        length_scales.copy_from_slice(p.length_scales.as_slice());
        Self {
            signal_var: p.signal_var,
            noise_var: p.noise_var,
            length_scales,
            n_data: 10,
            measurement_noise_std: p.noise_var.sqrt(),
        }
    }
}

impl GpConfig {
    pub fn kernel(&self) -> SeKernelParams {
        SeKernelParams {
            signal_var: self.signal_var,
            noise_var: self.noise_var,
            length_scales: StateVector::from_row_slice(&self.length_scales),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        let s = AdmmSettings::default();
        Self { rho: 5.0, tol_primal: s.tol_primal, tol_dual: s.tol_dual, max_iter: s.max_iter }
    }
}

impl AdmmConfig {
    pub fn settings(&self) -> AdmmSettings {
        AdmmSettings { tol_primal: self.tol_primal, tol_dual: self.tol_dual, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Diagonal rotor-drag coefficients, 1/s.
    pub drag: [f64; 3],
    pub drag_sign: DragSign,
    /// Run length, s. `None`: one reference period plus the warm-up.
    pub duration: Option<f64>,
    /// Excluded from the RMSE, s.
    pub warmup: f64,
    /// Initial position offset from the reference, m.
    pub initial_offset: [f64; 3],
    /// Build plans on a separate thread.
    pub threaded: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            drag: [1.0, 1.0, 1.0],
            drag_sign: DragSign::Damping,
            duration: None,
            warmup: 1.0,
            initial_offset: [0.0; 3],
            threaded: false,
        }
    }
}

impl SimConfig {
    pub fn drag_model(&self) -> Result<DragModel> {
        let d = DragModel::new(Vector3::from(self.drag))?;
        Ok(match self.drag_sign {
            DragSign::Damping => d,
            DragSign::Literal => d.with_literal_sign(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub controller: ControllerKind,
    pub trajectory: TrajectoryConfig,
    pub mpc: MpcConfig,
    pub rates: Rates,
    pub constraints: ConstraintsConfig,
    pub gp: GpConfig,
    pub admm: AdmmConfig,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            controller: ControllerKind::LbMpc,
            trajectory: TrajectoryConfig::default(),
            mpc: MpcConfig::default(),
            rates: Rates::default(),
            constraints: ConstraintsConfig::default(),
            gp: GpConfig::default(),
            admm: AdmmConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Apply `section.key=value` overrides. Values are parsed as TOML
    /// literals, falling back to bare strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (path, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = parse_value(raw.trim());
            let bad = || Error::Config(format!("`{path}` does not name a config key"));
            let mut keys: Vec<&str> = path.trim().split('.').collect();
            let last = keys.pop().ok_or_else(bad)?;
            let mut node = &mut root;
            for key in keys {
                node = node
                    .as_table_mut()
                    .ok_or_else(bad)?
                    .entry(key.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
            node.as_table_mut().ok_or_else(bad)?.insert(last.to_string(), value);
        }
        let cfg: Self = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.schema_version == SCHEMA_VERSION,
            &format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
        )?;
        check(self.mpc.horizon >= 2, "mpc.horizon must be at least 2")?;
        let r = &self.rates;
        check(r.precompute_hz > 0 && r.ctrl_hz > 0 && r.sim_hz > 0, "rates must be positive")?;
        check(
            r.sim_hz.is_multiple_of(r.ctrl_hz) && r.ctrl_hz.is_multiple_of(r.precompute_hz),
            "rates must divide: sim_hz multiple of ctrl_hz multiple of precompute_hz",
        )?;
        ConstraintConfig::from(self.constraints).validate()?;
        self.gp.kernel().validate()?;
        check(self.gp.n_data >= 1, "gp.n_data must be at least 1")?;
        check(self.gp.measurement_noise_std >= 0.0, "gp.measurement_noise_std must be non-negative")?;
        check(self.admm.rho > 0.0, "admm.rho must be positive")?;
        check(self.admm.max_iter >= 1, "admm.max_iter must be at least 1")?;
        check(self.admm.tol_primal > 0.0 && self.admm.tol_dual > 0.0, "admm tolerances must be positive")?;
        check(self.mpc.r_diag.iter().all(|r| *r > 0.0), "mpc.r_diag must be positive")?;
        check(self.mpc.q_diag.iter().all(|q| *q >= 0.0), "mpc.q_diag must be non-negative")?;
        check(self.mpc.attitude_gain >= 0.0, "mpc.attitude_gain must be non-negative")?;
        check(self.sim.warmup >= 0.0, "sim.warmup must be non-negative")?;
        check(self.sim.duration.is_none_or(|d| d > 0.0), "sim.duration must be positive")?;
        self.sim.drag_model()?;
        check(self.trajectory.omega >= 0.0, "trajectory.omega must be non-negative")?;
        check(self.trajectory.omegas.iter().all(|w| *w >= 0.0), "trajectory.omegas must be non-negative")?;
        self.reference(self.trajectory.omega)?;
        Ok(())
    }

    pub fn kind(&self) -> Result<ReferenceKind> {
        Ok(self.trajectory.kind.parse()?)
    }

    pub fn reference(&self, omega: f64) -> Result<ReferenceGenerator> {
        let t = &self.trajectory;
        let mut gen = ReferenceGenerator::new(self.kind()?, t.amplitude, omega)?.with_center(Vector3::from(t.center));
        gen.psi = t.psi;
        Ok(gen)
    }

    pub fn weights(&self) -> Result<TrackingWeights> {
        let w = TrackingWeights::from_diagonals(&self.mpc.q_diag, &self.mpc.r_diag);
        match self.mpc.terminal {
            Terminal::Stage => Ok(w),
            Terminal::Riccati => {
                let lti = lbmpc_core::flat::discretize_flat(self.rates.ctrl_dt())?;
                Ok(w.with_riccati_terminal(&lti)?)
            }
        }
    }

    /// Run length for a given rate: the configured duration or one period
    /// plus the warm-up (10 s plus warm-up for a static reference).
    pub fn duration(&self, omega: f64) -> f64 {
        self.sim.duration.unwrap_or_else(|| {
            let period = if omega > 0.0 { std::f64::consts::TAU / omega } else { 10.0 };
            period + self.sim.warmup
        })
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
