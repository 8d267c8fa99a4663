use lbmpc_core::conic::{build_stage_constraints, ConstraintConfig};
use lbmpc_core::flat::{ReferenceGenerator, ReferenceTrajectory, ACC};
use lbmpc_core::gp::{linearize, GpDataset, GpModel, SeKernelParams};
use lbmpc_core::sim::{acceleration, flat_to_command, measure_disturbance, Command, DragModel, SimState};
use lbmpc_core::{InputVector, StateVector, Vector3, GRAVITY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// States along a figure-8, each with the attitude the nominal command map
/// asks for.
fn figure8_states(omega: f64, n: usize) -> Vec<(SimState, Command)> {
    let gen = ReferenceGenerator::figure8(omega).unwrap().with_center(Vector3::new(0.0, 0.0, 1.0));
    let traj = ReferenceTrajectory::sample(gen, 0.0, 2.0 * std::f64::consts::PI / omega / n as f64, n).unwrap();
    traj.states
        .iter()
        .zip(&traj.inputs)
        .map(|(s, u)| {
            let fc = flat_to_command(&s.to_vector(), &u.to_vector(), None).unwrap();
            (SimState { p: s.p, v: s.v, rot: fc.attitude, t: 0.0 }, fc.cmd)
        })
        .collect()
}

#[test]
fn drag_is_learned_from_noisy_measurements() {
    let drag = DragModel::new(Vector3::new(1.0, 1.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut ds = GpDataset::default();
    for (state, cmd) in figure8_states(1.0, 40) {
        let acc = acceleration(&state, &cmd, &drag);
        let s = measure_disturbance(&state, &cmd, &acc, 0.05, &mut rng);
        ds.push(s.z, s.d_hat);
    }
    let gp = GpModel::fit(&ds, SeKernelParams { noise_var: 0.0025, ..Default::default() }).unwrap();
    // held-out points on the same path, half a sample apart
    let (mut err, mut scale) = (0.0_f64, 0.0_f64);
    for (state, cmd) in figure8_states(1.0, 80).iter().skip(1).step_by(2) {
        let acc = acceleration(state, cmd, &drag);
        let truth = drag.acceleration(&state.rot, &state.v);
        let z = measure_disturbance(state, cmd, &acc, 0.0, &mut rng).z;
        err = err.max((gp.predict_mean(&z) - truth).amax());
        scale = scale.max(truth.amax());
    }
    assert!(err < 0.15 * scale, "error {err} against drag up to {scale}");
}

#[test]
fn compensated_command_cancels_the_model_mean() {
    // with the mean folded into the thrust, thrust plus disturbance gives the
    // flat acceleration back
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut ds = GpDataset::default();
    for _ in 0..15 {
        let z = StateVector::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        ds.push(z, Vector3::new(-z[3], -z[4], -z[5]));
    }
    let gp = GpModel::fit(&ds, SeKernelParams::default()).unwrap();
    for _ in 0..20 {
        let z = StateVector::from_fn(|_, _| rng.gen_range(-0.5..0.5));
        let lin = linearize(&gp, &z).unwrap();
        let fc = flat_to_command(&z, &InputVector::zeros(), Some(&lin)).unwrap();
        let produced = fc.attitude.column(2) * fc.cmd.c - Vector3::z() * GRAVITY + gp.predict_mean(&z);
        assert!((produced - z.fixed_rows::<3>(ACC)).amax() < 1e-10);
    }
}

#[test]
fn learned_constraints_admit_the_figure8() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let drag = DragModel::new(Vector3::new(1.0, 1.0, 1.0)).unwrap();
    let mut ds = GpDataset::default();
    for (state, cmd) in figure8_states(1.5, 10) {
        let acc = acceleration(&state, &cmd, &drag);
        let s = measure_disturbance(&state, &cmd, &acc, 0.1, &mut rng);
        ds.push(s.z, s.d_hat);
    }
    let gp = GpModel::fit(&ds, SeKernelParams::default()).unwrap();
    let cfg = ConstraintConfig::default();
    let gen = ReferenceGenerator::figure8(1.5).unwrap().with_center(Vector3::new(0.0, 0.0, 1.0));
    let traj = ReferenceTrajectory::sample(gen, 0.0, 0.01, 420).unwrap();
    for s in traj.states.iter().step_by(7) {
        let z = s.to_vector();
        let st = build_stage_constraints(&linearize(&gp, &z).unwrap(), &z, &cfg).unwrap();
        assert!(!st.warnings.any(), "{:?}", st.warnings);
        assert!(st.tight_gamma(&z).is_some());
    }
}
