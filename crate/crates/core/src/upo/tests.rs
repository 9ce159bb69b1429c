use super::*;
use crate::dynamics::ModelKind;
use crate::equilibria::{find_equilibrium, EquilibriumLabel};

fn physical() -> SystemModel {
    SystemModel::default_for(ModelKind::PhysicalDp)
}

fn down_up(model: &SystemModel) -> Equilibrium {
    find_equilibrium(model, EquilibriumLabel::DownUp).unwrap()
}

fn tight() -> IntegratorConfig {
    IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-13, ..Default::default() }
}

fn check_invariants(model: &SystemModel, o: &PeriodicOrbit) {
    assert!(o.closure < 1e-9, "closure {:.3e} at {}", o.closure, o.energy);
    assert!((model.energy(&o.anchor.to_array()) - o.energy).abs() < 1e-10);
    assert!(o.lambda_u.abs() > 1.0);
    assert!((o.lambda_u * o.lambda_s - 1.0).abs() < 1e-6);
    for m in &o.multipliers[1..3] {
        assert!((m - 1.0).norm() < 1e-4, "trivial multiplier {m} at {}", o.energy);
    }
    let (_, pinned) = model.reverser_fixed_coords();
    let a = o.anchor.to_array();
    assert!(a[pinned[0]] == 0.0 && a[pinned[1]] == 0.0);
}

#[test]
fn hits_target_energy() {
    let model = physical();
    let o = find_symmetric_upo(&model, &down_up(&model), -0.147, 0.0, &IntegratorConfig::default()).unwrap();
    assert!((model.energy(&o.anchor.to_array()) + 0.147).abs() < 1e-10);
    check_invariants(&model, &o);
}

#[test]
fn small_orbits_have_the_linear_period() {
    let model = physical();
    let du = down_up(&model);
    let omega = du.saddle_frame.unwrap().omega;
    let o = find_symmetric_upo(&model, &du, du.energy + 1e-4, 0.0, &IntegratorConfig::default()).unwrap();
    let linear = 2.0 * std::f64::consts::PI / omega;
    assert!((o.period - linear).abs() < 0.01 * linear, "{} vs {linear}", o.period);
}

#[test]
fn working_energy_orbit_exists() {
    let model = physical();
    let o = find_symmetric_upo(&model, &down_up(&model), 0.2, 0.0, &tight()).unwrap();
    check_invariants(&model, &o);
    // stays on the lift of the Down-Up saddle
    assert!(o.anchor.q1.abs() < std::f64::consts::PI && (o.anchor.q2 - std::f64::consts::PI).abs() < std::f64::consts::PI);
}

#[test]
fn energy_family() {
    let model = physical();
    let du = down_up(&model);
    let energies = [-0.147, -0.07, -0.034, 0.06, 0.102, 0.157];
    let cfg = tight();
    let fam = continue_family(&model, &du, &energies, &cfg).unwrap();
    assert_eq!(fam.len(), energies.len());
    let mut last = [0.0f64; 3];
    for (o, h) in fam.iter().zip(energies) {
        assert_eq!(o.energy, h);
        check_invariants(&model, o);
        let amp = o.amplitude(&model, &du.state, &cfg).unwrap();
        let config = amp[0].hypot(amp[1]);
        assert!(amp[0] > last[0] && config > last[2], "amplitude not increasing at {h}");
        if h <= 0.06 {
            assert!(amp[1] > last[1]);
        }
        last = [amp[0], amp[1], config];
    }
}

#[test]
fn orbit_is_reversible() {
    let model = physical();
    let cfg = IntegratorConfig::default();
    let o = find_symmetric_upo(&model, &down_up(&model), -0.07, 0.0, &cfg).unwrap();
    assert!(o.symmetry_residual(&model, 16, &cfg).unwrap() < 1e-8);
    let r = model.reverser(&State::from_array(o.unstable_dir)).to_array();
    let plus = (0..4).map(|i| (r[i] - o.stable_dir[i]).abs()).fold(0.0, f64::max);
    let minus = (0..4).map(|i| (r[i] + o.stable_dir[i]).abs()).fold(0.0, f64::max);
    assert!(plus.min(minus) < 1e-8, "{plus} {minus}");
}

#[test]
fn eigendirections_are_monodromy_eigenvectors() {
    let model = physical();
    let o = find_symmetric_upo(&model, &down_up(&model), -0.147, 0.0, &IntegratorConfig::default()).unwrap();
    let mv = o.monodromy * nalgebra::Vector4::from(o.unstable_dir);
    for i in 0..4 {
        assert!((mv[i] / o.lambda_u - o.unstable_dir[i]).abs() < 1e-8);
    }
    assert!((o.monodromy.determinant() - 1.0).abs() < 1e-6);
}

#[test]
fn arm_amplitudes_follow_the_centre_mode() {
    // Near the saddle the orbit is the linear centre mode, so the ratio of
    // the arm amplitudes is the ratio of the centre eigenvector entries.
    let model = physical();
    let du = down_up(&model);
    let fr = du.saddle_frame.unwrap();
    let o = find_symmetric_upo(&model, &du, du.energy + 1e-4, 0.0, &IntegratorConfig::default()).unwrap();
    let amp = o.amplitude(&model, &du.state, &IntegratorConfig::default()).unwrap();
    let linear = fr.center_fix[1].abs() / fr.center_fix[0].abs();
    assert!((amp[1] / amp[0] - linear).abs() < 0.01 * linear);
}

#[test]
fn up_down_orbit_exists() {
    let model = physical();
    let ud = find_equilibrium(&model, EquilibriumLabel::UpDown).unwrap();
    let o = find_symmetric_upo(&model, &ud, 0.2, 0.0, &tight()).unwrap();
    check_invariants(&model, &o);
    assert_eq!(o.saddle, EquilibriumLabel::UpDown);
}

#[test]
fn lyapunov_orbit_about_l1() {
    let model = SystemModel::default_for(ModelKind::Pcr3bp);
    let l1 = find_equilibrium(&model, EquilibriumLabel::L1).unwrap();
    let o = find_symmetric_upo(&model, &l1, l1.energy + 1e-4, 0.0, &IntegratorConfig::default()).unwrap();
    check_invariants(&model, &o);
    assert_eq!(o.anchor.q2, 0.0);
    assert_eq!(o.anchor.v1, 0.0);
    assert!(o.symmetry_residual(&model, 16, &IntegratorConfig::default()).unwrap() < 1e-8);
}

#[test]
fn rejects_bad_requests() {
    let model = physical();
    let du = down_up(&model);
    let cfg = IntegratorConfig::default();
    assert!(matches!(find_symmetric_upo(&model, &du, du.energy - 0.01, 0.0, &cfg), Err(Error::EnergyBelowSaddle { .. })));
    let dd = find_equilibrium(&model, EquilibriumLabel::DownDown).unwrap();
    assert!(matches!(find_symmetric_upo(&model, &dd, 0.0, 0.0, &cfg), Err(Error::NotIndex1)));
    assert!(continue_family(&model, &du, &[-0.1, -0.12], &cfg).is_err());
}
