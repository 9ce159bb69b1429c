use super::*;
use crate::dynamics::ModelKind;
use std::sync::OnceLock;

fn physical() -> SystemModel {
    SystemModel::default_for(ModelKind::PhysicalDp)
}

fn down_up_orbit(model: &SystemModel, h: f64) -> PeriodicOrbit {
    let eq = find_equilibrium(model, EquilibriumLabel::DownUp).unwrap();
    find_symmetric_upo(model, &eq, h, 0.0, &IntegratorConfig::default()).unwrap()
}

struct Fixture {
    model: SystemModel,
    orbit: PeriodicOrbit,
    plus: Vec<ConnectionOrbit>,
}

// H = −0.07 homoclinics in the positive sense, shared by several tests
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = physical();
        let orbit = down_up_orbit(&model, -0.07);
        let plus = find_homoclinics(&model, &orbit, 1, &SearchOptions::default()).unwrap();
        Fixture { model, orbit, plus }
    })
}

fn contains(set: &[ConnectionOrbit], p: [f64; 2], tol: f64) -> bool {
    set.iter().any(|c| plane_diff(&c.section, c.section_point, p).iter().all(|d| d.abs() < tol))
}

#[test]
fn four_homoclinics_at_minus_007() {
    let f = fixture();
    assert_eq!(f.plus.len(), 4, "{:?}", f.plus.iter().map(|c| c.section_point).collect::<Vec<_>>());
    for c in &f.plus {
        assert_eq!(c.kind, ConnectionKind::Homoclinic);
        assert_eq!(c.rotation, [0, 1]);
        assert!(c.max_mismatch() < MISMATCH_TOL, "mismatch {:?}", c.mismatch);
        assert!(c.approach.iter().all(|d| *d < APPROACH_TOL));
        assert_eq!(c.source, EquilibriumLabel::DownUp);
        assert_eq!(c.target, EquilibriumLabel::DownUp);
    }
    assert_eq!(f.plus.iter().filter(|c| c.symmetric).count(), 2);
}

#[test]
fn symmetric_homoclinics_sit_on_the_symmetry_line() {
    for c in fixture().plus.iter().filter(|c| c.symmetric) {
        assert!(c.section_point[0].abs() < SYMMETRY_TOL, "{:?}", c.section_point);
        assert!(c.partner.is_none());
    }
}

#[test]
fn homoclinic_set_is_mirror_invariant() {
    let f = fixture();
    for c in &f.plus {
        assert!(contains(&f.plus, mirror_plane_point(&f.model, c.section_point), 1e-5), "no mirror of {:?}", c.section_point);
    }
}

#[test]
fn asymmetric_homoclinics_are_paired() {
    let f = fixture();
    for c in f.plus.iter().filter(|c| !c.symmetric) {
        let j = c.partner.expect("partner");
        let p = &f.plus[j];
        assert_eq!(p.partner, Some(c.id));
        assert!(p.max_mismatch() < MISMATCH_TOL);
        let m = mirror_plane_point(&f.model, c.section_point);
        assert!(plane_diff(&c.section, p.section_point, m).iter().all(|d| d.abs() < 1e-5));
    }
}

#[test]
fn opposite_sense_is_the_reflected_set() {
    let f = fixture();
    let minus = find_homoclinics(&f.model, &f.orbit, -1, &SearchOptions::default()).unwrap();
    assert_eq!(minus.len(), f.plus.len());
    for c in &minus {
        assert_eq!(c.rotation, [0, -1]);
        assert!(contains(&f.plus, reflect_plane_point(&f.model, c.section_point), 1e-5));
    }
}

#[test]
fn reverser_images_are_connections() {
    let f = fixture();
    let cfg = refinement_config(&IntegratorConfig::default());
    for c in &f.plus {
        let d = verify_reversed(&f.model, c, &f.orbit, &f.orbit, &cfg).unwrap();
        assert!(d.iter().all(|v| *v < APPROACH_TOL), "{d:?}");
    }
}

#[test]
fn trajectory_runs_between_the_lifts() {
    let f = fixture();
    for c in &f.plus {
        let t = &c.trajectory;
        assert!(t.times.windows(2).all(|w| w[1] > w[0]));
        let (a, b) = (t.states[0], *t.states.last().unwrap());
        // ends on the orbit and its 2π lift in θ2
        assert!((a.q2 - PI).abs() < 1.5);
        assert!((b.q2 - 3.0 * PI).abs() < 1.5);
        assert!(t.states.iter().all(|s| (f.model.energy(&s.to_array()) + 0.07).abs() < 1e-8));
    }
}

#[test]
fn located_offsets_decompose_in_the_floquet_frame() {
    let f = fixture();
    let cfg = refinement_config(&IntegratorConfig::default());
    let frame = OrbitFrame::new(&f.model, &f.orbit, &cfg).unwrap();
    let phase = 0.3 * f.orbit.period;
    let (x, m) = integrate::integrate_variational(&f.model, f.orbit.anchor, phase, &cfg).unwrap();
    let vu = unit(mat_vec(&m, &f.orbit.unstable_dir));
    let a = 1e-5;
    let p = State::from_array([0, 1, 2, 3].map(|i| x.to_array()[i] + a * vu[i]));
    let loc = frame.locate(&f.model, &p, &cfg).unwrap();
    // the offset is made normal to the flow, so the phase moves by the
    // flow-wise part of the offset
    let fx = f.model.field(&x.to_array());
    let shift = a * dot4(&vu, &fx) / dot4(&fx, &fx);
    assert!((loc.phase - phase - shift).abs() < 1e-3 * shift.abs(), "{} vs {} + {}", loc.phase, phase, shift);
    assert!((loc.coeffs[0] - a).abs() < 1e-3 * a, "{:?}", loc.coeffs);
    assert!(loc.coeffs[1].abs() < 1e-9 && loc.coeffs[3].abs() < 1e-9, "{:?}", loc.coeffs);
    assert!(loc.off_ratio(Stability::Unstable) < 1e-4);
    // dropping the stable component moves the point by exactly that much
    assert!((loc.on_manifold(Stability::Unstable).distance(&p) - loc.coeffs[1].abs()).abs() < 1e-13);
    assert!(frame.distance(&f.model, &p) <= a * (1.0 + 1e-6));
}

#[test]
fn partner_symmetries() {
    let model = physical();
    let p = [0.4, -12.0];
    assert_eq!(partner_point(&model, ConnectionKind::Homoclinic, p), [-0.4, -12.0]);
    assert_eq!(partner_point(&model, ConnectionKind::Heteroclinic, p), [-0.4, 12.0]);
    let pcr = SystemModel::default_for(ModelKind::Pcr3bp);
    assert_eq!(mirror_plane_point(&pcr, [-0.5, 0.2]), [-0.5, -0.2]);
    // every point is its own image twice over
    for q in [[3.0, 1.0], [-PI + 1e-3, 0.0]] {
        let back = mirror_plane_point(&model, mirror_plane_point(&model, q));
        assert!(plane_diff(&SectionSpec::theta2(1, Direction::Any), back, q).iter().all(|d| d.abs() < 1e-15));
    }
}

#[test]
fn heteroclinics_need_matching_energies() {
    let model = physical();
    let a = down_up_orbit(&model, -0.07);
    let b = down_up_orbit(&model, -0.034);
    assert!(matches!(find_heteroclinics(&model, &a, &b, &SearchOptions::default()), Err(Error::EnergyMismatch(_))));
}

#[test]
fn no_heteroclinics_below_the_up_down_saddle() {
    let model = physical();
    let found = find_heteroclinics_at(&model, EquilibriumLabel::DownUp, EquilibriumLabel::UpDown, 0.1, &SearchOptions::default()).unwrap();
    assert!(found.is_empty());
}

#[test]
fn diagonal_sections_need_a_pendulum() {
    let model = SystemModel::default_for(ModelKind::Pcr3bp);
    let model_p = physical();
    let o = down_up_orbit(&model_p, -0.07);
    assert!(matches!(heteroclinic_sides(&model, &o, &o, 1, 1e-6), Err(Error::InvalidConfig(_))));
    assert!(supports_section(&SectionSpec::diagonal(0, Direction::Any).kind));
    assert!(!supports_section(&SectionSpec::hyperplane([0.0; 4], [1.0, 0.0, 0.0, 0.0], None, Direction::Any).kind));
}

#[test]
fn homoclinic_branch_signs_follow_the_rotation_sense() {
    let f = fixture();
    let (u, s) = homoclinic_sides(&f.model, &f.orbit, 1, 1e-6).unwrap();
    // the unstable seed moves θ2 up, the stable seed arrives from below the 2π lift
    assert!(u.sign.value() * f.orbit.unstable_dir[1] > 0.0);
    assert!(-s.sign.value() * f.orbit.stable_dir[1] > 0.0);
    assert_eq!(u.section, SectionSpec::theta2(1, Direction::Positive));
    assert_eq!(s.section, SectionSpec::theta2(0, Direction::Positive));
    assert_eq!(u.section.lift_count(&s.section), 1);
}
