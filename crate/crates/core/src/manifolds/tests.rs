use super::*;
use crate::dynamics::ModelKind;
use crate::equilibria::{find_equilibrium, EquilibriumLabel};
use crate::section::{wrap_angle, Direction};
use crate::upo::find_symmetric_upo;
use proptest::prelude::*;
use std::f64::consts::PI;

fn physical() -> SystemModel {
    SystemModel::default_for(ModelKind::PhysicalDp)
}

fn down_up_orbit(model: &SystemModel, h: f64) -> PeriodicOrbit {
    let eq = find_equilibrium(model, EquilibriumLabel::DownUp).unwrap();
    find_symmetric_upo(model, &eq, h, 0.0, &IntegratorConfig::default()).unwrap()
}

fn dist_to_polyline(poly: &[[f64; 2]], p: [f64; 2], scale: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for w in poly.windows(2) {
        let a = [w[0][0] / scale[0], w[0][1] / scale[1]];
        let b = [w[1][0] / scale[0], w[1][1] / scale[1]];
        let q = [p[0] / scale[0], p[1] / scale[1]];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let l2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if l2 > 0.0 { (((q[0] - a[0]) * ab[0] + (q[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min((q[0] - a[0] - t * ab[0]).hypot(q[1] - a[1] - t * ab[1]));
    }
    best
}

#[test]
fn seeds_lie_at_eps_on_the_level() {
    let model = physical();
    let orbit = down_up_orbit(&model, -0.07);
    let cfg = IntegratorConfig::default();
    for stability in [Stability::Unstable, Stability::Stable] {
        for sign in [BranchSign::Plus, BranchSign::Minus] {
            let eps = 1e-6;
            let b = seed_tube(&model, &orbit, stability, sign, eps, 100, &cfg).unwrap();
            assert_eq!(b.seeds.len(), 100);
            assert!(b.phases.windows(2).all(|w| w[1] > w[0]));
            for (s, x) in b.seeds.iter().zip(&b.base_points) {
                assert!(s.distance(x) <= eps * (1.0 + 1e-6));
                let dh = (model.energy(&s.to_array()) - orbit.energy).abs();
                assert!(dh < 1e-8, "{dh:e}");
                assert!(dh < 100.0 * eps * eps * (1.0 + orbit.energy.abs()), "{dh:e}");
            }
        }
    }
}

#[test]
fn energy_error_is_second_order() {
    let model = physical();
    let orbit = down_up_orbit(&model, -0.07);
    let cfg = IntegratorConfig::default();
    let worst = |eps: f64| {
        let b = seed_tube(&model, &orbit, Stability::Unstable, BranchSign::Plus, eps, 50, &cfg).unwrap();
        b.seeds.iter().map(|s| (model.energy(&s.to_array()) - orbit.energy).abs()).fold(0.0, f64::max)
    };
    let (a, b) = (worst(1e-4), worst(1e-5));
    // a tenth of the displacement, a hundredth of the energy error
    assert!((a / b).log10() > 1.8 && (a / b).log10() < 2.2, "{a:e} / {b:e}");
}

// Over one period the transported unstable direction shrinks backward by
// exactly 1/λ_u; a seed follows its linearisation while the off-manifold
// error (amplified by λ_u) stays small, i.e. for part of a period.
#[test]
fn unstable_seeds_contract_backward_at_the_floquet_rate() {
    let model = physical();
    let orbit = down_up_orbit(&model, -0.147);
    let cfg = IntegratorConfig { rel_tol: 1e-14, abs_tol: 1e-14, ..Default::default() };
    let eps = 1e-6;
    let b = seed_tube(&model, &orbit, Stability::Unstable, BranchSign::Plus, eps, 8, &cfg).unwrap();
    for (k, (s, x)) in b.seeds.iter().zip(&b.base_points).enumerate() {
        // (s − x)/eps carries ~1e-10 of round-off, which the backward flow
        // would magnify; the transported direction is used for the factor
        let (_, mf) = integrate::integrate_variational(&model, orbit.anchor, b.phases[k], &cfg).unwrap();
        let v = mat_vec(&mf, &orbit.unstable_dir);
        let v = v.map(|c| c / norm4(&v));
        let (_, m) = integrate::integrate_variational(&model, *x, -orbit.period, &cfg).unwrap();
        let factor = norm4(&mat_vec(&m, &v));
        assert!((factor * orbit.lambda_u.abs() - 1.0).abs() < 1e-4, "{factor:e} vs 1/{:e}", orbit.lambda_u);

        let dir = [0, 1, 2, 3].map(|i| (s.to_array()[i] - x.to_array()[i]) / eps);
        let t = -0.5 * orbit.period;
        let (ys, yx) = (integrate::flow(&model, *s, t, &cfg).unwrap(), integrate::flow(&model, *x, t, &cfg).unwrap());
        let (_, m) = integrate::integrate_variational(&model, *x, t, &cfg).unwrap();
        let linear = norm4(&mat_vec(&m, &dir));
        assert!(linear < 0.1);
        assert!((ys.distance(&yx) / eps / linear - 1.0).abs() < 1e-3);
    }
}

#[test]
fn seeding_rejects_bad_parameters() {
    let model = physical();
    let orbit = down_up_orbit(&model, -0.07);
    let cfg = IntegratorConfig::default();
    assert!(seed_tube(&model, &orbit, Stability::Unstable, BranchSign::Plus, 1e-2, 10, &cfg).is_err());
    assert!(seed_tube(&model, &orbit, Stability::Unstable, BranchSign::Plus, 1e-6, 2, &cfg).is_err());
    let mut flat = orbit.clone();
    flat.lambda_u = 1.0;
    assert!(matches!(seed_tube(&model, &flat, Stability::Unstable, BranchSign::Plus, 1e-6, 10, &cfg), Err(Error::NonHyperbolic(_))));
}

#[test]
fn unstable_cut_at_02_is_closed_and_on_the_section() {
    let model = physical();
    let orbit = down_up_orbit(&model, 0.2);
    let cfg = IntegratorConfig::default();
    let sign = if orbit.unstable_dir[1] > 0.0 { BranchSign::Plus } else { BranchSign::Minus };
    let b = seed_tube(&model, &orbit, Stability::Unstable, sign, 1e-6, 200, &cfg).unwrap();
    let section = SectionSpec::theta2(1, Direction::Positive);
    let cut = globalize_tube(&model, &b, &section, &cfg).unwrap();
    assert_eq!(cut.incomplete_count, 0);
    assert!(cut.closed);
    for s in &cut.full_states {
        assert!(section.value(&s.to_array()).abs() < 1e-10);
        assert!((model.energy(&s.to_array()) - 0.2).abs() < 1e-8);
    }
    assert!(cut.phases.windows(2).all(|w| w[1] > w[0]));
}

// On the Fig. 7 ladder the cuts are smooth closed curves, and each cut
// point's nearest neighbour is one of its two neighbours in seed order.
#[test]
fn cut_points_are_ordered_along_the_curve() {
    let model = physical();
    let cfg = IntegratorConfig::default();
    for h in [-0.147, -0.07, 0.06] {
        let orbit = down_up_orbit(&model, h);
        let sign = if orbit.unstable_dir[1] > 0.0 { BranchSign::Plus } else { BranchSign::Minus };
        let b = seed_tube(&model, &orbit, Stability::Unstable, sign, 1e-6, 200, &cfg).unwrap();
        let cut = globalize_tube(&model, &b, &SectionSpec::theta2(1, Direction::Positive), &cfg).unwrap();
        assert!(cut.closed);
        let n = cut.len();
        let d = |i: usize, j: usize| wrap_angle(cut.coords[i][0] - cut.coords[j][0]).hypot((cut.coords[i][1] - cut.coords[j][1]) / 30.0);
        for i in 0..n {
            let near = d(i, (i + 1) % n).min(d(i, (i + n - 1) % n));
            assert!((2..n - 1).all(|k| d(i, (i + k) % n) >= near), "H = {h}: point {i} out of order");
        }
    }
}

#[test]
fn stable_cut_is_the_reverser_image_of_the_unstable_cut() {
    let model = physical();
    let orbit = down_up_orbit(&model, 0.2);
    let cfg = IntegratorConfig::default();
    let su = if orbit.unstable_dir[1] > 0.0 { BranchSign::Plus } else { BranchSign::Minus };
    // R maps the unstable direction onto ± the stable one
    let rv = model.reverser(&State::from_array(orbit.unstable_dir)).to_array();
    let align: f64 = (0..4).map(|i| rv[i] * orbit.stable_dir[i]).sum();
    let ss = if align > 0.0 { su } else { su.flipped() };
    let bu = seed_tube(&model, &orbit, Stability::Unstable, su, 1e-6, 200, &cfg).unwrap();
    let bs = seed_tube(&model, &orbit, Stability::Stable, ss, 1e-6, 200, &cfg).unwrap();
    let cu = globalize_tube(&model, &bu, &SectionSpec::theta2(1, Direction::Positive), &cfg).unwrap();
    // reversed trajectories cross with θ̇2 < 0
    let cs = globalize_tube(&model, &bs, &SectionSpec::theta2(1, Direction::Negative), &cfg).unwrap();
    let mut poly = cs.coords.clone();
    poly.push(poly[0]);
    for s in &cu.full_states {
        let r = model.reverser(s);
        let p = cs.section.wrapped_plane_coords(&r.to_array());
        let d = dist_to_polyline(&poly, p, [1.0, 1.0]);
        assert!(d < 1e-4, "{p:?} is {d:e} off the stable cut");
    }
}

#[test]
fn all_seeds_incomplete_is_an_error() {
    let model = physical();
    let orbit = down_up_orbit(&model, -0.07);
    let cfg = IntegratorConfig { max_time: 1e-3, ..Default::default() };
    let b = seed_tube(&model, &orbit, Stability::Unstable, BranchSign::Plus, 1e-6, 10, &IntegratorConfig::default()).unwrap();
    let r = globalize_tube(&model, &b, &SectionSpec::theta2(1, Direction::Positive), &cfg);
    assert!(matches!(r, Err(Error::AllSeedsIncomplete)));
}

// Fig. 8 setting: transit points inside both tube cuts stay inside the
// unstable tube on later returns.
#[test]
fn interior_points_stay_in_the_unstable_tube() {
    let model = physical();
    let h = -0.06985;
    let orbit = down_up_orbit(&model, h);
    let cfg = IntegratorConfig::default();
    let su = if orbit.unstable_dir[1] > 0.0 { BranchSign::Plus } else { BranchSign::Minus };
    let ss = if orbit.stable_dir[1] < 0.0 { BranchSign::Plus } else { BranchSign::Minus };
    let section = SectionSpec::theta2(1, Direction::Positive);
    let bu = seed_tube(&model, &orbit, Stability::Unstable, su, 1e-6, 400, &cfg).unwrap();
    let bs = seed_tube(&model, &orbit, Stability::Stable, ss, 1e-6, 400, &cfg).unwrap();
    let cu = globalize_tube(&model, &bu, &section, &cfg).unwrap();
    let cs = globalize_tube(&model, &bs, &SectionSpec::theta2(0, Direction::Positive), &cfg).unwrap();
    assert!(cu.closed && cs.closed);
    let (lo, hi) = cu.coords.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let mut points = Vec::new();
    for i in 0..25 {
        for j in 0..25 {
            let p = [lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / 25.0, lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / 25.0];
            if point_in_polygon(&cu.coords, p) && point_in_polygon(&cs.coords, p) {
                let guess = cu.full_states[0];
                if let Ok(s) = section.complete_state(&model, p, h, &guess) {
                    if s.v2 > 0.0 {
                        points.push(s);
                    }
                }
            }
        }
    }
    assert!(points.len() >= 20, "{} interior points", points.len());
    let images = interior_iterate(&model, &points, &section, 3, 1.0, 1, &cfg).unwrap();
    // points that fail to transit a later bottleneck never return; every
    // return that does occur is counted
    for (r, row) in images.iter().enumerate() {
        let returned = row.iter().flatten().count();
        let inside = row.iter().flatten().filter(|s| point_in_polygon(&cu.coords, section.wrapped_plane_coords(&s.to_array()))).count();
        println!("return {}: {returned}/{} returned, {inside} inside", r + 1, points.len());
        assert!(inside as f64 >= 0.99 * returned as f64, "return {}: {inside}/{returned} inside", r + 1);
        for s in row.iter().flatten() {
            assert!((s.q2 - 2.0 * PI * (r + 2) as f64).abs() < 1e-9);
        }
    }
    // backward returns are the reverser images of the forward ones: the
    // reversed points run up to the same lift with θ̇2 < 0
    let mirrored: Vec<State> = points.iter().map(|s| model.reverser(s)).collect();
    let back = interior_iterate(&model, &mirrored, &section.with_direction(Direction::Negative), 1, -1.0, 1, &cfg).unwrap();
    for (f, b) in images[0].iter().zip(&back[0]) {
        if let (Some(f), Some(b)) = (f, b) {
            assert!(model.reverser(b).distance(f) < 1e-6, "{b:?} vs {f:?}");
        }
    }
}

#[test]
fn winding_numbers() {
    let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    assert_eq!(winding_number(&sq, [0.5, 0.5]), 1);
    let rev: Vec<[f64; 2]> = sq.iter().rev().copied().collect();
    assert_eq!(winding_number(&rev, [0.5, 0.5]), -1);
    assert!(!point_in_polygon(&sq, [1.5, 0.5]));
}

proptest! {
    #[test]
    fn polygon_test_matches_the_disc(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let poly: Vec<[f64; 2]> = (0..720).map(|k| {
            let a = 2.0 * PI * k as f64 / 720.0;
            [a.cos(), a.sin()]
        }).collect();
        let r = x.hypot(y);
        prop_assume!((r - 1.0).abs() > 1e-3);
        prop_assert_eq!(point_in_polygon(&poly, [x, y]), r < 1.0);
    }
}



