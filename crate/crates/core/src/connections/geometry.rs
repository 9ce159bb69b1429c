//! Segment intersection of two section cuts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::SectionCut;
use crate::section::SectionSpec;

/// Crossings with `|sin|` of the segment angle below this are flagged.
const LOW_CONFIDENCE_SIN: f64 = 1e-3;
/// Largest relative change of flight time across a segment that is still
/// taken as a resolved piece of the curve; larger jumps join points whose
/// trajectories took different routes.
pub const FLIGHT_JUMP: f64 = 0.05;

/// A crossing of segment `seg_u` of the unstable cut (at parameter `t_u`)
/// with segment `seg_s` of the stable cut (at `t_s`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: [f64; 2],
    pub seg_u: usize,
    pub t_u: f64,
    pub seg_s: usize,
    pub t_s: f64,
    pub low_confidence: bool,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn segment_hit(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64, f64)> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = cross(r, s);
    if den == 0.0 {
        return None;
    }
    let qp = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = cross(qp, s) / den;
    let u = cross(qp, r) / den;
    // half-open so a crossing at a shared vertex is reported once
    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
        let sin = den / (r[0].hypot(r[1]) * s[0].hypot(s[1]));
        Some((t, u, sin))
    } else {
        None
    }
}

/// Crossings of two polylines, restricted to segments for which the
/// predicates hold (segment `i` joins points `i` and `i + 1 mod len`).
/// Crossings closer than `merge_tol` to an earlier one are dropped.
pub fn intersect_polylines(
    a: &[[f64; 2]],
    b: &[[f64; 2]],
    use_a: impl Fn(usize) -> bool,
    use_b: impl Fn(usize) -> bool,
    merge_tol: f64,
) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    if a.len() < 2 || b.len() < 2 {
        return out;
    }
    for i in (0..a.len()).filter(|&i| use_a(i)) {
        let (p0, p1) = (a[i], a[(i + 1) % a.len()]);
        let (lo_x, hi_x) = (p0[0].min(p1[0]), p0[0].max(p1[0]));
        let (lo_y, hi_y) = (p0[1].min(p1[1]), p0[1].max(p1[1]));
        for j in (0..b.len()).filter(|&j| use_b(j)) {
            let (q0, q1) = (b[j], b[(j + 1) % b.len()]);
            if q0[0].max(q1[0]) < lo_x || q0[0].min(q1[0]) > hi_x || q0[1].max(q1[1]) < lo_y || q0[1].min(q1[1]) > hi_y {
                continue;
            }
            let Some((t, u, sin)) = segment_hit(p0, p1, q0, q1) else { continue };
            let point = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
            if out.iter().any(|c| (c.point[0] - point[0]).abs() < merge_tol && (c.point[1] - point[1]).abs() < merge_tol) {
                continue;
            }
            out.push(Candidate { point, seg_u: i, t_u: t, seg_s: j, t_s: u, low_confidence: sin.abs() < LOW_CONFIDENCE_SIN });
        }
    }
    out
}

fn usable_segment(cut: &SectionCut, i: usize) -> bool {
    let n = cut.len();
    if i + 1 == n && !cut.closed {
        return false;
    }
    if !cut.segment_is_genuine(i) {
        return false;
    }
    let (ta, tb) = (cut.flight_times[i], cut.flight_times[(i + 1) % n]);
    if (ta - tb).abs() > FLIGHT_JUMP * ta.abs().max(tb.abs()) {
        return false;
    }
    // a segment straddling the ±π seam of a wrapped angle is not a chord
    !(cut.section.plane_is_angular() && (cut.coords[(i + 1) % n][0] - cut.coords[i][0]).abs() > std::f64::consts::PI)
}

fn check_compatible(a: &SectionSpec, b: &SectionSpec) -> Result<()> {
    if !a.same_family(b) {
        return Err(Error::SectionMismatch(format!("{:?} vs {:?}", a.kind, b.kind)));
    }
    Ok(())
}

/// Intersections of an unstable and a stable cut on the same section
/// family and energy. Segments across timed-out seeds, the closing segment
/// of an open cut, segments across the angle seam and segments with a
/// flight-time jump are skipped.
pub fn intersect_cuts(unstable: &SectionCut, stable: &SectionCut, merge_tol: f64) -> Result<Vec<Candidate>> {
    check_compatible(&unstable.section, &stable.section)?;
    if (unstable.energy - stable.energy).abs() > 1e-8 {
        return Err(Error::SectionMismatch(format!("energies {} and {}", unstable.energy, stable.energy)));
    }
    Ok(intersect_polylines(
        &unstable.coords,
        &stable.coords,
        |i| usable_segment(unstable, i),
        |j| usable_segment(stable, j),
        merge_tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn circle(c: [f64; 2], r: f64, n: usize, phase: f64) -> Vec<[f64; 2]> {
        (0..n)
            .map(|k| {
                let a = phase + 2.0 * PI * k as f64 / n as f64;
                [c[0] + r * a.cos(), c[1] + r * a.sin()]
            })
            .collect()
    }

    #[test]
    fn crossing_squares() {
        let a = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let b = [[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]];
        let hits = intersect_polylines(&a, &b, |_| true, |_| true, 1e-9);
        let mut pts: Vec<[f64; 2]> = hits.iter().map(|c| c.point).collect();
        pts.sort_by(|p, q| p[0].total_cmp(&q[0]));
        assert_eq!(pts, vec![[1.0, 2.0], [2.0, 1.0]]);
    }

    #[test]
    fn open_polylines_skip_closing_segment() {
        let a = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let b = [[-1.0, 1.0], [1.0, 1.0]];
        let closed = intersect_polylines(&a, &b, |_| true, |j| j == 0, 1e-9);
        assert_eq!(closed.len(), 1);
        let open = intersect_polylines(&a, &b, |i| i + 1 < a.len(), |j| j == 0, 1e-9);
        assert!(open.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // two circles meet in 0 or 2 points, found at the analytic places
        #[test]
        fn circle_pairs(d in 0.05f64..2.5, r1 in 0.5f64..1.2, r2 in 0.5f64..1.2, ph in 0.0f64..1.0) {
            let n = 4000;
            let a = circle([0.0, 0.0], r1, n, ph);
            let b = circle([d, 0.0], r2, n, 0.3 * ph);
            let hits = intersect_polylines(&a, &b, |_| true, |_| true, 1e-9);
            let meets = d < r1 + r2 && d > (r1 - r2).abs();
            let margin = 1e-3;
            if d < r1 + r2 - margin && d > (r1 - r2).abs() + margin {
                prop_assert_eq!(hits.len(), 2);
                let x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
                let y = (r1 * r1 - x * x).sqrt();
                for c in &hits {
                    prop_assert!((c.point[0] - x).abs() < 1e-3, "{:?} vs x {}", c.point, x);
                    prop_assert!((c.point[1].abs() - y).abs() < 1e-3);
                }
            } else if !meets && (d > r1 + r2 + margin || d < (r1 - r2).abs() - margin) {
                prop_assert!(hits.is_empty());
            }
        }
    }
}
