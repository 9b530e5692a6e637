//! Geometric median by Weiszfeld iteration on a local tangent plane.

use crate::geo::LocalFrame;
use crate::trace_model::GeoPoint;

const STEP_TOL_M: f64 = 1e-3;
const MAX_ITERS: usize = 1000;
/// Nudge applied when an iterate lands on a data point, where the update
/// is undefined.
const NUDGE_EAST_M: f64 = 0.01;

/// Point minimizing the summed distance to `points`.
///
/// Two points have no unique minimizer; their midpoint is returned.
///
/// # Panics
/// If `points` is empty.
pub fn geometric_median(points: &[GeoPoint], radius_m: f64) -> GeoPoint {
    assert!(!points.is_empty(), "geometric median of an empty set");
    if points.len() == 1 {
        return points[0];
    }
    let frame = LocalFrame::centered_on(points, radius_m);
    let xy: Vec<(f64, f64)> = points.iter().map(|p| frame.to_xy(*p)).collect();
    let (x, y) = weiszfeld(&xy);
    frame.to_geo(x, y)
}

/// Planar Weiszfeld iteration, starting from the centroid.
pub fn weiszfeld(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    if xy.len() == 2 {
        return ((xy[0].0 + xy[1].0) / 2.0, (xy[0].1 + xy[1].1) / 2.0);
    }
    if let Some(v) = optimal_vertex(xy) {
        return v;
    }
    let mut cur = (
        xy.iter().map(|p| p.0).sum::<f64>() / n,
        xy.iter().map(|p| p.1).sum::<f64>() / n,
    );
    for _ in 0..MAX_ITERS {
        let mut wsum = 0.0;
        let mut nx = 0.0;
        let mut ny = 0.0;
        let mut on_point = false;
        for &(px, py) in xy {
            let d = (px - cur.0).hypot(py - cur.1);
            if d < 1e-9 {
                on_point = true;
                break;
            }
            wsum += 1.0 / d;
            nx += px / d;
            ny += py / d;
        }
        if on_point {
            cur.0 += NUDGE_EAST_M;
            continue;
        }
        let next = (nx / wsum, ny / wsum);
        let step = (next.0 - cur.0).hypot(next.1 - cur.1);
        cur = next;
        if step < STEP_TOL_M {
            break;
        }
    }
    cur
}

/// A data point is the minimizer when the pull of the others, as a sum of
/// unit vectors, is no stronger than its own multiplicity.
fn optimal_vertex(xy: &[(f64, f64)]) -> Option<(f64, f64)> {
    xy.iter().copied().find(|&p| {
        let (mut rx, mut ry, mut same) = (0.0, 0.0, 0.0);
        for &q in xy {
            let d = (q.0 - p.0).hypot(q.1 - p.1);
            if d < 1e-9 {
                same += 1.0;
            } else {
                rx += (q.0 - p.0) / d;
                ry += (q.1 - p.1) / d;
            }
        }
        rx.hypot(ry) <= same
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{haversine_m, EARTH_RADIUS_M};

    #[test]
    fn single_point() {
        let p = GeoPoint::new(10.0, 20.0).unwrap();
        assert_eq!(geometric_median(&[p], EARTH_RADIUS_M), p);
    }

    #[test]
    fn square_corners() {
        let f = LocalFrame::new(GeoPoint::new(55.0, 12.0).unwrap(), EARTH_RADIUS_M);
        let corners: Vec<_> = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)]
            .iter()
            .map(|&(x, y)| f.to_geo(x, y))
            .collect();
        let m = geometric_median(&corners, EARTH_RADIUS_M);
        assert!(haversine_m(m, f.to_geo(50.0, 50.0), EARTH_RADIUS_M) < 0.5);
    }

    #[test]
    fn two_points_give_midpoint() {
        assert_eq!(weiszfeld(&[(0.0, 0.0), (10.0, 4.0)]), (5.0, 2.0));
    }

    #[test]
    fn repeated_point() {
        let m = weiszfeld(&[(3.0, 4.0); 7]);
        assert!((m.0 - 3.0).abs() < 0.02 && (m.1 - 4.0).abs() < 0.02, "{m:?}");
    }

    #[test]
    fn majority_point_wins() {
        // three copies of the origin outweigh two far points
        let m = weiszfeld(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (50.0, 0.0), (0.0, 80.0)]);
        assert!(m.0.hypot(m.1) < 0.2, "{m:?}");
    }

    #[test]
    fn robust_to_outlier() {
        let mut pts: Vec<(f64, f64)> = (0..9).map(|i| ((i % 3) as f64, (i / 3) as f64)).collect();
        pts.push((10_000.0, 0.0));
        let m = weiszfeld(&pts);
        assert!(m.0 < 2.5 && m.1 > 0.0 && m.1 < 2.0, "{m:?}");
    }

    #[test]
    fn obtuse_vertex_is_exact() {
        // angle at the origin exceeds 120 degrees
        let m = weiszfeld(&[(0.0, 0.0), (40.0, 5.0), (-40.0, 5.0)]);
        assert_eq!(m, (0.0, 0.0));
    }
}
