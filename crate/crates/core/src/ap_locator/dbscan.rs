//! DBSCAN over geographic points with the haversine metric.

use crate::geo::haversine_m;
use crate::trace_model::{GeoPoint, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clustering {
    /// Member indices of each cluster, ascending, in discovery order.
    pub clusters: Vec<Vec<usize>>,
    /// Indices of points in no cluster, ascending.
    pub noise: Vec<usize>,
}

impl Clustering {
    pub fn clustered_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }
}

/// Neighbor lists (excluding self) under `d <= eps_m`.
///
/// Points are swept in latitude order: the meridional separation never
/// exceeds the great-circle distance, so the sweep stops as soon as it does.
fn neighbor_lists(points: &[GeoPoint], eps_m: f64, radius_m: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].lat().total_cmp(&points[b].lat()));
    let mut nbrs = vec![Vec::new(); n];
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            let dlat_m = (points[j].lat() - points[i].lat()).to_radians() * radius_m;
            if dlat_m > eps_m {
                break;
            }
            if haversine_m(points[i], points[j], radius_m) <= eps_m {
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
        }
    }
    for list in &mut nbrs {
        list.sort_unstable();
    }
    nbrs
}

/// Density-based clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps_m`. Points are visited in index order
/// and a border point joins the first cluster that reaches it.
pub fn dbscan(points: &[(GeoPoint, Timestamp)], eps_m: f64, min_pts: usize, radius_m: f64) -> Clustering {
    let geo: Vec<GeoPoint> = points.iter().map(|(p, _)| *p).collect();
    dbscan_points(&geo, eps_m, min_pts, radius_m)
}

pub fn dbscan_points(points: &[GeoPoint], eps_m: f64, min_pts: usize, radius_m: f64) -> Clustering {
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let nbrs = neighbor_lists(points, eps_m, radius_m);
    let is_core: Vec<bool> = nbrs.iter().map(|l| l.len() + 1 >= min_pts).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    for start in 0..n {
        if label[start].is_some() || !is_core[start] {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![start];
        label[start] = Some(id);
        let mut queue = vec![start];
        while let Some(p) = queue.pop() {
            if !is_core[p] {
                continue;
            }
            for &q in &nbrs[p] {
                if label[q].is_none() {
                    label[q] = Some(id);
                    members.push(q);
                    queue.push(q);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }

    let noise = (0..n).filter(|&i| label[i].is_none()).collect();
    Clustering { clusters, noise }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LocalFrame, EARTH_RADIUS_M};

    fn frame() -> LocalFrame {
        LocalFrame::new(GeoPoint::new(55.0, 12.0).unwrap(), EARTH_RADIUS_M)
    }

    fn pts(xy: &[(f64, f64)]) -> Vec<(GeoPoint, Timestamp)> {
        let f = frame();
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| (f.to_geo(x, y), Timestamp(i as u64)))
            .collect()
    }

    #[test]
    fn tight_disc_is_one_cluster() {
        let p = pts(&[(0.0, 0.0), (3.0, 1.0), (-4.0, 2.0), (1.0, -5.0), (2.0, 2.0), (-1.0, -1.0)]);
        let c = dbscan(&p, 100.0, 5, EARTH_RADIUS_M);
        assert_eq!(c.clusters, vec![vec![0, 1, 2, 3, 4, 5]]);
        assert!(c.noise.is_empty());
    }

    #[test]
    fn two_separated_groups() {
        let mut xy: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 3.0, 0.0)).collect();
        xy.extend((0..6).map(|i| (1000.0 + i as f64 * 3.0, 0.0)));
        let c = dbscan(&pts(&xy), 100.0, 5, EARTH_RADIUS_M);
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.clusters[0], (0..6).collect::<Vec<_>>());
        assert_eq!(c.clusters[1], (6..12).collect::<Vec<_>>());
        assert!(c.noise.is_empty());
    }

    #[test]
    fn sparse_points_are_noise() {
        let xy: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 250.0, 0.0)).collect();
        let c = dbscan(&pts(&xy), 100.0, 5, EARTH_RADIUS_M);
        assert!(c.clusters.is_empty());
        assert_eq!(c.noise.len(), 20);
    }

    #[test]
    fn border_goes_to_first_cluster() {
        // point 0 reaches one member of each dense group, so it is a border point
        let mut xy = vec![(0.0, 0.0)];
        xy.extend((0..5).map(|i| (-95.0 - 6.0 * i as f64, 0.0)));
        xy.extend((0..5).map(|i| (95.0 + 6.0 * i as f64, 0.0)));
        let c = dbscan(&pts(&xy), 100.0, 5, EARTH_RADIUS_M);
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.clusters[0], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(c.clusters[1], vec![6, 7, 8, 9, 10]);
    }

    #[test]
    fn min_pts_one_makes_everything_core() {
        let xy: Vec<(f64, f64)> = (0..4).map(|i| (i as f64 * 500.0, 0.0)).collect();
        let c = dbscan(&pts(&xy), 100.0, 1, EARTH_RADIUS_M);
        assert_eq!(c.clusters.len(), 4);
        assert!(c.noise.is_empty());
    }

    #[test]
    fn empty_input() {
        let c = dbscan(&[], 100.0, 5, EARTH_RADIUS_M);
        assert_eq!(c, Clustering::default());
    }
}
