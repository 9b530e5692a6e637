//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wifitrace::geo::{haversine_m, LocalFrame, EARTH_RADIUS_M};
use wifitrace::trace_model::{ApSighting, BssidId, GeoPoint, Timestamp, UserId, WifiScan};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn origin() -> LocalFrame {
    LocalFrame::new(GeoPoint::new(55.68, 12.57).unwrap(), EARTH_RADIUS_M)
}

/// Reference DBSCAN built from the all-pairs distance matrix.
///
/// Clusters are the connected components of core points, numbered by their
/// smallest core index. A border point goes to the lowest-numbered cluster
/// among its core neighbors. Returns `(clusters as sorted sets, noise)`.
pub fn dbscan_oracle(points: &[GeoPoint], eps_m: f64, min_pts: usize) -> (Vec<BTreeSet<usize>>, BTreeSet<usize>) {
    let n = points.len();
    let near = |i: usize, j: usize| haversine_m(points[i], points[j], EARTH_RADIUS_M) <= eps_m;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();

    // union-find over core points
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&i| core[i]).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    // roots are the smallest index of each component, so this is discovery order
    let mut clusters: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); roots.len()];
    let mut noise = BTreeSet::new();
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            clusters[roots.binary_search(&r).unwrap()].insert(i);
            continue;
        }
        let best = (0..n)
            .filter(|&j| core[j] && near(i, j))
            .map(|j| {
                let r = find(&mut parent, j);
                roots.binary_search(&r).unwrap()
            })
            .min();
        match best {
            Some(c) => {
                clusters[c].insert(i);
            }
            None => {
                noise.insert(i);
            }
        }
    }
    (clusters, noise)
}

/// Random clustered point cloud of `n` points within about a kilometer.
pub fn random_cloud(r: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
    let f = origin();
    let centers: Vec<(f64, f64)> = (0..r.random_range(1..=5))
        .map(|_| (r.random_range(-500.0..500.0), r.random_range(-500.0..500.0)))
        .collect();
    (0..n)
        .map(|_| {
            if r.random_bool(0.2) {
                f.to_geo(r.random_range(-600.0..600.0), r.random_range(-600.0..600.0))
            } else {
                let c = centers[r.random_range(0..centers.len())];
                let s = r.random_range(10.0..80.0);
                f.to_geo(c.0 + r.random_range(-s..s), c.1 + r.random_range(-s..s))
            }
        })
        .collect()
}

pub fn summed_distance(points: &[GeoPoint], q: GeoPoint) -> f64 {
    points.iter().map(|p| haversine_m(*p, q, EARTH_RADIUS_M)).sum()
}

/// Minimizer of summed great-circle distance on a 0.5 m grid. The objective
/// is convex, so a 2 m pass over the bounding box locates the basin and a
/// 0.5 m pass refines it.
pub fn median_grid_search(points: &[GeoPoint]) -> GeoPoint {
    let f = LocalFrame::new(points[0], EARTH_RADIUS_M);
    let xy: Vec<(f64, f64)> = points.iter().map(|p| f.to_xy(*p)).collect();
    let (x0, x1) = xy.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = xy.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let search = |xs: (f64, f64), ys: (f64, f64), step: f64| {
        let mut best = (f64::MAX, 0.0, 0.0);
        let mut x = xs.0;
        while x <= xs.1 + 1e-9 {
            let mut y = ys.0;
            while y <= ys.1 + 1e-9 {
                let c = summed_distance(points, f.to_geo(x, y));
                if c < best.0 {
                    best = (c, x, y);
                }
                y += step;
            }
            x += step;
        }
        (best.1, best.2)
    };
    let (cx, cy) = search((x0, x1), (y0, y1), 2.0);
    let (fx, fy) = search((cx - 4.0, cx + 4.0), (cy - 4.0, cy + 4.0), 0.5);
    f.to_geo(fx, fy)
}

pub fn mac(i: u32) -> BssidId {
    let b = i.to_be_bytes();
    BssidId::from_octets([2, 0, b[0], b[1], b[2], b[3]])
}

/// Scans of one user, one per bin, hearing the given routers.
pub fn scans_from_bins(bins: &[Vec<u32>], bin_ms: u64) -> Vec<WifiScan> {
    let u = UserId::new("u").unwrap();
    bins.iter()
        .enumerate()
        .map(|(t, aps)| {
            let set: BTreeSet<u32> = aps.iter().copied().collect();
            WifiScan::new(
                u.clone(),
                Timestamp(t as u64 * bin_ms),
                set.into_iter().map(|a| ApSighting::new(mac(a), None, None).unwrap()).collect(),
            )
        })
        .collect()
}

/// Bins covered by a set of routers.
pub fn covered_bins(bins: &[Vec<u32>], chosen: &BTreeSet<u32>) -> usize {
    bins.iter().filter(|b| b.iter().any(|a| chosen.contains(a))).count()
}

/// Best coverage over all router subsets of size `k` (or fewer, if there
/// are fewer routers).
pub fn max_coverage_enumerated(bins: &[Vec<u32>], k: usize) -> usize {
    let routers: Vec<u32> = bins.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let k = k.min(routers.len());
    let mut best = 0;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let chosen: BTreeSet<u32> = idx.iter().map(|&i| routers[i]).collect();
        best = best.max(covered_bins(bins, &chosen));
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] != i + routers.len() - k {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Random bins over at most `n_routers` routers.
pub fn random_bins(r: &mut ChaCha8Rng, n_bins: usize, n_routers: u32) -> Vec<Vec<u32>> {
    (0..n_bins)
        .map(|_| (0..r.random_range(0..4)).map(|_| r.random_range(0..n_routers)).collect())
        .collect()
}
