//! Scan and GPS emission from ground-truth trajectories.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::mobility::TrajectoryCursor;
use super::world::{stream_rng, Carrier, GroundTruth, WorldSpec, SENSOR_STREAM};
use crate::trace_model::{ApSighting, BssidId, GeoPoint, GpsFix, Timestamp, TraceSet, WifiScan};

/// Emission counts, for checking ingestion against the generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SensorStats {
    pub fixes: usize,
    pub scans: usize,
    pub nonempty_scans: usize,
    pub sightings: usize,
}

/// Static APs bucketed by a square grid whose cell equals the visibility radius.
pub(crate) struct ApGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl ApGrid {
    pub(crate) fn new(gt: &GroundTruth, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, a) in gt.static_aps.iter().enumerate() {
            buckets.entry(Self::key(a.x, a.y, cell)).or_default().push(i);
        }
        ApGrid { cell, buckets }
    }

    fn key(x: f64, y: f64, cell: f64) -> (i64, i64) {
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    }

    /// Static APs within `radius` of `p` with their distances.
    pub(crate) fn within(&self, gt: &GroundTruth, p: (f64, f64), radius: f64, out: &mut Vec<(usize, f64)>) {
        let (kx, ky) = Self::key(p.0, p.1, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &i in v {
                        let a = &gt.static_aps[i];
                        let d = (a.x - p.0).hypot(a.y - p.1);
                        if d <= radius {
                            out.push((i, d));
                        }
                    }
                }
            }
        }
    }
}

fn rssi(d: f64, noise: f64) -> i16 {
    (-30.0 - 25.0 * d.max(1.0).log10() + noise).round().clamp(-100.0, -20.0) as i16
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

fn jittered(period_ms: f64, jitter: f64, rng: &mut ChaCha8Rng) -> u64 {
    (period_ms * rng.random_range(1.0 - jitter..=1.0 + jitter)).round().max(1.0) as u64
}

struct UserEmission {
    fixes: Vec<GpsFix>,
    scans: Vec<WifiScan>,
    stats: SensorStats,
}

fn simulate_user(gt: &GroundTruth, spec: &WorldSpec, grid: &ApGrid, u: usize) -> UserEmission {
    let mut rng = stream_rng(spec.seed, SENSOR_STREAM + u as u64);
    let user = &gt.users[u];
    let epoch = gt.epoch_ms();
    let end = gt.end_ms();
    let radius = spec.visibility_radius_m;
    let rssi_noise = Normal::new(0.0, 3.0).expect("finite");
    let mut me = TrajectoryCursor::new(&user.trajectory);
    // one cursor per carried hotspot; `None` for vehicle-borne APs
    let mut carriers: Vec<Option<TrajectoryCursor<'_>>> = gt
        .mobile_aps
        .iter()
        .map(|a| match a.carrier {
            Carrier::User(c) => Some(TrajectoryCursor::new(&gt.users[c].trajectory)),
            Carrier::Bus { .. } => None,
        })
        .collect();

    let mut stats = SensorStats::default();
    let mut scans = Vec::new();
    let scan_ms = spec.wifi_scan_period_s * 1000.0;
    let mut t = epoch + rng.random_range(0..scan_ms.ceil() as u64);
    let mut hits: Vec<(usize, f64)> = Vec::new();
    while t < end {
        let p = me.position_at(t, &gt.bus_lines, epoch);
        hits.clear();
        grid.within(gt, p, radius, &mut hits);
        let mut sightings: Vec<ApSighting> = hits
            .iter()
            .map(|&(i, d)| {
                let a = &gt.static_aps[i];
                ApSighting::new(a.bssid, Some(a.ssid.clone()), Some(rssi(d, rssi_noise.sample(&mut rng))))
                    .expect("rssi clamped into range")
            })
            .collect();
        for (ap, cur) in gt.mobile_aps.iter().zip(carriers.iter_mut()) {
            match ap.carrier {
                Carrier::Bus { line, .. } if gt.bus_lines[line].distance_to(p) > radius => continue,
                Carrier::User(_) if !gt.mobile_active(ap, t) => continue,
                _ => {}
            }
            let q = gt.mobile_cursor_xy(ap, cur.as_mut(), t);
            let d = (q.0 - p.0).hypot(q.1 - p.1);
            if d <= radius {
                sightings.push(
                    ApSighting::new(ap.bssid, Some(ap.ssid.clone()), Some(rssi(d, rssi_noise.sample(&mut rng))))
                        .expect("rssi clamped into range"),
                );
            }
        }
        sightings.sort_by(|a, b| b.rssi_dbm.cmp(&a.rssi_dbm).then(a.bssid.cmp(&b.bssid)));
        stats.scans += 1;
        stats.sightings += sightings.len();
        if !sightings.is_empty() {
            stats.nonempty_scans += 1;
        }
        scans.push(WifiScan::new(user.id.clone(), Timestamp(t), sightings));
        t += jittered(scan_ms, 0.25, &mut rng);
    }

    let mut fixes = Vec::new();
    let gps_ms = spec.gps_period_s * 1000.0;
    let noise = Normal::new(0.0, spec.gps_noise_m).expect("finite");
    let mut me = TrajectoryCursor::new(&user.trajectory);
    let mut t = epoch + rng.random_range(0..gps_ms.ceil() as u64);
    while t < end {
        let (x, y) = me.position_at(t, &gt.bus_lines, epoch);
        let g = gt.to_geo(x + noise.sample(&mut rng), y + noise.sample(&mut rng));
        let pos = GeoPoint::new(round7(g.lat()), round7(g.lon())).expect("city lies inside valid ranges");
        fixes.push(GpsFix::new(user.id.clone(), Timestamp(t), pos, Some(spec.gps_noise_m)).expect("finite accuracy"));
        stats.fixes += 1;
        t += jittered(gps_ms, 0.1, &mut rng);
    }
    UserEmission { fixes, scans, stats }
}

/// Emits all users' traces. Output is independent of thread count.
pub fn simulate_sensors_with_stats(gt: &GroundTruth, spec: &WorldSpec) -> (TraceSet, SensorStats) {
    let grid = ApGrid::new(gt, spec.visibility_radius_m);
    let per_user: Vec<UserEmission> = (0..gt.users.len())
        .into_par_iter()
        .map(|u| simulate_user(gt, spec, &grid, u))
        .collect();
    let mut stats = SensorStats::default();
    let mut fixes = Vec::new();
    let mut scans = Vec::new();
    for e in per_user {
        stats.fixes += e.stats.fixes;
        stats.scans += e.stats.scans;
        stats.nonempty_scans += e.stats.nonempty_scans;
        stats.sightings += e.stats.sightings;
        fixes.extend(e.fixes);
        scans.extend(e.scans);
    }
    (TraceSet::new(fixes, scans), stats)
}

pub fn simulate_sensors(gt: &GroundTruth, spec: &WorldSpec) -> TraceSet {
    simulate_sensors_with_stats(gt, spec).0
}

/// Share of scans hearing at least one AP.
pub fn nonempty_fraction(traces: &TraceSet) -> Option<f64> {
    let n = traces.scans().len();
    (n > 0).then(|| traces.scans().iter().filter(|s| !s.is_empty()).count() as f64 / n as f64)
}

/// Squared Pearson correlation of `(x, y)` pairs.
pub fn r_squared(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy * sxy / (sxx * syy))
}

/// r² of per-scan AP count against population density at the scanning
/// user's true position.
pub fn density_r2(gt: &GroundTruth, traces: &TraceSet) -> Option<f64> {
    let index = gt.user_index();
    let pairs: Vec<(f64, f64)> = traces
        .users()
        .par_iter()
        .flat_map_iter(|user| {
            let u = index[user];
            let mut cur = TrajectoryCursor::new(&gt.users[u].trajectory);
            traces
                .scans_for(user)
                .iter()
                .map(|s| {
                    let (x, y) = cur.position_at(s.ts.0, &gt.bus_lines, gt.epoch_ms());
                    (gt.density.weight_at(x, y), s.sightings().len() as f64)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    r_squared(&pairs)
}

/// Largest true distance between a scanning user and an AP they reported.
pub fn max_sighting_distance(gt: &GroundTruth, traces: &TraceSet) -> f64 {
    let index = gt.user_index();
    let mobile: HashMap<BssidId, usize> = gt.mobile_aps.iter().enumerate().map(|(i, a)| (a.bssid, i)).collect();
    let fixed: HashMap<BssidId, (f64, f64)> = gt.static_aps.iter().map(|a| (a.bssid, (a.x, a.y))).collect();
    traces
        .scans()
        .par_iter()
        .map(|s| {
            let p = gt.user_xy(index[&s.user], s.ts.0);
            s.sightings()
                .iter()
                .map(|a| {
                    let q = match fixed.get(&a.bssid) {
                        Some(&q) => q,
                        None => gt.mobile_xy(&gt.mobile_aps[mobile[&a.bssid]], s.ts.0),
                    };
                    (q.0 - p.0).hypot(q.1 - p.1)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}
