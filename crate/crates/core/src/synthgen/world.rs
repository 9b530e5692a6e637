//! Synthetic city: density field, places, access points, bus loops, users.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use rayon::prelude::*;

use super::mobility::{simulate_routine, Routine, Trajectory, TrajectoryCursor, DAY_MS};
use crate::error::{Error, Result};
use crate::geo::{LocalFrame, EARTH_RADIUS_M};
use crate::trace_model::{BssidId, GeoPoint, UserId};

/// SSIDs that give a mobile access point away.
pub const MOBILE_SSIDS: [&str; 4] = ["AndroidAP", "iPhone", "Bedrebustur", "Commutenet"];

/// 2012-10-01T00:00:00Z
pub const DEFAULT_START_MS: u64 = 1_349_049_600_000;

const PARK_RADIUS_M: f64 = 150.0;
const HOTSPOT_SLOT_MS: u64 = 3_600_000;
const HOTSPOT_ON_SHARE: f64 = 0.25;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) const WORLD_STREAM: u64 = 0;
pub(crate) const ROUTINE_STREAM: u64 = 1_000;
pub(crate) const SENSOR_STREAM: u64 = 1_000_000;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    pub n_users: usize,
    pub n_days: usize,
    pub city_width_km: f64,
    pub city_height_km: f64,
    pub density_cell_m: f64,
    /// Row-major cell weights, row 0 in the south. Generated when `None`.
    pub density: Option<Vec<Vec<f64>>>,
    /// Lognormal sigma of the generated density field.
    pub density_noise_sigma: f64,
    /// Lognormal sigma of per-cell AP density around population density.
    pub ap_noise_sigma: f64,
    pub background_aps_per_km2: f64,
    pub place_aps_mean: f64,
    /// Share of leisure places without any AP (parks, sports grounds).
    pub outdoor_place_fraction: f64,
    pub visibility_radius_m: f64,
    pub wifi_scan_period_s: f64,
    pub gps_period_s: f64,
    pub gps_noise_m: f64,
    /// Mobile APs as a fraction of static ones.
    pub mobile_ap_fraction: f64,
    pub routine_change_day: Option<usize>,
    pub colocated_fraction: f64,
    pub bus_rider_fraction: f64,
    pub start_ms: u64,
    pub origin_lat: f64,
    pub origin_lon: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 1,
            n_users: 30,
            n_days: 30,
            city_width_km: 8.0,
            city_height_km: 8.0,
            density_cell_m: 1_000.0,
            density: None,
            density_noise_sigma: 0.5,
            ap_noise_sigma: 0.35,
            background_aps_per_km2: 25.0,
            place_aps_mean: 5.0,
            outdoor_place_fraction: 0.4,
            visibility_radius_m: 100.0,
            wifi_scan_period_s: 16.0,
            gps_period_s: 600.0,
            gps_noise_m: 10.0,
            mobile_ap_fraction: 0.015,
            routine_change_day: None,
            colocated_fraction: 0.6,
            bus_rider_fraction: 0.3,
            start_ms: DEFAULT_START_MS,
            origin_lat: 55.6761,
            origin_lon: 12.5683,
        }
    }
}

fn check(ok: bool, field: &'static str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(field, reason.to_string()))
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        check(self.n_users > 0, "n_users", "must be positive")?;
        check(self.n_days > 0, "n_days", "must be positive")?;
        check(pos(self.city_width_km), "city_width_km", "must be positive")?;
        check(pos(self.city_height_km), "city_height_km", "must be positive")?;
        check(pos(self.density_cell_m), "density_cell_m", "must be positive")?;
        check(nonneg(self.density_noise_sigma), "density_noise_sigma", "must be >= 0")?;
        check(nonneg(self.ap_noise_sigma), "ap_noise_sigma", "must be >= 0")?;
        check(nonneg(self.background_aps_per_km2), "background_aps_per_km2", "must be >= 0")?;
        check(nonneg(self.place_aps_mean), "place_aps_mean", "must be >= 0")?;
        check(frac(self.outdoor_place_fraction), "outdoor_place_fraction", "must be in [0, 1]")?;
        check(pos(self.visibility_radius_m), "visibility_radius_m", "must be positive")?;
        check(pos(self.wifi_scan_period_s), "wifi_scan_period_s", "must be positive")?;
        check(pos(self.gps_period_s), "gps_period_s", "must be positive")?;
        check(nonneg(self.gps_noise_m), "gps_noise_m", "must be >= 0")?;
        check(frac(self.mobile_ap_fraction), "mobile_ap_fraction", "must be in [0, 1]")?;
        check(frac(self.colocated_fraction), "colocated_fraction", "must be in [0, 1]")?;
        check(frac(self.bus_rider_fraction), "bus_rider_fraction", "must be in [0, 1]")?;
        GeoPoint::new(self.origin_lat, self.origin_lon)?;
        if let Some(rows) = &self.density {
            check(!rows.is_empty(), "density", "needs at least one row")?;
            let cols = rows[0].len();
            check(cols > 0, "density", "needs at least one column")?;
            check(rows.iter().all(|r| r.len() == cols), "density", "rows differ in length")?;
            check(rows.iter().flatten().all(|&w| nonneg(w)), "density", "weights must be finite and >= 0")?;
        }
        Ok(())
    }

    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.n_days as u64 * DAY_MS
    }
}

/// Cell weights over the city rectangle, normalized to mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub cell_m: f64,
    pub cols: usize,
    pub rows: usize,
    /// South-west corner in the local frame.
    pub x0: f64,
    pub y0: f64,
    pub weights: Vec<f64>,
}

impl DensityGrid {
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let c = ((x - self.x0) / self.cell_m).floor();
        let r = ((y - self.y0) / self.cell_m).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(r as usize * self.cols + c as usize)
    }

    pub fn weight_at(&self, x: f64, y: f64) -> f64 {
        self.cell_of(x, y).map_or(0.0, |i| self.weights[i])
    }

    fn cell_origin(&self, i: usize) -> (f64, f64) {
        let (r, c) = (i / self.cols, i % self.cols);
        (self.x0 + c as f64 * self.cell_m, self.y0 + r as f64 * self.cell_m)
    }

    fn sample_point(&self, idx: &WeightedIndex<f64>, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let (x, y) = self.cell_origin(idx.sample(rng));
        (x + rng.random_range(0.0..self.cell_m), y + rng.random_range(0.0..self.cell_m))
    }
}

fn mean_one_lognormal(sigma: f64) -> LogNormal<f64> {
    LogNormal::new(-sigma * sigma / 2.0, sigma).expect("finite sigma")
}

fn density_grid(spec: &WorldSpec, rng: &mut ChaCha8Rng) -> Result<DensityGrid> {
    let w = spec.city_width_km * 1000.0;
    let h = spec.city_height_km * 1000.0;
    let (rows, cols, mut weights) = match &spec.density {
        Some(g) => (g.len(), g[0].len(), g.iter().flatten().copied().collect::<Vec<_>>()),
        None => {
            let cols = (w / spec.density_cell_m).ceil() as usize;
            let rows = (h / spec.density_cell_m).ceil() as usize;
            let noise = mean_one_lognormal(spec.density_noise_sigma);
            let mut v = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let cx = -w / 2.0 + (c as f64 + 0.5) * spec.density_cell_m;
                    let cy = -h / 2.0 + (r as f64 + 0.5) * spec.density_cell_m;
                    let d_km = cx.hypot(cy) / 1000.0;
                    v.push((-d_km / 2.0).exp() * noise.sample(rng));
                }
            }
            (rows, cols, v)
        }
    };
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("density", "zero density everywhere".to_string()));
    }
    let mean = total / weights.len() as f64;
    weights.iter_mut().for_each(|x| *x /= mean);
    Ok(DensityGrid {
        cell_m: spec.density_cell_m,
        cols,
        rows,
        x0: -(cols as f64) * spec.density_cell_m / 2.0,
        y0: -(rows as f64) * spec.density_cell_m / 2.0,
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceKind {
    Home,
    Dorm,
    Campus,
    Work,
    Leisure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub x: f64,
    pub y: f64,
    pub kind: PlaceKind,
    pub outdoor: bool,
    /// Spread of where visitors stand.
    pub spot_sigma_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticAp {
    pub bssid: BssidId,
    pub ssid: Arc<str>,
    pub x: f64,
    pub y: f64,
    pub place: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Carrier {
    Bus { line: usize, vehicle: usize },
    User(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobileAp {
    pub bssid: BssidId,
    pub ssid: Arc<str>,
    pub carrier: Carrier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    /// +1 counter-clockwise, -1 clockwise.
    pub dir: f64,
    pub phase_rad: f64,
}

/// Circular loop around the city center.
#[derive(Debug, Clone, PartialEq)]
pub struct BusLine {
    pub radius_m: f64,
    pub speed_mps: f64,
    pub vehicles: Vec<Vehicle>,
}

impl BusLine {
    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        (p.0.hypot(p.1) - self.radius_m).abs()
    }

    pub fn point_at(&self, theta: f64) -> (f64, f64) {
        (self.radius_m * theta.cos(), self.radius_m * theta.sin())
    }

    /// Radians per second.
    pub fn angular_speed(&self) -> f64 {
        self.speed_mps / self.radius_m
    }

    fn vehicle_angle(&self, v: usize, t: u64, epoch_ms: u64) -> f64 {
        let veh = &self.vehicles[v];
        let secs = (t as f64 - epoch_ms as f64) / 1000.0;
        veh.phase_rad + veh.dir * self.angular_speed() * secs
    }

    pub fn vehicle_position(&self, v: usize, t: u64, epoch_ms: u64) -> (f64, f64) {
        self.point_at(self.vehicle_angle(v, t, epoch_ms))
    }

    /// First vehicle running in `dir` to reach angle `theta` after `t`.
    pub fn next_departure(&self, theta: f64, dir: f64, t: u64, epoch_ms: u64) -> (usize, u64) {
        let w = self.angular_speed();
        self.vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.dir == dir)
            .map(|(i, _)| {
                let gap = (dir * (theta - self.vehicle_angle(i, t, epoch_ms))).rem_euclid(TAU);
                (i, (gap / w * 1000.0).round() as u64)
            })
            .min_by_key(|&(i, wait)| (wait, i))
            .expect("caller checked a vehicle runs in this direction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTruth {
    pub id: UserId,
    pub colocated: bool,
    pub routine: Routine,
    /// Routine adopted from the change day on.
    pub routine_after: Option<Routine>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub spec: WorldSpec,
    pub frame: LocalFrame,
    pub density: DensityGrid,
    /// Per-cell AP density: population weight times lognormal noise.
    pub ap_density: Vec<f64>,
    pub places: Vec<Place>,
    pub static_aps: Vec<StaticAp>,
    pub mobile_aps: Vec<MobileAp>,
    pub bus_lines: Vec<BusLine>,
    pub users: Vec<UserTruth>,
}

impl GroundTruth {
    pub fn epoch_ms(&self) -> u64 {
        self.spec.start_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.spec.end_ms()
    }

    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        self.frame.to_geo(x, y)
    }

    pub fn user_index(&self) -> BTreeMap<UserId, usize> {
        self.users.iter().enumerate().map(|(i, u)| (u.id.clone(), i)).collect()
    }

    pub fn user_xy(&self, user: usize, t: u64) -> (f64, f64) {
        self.users[user]
            .trajectory
            .position_at(t, &self.bus_lines, self.epoch_ms())
    }

    pub fn mobile_xy(&self, ap: &MobileAp, t: u64) -> (f64, f64) {
        match ap.carrier {
            Carrier::Bus { line, vehicle } => self.bus_lines[line].vehicle_position(vehicle, t, self.epoch_ms()),
            Carrier::User(u) => self.user_xy(u, t),
        }
    }

    /// Carried hotspots are switched on for whole hours at a time; vehicle
    /// APs are always on.
    pub fn mobile_active(&self, ap: &MobileAp, t: u64) -> bool {
        match ap.carrier {
            Carrier::Bus { .. } => true,
            Carrier::User(_) => {
                let o = ap.bssid.octets();
                let id = u64::from_be_bytes([0, 0, o[0], o[1], o[2], o[3], o[4], o[5]]);
                let h = splitmix64(self.spec.seed ^ splitmix64(id ^ splitmix64(t / HOTSPOT_SLOT_MS)));
                ((h >> 11) as f64 / (1u64 << 53) as f64) < HOTSPOT_ON_SHARE
            }
        }
    }

    pub(crate) fn mobile_cursor_xy(&self, ap: &MobileAp, cursor: Option<&mut TrajectoryCursor<'_>>, t: u64) -> (f64, f64) {
        match (ap.carrier, cursor) {
            (Carrier::User(_), Some(c)) => c.position_at(t, &self.bus_lines, self.epoch_ms()),
            _ => self.mobile_xy(ap, t),
        }
    }

    /// True position of any AP at `t`, in local meters.
    pub fn ap_xy(&self, bssid: &BssidId, t: u64) -> Option<(f64, f64)> {
        if let Some(a) = self.static_aps.iter().find(|a| a.bssid == *bssid) {
            return Some((a.x, a.y));
        }
        self.mobile_aps
            .iter()
            .find(|a| a.bssid == *bssid)
            .map(|a| self.mobile_xy(a, t))
    }

    pub fn static_positions(&self) -> BTreeMap<BssidId, GeoPoint> {
        self.static_aps.iter().map(|a| (a.bssid, self.to_geo(a.x, a.y))).collect()
    }

    /// APs broadcasting a mobile-indicative SSID.
    pub fn mobile_labels(&self) -> BTreeSet<BssidId> {
        self.mobile_aps.iter().map(|a| a.bssid).collect()
    }

    pub fn mobile_ssids() -> BTreeSet<String> {
        MOBILE_SSIDS.iter().map(|s| s.to_string()).collect()
    }
}

fn static_bssid(i: usize) -> BssidId {
    let b = (i as u32).to_be_bytes();
    BssidId::from_octets([0x02, 0x00, b[0], b[1], b[2], b[3]])
}

fn mobile_bssid(i: usize) -> BssidId {
    let b = (i as u32).to_be_bytes();
    BssidId::from_octets([0x06, 0x00, b[0], b[1], b[2], b[3]])
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as usize
}

struct PlaceFactory<'a> {
    places: Vec<Place>,
    grid: &'a DensityGrid,
    idx: WeightedIndex<f64>,
}

impl PlaceFactory<'_> {
    fn add(&mut self, kind: PlaceKind, outdoor: bool, rng: &mut ChaCha8Rng) -> usize {
        let (x, y) = self.grid.sample_point(&self.idx, rng);
        let spot_sigma_m = match kind {
            PlaceKind::Home | PlaceKind::Dorm => 5.0,
            PlaceKind::Campus => 30.0,
            PlaceKind::Work => 8.0,
            PlaceKind::Leisure => 12.0,
        };
        self.places.push(Place {
            x,
            y,
            kind,
            outdoor,
            spot_sigma_m,
        });
        self.places.len() - 1
    }
}

fn user_label(i: usize, n: usize) -> UserId {
    let width = (n.saturating_sub(1)).to_string().len().max(2);
    UserId::new(format!("u{i:0width$}")).expect("non-empty")
}

pub fn generate_world(spec: &WorldSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, WORLD_STREAM);
    let frame = LocalFrame::new(GeoPoint::new(spec.origin_lat, spec.origin_lon)?, EARTH_RADIUS_M);
    let grid = density_grid(spec, &mut rng)?;
    let ap_noise = mean_one_lognormal(spec.ap_noise_sigma);
    let ap_density: Vec<f64> = grid
        .weights
        .iter()
        .map(|&w| if w > 0.0 { w * ap_noise.sample(&mut rng) } else { 0.0 })
        .collect();
    let idx = WeightedIndex::new(&grid.weights).map_err(|e| Error::invalid("density", e.to_string()))?;
    let mut pf = PlaceFactory {
        places: Vec::new(),
        grid: &grid,
        idx,
    };

    // people and their anchors
    let n = spec.n_users;
    let n_coloc = (spec.colocated_fraction * n as f64).round() as usize;
    let campus = (n_coloc > 0).then(|| pf.add(PlaceKind::Campus, false, &mut rng));
    let mut homes = vec![usize::MAX; n];
    let mut i = 0;
    while i < n_coloc {
        let left = n_coloc - i;
        if left >= 2 && rng.random_bool(0.5) {
            let size = rng.random_range(2..=4usize).min(left);
            let dorm = pf.add(PlaceKind::Dorm, false, &mut rng);
            homes[i..i + size].fill(dorm);
            i += size;
        } else {
            homes[i] = pf.add(PlaceKind::Home, false, &mut rng);
            i += 1;
        }
    }
    for h in homes.iter_mut().skip(n_coloc) {
        *h = pf.add(PlaceKind::Home, false, &mut rng);
    }
    let pool_size = (n_coloc / 2).max(3);
    let mut pool: Vec<Option<usize>> = vec![None; if n_coloc > 0 { pool_size } else { 0 }];
    let outdoor_frac = spec.outdoor_place_fraction;
    let mut routines = Vec::with_capacity(n);
    for (u, &home) in homes.iter().enumerate() {
        let colocated = u < n_coloc;
        let day_place = match campus {
            Some(c) if colocated => c,
            _ => pf.add(PlaceKind::Work, false, &mut rng),
        };
        let k = rng.random_range(2..=6usize);
        let mut anchors: Vec<(usize, f64)> = Vec::with_capacity(k);
        while anchors.len() < k {
            let p = if colocated && rng.random_bool(0.5) {
                let slot = rng.random_range(0..pool.len());
                match pool[slot] {
                    Some(p) => p,
                    None => {
                        let outdoor = rng.random_bool(outdoor_frac);
                        let p = pf.add(PlaceKind::Leisure, outdoor, &mut rng);
                        pool[slot] = Some(p);
                        p
                    }
                }
            } else {
                let outdoor = rng.random_bool(outdoor_frac);
                pf.add(PlaceKind::Leisure, outdoor, &mut rng)
            };
            if anchors.iter().all(|a| a.0 != p) {
                let rank = anchors.len() as f64;
                anchors.push((p, 1.0 / (rank + 1.0)));
            }
        }
        let outdoor = Some(pf.add(PlaceKind::Leisure, true, &mut rng));
        routines.push(Routine {
            home,
            day_place,
            anchors,
            outdoor,
            bus_rider: rng.random_bool(spec.bus_rider_fraction),
            leave_home_h: (8.0 + 0.6 * Normal::<f64>::new(0.0, 1.0).expect("unit").sample(&mut rng)).clamp(6.0, 10.0),
            day_stay_h: (6.5 + Normal::<f64>::new(0.0, 1.0).expect("unit").sample(&mut rng)).clamp(4.0, 9.0),
        });
    }
    let places = pf.places;

    // access points
    let mut static_aps = Vec::new();
    for (pi, p) in places.iter().enumerate() {
        if p.outdoor {
            continue;
        }
        let cell_density = grid.cell_of(p.x, p.y).map_or(0.0, |c| ap_density[c]);
        let spread = match p.kind {
            PlaceKind::Campus => 25.0,
            PlaceKind::Dorm | PlaceKind::Work => 8.0,
            PlaceKind::Home | PlaceKind::Leisure => 6.0,
        };
        let count = ((spec.place_aps_mean * cell_density).round() as usize).max(1);
        let jitter = Normal::new(0.0, spread).expect("finite");
        for _ in 0..count {
            let id = static_aps.len();
            static_aps.push(StaticAp {
                bssid: static_bssid(id),
                ssid: Arc::from(format!("net-{id:05}")),
                x: p.x + jitter.sample(&mut rng),
                y: p.y + jitter.sample(&mut rng),
                place: Some(pi),
            });
        }
    }
    let cell_km2 = (grid.cell_m / 1000.0).powi(2);
    let parks: Vec<&Place> = places.iter().filter(|p| p.outdoor).collect();
    for (c, &d) in ap_density.iter().enumerate() {
        let count = poisson(spec.background_aps_per_km2 * cell_km2 * d, &mut rng);
        let (x0, y0) = grid.cell_origin(c);
        for _ in 0..count {
            let x = x0 + rng.random_range(0.0..grid.cell_m);
            let y = y0 + rng.random_range(0.0..grid.cell_m);
            // parks and sports grounds have no buildings
            if parks.iter().any(|p| (p.x - x).hypot(p.y - y) < PARK_RADIUS_M) {
                continue;
            }
            let id = static_aps.len();
            static_aps.push(StaticAp {
                bssid: static_bssid(id),
                ssid: Arc::from(format!("net-{id:05}")),
                x,
                y,
                place: None,
            });
        }
    }

    // mobile access points
    let n_mobile = (spec.mobile_ap_fraction * static_aps.len() as f64).round() as usize;
    let n_hotspots = (n_mobile as f64 * 0.4).round() as usize;
    let n_bus = n_mobile - n_hotspots;
    let half_span = (grid.cols as f64).min(grid.rows as f64) * grid.cell_m / 2.0;
    let mut bus_lines: Vec<BusLine> = [0.3, 0.55, 0.8]
        .iter()
        .map(|f| BusLine {
            radius_m: f * half_span,
            speed_mps: 7.0,
            vehicles: Vec::new(),
        })
        .collect();
    let mut mobile_aps = Vec::with_capacity(n_mobile);
    for j in 0..n_bus {
        let line = j % bus_lines.len();
        let l = &mut bus_lines[line];
        let dir = if l.vehicles.len() % 2 == 0 { 1.0 } else { -1.0 };
        l.vehicles.push(Vehicle {
            dir,
            phase_rad: rng.random_range(0.0..TAU),
        });
        mobile_aps.push(MobileAp {
            bssid: mobile_bssid(mobile_aps.len()),
            ssid: Arc::from(MOBILE_SSIDS[2 + j % 2]),
            carrier: Carrier::Bus {
                line,
                vehicle: l.vehicles.len() - 1,
            },
        });
    }
    for j in 0..n_hotspots {
        mobile_aps.push(MobileAp {
            bssid: mobile_bssid(mobile_aps.len()),
            ssid: Arc::from(MOBILE_SSIDS[j % 2]),
            carrier: Carrier::User(rng.random_range(0..n)),
        });
    }

    // routines become trajectories
    let change = spec.routine_change_day.filter(|&d| d < spec.n_days && n > 1);
    let users: Vec<UserTruth> = (0..n)
        .into_par_iter()
        .map(|u| {
            let after = change.map(|d| (routines[(u + n / 2) % n].clone(), d));
            let mut r = stream_rng(spec.seed, ROUTINE_STREAM + u as u64);
            let trajectory = simulate_routine(
                &routines[u],
                after.as_ref().map(|(a, d)| (a, *d)),
                spec.n_days,
                spec.start_ms,
                &places,
                &bus_lines,
                &mut r,
            );
            UserTruth {
                id: user_label(u, n),
                colocated: u < n_coloc,
                routine: routines[u].clone(),
                routine_after: after.map(|(a, _)| a),
                trajectory,
            }
        })
        .collect();

    Ok(GroundTruth {
        spec: spec.clone(),
        frame,
        density: grid,
        ap_density,
        places,
        static_aps,
        mobile_aps,
        bus_lines,
        users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorldSpec {
        WorldSpec {
            n_users: 6,
            n_days: 3,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        assert_eq!(generate_world(&small()).unwrap(), generate_world(&small()).unwrap());
        let other = WorldSpec { seed: 2, ..small() };
        assert_ne!(generate_world(&small()).unwrap().static_aps, generate_world(&other).unwrap().static_aps);
    }

    #[test]
    fn zero_density_is_infeasible() {
        let spec = WorldSpec {
            density: Some(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
            ..small()
        };
        assert!(generate_world(&spec).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(WorldSpec { n_users: 0, ..small() }.validate().is_err());
        assert!(WorldSpec { colocated_fraction: 1.5, ..small() }.validate().is_err());
        assert!(WorldSpec { gps_period_s: 0.0, ..small() }.validate().is_err());
        assert!(WorldSpec { density: Some(vec![vec![1.0], vec![]]), ..small() }.validate().is_err());
    }

    #[test]
    fn isolated_users_share_nothing() {
        let gt = generate_world(&WorldSpec {
            colocated_fraction: 0.0,
            n_users: 12,
            ..small()
        })
        .unwrap();
        let mut seen = BTreeSet::new();
        for u in &gt.users {
            for p in u.routine.places() {
                assert!(seen.insert(p), "place {p} shared");
            }
        }
    }

    #[test]
    fn trajectories_cover_horizon() {
        let gt = generate_world(&small()).unwrap();
        for u in &gt.users {
            let legs = &u.trajectory.legs;
            assert_eq!(legs[0].t0(), gt.epoch_ms());
            assert!(legs.last().unwrap().t1() >= gt.end_ms());
            for w in legs.windows(2) {
                assert_eq!(w[0].t1(), w[1].t0());
            }
        }
    }

    #[test]
    fn routine_change_moves_users() {
        let gt = generate_world(&WorldSpec {
            n_users: 8,
            n_days: 6,
            routine_change_day: Some(3),
            ..WorldSpec::default()
        })
        .unwrap();
        let change = gt.epoch_ms() + 3 * DAY_MS;
        for (u, ut) in gt.users.iter().enumerate() {
            let after = ut.routine_after.as_ref().unwrap();
            // the night before the change is spent at the old home
            assert_eq!(ut.trajectory.place_at(change - 1), Some(ut.routine.home));
            let share = crate::synthgen::new_place_time_share(&gt, u, change).unwrap();
            assert!(share >= 0.5, "user {u}: {share}");
            assert_ne!(after.home, ut.routine.home);
        }
    }

    #[test]
    fn bus_boards_at_stop() {
        let line = BusLine {
            radius_m: 1000.0,
            speed_mps: 10.0,
            vehicles: vec![Vehicle { dir: 1.0, phase_rad: 0.0 }, Vehicle { dir: -1.0, phase_rad: 1.0 }],
        };
        let (v, wait) = line.next_departure(0.5, 1.0, 0, 0);
        assert_eq!(v, 0);
        // 0.5 rad at 0.01 rad/s
        assert_eq!(wait, 50_000);
        let p = line.vehicle_position(0, wait, 0);
        let q = line.point_at(0.5);
        assert!((p.0 - q.0).abs() < 1e-6 && (p.1 - q.1).abs() < 1e-6);
    }
}
