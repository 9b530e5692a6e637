//! Access-point classification and position estimation.
//!
//! Every BSSID's paired observations are clustered with DBSCAN. A single
//! dominant cluster makes the AP static (located at the cluster's geometric
//! median); several clusters that never overlap in time make it a relocated
//! static AP; anything else is treated as mobile and never used as a beacon.

mod csv_io;
mod dbscan;
mod median;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::EARTH_RADIUS_M;
use crate::pairing::PairedObservation;
use crate::trace_model::{BssidId, GeoPoint, Timestamp, UserId, WifiScan};

pub use crate::geo::haversine_m;
pub use csv_io::{read_apdb_csv, write_apdb_csv};
pub use dbscan::{dbscan, dbscan_points, Clustering};
pub use median::{geometric_median, weiszfeld};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatorConfig {
    pub eps_m: f64,
    pub min_sightings: usize,
    pub min_cluster_pts: usize,
    pub clustered_fraction_min: f64,
    pub earth_radius_m: f64,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        LocatorConfig {
            eps_m: 100.0,
            min_sightings: 5,
            min_cluster_pts: 5,
            clustered_fraction_min: 0.95,
            earth_radius_m: EARTH_RADIUS_M,
        }
    }
}

impl LocatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_m.is_finite() && self.eps_m > 0.0) {
            return Err(Error::invalid("eps_m", "must be positive"));
        }
        if !(self.clustered_fraction_min > 0.0 && self.clustered_fraction_min <= 1.0) {
            return Err(Error::invalid("clustered_fraction_min", "must lie in (0, 1]"));
        }
        if self.min_cluster_pts == 0 {
            return Err(Error::invalid("min_cluster_pts", "must be at least 1"));
        }
        if !(self.earth_radius_m.is_finite() && self.earth_radius_m > 0.0) {
            return Err(Error::invalid("earth_radius_m", "must be positive"));
        }
        Ok(())
    }
}

/// Closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeInterval {
    start: Timestamp,
    end: Timestamp,
}

impl TimeInterval {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if start > end {
            return Err(Error::invalid("interval", format!("start {start} after end {end}")));
        }
        Ok(TimeInterval { start, end })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts <= self.end
    }

    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub pos: GeoPoint,
    pub interval: TimeInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApClass {
    Static { pos: GeoPoint, n: usize },
    /// Segments sorted by start time, pairwise disjoint.
    Relocated { segments: Vec<Segment> },
    Mobile,
    Insufficient,
}

impl ApClass {
    pub fn name(&self) -> &'static str {
        match self {
            ApClass::Static { .. } => "static",
            ApClass::Relocated { .. } => "relocated",
            ApClass::Mobile => "mobile",
            ApClass::Insufficient => "insufficient",
        }
    }

    pub fn is_located(&self) -> bool {
        matches!(self, ApClass::Static { .. } | ApClass::Relocated { .. })
    }

    /// Where the AP was at `ts`, if known.
    pub fn position_at(&self, ts: Timestamp) -> Option<GeoPoint> {
        match self {
            ApClass::Static { pos, .. } => Some(*pos),
            ApClass::Relocated { segments } => segments
                .iter()
                .find(|s| s.interval.contains(ts))
                .map(|s| s.pos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApRecord {
    pub bssid: BssidId,
    pub class: ApClass,
    pub n_sightings: usize,
    /// Users whose observations fed this record. Not persisted in `apdb.csv`,
    /// so records loaded from disk carry an empty set.
    pub contributors: BTreeSet<UserId>,
}

fn fraction_reached(part: usize, whole: usize, fraction: f64) -> bool {
    part as f64 >= fraction * whole as f64 - 1e-9
}

fn classify_refs(bssid: BssidId, obs: &[&PairedObservation], cfg: &LocatorConfig) -> ApRecord {
    let contributors: BTreeSet<UserId> = obs.iter().map(|o| o.user.clone()).collect();
    let n = obs.len();
    let record = |class| ApRecord {
        bssid,
        class,
        n_sightings: n,
        contributors: contributors.clone(),
    };
    if n < cfg.min_sightings {
        return record(ApClass::Insufficient);
    }

    // clustering is order-dependent at borders; fix the order first
    let mut sorted: Vec<&PairedObservation> = obs.to_vec();
    sorted.sort_by(|a, b| {
        a.ts.cmp(&b.ts)
            .then_with(|| a.pos.total_cmp(&b.pos))
            .then_with(|| a.user.cmp(&b.user))
    });
    let points: Vec<GeoPoint> = sorted.iter().map(|o| o.pos).collect();
    let clustering = dbscan_points(&points, cfg.eps_m, cfg.min_cluster_pts, cfg.earth_radius_m);

    if clustering.clusters.is_empty()
        || !fraction_reached(clustering.clustered_count(), n, cfg.clustered_fraction_min)
    {
        return record(ApClass::Mobile);
    }

    let member_points = |members: &[usize]| -> Vec<GeoPoint> { members.iter().map(|&i| points[i]).collect() };

    if clustering.clusters.len() == 1 {
        let pos = geometric_median(&member_points(&clustering.clusters[0]), cfg.earth_radius_m);
        return record(ApClass::Static { pos, n });
    }

    let mut segments: Vec<Segment> = clustering
        .clusters
        .iter()
        .map(|members| {
            // members are ascending indices into time-sorted observations
            let start = sorted[members[0]].ts;
            let end = sorted[*members.last().unwrap()].ts;
            Segment {
                pos: geometric_median(&member_points(members), cfg.earth_radius_m),
                interval: TimeInterval { start, end },
            }
        })
        .collect();
    segments.sort_by_key(|s| (s.interval.start, s.interval.end));
    let disjoint = segments
        .windows(2)
        .all(|w| w[0].interval.end < w[1].interval.start);
    if disjoint {
        record(ApClass::Relocated { segments })
    } else {
        record(ApClass::Mobile)
    }
}

/// Classifies one access point from all of its paired observations.
pub fn classify_ap(bssid: BssidId, obs: &[PairedObservation], cfg: &LocatorConfig) -> ApRecord {
    let refs: Vec<&PairedObservation> = obs.iter().collect();
    classify_refs(bssid, &refs, cfg)
}

/// Something that can say where an access point was at a given time.
pub trait ApLookup: Sync {
    fn position_at(&self, bssid: &BssidId, ts: Timestamp) -> Option<GeoPoint>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub total: usize,
    pub static_: usize,
    pub relocated: usize,
    pub mobile: usize,
    pub insufficient: usize,
}

impl Census {
    pub fn located(&self) -> usize {
        self.static_ + self.relocated
    }
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} unique routers: located {} ({} static, {} relocated), mobile {}, insufficient data {}",
            self.total,
            self.located(),
            self.static_,
            self.relocated,
            self.mobile,
            self.insufficient
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApDatabase {
    records: BTreeMap<BssidId, ApRecord>,
    pub built_from: String,
}

impl ApDatabase {
    pub fn from_records(records: impl IntoIterator<Item = ApRecord>, built_from: impl Into<String>) -> Self {
        ApDatabase {
            records: records.into_iter().map(|r| (r.bssid, r)).collect(),
            built_from: built_from.into(),
        }
    }

    pub fn get(&self, bssid: &BssidId) -> Option<&ApRecord> {
        self.records.get(bssid)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ApRecord> {
        self.records.values()
    }

    pub fn census(&self) -> Census {
        let mut c = Census {
            total: self.records.len(),
            ..Census::default()
        };
        for r in self.records.values() {
            match r.class {
                ApClass::Static { .. } => c.static_ += 1,
                ApClass::Relocated { .. } => c.relocated += 1,
                ApClass::Mobile => c.mobile += 1,
                ApClass::Insufficient => c.insufficient += 1,
            }
        }
        c
    }

    /// Copy keeping only the listed BSSIDs.
    pub fn restricted_to(&self, keep: &BTreeSet<BssidId>, built_from: impl Into<String>) -> ApDatabase {
        ApDatabase {
            records: self
                .records
                .iter()
                .filter(|(b, _)| keep.contains(b))
                .map(|(b, r)| (*b, r.clone()))
                .collect(),
            built_from: built_from.into(),
        }
    }
}

impl ApLookup for ApDatabase {
    fn position_at(&self, bssid: &BssidId, ts: Timestamp) -> Option<GeoPoint> {
        self.records.get(bssid)?.class.position_at(ts)
    }
}

/// Groups observations by BSSID and classifies each group.
pub fn build_database(obs: &[PairedObservation], cfg: &LocatorConfig, built_from: impl Into<String>) -> ApDatabase {
    let mut groups: BTreeMap<BssidId, Vec<&PairedObservation>> = BTreeMap::new();
    for o in obs {
        groups.entry(o.bssid).or_default().push(o);
    }
    let groups: Vec<(BssidId, Vec<&PairedObservation>)> = groups.into_iter().collect();
    let records: Vec<ApRecord> = groups
        .par_iter()
        .map(|(b, g)| classify_refs(*b, g, cfg))
        .collect();
    ApDatabase::from_records(records, built_from)
}

/// Read-only union of several databases: an AP is known if any member
/// locates it, and the first member (in the given order) that does supplies
/// the position.
pub struct DatabaseUnion<'a> {
    located: HashMap<BssidId, Vec<&'a ApClass>>,
}

impl<'a> DatabaseUnion<'a> {
    pub fn new<I: IntoIterator<Item = &'a ApDatabase>>(members: I) -> Self {
        let mut located: HashMap<BssidId, Vec<&'a ApClass>> = HashMap::new();
        for db in members {
            for r in db.records.values().filter(|r| r.class.is_located()) {
                located.entry(r.bssid).or_default().push(&r.class);
            }
        }
        DatabaseUnion { located }
    }

    pub fn located_count(&self) -> usize {
        self.located.len()
    }
}

impl ApLookup for DatabaseUnion<'_> {
    fn position_at(&self, bssid: &BssidId, ts: Timestamp) -> Option<GeoPoint> {
        self.located
            .get(bssid)?
            .iter()
            .find_map(|c| c.position_at(ts))
    }
}

/// Classification outcome for access points broadcasting a known
/// mobile-hotspot network name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NamedSsidCounts {
    pub mobile: usize,
    pub located: usize,
    pub insufficient: usize,
    /// Named APs with no record in the database.
    pub absent: usize,
}

impl NamedSsidCounts {
    /// Share of investigated named APs classified mobile.
    pub fn recall(&self) -> Option<f64> {
        let investigated = self.mobile + self.located;
        (investigated > 0).then(|| self.mobile as f64 / investigated as f64)
    }
}

/// Cross-checks the mobile classification against network names that almost
/// always belong to hotspots or vehicles.
pub fn validate_against_named_ssids(
    db: &ApDatabase,
    scans: &[WifiScan],
    mobile_ssids: &BTreeSet<String>,
) -> Result<NamedSsidCounts> {
    if mobile_ssids.is_empty() {
        return Err(Error::Contract("mobile SSID list is empty".into()));
    }
    let named: BTreeSet<BssidId> = scans
        .iter()
        .flat_map(|s| s.sightings())
        .filter(|a| a.ssid.as_deref().is_some_and(|n| mobile_ssids.contains(n)))
        .map(|a| a.bssid)
        .collect();
    let mut counts = NamedSsidCounts::default();
    for b in named {
        match db.get(&b).map(|r| &r.class) {
            Some(ApClass::Mobile) => counts.mobile += 1,
            Some(ApClass::Insufficient) => counts.insufficient += 1,
            Some(_) => counts.located += 1,
            None => counts.absent += 1,
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::LocalFrame;
    use crate::trace_model::ApSighting;

    const DAY: u64 = 86_400_000;

    fn frame() -> LocalFrame {
        LocalFrame::new(GeoPoint::new(55.68, 12.57).unwrap(), EARTH_RADIUS_M)
    }

    fn bssid() -> BssidId {
        "02:00:00:00:00:01".parse().unwrap()
    }

    fn ob(x: f64, y: f64, ts: u64, user: &str) -> PairedObservation {
        PairedObservation {
            bssid: bssid(),
            pos: frame().to_geo(x, y),
            ts: Timestamp(ts),
            user: UserId::new(user).unwrap(),
        }
    }

    #[test]
    fn too_few_sightings() {
        let obs: Vec<_> = (0..4).map(|i| ob(i as f64, 0.0, i, "a")).collect();
        let r = classify_ap(bssid(), &obs, &LocatorConfig::default());
        assert_eq!(r.class, ApClass::Insufficient);
        assert_eq!(r.n_sightings, 4);
    }

    #[test]
    fn tight_group_is_static_at_median() {
        let obs: Vec<_> = (0..10)
            .map(|i| ob((i % 4) as f64 * 5.0, (i / 4) as f64 * 5.0, i * 1000, if i % 2 == 0 { "a" } else { "b" }))
            .collect();
        let r = classify_ap(bssid(), &obs, &LocatorConfig::default());
        let pts: Vec<GeoPoint> = obs.iter().map(|o| o.pos).collect();
        let expected = geometric_median(&pts, EARTH_RADIUS_M);
        match r.class {
            ApClass::Static { pos, n } => {
                assert_eq!(n, 10);
                assert!(haversine_m(pos, expected, EARTH_RADIUS_M) < 1e-6);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(r.contributors.len(), 2);
    }

    #[test]
    fn moved_router_is_relocated() {
        let mut obs: Vec<_> = (0..10).map(|i| ob(i as f64, 0.0, i * DAY, "a")).collect();
        obs.extend((0..10).map(|i| ob(2000.0 + i as f64, 0.0, (20 + i) * DAY, "a")));
        let r = classify_ap(bssid(), &obs, &LocatorConfig::default());
        match r.class {
            ApClass::Relocated { segments } => {
                assert_eq!(segments.len(), 2);
                assert_eq!(segments[0].interval.start(), Timestamp(0));
                assert_eq!(segments[0].interval.end(), Timestamp(9 * DAY));
                assert_eq!(segments[1].interval.start(), Timestamp(20 * DAY));
                let (x, _) = frame().to_xy(segments[1].pos);
                assert!((x - 2004.5).abs() < 1.0, "{x}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interleaved_sites_are_mobile() {
        let obs: Vec<_> = (0..20)
            .map(|i| ob(if i % 2 == 0 { 0.0 } else { 2000.0 } + (i / 2) as f64, 0.0, i * DAY, "a"))
            .collect();
        assert_eq!(classify_ap(bssid(), &obs, &LocatorConfig::default()).class, ApClass::Mobile);
    }

    #[test]
    fn bus_route_is_mobile() {
        // 20 sightings evenly along 5 km: 263 m apart, each point is its own island
        let obs: Vec<_> = (0..20)
            .map(|i| ob(i as f64 * 5000.0 / 19.0, 0.0, i * 60_000, "a"))
            .collect();
        let pts: Vec<GeoPoint> = obs.iter().map(|o| o.pos).collect();
        let c = dbscan_points(&pts, 100.0, 5, EARTH_RADIUS_M);
        assert!(c.clustered_count() * 100 < 95 * 20);
        assert_eq!(classify_ap(bssid(), &obs, &LocatorConfig::default()).class, ApClass::Mobile);
    }

    #[test]
    fn too_much_noise_is_mobile() {
        let mut obs: Vec<_> = (0..18).map(|i| ob(i as f64, 0.0, i, "a")).collect();
        obs.push(ob(5000.0, 0.0, 100, "a"));
        obs.push(ob(-5000.0, 0.0, 101, "a"));
        // 18 of 20 clustered is 90%
        assert_eq!(classify_ap(bssid(), &obs, &LocatorConfig::default()).class, ApClass::Mobile);
        obs.truncate(19);
        // 18 of 19 is 94.7%, still short
        assert_eq!(classify_ap(bssid(), &obs, &LocatorConfig::default()).class, ApClass::Mobile);
        let mut obs: Vec<_> = (0..19).map(|i| ob(i as f64, 0.0, i, "a")).collect();
        obs.push(ob(5000.0, 0.0, 100, "a"));
        // exactly 95%
        assert!(matches!(
            classify_ap(bssid(), &obs, &LocatorConfig::default()).class,
            ApClass::Static { .. }
        ));
    }

    #[test]
    fn touching_intervals_overlap() {
        let mut obs: Vec<_> = (0..5).map(|i| ob(i as f64, 0.0, i * 10, "a")).collect();
        obs.extend((0..5).map(|i| ob(3000.0 + i as f64, 0.0, 40 + i * 10, "a")));
        assert_eq!(classify_ap(bssid(), &obs, &LocatorConfig::default()).class, ApClass::Mobile);
    }

    #[test]
    fn database_groups_by_bssid() {
        assert!(build_database(&[], &LocatorConfig::default(), "empty").is_empty());
        let other: BssidId = "02:00:00:00:00:02".parse().unwrap();
        let mut obs: Vec<_> = (0..6).map(|i| ob(i as f64, 0.0, i, "a")).collect();
        obs.extend((0..2).map(|i| PairedObservation {
            bssid: other,
            ..ob(0.0, 0.0, i, "b")
        }));
        let db = build_database(&obs, &LocatorConfig::default(), "test");
        assert_eq!(db.len(), 2);
        let c = db.census();
        assert_eq!((c.static_, c.insufficient, c.located()), (1, 1, 1));
        assert!(db.position_at(&bssid(), Timestamp(0)).is_some());
        assert!(db.position_at(&other, Timestamp(0)).is_none());
        assert!(db.get(&"02:00:00:00:00:03".parse().unwrap()).is_none());
    }

    #[test]
    fn union_prefers_first_locating_member() {
        let a = ApDatabase::from_records(
            [ApRecord {
                bssid: bssid(),
                class: ApClass::Mobile,
                n_sightings: 9,
                contributors: BTreeSet::new(),
            }],
            "a",
        );
        let p = GeoPoint::new(1.0, 1.0).unwrap();
        let b = ApDatabase::from_records(
            [ApRecord {
                bssid: bssid(),
                class: ApClass::Static { pos: p, n: 5 },
                n_sightings: 5,
                contributors: BTreeSet::new(),
            }],
            "b",
        );
        let u = DatabaseUnion::new([&a, &b]);
        assert_eq!(u.position_at(&bssid(), Timestamp(3)), Some(p));
        assert_eq!(u.located_count(), 1);
        assert_eq!(DatabaseUnion::new([&a]).position_at(&bssid(), Timestamp(3)), None);
    }

    #[test]
    fn named_ssid_validation() {
        let db = ApDatabase::from_records(
            [ApRecord {
                bssid: bssid(),
                class: ApClass::Mobile,
                n_sightings: 9,
                contributors: BTreeSet::new(),
            }],
            "t",
        );
        let scan = WifiScan::new(
            UserId::new("a").unwrap(),
            Timestamp(0),
            vec![
                ApSighting::new(bssid(), Some("AndroidAP".into()), None).unwrap(),
                ApSighting::new("02:00:00:00:00:09".parse().unwrap(), Some("iPhone".into()), None).unwrap(),
            ],
        );
        let names: BTreeSet<String> = ["AndroidAP", "iPhone"].iter().map(|s| s.to_string()).collect();
        let c = validate_against_named_ssids(&db, &[scan.clone()], &names).unwrap();
        assert_eq!(c, NamedSsidCounts { mobile: 1, located: 0, insufficient: 0, absent: 1 });
        assert_eq!(c.recall(), Some(1.0));

        let none: BTreeSet<String> = ["Commutenet".to_string()].into();
        let c = validate_against_named_ssids(&db, &[scan.clone()], &none).unwrap();
        assert_eq!(c, NamedSsidCounts::default());
        assert!(validate_against_named_ssids(&db, &[scan], &BTreeSet::new()).is_err());
    }
}
