//! Turns WiFi scans into position estimates using a located-AP lookup.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ap_locator::{geometric_median, ApLookup};
use crate::error::{Error, Result};
use crate::geo::EARTH_RADIUS_M;
use crate::trace_model::{BssidId, GeoPoint, Timestamp, UserId, WifiScan};

pub const DEFAULT_BIN_MS: u64 = 600_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub user: UserId,
    pub ts: Timestamp,
    pub pos: GeoPoint,
    /// APs whose positions produced the estimate, in scan order.
    pub support: Vec<BssidId>,
}

/// Locates a scan from the APs it heard. Several known APs are fused by
/// their geometric median.
pub fn resolve_scan<L: ApLookup + ?Sized>(scan: &WifiScan, db: &L) -> Option<PositionEstimate> {
    let mut support = Vec::new();
    let mut positions = Vec::new();
    for s in scan.sightings() {
        if let Some(p) = db.position_at(&s.bssid, scan.ts) {
            support.push(s.bssid);
            positions.push(p);
        }
    }
    if positions.is_empty() {
        return None;
    }
    Some(PositionEstimate {
        user: scan.user.clone(),
        ts: scan.ts,
        pos: geometric_median(&positions, EARTH_RADIUS_M),
        support,
    })
}

fn resolvable<L: ApLookup + ?Sized>(scan: &WifiScan, db: &L) -> bool {
    scan.sightings()
        .iter()
        .any(|s| db.position_at(&s.bssid, scan.ts).is_some())
}

/// Per-user fixed-width time bins. A bin is present iff the user scanned
/// in it; its estimate comes from the first resolvable scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedTimeline {
    pub user: UserId,
    pub bin_ms: u64,
    pub bins: BTreeMap<u64, Option<PositionEstimate>>,
}

impl BinnedTimeline {
    pub fn bins_with_data(&self) -> usize {
        self.bins.len()
    }

    pub fn estimated_bins(&self) -> usize {
        self.bins.values().filter(|b| b.is_some()).count()
    }
}

/// Builds one user's timeline. `scans` must all belong to `user` and be
/// sorted by timestamp.
pub fn build_user_timeline<L: ApLookup + ?Sized>(
    user: &UserId,
    scans: &[WifiScan],
    db: &L,
    bin_ms: u64,
) -> BinnedTimeline {
    assert!(bin_ms > 0, "bin width must be positive");
    let mut bins: BTreeMap<u64, Option<PositionEstimate>> = BTreeMap::new();
    let mut i = 0;
    while i < scans.len() {
        let bin = scans[i].ts.0 / bin_ms;
        let bin_end = (bin + 1).saturating_mul(bin_ms);
        let j = i + scans[i..].partition_point(|s| s.ts.0 < bin_end);
        let est = scans[i..j]
            .iter()
            .find(|s| resolvable(s, db))
            .and_then(|s| resolve_scan(s, db));
        bins.insert(bin, est);
        i = j;
    }
    BinnedTimeline {
        user: user.clone(),
        bin_ms,
        bins,
    }
}

/// Timelines for every user present in `scans`, ascending by user.
pub fn build_timeline<L: ApLookup + ?Sized>(scans: &[WifiScan], db: &L, bin_ms: u64) -> Vec<BinnedTimeline> {
    let mut by_user: BTreeMap<&UserId, Vec<WifiScan>> = BTreeMap::new();
    for s in scans {
        by_user.entry(&s.user).or_default().push(s.clone());
    }
    let groups: Vec<(&UserId, Vec<WifiScan>)> = by_user
        .into_iter()
        .map(|(u, mut v)| {
            v.sort_by_key(|s| s.ts);
            (u, v)
        })
        .collect();
    groups
        .par_iter()
        .map(|(u, v)| build_user_timeline(u, v, db, bin_ms))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub user: String,
    pub bin_index: u64,
    pub bin_start_ms: u64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub support_count: usize,
}

/// `timeline.csv`: `user,bin_index,bin_start_ms,lat,lon,support_count`.
pub fn write_timeline_csv<W: Write>(timelines: &[BinnedTimeline], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut any = false;
    for t in timelines {
        for (&bin, est) in &t.bins {
            any = true;
            wtr.serialize(TimelineRow {
                user: t.user.to_string(),
                bin_index: bin,
                bin_start_ms: bin * t.bin_ms,
                lat: est.as_ref().map(|e| e.pos.lat()),
                lon: est.as_ref().map(|e| e.pos.lon()),
                support_count: est.as_ref().map_or(0, |e| e.support.len()),
            })?;
        }
    }
    if !any {
        wtr.write_record(["user", "bin_index", "bin_start_ms", "lat", "lon", "support_count"])?;
    }
    wtr.flush().map_err(|e| Error::io("<timeline>", e))?;
    Ok(())
}

pub fn read_timeline_csv<R: Read>(r: R) -> Result<Vec<TimelineRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}
