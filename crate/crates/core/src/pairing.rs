//! Binds each GPS fix to the nearest-in-time WiFi scan of the same user.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::trace_model::{BssidId, GeoPoint, GpsFix, Timestamp, TraceSet, UserId, WifiScan};

/// One access point heard at a GPS-known position.
///
/// `ts` and `pos` are those of the GPS fix; all observations produced by the
/// same fix share them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedObservation {
    pub bssid: BssidId,
    pub pos: GeoPoint,
    pub ts: Timestamp,
    pub user: UserId,
}

impl PairedObservation {
    pub(crate) fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bssid
            .cmp(&other.bssid)
            .then(self.ts.cmp(&other.ts))
            .then_with(|| self.user.cmp(&other.user))
            .then_with(|| self.pos.total_cmp(&other.pos))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingConfig {
    /// Half-width of the inclusive matching window.
    pub window_ms: u64,
    /// Fixes reporting a worse accuracy than this are skipped. Off by default.
    pub max_accuracy_m: Option<f64>,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            window_ms: 1000,
            max_accuracy_m: None,
        }
    }
}

impl PairingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_ms == 0 {
            return Err(Error::invalid("window_ms", "must be positive"));
        }
        if let Some(a) = self.max_accuracy_m {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid("max_accuracy_m", format!("{a}")));
            }
        }
        Ok(())
    }
}

/// Index into `scans` of the scan closest in time to `ts` within the window,
/// preferring the earlier scan on ties. `scans` must be sorted by `ts`.
pub fn nearest_scan(scans: &[WifiScan], ts: Timestamp, window_ms: u64) -> Option<usize> {
    let lo = ts.0.saturating_sub(window_ms);
    let hi = ts.0.saturating_add(window_ms);
    let start = scans.partition_point(|s| s.ts.0 < lo);
    let mut best: Option<(u64, usize)> = None;
    for (i, s) in scans.iter().enumerate().skip(start) {
        if s.ts.0 > hi {
            break;
        }
        let d = s.ts.abs_diff(ts);
        // strict comparison keeps the earliest of equally distant scans
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

fn pair_user(fixes: &[GpsFix], scans: &[WifiScan], cfg: &PairingConfig) -> Vec<PairedObservation> {
    let mut out = Vec::new();
    for fix in fixes {
        if let (Some(max), Some(acc)) = (cfg.max_accuracy_m, fix.accuracy_m) {
            if acc > max {
                continue;
            }
        }
        if let Some(i) = nearest_scan(scans, fix.ts, cfg.window_ms) {
            out.extend(scans[i].sightings().iter().map(|s| PairedObservation {
                bssid: s.bssid,
                pos: fix.pos,
                ts: fix.ts,
                user: fix.user.clone(),
            }));
        }
    }
    out
}

/// Pairs every fix with at most one scan and emits one observation per
/// access point in that scan, sorted by `(bssid, ts)`.
///
/// A scan may serve several fixes if they fall within its window.
pub fn pair_observations(traces: &TraceSet, cfg: &PairingConfig) -> Vec<PairedObservation> {
    let users = traces.users();
    let mut out: Vec<PairedObservation> = users
        .par_iter()
        .flat_map_iter(|u| pair_user(traces.fixes_for(u), traces.scans_for(u), cfg))
        .collect();
    out.par_sort_by(PairedObservation::canonical_cmp);
    out
}

/// Number of fixes that found a scan partner.
pub fn paired_fix_count(traces: &TraceSet, cfg: &PairingConfig) -> usize {
    traces
        .users()
        .iter()
        .map(|u| {
            let scans = traces.scans_for(u);
            traces
                .fixes_for(u)
                .iter()
                .filter(|f| nearest_scan(scans, f.ts, cfg.window_ms).is_some())
                .count()
        })
        .sum()
}

/// Debug dump with columns `bssid,lat,lon,ts_ms,user`.
pub fn write_pairs_csv<W: Write>(obs: &[PairedObservation], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["bssid", "lat", "lon", "ts_ms", "user"])?;
    for o in obs {
        wtr.write_record([
            o.bssid.to_string(),
            o.pos.lat().to_string(),
            o.pos.lon().to_string(),
            o.ts.0.to_string(),
            o.user.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<pairs>", e))?;
    Ok(())
}
