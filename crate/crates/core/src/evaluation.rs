//! Scoring pipeline outputs against generator ground truth.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::ap_locator::{haversine_m, ApClass, ApDatabase};
use crate::reconstructor::TimelineRow;
use crate::synthgen::{TruthAp, TruthPosition};
use crate::trace_model::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub n: usize,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles; `None` for an empty sample.
    pub fn of(mut v: Vec<f64>) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Percentiles {
            n: v.len(),
            p50: rank(0.5),
            p90: rank(0.9),
            p95: rank(0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Error of located APs that are static in truth.
    pub ap_error_m: Option<Percentiles>,
    /// `truth class -> predicted class -> count`; APs absent from the
    /// database count as `unseen`.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
    pub bins_with_data: usize,
    pub bins_estimated: usize,
    pub bin_error_m: Option<Percentiles>,
}

/// Compares a database and a timeline with the truth files.
///
/// A bin's error is the distance from its estimate to the nearest true
/// position sampled inside the bin, since the estimate's exact time within
/// the bin is not recorded in `timeline.csv`.
pub fn evaluate(
    truth_aps: &[TruthAp],
    truth_positions: &[TruthPosition],
    db: &ApDatabase,
    timeline: &[TimelineRow],
    bin_ms: u64,
    radius_m: f64,
) -> EvalReport {
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut ap_err = Vec::new();
    for t in truth_aps {
        let truth = if t.pos.is_some() { "static" } else { "mobile" };
        let rec = db.get(&t.bssid);
        let pred = rec.map_or("unseen", |r| r.class.name());
        *confusion.entry(truth.into()).or_default().entry(pred.into()).or_default() += 1;
        let (Some(tp), Some(r)) = (t.pos, rec) else { continue };
        let err = match &r.class {
            ApClass::Static { pos, .. } => Some(haversine_m(*pos, tp, radius_m)),
            ApClass::Relocated { segments } => segments
                .iter()
                .map(|s| haversine_m(s.pos, tp, radius_m))
                .min_by(f64::total_cmp),
            _ => None,
        };
        ap_err.extend(err);
    }

    let mut tracks: HashMap<&str, Vec<(u64, GeoPoint)>> = HashMap::new();
    for p in truth_positions {
        tracks.entry(p.user.as_str()).or_default().push((p.ts_ms, p.pos));
    }
    for v in tracks.values_mut() {
        v.sort_by_key(|(t, _)| *t);
    }
    let mut bin_err = Vec::new();
    let mut bins_estimated = 0;
    for row in timeline {
        let (Some(lat), Some(lon)) = (row.lat, row.lon) else { continue };
        bins_estimated += 1;
        let Ok(est) = GeoPoint::new(lat, lon) else { continue };
        let Some(track) = tracks.get(row.user.as_str()) else { continue };
        let lo = track.partition_point(|(t, _)| *t < row.bin_start_ms);
        let hi = track.partition_point(|(t, _)| *t < row.bin_start_ms + bin_ms);
        let best = track[lo..hi]
            .iter()
            .map(|(_, p)| haversine_m(est, *p, radius_m))
            .min_by(f64::total_cmp);
        bin_err.extend(best);
    }

    EvalReport {
        ap_error_m: Percentiles::of(ap_err),
        confusion,
        bins_with_data: timeline.len(),
        bins_estimated,
        bin_error_m: Percentiles::of(bin_err),
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |p: &Option<Percentiles>| match p {
            Some(p) => format!("n={} p50={:.1} p90={:.1} p95={:.1} max={:.1}", p.n, p.p50, p.p90, p.p95, p.max),
            None => "n=0".into(),
        };
        writeln!(f, "AP error (m): {}", pct(&self.ap_error_m))?;
        for (truth, row) in &self.confusion {
            let cells: Vec<String> = row.iter().map(|(p, c)| format!("{p}={c}")).collect();
            writeln!(f, "truth {truth}: {}", cells.join(" "))?;
        }
        writeln!(f, "bins: {} with data, {} estimated", self.bins_with_data, self.bins_estimated)?;
        write!(f, "bin error (m): {}", pct(&self.bin_error_m))
    }
}
