//! Ground-truth files: `truth_aps.csv` and `truth_positions.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::world::GroundTruth;
use crate::error::{Error, Result};
use crate::trace_model::{normalize_bssid, write_traces, BssidId, GeoPoint, TraceSet, UserId};

pub const TRUTH_STEP_MS: u64 = 60_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ApRow {
    bssid: String,
    class: String,
    lat: Option<f64>,
    lon: Option<f64>,
    ssid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PositionRow {
    user: String,
    ts_ms: u64,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthAp {
    pub bssid: BssidId,
    /// `None` for mobile APs.
    pub pos: Option<GeoPoint>,
    pub ssid: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthPosition {
    pub user: UserId,
    pub ts_ms: u64,
    pub pos: GeoPoint,
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

pub fn write_truth_aps_csv<W: Write>(gt: &GroundTruth, w: W) -> Result<()> {
    let mut rows: Vec<ApRow> = gt
        .static_aps
        .iter()
        .map(|a| {
            let g = gt.to_geo(a.x, a.y);
            ApRow {
                bssid: a.bssid.to_string(),
                class: "static".into(),
                lat: Some(round7(g.lat())),
                lon: Some(round7(g.lon())),
                ssid: a.ssid.to_string(),
            }
        })
        .chain(gt.mobile_aps.iter().map(|a| ApRow {
            bssid: a.bssid.to_string(),
            class: "mobile".into(),
            lat: None,
            lon: None,
            ssid: a.ssid.to_string(),
        }))
        .collect();
    rows.sort_by(|a, b| a.bssid.cmp(&b.bssid));
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<truth_aps>", e))?;
    Ok(())
}

/// Sorted by bssid regardless of file order.
pub fn read_truth_aps_csv<R: Read>(r: R) -> Result<Vec<TruthAp>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: ApRow = row?;
        let pos = match (row.class.as_str(), row.lat, row.lon) {
            ("static", Some(lat), Some(lon)) => Some(GeoPoint::new(lat, lon)?),
            ("mobile", _, _) => None,
            _ => return Err(Error::invalid("truth_aps", format!("bad row for {}", row.bssid))),
        };
        out.push(TruthAp {
            bssid: normalize_bssid(&row.bssid)?,
            pos,
            ssid: row.ssid,
        });
    }
    out.sort_by_key(|a| a.bssid);
    Ok(out)
}

/// One row per user per `step_ms`, starting at the epoch.
pub fn write_truth_positions_csv<W: Write>(gt: &GroundTruth, step_ms: u64, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user", "ts_ms", "lat", "lon"])?;
    for (u, user) in gt.users.iter().enumerate() {
        let mut t = gt.epoch_ms();
        while t < gt.end_ms() {
            let (x, y) = gt.user_xy(u, t);
            let g = gt.to_geo(x, y);
            wtr.write_record([
                user.id.to_string(),
                t.to_string(),
                round7(g.lat()).to_string(),
                round7(g.lon()).to_string(),
            ])?;
            t += step_ms;
        }
    }
    wtr.flush().map_err(|e| Error::io("<truth_positions>", e))?;
    Ok(())
}

/// Sorted by `(user, ts_ms)` regardless of file order.
pub fn read_truth_positions_csv<R: Read>(r: R) -> Result<Vec<TruthPosition>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: PositionRow = row?;
        out.push(TruthPosition {
            user: UserId::new(&row.user)?,
            ts_ms: row.ts_ms,
            pos: GeoPoint::new(row.lat, row.lon)?,
        });
    }
    out.sort_by(|a, b| a.user.cmp(&b.user).then(a.ts_ms.cmp(&b.ts_ms)));
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `gps.jsonl`, `wifi.jsonl`, `truth_aps.csv`, `truth_positions.csv`.
pub fn write_dataset(gt: &GroundTruth, traces: &TraceSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_traces(traces, &dir.join("gps.jsonl"), &dir.join("wifi.jsonl"))?;
    let p = dir.join("truth_aps.csv");
    let mut w = create(&p)?;
    write_truth_aps_csv(gt, &mut w)?;
    w.flush().map_err(|e| Error::io(&p, e))?;
    let p = dir.join("truth_positions.csv");
    let mut w = create(&p)?;
    write_truth_positions_csv(gt, TRUTH_STEP_MS, &mut w)?;
    w.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::world::{generate_world, WorldSpec};

    #[test]
    fn truth_files_round_trip() {
        let gt = generate_world(&WorldSpec {
            n_users: 2,
            n_days: 1,
            ..WorldSpec::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_truth_aps_csv(&gt, &mut buf).unwrap();
        let aps = read_truth_aps_csv(buf.as_slice()).unwrap();
        assert_eq!(aps.len(), gt.static_aps.len() + gt.mobile_aps.len());
        assert_eq!(aps.iter().filter(|a| a.pos.is_none()).count(), gt.mobile_aps.len());

        let mut buf = Vec::new();
        write_truth_positions_csv(&gt, TRUTH_STEP_MS, &mut buf).unwrap();
        let pos = read_truth_positions_csv(buf.as_slice()).unwrap();
        assert_eq!(pos.len(), 2 * 1440);
        assert_eq!(pos[1].ts_ms - pos[0].ts_ms, TRUTH_STEP_MS);
    }
}
