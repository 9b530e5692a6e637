//! Trace records and JSONL ingestion.
//!
//! Two line-oriented inputs feed the pipeline: `gps.jsonl` (one position
//! fix per line) and `wifi.jsonl` (one scan per line, listing every access
//! point heard). Both are parsed into a [`TraceSet`], sorted by
//! `(user, timestamp)`, which is the form every downstream stage expects.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_millis(ms: u64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque participant identifier.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(Arc<str>);

impl UserId {
    pub fn new(id: impl AsRef<str>) -> Result<Self> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(Error::invalid("user", "empty user id"));
        }
        Ok(UserId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserId({:?})", &*self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for UserId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for UserId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        UserId::new(s).map_err(serde::de::Error::custom)
    }
}

/// 48-bit hardware address of an access point radio.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BssidId([u8; 6]);

impl BssidId {
    pub const fn from_octets(octets: [u8; 6]) -> Self {
        BssidId(octets)
    }

    pub const fn octets(&self) -> [u8; 6] {
        self.0
    }
}

/// Parses a MAC address written as 12 hex digits, optionally separated by
/// `:` or `-`, into its canonical form.
pub fn normalize_bssid(raw: &str) -> Result<BssidId> {
    let err = |reason| Error::Bssid {
        token: raw.to_string(),
        reason,
    };
    let trimmed = raw.trim();
    let bytes = trimmed.as_bytes();
    let mut octets = [0u8; 6];
    let mut digits = Vec::with_capacity(12);
    let mut separator: Option<u8> = None;

    if bytes.len() == 12 {
        digits.extend_from_slice(bytes);
    } else if bytes.len() == 17 {
        for (i, &b) in bytes.iter().enumerate() {
            if i % 3 == 2 {
                if b != b':' && b != b'-' {
                    return Err(err("expected ':' or '-' separator"));
                }
                match separator {
                    None => separator = Some(b),
                    Some(s) if s != b => return Err(err("mixed separators")),
                    _ => {}
                }
            } else {
                digits.push(b);
            }
        }
    } else {
        return Err(err("expected 12 hex digits"));
    }

    for (i, pair) in digits.chunks(2).enumerate() {
        let hi = hex_val(pair[0]).ok_or_else(|| err("non-hex digit"))?;
        let lo = hex_val(pair[1]).ok_or_else(|| err("non-hex digit"))?;
        octets[i] = (hi << 4) | lo;
    }
    Ok(BssidId(octets))
}

fn hex_val(b: u8) -> Option<u8> {
    (b as char).to_digit(16).map(|d| d as u8)
}

impl FromStr for BssidId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        normalize_bssid(s)
    }
}

impl fmt::Display for BssidId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for BssidId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BssidId({self})")
    }
}

impl Serialize for BssidId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BssidId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        normalize_bssid(&s).map_err(serde::de::Error::custom)
    }
}

/// WGS84 position in degrees. Latitude in `[-90, 90]`, longitude in `(-180, 180]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::invalid("lat", format!("{lat_deg} outside [-90, 90]")));
        }
        if !lon_deg.is_finite() || lon_deg <= -180.0 || lon_deg > 180.0 {
            return Err(Error::invalid("lon", format!("{lon_deg} outside (-180, 180]")));
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }

    pub fn lat(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon(&self) -> f64 {
        self.lon_deg
    }

    /// Lexicographic total order on (lat, lon), used for canonical sorting.
    pub fn total_cmp(&self, other: &GeoPoint) -> Ordering {
        self.lat_deg
            .total_cmp(&other.lat_deg)
            .then(self.lon_deg.total_cmp(&other.lon_deg))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsFix {
    pub user: UserId,
    pub ts: Timestamp,
    pub pos: GeoPoint,
    pub accuracy_m: Option<f64>,
}

impl GpsFix {
    pub fn new(user: UserId, ts: Timestamp, pos: GeoPoint, accuracy_m: Option<f64>) -> Result<Self> {
        if let Some(acc) = accuracy_m {
            if !acc.is_finite() || acc < 0.0 {
                return Err(Error::invalid("acc_m", format!("{acc} is not a finite non-negative accuracy")));
            }
        }
        Ok(GpsFix {
            user,
            ts,
            pos,
            accuracy_m,
        })
    }

    fn canonical_cmp(&self, other: &GpsFix) -> Ordering {
        self.user
            .cmp(&other.user)
            .then(self.ts.cmp(&other.ts))
            .then_with(|| self.pos.total_cmp(&other.pos))
            .then_with(|| cmp_opt_f64(self.accuracy_m, other.accuracy_m))
    }
}

fn cmp_opt_f64(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ApSighting {
    pub bssid: BssidId,
    pub ssid: Option<Arc<str>>,
    pub rssi_dbm: Option<i16>,
}

impl ApSighting {
    pub fn new(bssid: BssidId, ssid: Option<Arc<str>>, rssi_dbm: Option<i16>) -> Result<Self> {
        if let Some(r) = rssi_dbm {
            if !(-120..=0).contains(&r) {
                return Err(Error::invalid("rssi", format!("{r} dBm outside [-120, 0]")));
            }
        }
        Ok(ApSighting {
            bssid,
            ssid,
            rssi_dbm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WifiScan {
    pub user: UserId,
    pub ts: Timestamp,
    sightings: Vec<ApSighting>,
}

impl WifiScan {
    /// Builds a scan, dropping repeated BSSIDs after their first occurrence.
    pub fn new(user: UserId, ts: Timestamp, sightings: Vec<ApSighting>) -> Self {
        let mut out: Vec<ApSighting> = Vec::with_capacity(sightings.len());
        for s in sightings {
            if !out.iter().any(|o| o.bssid == s.bssid) {
                out.push(s);
            }
        }
        WifiScan {
            user,
            ts,
            sightings: out,
        }
    }

    pub fn sightings(&self) -> &[ApSighting] {
        &self.sightings
    }

    pub fn is_empty(&self) -> bool {
        self.sightings.is_empty()
    }

    fn canonical_cmp(&self, other: &WifiScan) -> Ordering {
        self.user
            .cmp(&other.user)
            .then(self.ts.cmp(&other.ts))
            .then_with(|| self.sightings.cmp(&other.sightings))
    }
}

/// All fixes and scans of a dataset, each sorted by `(user, ts)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSet {
    fixes: Vec<GpsFix>,
    scans: Vec<WifiScan>,
}

impl TraceSet {
    pub fn new(mut fixes: Vec<GpsFix>, mut scans: Vec<WifiScan>) -> Self {
        fixes.sort_by(GpsFix::canonical_cmp);
        scans.sort_by(WifiScan::canonical_cmp);
        TraceSet { fixes, scans }
    }

    pub fn fixes(&self) -> &[GpsFix] {
        &self.fixes
    }

    pub fn scans(&self) -> &[WifiScan] {
        &self.scans
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty() && self.scans.is_empty()
    }

    /// Distinct users appearing in either stream, ascending.
    pub fn users(&self) -> Vec<UserId> {
        let mut users: Vec<UserId> = Vec::new();
        for u in self
            .fixes
            .iter()
            .map(|f| &f.user)
            .chain(self.scans.iter().map(|s| &s.user))
        {
            if users.last() != Some(u) {
                users.push(u.clone());
            }
        }
        users.sort();
        users.dedup();
        users
    }

    pub fn fixes_for(&self, user: &UserId) -> &[GpsFix] {
        let lo = self.fixes.partition_point(|f| f.user < *user);
        let hi = self.fixes.partition_point(|f| f.user <= *user);
        &self.fixes[lo..hi]
    }

    pub fn scans_for(&self, user: &UserId) -> &[WifiScan] {
        let lo = self.scans.partition_point(|s| s.user < *user);
        let hi = self.scans.partition_point(|s| s.user <= *user);
        &self.scans[lo..hi]
    }

    /// Earliest timestamp over both streams.
    pub fn start(&self) -> Option<Timestamp> {
        let f = self.fixes.iter().map(|f| f.ts).min();
        let s = self.scans.iter().map(|s| s.ts).min();
        match (f, s) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn end(&self) -> Option<Timestamp> {
        let f = self.fixes.iter().map(|f| f.ts).max();
        let s = self.scans.iter().map(|s| s.ts).max();
        f.max(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GpsLine {
    user: String,
    ts_ms: u64,
    lat: f64,
    lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    acc_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WifiLine {
    user: String,
    ts_ms: u64,
    aps: Vec<ApLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ApLine {
    bssid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ssid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rssi: Option<i64>,
}

fn parse_gps_line(line: &str) -> Result<GpsFix> {
    let raw: GpsLine = serde_json::from_str(line)?;
    GpsFix::new(
        UserId::new(&raw.user)?,
        Timestamp(raw.ts_ms),
        GeoPoint::new(raw.lat, raw.lon)?,
        raw.acc_m,
    )
}

fn parse_wifi_line(line: &str) -> Result<WifiScan> {
    let raw: WifiLine = serde_json::from_str(line)?;
    let mut sightings = Vec::with_capacity(raw.aps.len());
    for ap in raw.aps {
        let rssi = match ap.rssi {
            Some(r) => Some(
                i16::try_from(r).map_err(|_| Error::invalid("rssi", format!("{r} dBm outside [-120, 0]")))?,
            ),
            None => None,
        };
        sightings.push(ApSighting::new(
            normalize_bssid(&ap.bssid)?,
            ap.ssid.map(Arc::from),
            rssi,
        )?);
    }
    Ok(WifiScan::new(UserId::new(&raw.user)?, Timestamp(raw.ts_ms), sightings))
}

/// Per-file line accounting from one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileReport {
    pub lines: usize,
    pub malformed: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub gps: FileReport,
    pub wifi: FileReport,
}

impl IngestReport {
    pub fn malformed(&self) -> usize {
        self.gps.malformed + self.wifi.malformed
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gps: {} lines, {} malformed; wifi: {} lines, {} malformed",
            self.gps.lines, self.gps.malformed, self.wifi.lines, self.wifi.malformed
        )
    }
}

/// Largest malformed-line count tolerated in a file of `total` lines: one
/// stray line, or 1% of the file, whichever is larger.
pub fn malformed_allowance(total: usize) -> usize {
    (total / 100).max(1)
}

fn read_lines<T, R: BufRead>(
    reader: R,
    path: &Path,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<(Vec<T>, FileReport)> {
    let mut out = Vec::new();
    let mut report = FileReport::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match parse(&line) {
            Ok(rec) => out.push(rec),
            Err(e) => {
                report.malformed += 1;
                if report.first_error.is_none() {
                    report.first_error = Some(format!("line {}: {e}", lineno + 1));
                }
            }
        }
    }
    if report.malformed > malformed_allowance(report.lines) {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            malformed: report.malformed,
            total: report.lines,
            first: report.first_error.clone().unwrap_or_default(),
        });
    }
    Ok((out, report))
}

pub fn read_gps<R: BufRead>(reader: R, path: &Path) -> Result<(Vec<GpsFix>, FileReport)> {
    read_lines(reader, path, parse_gps_line)
}

pub fn read_wifi<R: BufRead>(reader: R, path: &Path) -> Result<(Vec<WifiScan>, FileReport)> {
    read_lines(reader, path, parse_wifi_line)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads both JSONL streams into a sorted [`TraceSet`].
///
/// Malformed lines are skipped and counted in the returned report. A file
/// with more malformed lines than [`malformed_allowance`] is rejected.
pub fn ingest_traces(gps_path: &Path, wifi_path: &Path) -> Result<(TraceSet, IngestReport)> {
    let (fixes, gps) = read_gps(open(gps_path)?, gps_path)?;
    let (scans, wifi) = read_wifi(open(wifi_path)?, wifi_path)?;
    Ok((TraceSet::new(fixes, scans), IngestReport { gps, wifi }))
}

pub fn write_gps<W: Write>(fixes: &[GpsFix], mut w: W) -> Result<()> {
    for f in fixes {
        let line = GpsLine {
            user: f.user.to_string(),
            ts_ms: f.ts.0,
            lat: f.pos.lat(),
            lon: f.pos.lon(),
            acc_m: f.accuracy_m,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io("<gps>", e))?;
    }
    Ok(())
}

pub fn write_wifi<W: Write>(scans: &[WifiScan], mut w: W) -> Result<()> {
    for s in scans {
        let line = WifiLine {
            user: s.user.to_string(),
            ts_ms: s.ts.0,
            aps: s
                .sightings
                .iter()
                .map(|a| ApLine {
                    bssid: a.bssid.to_string(),
                    ssid: a.ssid.as_deref().map(str::to_string),
                    rssi: a.rssi_dbm.map(i64::from),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io("<wifi>", e))?;
    }
    Ok(())
}

/// Writes both streams in canonical form (sorted, normalized BSSIDs).
pub fn write_traces(traces: &TraceSet, gps_path: &Path, wifi_path: &Path) -> Result<()> {
    let create = |p: &Path| {
        File::create(p)
            .map(BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };
    let mut g = create(gps_path)?;
    write_gps(&traces.fixes, &mut g)?;
    g.flush().map_err(|e| Error::io(gps_path, e))?;
    let mut w = create(wifi_path)?;
    write_wifi(&traces.scans, &mut w)?;
    w.flush().map_err(|e| Error::io(wifi_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }

    #[test]
    fn bssid_canonical_forms() {
        for raw in ["AA-BB-CC-DD-EE-FF", "aa:bb:cc:dd:ee:ff", "aabbccddeeff", "AaBbCcDdEeFf"] {
            assert_eq!(normalize_bssid(raw).unwrap().to_string(), "aa:bb:cc:dd:ee:ff");
        }
    }

    #[test]
    fn bssid_rejects_malformed() {
        for raw in ["", "aa:bb:cc:dd:ee", "aa:bb:cc:dd:ee:fg", "aa:bb-cc:dd:ee:ff", "aa.bb.cc.dd.ee.ff", "aabbccddeeff00"] {
            let err = normalize_bssid(raw).unwrap_err();
            assert!(err.to_string().contains(&format!("{raw:?}")), "{err}");
        }
    }

    #[test]
    fn geopoint_ranges() {
        assert!(GeoPoint::new(90.0, 180.0).is_ok());
        assert!(GeoPoint::new(-90.0, -179.999).is_ok());
        assert!(GeoPoint::new(90.1, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn rssi_range() {
        let b = normalize_bssid("000000000001").unwrap();
        assert!(ApSighting::new(b, None, Some(-120)).is_ok());
        assert!(ApSighting::new(b, None, Some(1)).is_err());
        assert!(ApSighting::new(b, None, Some(-121)).is_err());
    }

    #[test]
    fn duplicate_bssids_keep_first() {
        let b = normalize_bssid("000000000001").unwrap();
        let scan = WifiScan::new(
            user("u"),
            Timestamp(0),
            vec![
                ApSighting::new(b, Some("first".into()), Some(-50)).unwrap(),
                ApSighting::new(b, Some("second".into()), Some(-60)).unwrap(),
            ],
        );
        assert_eq!(scan.sightings().len(), 1);
        assert_eq!(scan.sightings()[0].ssid.as_deref(), Some("first"));
    }

    #[test]
    fn one_malformed_of_four_is_tolerated() {
        let text = concat!(
            "{\"user\":\"a\",\"ts_ms\":1,\"lat\":1.0,\"lon\":2.0}\n",
            "{\"user\":\"a\",\"ts_ms\":2,\"lat\":1.0,\"lon\":2.0}\n",
            "not json\n",
            "{\"user\":\"b\",\"ts_ms\":3,\"lat\":1.0,\"lon\":2.0,\"acc_m\":4.5}\n",
        );
        let (fixes, report) = read_gps(text.as_bytes(), Path::new("t")).unwrap();
        assert_eq!(fixes.len(), 3);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.lines, 4);
    }

    #[test]
    fn mostly_malformed_is_rejected() {
        let text = "x\ny\n{\"user\":\"a\",\"ts_ms\":1,\"lat\":1.0,\"lon\":2.0}\n";
        assert!(matches!(
            read_gps(text.as_bytes(), Path::new("t")),
            Err(Error::TooManyMalformed { malformed: 2, total: 3, .. })
        ));
    }

    #[test]
    fn out_of_range_fields_are_malformed() {
        let text = concat!(
            "{\"user\":\"\",\"ts_ms\":1,\"aps\":[]}\n",
            "{\"user\":\"a\",\"ts_ms\":-1,\"aps\":[]}\n",
            "{\"user\":\"a\",\"ts_ms\":1,\"aps\":[{\"bssid\":\"zz\"}]}\n",
            "{\"user\":\"a\",\"ts_ms\":1,\"aps\":[{\"bssid\":\"000000000001\",\"rssi\":40000}]}\n",
        );
        let mut lines = String::new();
        for i in 0..400 {
            lines.push_str(&format!("{{\"user\":\"a\",\"ts_ms\":{i},\"aps\":[]}}\n"));
        }
        lines.push_str(text);
        let (scans, report) = read_wifi(lines.as_bytes(), Path::new("t")).unwrap();
        assert_eq!(scans.len(), 400);
        assert_eq!(report.malformed, 4);
    }

    #[test]
    fn per_user_slices() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        let fixes = vec![
            GpsFix::new(user("b"), Timestamp(5), p, None).unwrap(),
            GpsFix::new(user("a"), Timestamp(9), p, None).unwrap(),
            GpsFix::new(user("a"), Timestamp(1), p, None).unwrap(),
        ];
        let t = TraceSet::new(fixes, vec![WifiScan::new(user("c"), Timestamp(2), vec![])]);
        assert_eq!(t.users(), vec![user("a"), user("b"), user("c")]);
        let a = t.fixes_for(&user("a"));
        assert_eq!(a.iter().map(|f| f.ts.0).collect::<Vec<_>>(), vec![1, 9]);
        assert!(t.scans_for(&user("a")).is_empty());
        assert_eq!(t.start(), Some(Timestamp(1)));
        assert_eq!(t.end(), Some(Timestamp(9)));
    }
}
