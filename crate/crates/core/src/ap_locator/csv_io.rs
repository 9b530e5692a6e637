//! `apdb.csv`: `bssid,class,lat,lon,n_sightings,segments_json,contributors_count`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ApClass, ApDatabase, ApRecord, Segment, TimeInterval};
use crate::error::{Error, Result};
use crate::trace_model::{normalize_bssid, GeoPoint, Timestamp};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    bssid: String,
    class: String,
    lat: Option<f64>,
    lon: Option<f64>,
    n_sightings: usize,
    segments_json: String,
    contributors_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentJson {
    lat: f64,
    lon: f64,
    start_ms: u64,
    end_ms: u64,
}

pub fn write_apdb_csv<W: Write>(db: &ApDatabase, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in db.records() {
        let (lat, lon, segments_json) = match &r.class {
            ApClass::Static { pos, .. } => (Some(pos.lat()), Some(pos.lon()), String::new()),
            ApClass::Relocated { segments } => {
                let js: Vec<SegmentJson> = segments
                    .iter()
                    .map(|s| SegmentJson {
                        lat: s.pos.lat(),
                        lon: s.pos.lon(),
                        start_ms: s.interval.start().millis(),
                        end_ms: s.interval.end().millis(),
                    })
                    .collect();
                (None, None, serde_json::to_string(&js)?)
            }
            ApClass::Mobile | ApClass::Insufficient => (None, None, String::new()),
        };
        wtr.serialize(Row {
            bssid: r.bssid.to_string(),
            class: r.class.name().to_string(),
            lat,
            lon,
            n_sightings: r.n_sightings,
            segments_json,
            contributors_count: r.contributors.len(),
        })?;
    }
    if db.is_empty() {
        wtr.write_record([
            "bssid",
            "class",
            "lat",
            "lon",
            "n_sightings",
            "segments_json",
            "contributors_count",
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<apdb>", e))?;
    Ok(())
}

pub fn read_apdb_csv<R: Read>(r: R) -> Result<ApDatabase> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut records = Vec::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        let bssid = normalize_bssid(&row.bssid)?;
        let class = match row.class.as_str() {
            "static" => {
                let (Some(lat), Some(lon)) = (row.lat, row.lon) else {
                    return Err(Error::invalid("apdb", format!("static row {bssid} without lat/lon")));
                };
                ApClass::Static {
                    pos: GeoPoint::new(lat, lon)?,
                    n: row.n_sightings,
                }
            }
            "relocated" => {
                let js: Vec<SegmentJson> = serde_json::from_str(&row.segments_json)?;
                let segments = js
                    .into_iter()
                    .map(|s| {
                        Ok(Segment {
                            pos: GeoPoint::new(s.lat, s.lon)?,
                            interval: TimeInterval::new(Timestamp(s.start_ms), Timestamp(s.end_ms))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ApClass::Relocated { segments }
            }
            "mobile" => ApClass::Mobile,
            "insufficient" => ApClass::Insufficient,
            other => return Err(Error::invalid("apdb", format!("unknown class {other:?}"))),
        };
        records.push(ApRecord {
            bssid,
            class,
            n_sightings: row.n_sightings,
            contributors: BTreeSet::new(),
        });
    }
    Ok(ApDatabase::from_records(records, "apdb.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::UserId;

    #[test]
    fn rows_round_trip() {
        let p = GeoPoint::new(55.5, 12.25).unwrap();
        let q = GeoPoint::new(55.75, 12.5).unwrap();
        let users: BTreeSet<UserId> = [UserId::new("a").unwrap(), UserId::new("b").unwrap()].into();
        let db = ApDatabase::from_records(
            [
                ApRecord {
                    bssid: "00:00:00:00:00:01".parse().unwrap(),
                    class: ApClass::Static { pos: p, n: 7 },
                    n_sightings: 7,
                    contributors: users.clone(),
                },
                ApRecord {
                    bssid: "00:00:00:00:00:02".parse().unwrap(),
                    class: ApClass::Relocated {
                        segments: vec![
                            Segment {
                                pos: p,
                                interval: TimeInterval::new(Timestamp(1), Timestamp(5)).unwrap(),
                            },
                            Segment {
                                pos: q,
                                interval: TimeInterval::new(Timestamp(9), Timestamp(12)).unwrap(),
                            },
                        ],
                    },
                    n_sightings: 12,
                    contributors: users.clone(),
                },
                ApRecord {
                    bssid: "00:00:00:00:00:03".parse().unwrap(),
                    class: ApClass::Mobile,
                    n_sightings: 30,
                    contributors: users,
                },
            ],
            "t",
        );
        let mut buf = Vec::new();
        write_apdb_csv(&db, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bssid,class,lat,lon,n_sightings,segments_json,contributors_count");
        assert_eq!(lines[1], "00:00:00:00:00:01,static,55.5,12.25,7,,2");
        assert_eq!(
            lines[2],
            r#"00:00:00:00:00:02,relocated,,,12,"[{""lat"":55.5,""lon"":12.25,""start_ms"":1,""end_ms"":5},{""lat"":55.75,""lon"":12.5,""start_ms"":9,""end_ms"":12}]",2"#
        );
        assert_eq!(lines[3], "00:00:00:00:00:03,mobile,,,30,,2");

        let back = read_apdb_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in db.records().zip(back.records()) {
            assert_eq!(a.class, b.class);
            assert_eq!(a.n_sightings, b.n_sightings);
        }
    }

    #[test]
    fn empty_database_has_header() {
        let mut buf = Vec::new();
        write_apdb_csv(&ApDatabase::default(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "bssid,class,lat,lon,n_sightings,segments_json,contributors_count\n"
        );
        assert!(read_apdb_csv(buf.as_slice()).unwrap().is_empty());
    }
}
