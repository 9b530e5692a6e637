//! Time coverage and mobility entropy.
//!
//! Coverage of a user-day is the share of that day's WiFi-bearing bins in
//! which a known router was heard. User-days without any WiFi data are left
//! out of every aggregate, so gaps in collection cannot pull coverage down.

use std::collections::BTreeMap;
use std::io::Write;

use crate::ap_locator::{ApClass, ApDatabase};
use crate::error::{Error, Result};
use crate::reconstructor::{BinnedTimeline, PositionEstimate};
use crate::trace_model::{BssidId, Timestamp, UserId};

pub const DAY_MS: u64 = 86_400_000;

/// `covered / with_data`, or `None` when there is no data at all.
pub fn time_coverage(with_data: usize, covered: usize) -> Result<Option<f64>> {
    if covered > with_data {
        return Err(Error::Contract(format!(
            "{covered} covered bins exceed {with_data} bins with data"
        )));
    }
    if with_data == 0 {
        return Ok(None);
    }
    Ok(Some(covered as f64 / with_data as f64))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageSeries {
    pub per_user_day: BTreeMap<(UserId, u64), f64>,
    pub daily_mean: BTreeMap<u64, f64>,
}

impl CoverageSeries {
    /// Day indices count whole UTC days since the day containing `origin`.
    pub fn from_timelines(timelines: &[BinnedTimeline], origin: Timestamp) -> Self {
        let origin_day = origin.0 / DAY_MS;
        let mut per_user_day = BTreeMap::new();
        for t in timelines {
            // (with_data, covered) per day
            let mut days: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
            for (&bin, est) in &t.bins {
                let day = (bin * t.bin_ms / DAY_MS).saturating_sub(origin_day);
                let e = days.entry(day).or_default();
                e.0 += 1;
                if est.is_some() {
                    e.1 += 1;
                }
            }
            for (day, (with_data, covered)) in days {
                if let Some(c) = time_coverage(with_data, covered).expect("covered <= with_data") {
                    per_user_day.insert((t.user.clone(), day), c);
                }
            }
        }
        Self::from_user_days(per_user_day)
    }

    pub fn from_user_days(per_user_day: BTreeMap<(UserId, u64), f64>) -> Self {
        let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for ((_, day), c) in &per_user_day {
            let e = sums.entry(*day).or_default();
            e.0 += c;
            e.1 += 1;
        }
        let daily_mean = sums.into_iter().map(|(d, (s, n))| (d, s / n as f64)).collect();
        CoverageSeries {
            per_user_day,
            daily_mean,
        }
    }

    pub fn users_on(&self, day: u64) -> usize {
        self.per_user_day.keys().filter(|(_, d)| *d == day).count()
    }

    /// Coverage of each user with data on `day`.
    pub fn day_values(&self, day: u64) -> Vec<f64> {
        self.per_user_day
            .iter()
            .filter(|((_, d), _)| *d == day)
            .map(|(_, c)| *c)
            .collect()
    }

    /// Mean over all user-days.
    pub fn overall_mean(&self) -> Option<f64> {
        let n = self.per_user_day.len();
        (n > 0).then(|| self.per_user_day.values().sum::<f64>() / n as f64)
    }

    pub fn last_day(&self) -> Option<u64> {
        self.daily_mean.keys().next_back().copied()
    }
}

/// Mean coverage of users with WiFi data on `day`.
pub fn daily_population_mean(series: &CoverageSeries, day: u64) -> Option<f64> {
    series.daily_mean.get(&day).copied()
}

/// Counts of values in ten equal bins over `[0, 1]`; 1.0 falls in the last.
pub fn coverage_histogram(values: &[f64]) -> [usize; 10] {
    let mut h = [0usize; 10];
    for &v in values {
        let i = ((v * 10.0).floor().max(0.0) as usize).min(9);
        h[i] += 1;
    }
    h
}

/// Shannon entropy in bits of the empirical distribution of `labels`.
pub fn entropy_bits<L: Ord>(labels: impl IntoIterator<Item = L>) -> Option<f64> {
    let mut counts: BTreeMap<L, usize> = BTreeMap::new();
    let mut n = 0usize;
    for l in labels {
        *counts.entry(l).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    // H = log2 n - (1/n) sum c log2 c
    let s: f64 = counts.values().map(|&c| c as f64 * (c as f64).log2()).sum();
    Some((nf.log2() - s / nf).max(0.0))
}

/// Identity of a located AP, or of one placement of a relocated AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocationLabel {
    Ap(BssidId),
    Segment(BssidId, usize),
}

/// Label of an estimate: the smallest supporting AP identity.
pub fn location_label(est: &PositionEstimate, db: &ApDatabase) -> Option<LocationLabel> {
    est.support
        .iter()
        .filter_map(|b| match &db.get(b)?.class {
            ApClass::Static { .. } => Some(LocationLabel::Ap(*b)),
            ApClass::Relocated { segments } => segments
                .iter()
                .position(|s| s.interval.contains(est.ts))
                .map(|i| LocationLabel::Segment(*b, i)),
            _ => None,
        })
        .min()
}

/// Entropy of a user's located bins; uncovered bins are excluded.
pub fn timeline_entropy_bits(timeline: &BinnedTimeline, db: &ApDatabase) -> Option<f64> {
    entropy_bits(
        timeline
            .bins
            .values()
            .flatten()
            .filter_map(|e| location_label(e, db)),
    )
}

/// `coverage.csv`: `day_index,scenario,strategy,param,mean_coverage,n_users`.
pub fn write_coverage_csv<W: Write>(
    series: &CoverageSeries,
    scenario: &str,
    strategy: &str,
    param: &str,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["day_index", "scenario", "strategy", "param", "mean_coverage", "n_users"])?;
    for (day, mean) in &series.daily_mean {
        wtr.write_record([
            day.to_string(),
            scenario.to_string(),
            strategy.to_string(),
            param.to_string(),
            format!("{mean:.6}"),
            series.users_on(*day).to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<coverage>", e))?;
    Ok(())
}

/// `coverage_users.csv`: `day_index,scenario,strategy,param,user,coverage`.
pub fn write_coverage_users_csv<W: Write>(
    series: &CoverageSeries,
    scenario: &str,
    strategy: &str,
    param: &str,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["day_index", "scenario", "strategy", "param", "user", "coverage"])?;
    let mut rows: Vec<(&u64, &UserId, &f64)> = series.per_user_day.iter().map(|((u, d), c)| (d, u, c)).collect();
    rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(b.1)));
    for (day, user, c) in rows {
        wtr.write_record([
            day.to_string(),
            scenario.to_string(),
            strategy.to_string(),
            param.to_string(),
            user.to_string(),
            format!("{c:.6}"),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<coverage_users>", e))?;
    Ok(())
}
