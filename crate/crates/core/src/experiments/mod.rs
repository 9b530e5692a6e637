//! Sampling strategies crossed with data-sharing scenarios.
//!
//! Every user owns a personal AP database built from their own training
//! observations. A viewer's database under each scenario is then:
//! Personal, their own; Global, the union of everyone's; and
//! GlobalExcludingSelf, the union of everyone else's. An AP counts as known
//! when any member database locates it.

mod plot;
mod top_routers;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::ap_locator::{build_database, ApDatabase, DatabaseUnion, LocatorConfig};
use crate::coverage::{coverage_histogram, CoverageSeries, DAY_MS};
use crate::error::{Error, Result};
use crate::pairing::{pair_observations, PairedObservation, PairingConfig};
use crate::reconstructor::{build_user_timeline, BinnedTimeline, DEFAULT_BIN_MS};
use crate::trace_model::{BssidId, Timestamp, TraceSet, UserId};

pub use plot::write_coverage_svg;
pub use top_routers::{greedy_top_routers, user_timebin_sets};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingStrategy {
    /// Only observations from the first `days` days of the dataset.
    InitialPeriod { days: u32 },
    /// Each GPS fix, with all its observations, kept with probability `f`.
    RandomFraction { f: f64, seed: u64 },
    /// The `k` routers covering most of a user's time bins, located by the
    /// full-data database.
    TopRouters { k: usize },
}

impl SamplingStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingStrategy::InitialPeriod { days } if days < 1 => {
                Err(Error::invalid("days", "must be at least 1"))
            }
            SamplingStrategy::RandomFraction { f, .. } if !(0.0..=1.0).contains(&f) => {
                Err(Error::invalid("fraction", format!("{f} outside [0, 1]")))
            }
            SamplingStrategy::TopRouters { k } if k < 1 => Err(Error::invalid("k", "must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplingStrategy::InitialPeriod { .. } => "initial",
            SamplingStrategy::RandomFraction { .. } => "random",
            SamplingStrategy::TopRouters { .. } => "top",
        }
    }

    pub fn param(&self) -> String {
        match *self {
            SamplingStrategy::InitialPeriod { days } => days.to_string(),
            SamplingStrategy::RandomFraction { f, .. } => {
                let s = format!("{f:.6}");
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            }
            SamplingStrategy::TopRouters { k } => k.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    Global,
    Personal,
    GlobalExcludingSelf,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Global, Scenario::Personal, Scenario::GlobalExcludingSelf];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Global => "global",
            Scenario::Personal => "personal",
            Scenario::GlobalExcludingSelf => "global_excluding_self",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Scenario::Global),
            "personal" => Ok(Scenario::Personal),
            "global_excluding_self" | "others" => Ok(Scenario::GlobalExcludingSelf),
            _ => Err(Error::invalid("scenario", format!("unknown scenario {s:?}"))),
        }
    }
}

/// Uniform draw in `[0, 1)` keyed by `(seed, user, ts)`, so a fix kept at
/// fraction `f` is also kept at every larger fraction.
pub fn fix_draw(seed: u64, user: &UserId, ts: Timestamp) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(user.as_str().as_bytes());
    h.update([0u8]);
    h.update(ts.0.to_le_bytes());
    let d = h.finalize();
    let x = u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"));
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Training subset for `viewer` under `strategy` and `scenario`.
///
/// `TopRouters` does not filter observations; its routers are chosen from
/// scans in [`run_experiments`].
pub fn select_training_pairs(
    obs: &[PairedObservation],
    strategy: &SamplingStrategy,
    viewer: Option<&UserId>,
    scenario: Scenario,
    dataset_start: Timestamp,
) -> Result<Vec<PairedObservation>> {
    strategy.validate()?;
    if scenario != Scenario::Global && viewer.is_none() {
        return Err(Error::Contract(format!("scenario {scenario} needs a viewer")));
    }
    let by_strategy = |o: &PairedObservation| match *strategy {
        SamplingStrategy::InitialPeriod { days } => o.ts.0 < dataset_start.0 + days as u64 * DAY_MS,
        SamplingStrategy::RandomFraction { f, seed } => fix_draw(seed, &o.user, o.ts) < f,
        SamplingStrategy::TopRouters { .. } => true,
    };
    let by_scenario = |o: &PairedObservation| match scenario {
        Scenario::Global => true,
        Scenario::Personal => Some(&o.user) == viewer,
        Scenario::GlobalExcludingSelf => Some(&o.user) != viewer,
    };
    Ok(obs.iter().filter(|o| by_scenario(o) && by_strategy(o)).cloned().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pairing: PairingConfig,
    pub locator: LocatorConfig,
    pub bin_ms: u64,
    pub histogram_days: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pairing: PairingConfig::default(),
            locator: LocatorConfig::default(),
            bin_ms: DEFAULT_BIN_MS,
            histogram_days: vec![7, 80, 190],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub strategy: SamplingStrategy,
    pub scenario: Scenario,
    pub series: CoverageSeries,
    /// Per-user coverage histogram for each requested day that has data.
    pub histograms: BTreeMap<u64, [usize; 10]>,
    pub mean_coverage: Option<f64>,
    /// Training observations feeding the personal databases.
    pub training_pairs: usize,
}

/// Paired observations and derived state shared by all grid cells.
pub struct ExperimentContext<'a> {
    pub traces: &'a TraceSet,
    pub config: ExperimentConfig,
    pub obs: Vec<PairedObservation>,
    pub start: Timestamp,
    users: Vec<UserId>,
    full_db: OnceLock<ApDatabase>,
}

impl<'a> ExperimentContext<'a> {
    pub fn new(traces: &'a TraceSet, config: ExperimentConfig) -> Result<Self> {
        config.pairing.validate()?;
        config.locator.validate()?;
        if config.bin_ms == 0 {
            return Err(Error::invalid("bin_ms", "must be positive"));
        }
        let obs = pair_observations(traces, &config.pairing);
        Ok(ExperimentContext {
            traces,
            start: traces.start().unwrap_or(Timestamp(0)),
            users: traces.users(),
            obs,
            config,
            full_db: OnceLock::new(),
        })
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    /// Distinct paired GPS fixes and the user-days they fall on.
    pub fn fix_census(&self) -> (usize, usize) {
        let fixes: BTreeSet<(&UserId, Timestamp)> = self.obs.iter().map(|o| (&o.user, o.ts)).collect();
        let days: BTreeSet<(&UserId, u64)> = fixes.iter().map(|(u, t)| (*u, t.0 / DAY_MS)).collect();
        (fixes.len(), days.len())
    }

    /// Random-sampling fraction giving about `per_day` paired fixes per
    /// user-day, capped at 1.
    pub fn fraction_for_fixes_per_day(&self, per_day: f64) -> Result<f64> {
        if !(per_day.is_finite() && per_day >= 0.0) {
            return Err(Error::invalid("fixes_per_day", format!("{per_day}")));
        }
        let (fixes, days) = self.fix_census();
        if fixes == 0 {
            return Ok(0.0);
        }
        Ok((per_day * days as f64 / fixes as f64).min(1.0))
    }

    /// Database from every paired observation; stands in for an external
    /// geolocation service.
    pub fn full_database(&self) -> &ApDatabase {
        self.full_db
            .get_or_init(|| build_database(&self.obs, &self.config.locator, "all observations"))
    }

    fn personal_databases(&self, strategy: &SamplingStrategy) -> Result<(Vec<ApDatabase>, usize)> {
        if let SamplingStrategy::TopRouters { k } = *strategy {
            let full = self.full_database();
            let dbs = self
                .users
                .par_iter()
                .map(|u| {
                    let chosen: BTreeSet<BssidId> =
                        greedy_top_routers(self.traces.scans_for(u), k, self.config.bin_ms).into_iter().collect();
                    full.restricted_to(&chosen, format!("top {k} routers of {u}"))
                })
                .collect();
            return Ok((dbs, self.obs.len()));
        }
        let train = select_training_pairs(&self.obs, strategy, None, Scenario::Global, self.start)?;
        let mut by_user: BTreeMap<&UserId, Vec<PairedObservation>> = BTreeMap::new();
        for o in &train {
            by_user.entry(&o.user).or_default().push(o.clone());
        }
        let dbs = self
            .users
            .par_iter()
            .map(|u| {
                let mine = by_user.get(u).map_or(&[][..], Vec::as_slice);
                build_database(mine, &self.config.locator, format!("{} {} of {u}", strategy.name(), strategy.param()))
            })
            .collect();
        Ok((dbs, train.len()))
    }

    fn result(&self, strategy: SamplingStrategy, scenario: Scenario, t: &[BinnedTimeline], n: usize) -> ExperimentResult {
        let series = CoverageSeries::from_timelines(t, self.start);
        let histograms = self
            .config
            .histogram_days
            .iter()
            .filter(|d| series.daily_mean.contains_key(d))
            .map(|&d| (d, coverage_histogram(&series.day_values(d))))
            .collect();
        ExperimentResult {
            strategy,
            scenario,
            mean_coverage: series.overall_mean(),
            series,
            histograms,
            training_pairs: n,
        }
    }
}

/// Runs one strategy under several scenarios, sharing the personal databases.
pub fn run_experiments(
    ctx: &ExperimentContext<'_>,
    strategy: SamplingStrategy,
    scenarios: &[Scenario],
) -> Result<Vec<ExperimentResult>> {
    strategy.validate()?;
    let (dbs, n_train) = ctx.personal_databases(&strategy)?;
    let mut out = Vec::with_capacity(scenarios.len());
    for &scenario in scenarios {
        let timelines: Vec<BinnedTimeline> = match scenario {
            Scenario::Personal => ctx
                .users
                .par_iter()
                .zip(&dbs)
                .map(|(u, db)| build_user_timeline(u, ctx.traces.scans_for(u), db, ctx.config.bin_ms))
                .collect(),
            Scenario::Global => {
                let union = DatabaseUnion::new(dbs.iter());
                ctx.users
                    .par_iter()
                    .map(|u| build_user_timeline(u, ctx.traces.scans_for(u), &union, ctx.config.bin_ms))
                    .collect()
            }
            Scenario::GlobalExcludingSelf => ctx
                .users
                .par_iter()
                .enumerate()
                .map(|(i, u)| {
                    let others = DatabaseUnion::new(dbs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d));
                    build_user_timeline(u, ctx.traces.scans_for(u), &others, ctx.config.bin_ms)
                })
                .collect(),
        };
        out.push(ctx.result(strategy, scenario, &timelines, n_train));
    }
    Ok(out)
}

pub fn run_experiment(
    ctx: &ExperimentContext<'_>,
    strategy: SamplingStrategy,
    scenario: Scenario,
) -> Result<ExperimentResult> {
    Ok(run_experiments(ctx, strategy, &[scenario])?.remove(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decline {
    pub from_day: u64,
    pub to_day: u64,
    pub from_mean: f64,
    pub to_mean: f64,
    /// `from_mean - to_mean`; positive when coverage fell.
    pub decline: f64,
    pub histogram_day: u64,
    pub histogram: [usize; 10],
}

/// Change in daily-mean coverage between two days, plus the per-user
/// histogram on `histogram_day` (or the last day with data, if earlier).
pub fn stability_decline(result: &ExperimentResult, from_day: u64, to_day: u64, histogram_day: u64) -> Option<Decline> {
    let s = &result.series;
    if s.last_day()? < to_day {
        return None;
    }
    let from_mean = *s.daily_mean.get(&from_day)?;
    let to_mean = *s.daily_mean.get(&to_day)?;
    let histogram_day = s.daily_mean.range(..=histogram_day).next_back().map(|(d, _)| *d)?;
    Some(Decline {
        from_day,
        to_day,
        from_mean,
        to_mean,
        decline: from_mean - to_mean,
        histogram_day,
        histogram: coverage_histogram(&s.day_values(histogram_day)),
    })
}

/// `experiment_grid.csv`: `strategy,param,scenario,day_index,mean_coverage,n_users`.
pub fn write_grid_csv<W: Write>(results: &[ExperimentResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["strategy", "param", "scenario", "day_index", "mean_coverage", "n_users"])?;
    for r in results {
        for (day, mean) in &r.series.daily_mean {
            wtr.write_record([
                r.strategy.name().to_string(),
                r.strategy.param(),
                r.scenario.name().to_string(),
                day.to_string(),
                format!("{mean:.6}"),
                r.series.users_on(*day).to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<experiment_grid>", e))?;
    Ok(())
}

/// `histograms.csv`: `strategy,param,scenario,day,bin_lo,count`.
pub fn write_histograms_csv<W: Write>(results: &[ExperimentResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["strategy", "param", "scenario", "day", "bin_lo", "count"])?;
    for r in results {
        for (day, h) in &r.histograms {
            for (i, c) in h.iter().enumerate() {
                wtr.write_record([
                    r.strategy.name().to_string(),
                    r.strategy.param(),
                    r.scenario.name().to_string(),
                    day.to_string(),
                    format!("{:.1}", i as f64 / 10.0),
                    c.to_string(),
                ])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<histograms>", e))?;
    Ok(())
}
