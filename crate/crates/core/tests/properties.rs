mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use wifitrace::ap_locator::{dbscan_points, geometric_median};
use wifitrace::coverage::{coverage_histogram, entropy_bits, time_coverage};
use wifitrace::experiments::{
    fix_draw, greedy_top_routers, run_experiments, select_training_pairs, ExperimentConfig, ExperimentContext,
    SamplingStrategy, Scenario,
};
use wifitrace::geo::EARTH_RADIUS_M;
use wifitrace::pairing::{pair_observations, PairingConfig};
use wifitrace::synthgen::{generate_world, simulate_sensors, WorldSpec};
use wifitrace::trace_model::{normalize_bssid, GeoPoint, Timestamp, UserId};

use common::*;

fn xy_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-300.0..300.0f64, -300.0..300.0f64), 0..60)
}

proptest! {
    #[test]
    fn dbscan_matches_reference(xy in xy_points(), min_pts in 1usize..8, eps in 20.0..150.0f64) {
        let f = origin();
        let pts: Vec<GeoPoint> = xy.iter().map(|&(x, y)| f.to_geo(x, y)).collect();
        let got = dbscan_points(&pts, eps, min_pts, EARTH_RADIUS_M);
        let (clusters, noise) = dbscan_oracle(&pts, eps, min_pts);
        let got_sets: Vec<BTreeSet<usize>> = got.clusters.iter().map(|c| c.iter().copied().collect()).collect();
        prop_assert_eq!(got_sets, clusters);
        prop_assert_eq!(got.noise.into_iter().collect::<BTreeSet<_>>(), noise);
    }

    #[test]
    fn median_no_worse_than_any_input(xy in prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64), 1..25)) {
        let f = origin();
        let pts: Vec<GeoPoint> = xy.iter().map(|&(x, y)| f.to_geo(x, y)).collect();
        let m = geometric_median(&pts, EARTH_RADIUS_M);
        let cost = summed_distance(&pts, m);
        for p in &pts {
            prop_assert!(cost <= summed_distance(&pts, *p) + 0.5);
        }
    }

    #[test]
    fn bssid_display_round_trips(octets in prop::array::uniform6(any::<u8>())) {
        let b = wifitrace::trace_model::BssidId::from_octets(octets);
        prop_assert_eq!(normalize_bssid(&b.to_string()).unwrap(), b);
        prop_assert_eq!(normalize_bssid(&b.to_string().to_uppercase().replace(':', "-")).unwrap(), b);
    }

    #[test]
    fn coverage_ratio_bounds(with_data in 0usize..1000, frac in 0.0..=1.0f64) {
        let covered = (with_data as f64 * frac).floor() as usize;
        match time_coverage(with_data, covered).unwrap() {
            None => prop_assert_eq!(with_data, 0),
            Some(c) => prop_assert!((0.0..=1.0).contains(&c)),
        }
        prop_assert!(time_coverage(with_data, with_data + 1).is_err());
    }

    #[test]
    fn histogram_counts_everything(v in prop::collection::vec(0.0..=1.0f64, 0..100)) {
        prop_assert_eq!(coverage_histogram(&v).iter().sum::<usize>(), v.len());
    }

    #[test]
    fn entropy_bounded_by_support(labels in prop::collection::vec(0u8..12, 1..200)) {
        let h = entropy_bits(labels.iter().copied()).unwrap();
        let k = labels.iter().collect::<BTreeSet<_>>().len() as f64;
        prop_assert!(h >= 0.0 && h <= k.log2() + 1e-12);
    }

    #[test]
    fn greedy_prefix_and_bounds(seed in any::<u64>(), n_bins in 1usize..40, n_routers in 1u32..15) {
        let mut r = rng(seed);
        let bins = random_bins(&mut r, n_bins, n_routers);
        let scans = scans_from_bins(&bins, 600_000);
        let full = greedy_top_routers(&scans, 20, 600_000);
        for k in 1..=3 {
            let g = greedy_top_routers(&scans, k, 600_000);
            prop_assert_eq!(&g[..], &full[..g.len()]);
            let ids: BTreeSet<u32> = g.iter().map(|b| {
                let o = b.octets();
                u32::from_be_bytes([o[2], o[3], o[4], o[5]])
            }).collect();
            let got = covered_bins(&bins, &ids) as f64;
            let opt = max_coverage_enumerated(&bins, k) as f64;
            if k == 1 {
                prop_assert_eq!(got, opt);
            }
            prop_assert!(got >= (1.0 - (-1.0f64).exp()) * opt - 1e-9);
        }
    }

    #[test]
    fn random_fraction_nests(seed in any::<u64>(), ts in any::<u64>(), f in 0.0..1.0f64, g in 0.0..1.0f64) {
        let u = UserId::new("x").unwrap();
        let d = fix_draw(seed, &u, Timestamp(ts));
        prop_assert!((0.0..1.0).contains(&d));
        if d < f.min(g) {
            prop_assert!(d < f.max(g));
        }
    }
}

fn tiny_world(seed: u64) -> wifitrace::trace_model::TraceSet {
    let spec = WorldSpec {
        seed,
        n_users: 4,
        n_days: 2,
        city_width_km: 3.0,
        city_height_km: 3.0,
        colocated_fraction: 0.5,
        ..WorldSpec::default()
    };
    simulate_sensors(&generate_world(&spec).unwrap(), &spec)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn global_dominates_on_small_worlds(seed in 0u64..1000, f in 0.02..1.0f64, k in 1usize..8) {
        let traces = tiny_world(seed);
        let ctx = ExperimentContext::new(&traces, ExperimentConfig::default()).unwrap();
        for s in [
            SamplingStrategy::InitialPeriod { days: 1 },
            SamplingStrategy::RandomFraction { f, seed },
            SamplingStrategy::TopRouters { k },
        ] {
            let res = run_experiments(&ctx, s, &Scenario::ALL).unwrap();
            let (g, p, o) = (&res[0].series, &res[1].series, &res[2].series);
            for (key, gv) in &g.per_user_day {
                prop_assert!(*gv >= p.per_user_day[key], "{:?} {:?}", s, key);
                prop_assert!(*gv >= o.per_user_day[key], "{:?} {:?}", s, key);
            }
        }
    }

    #[test]
    fn pairs_respect_window(seed in 0u64..1000) {
        let traces = tiny_world(seed);
        let cfg = PairingConfig::default();
        let obs = pair_observations(&traces, &cfg);
        for o in &obs {
            let fix = traces.fixes_for(&o.user).iter().find(|f| f.ts == o.ts).unwrap();
            prop_assert_eq!(fix.pos, o.pos);
            let heard = traces.scans_for(&o.user).iter().any(|s| {
                s.ts.abs_diff(o.ts) <= cfg.window_ms && s.sightings().iter().any(|a| a.bssid == o.bssid)
            });
            prop_assert!(heard);
        }
        // scenario filters partition the training set
        let s = SamplingStrategy::RandomFraction { f: 0.5, seed };
        let start = traces.start().unwrap();
        let all = select_training_pairs(&obs, &s, None, Scenario::Global, start).unwrap();
        let u = traces.users()[0].clone();
        let mine = select_training_pairs(&obs, &s, Some(&u), Scenario::Personal, start).unwrap();
        let rest = select_training_pairs(&obs, &s, Some(&u), Scenario::GlobalExcludingSelf, start).unwrap();
        prop_assert_eq!(mine.len() + rest.len(), all.len());
    }
}

#[test]
fn sightings_stay_within_radius() {
    let spec = WorldSpec { n_users: 3, n_days: 1, ..WorldSpec::default() };
    let gt = generate_world(&spec).unwrap();
    let traces = simulate_sensors(&gt, &spec);
    let d = wifitrace::synthgen::max_sighting_distance(&gt, &traces);
    assert!(d <= spec.visibility_radius_m + 1e-6, "{d}");
}
