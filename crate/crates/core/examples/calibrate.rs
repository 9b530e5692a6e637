//! Prints the default synthetic world's headline statistics.
//!
//! `cargo run --release --example calibrate [seed]`

use std::time::Instant;

use wifitrace::ap_locator::{build_database, haversine_m, ApClass, LocatorConfig};
use wifitrace::geo::EARTH_RADIUS_M;
use wifitrace::pairing::{pair_observations, PairingConfig};
use wifitrace::synthgen::{density_r2, generate_world, nonempty_fraction, simulate_sensors_with_stats, WorldSpec};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = WorldSpec { seed, ..WorldSpec::default() };
    let t = Instant::now();
    let gt = generate_world(&spec).unwrap();
    let (tr, stats) = simulate_sensors_with_stats(&gt, &spec);
    println!("generated in {:?}: {stats:?}", t.elapsed());
    println!(
        "static {} mobile {} places {}",
        gt.static_aps.len(),
        gt.mobile_aps.len(),
        gt.places.len()
    );
    println!("nonempty {:.4}", nonempty_fraction(&tr).unwrap());
    println!("r2 {:.4}", density_r2(&gt, &tr).unwrap());

    let t = Instant::now();
    let obs = pair_observations(&tr, &PairingConfig::default());
    let db = build_database(&obs, &LocatorConfig::default(), "full");
    println!("located in {:?}: {}", t.elapsed(), db.census());

    let mut errs = Vec::new();
    let (mut eligible, mut good, mut static_mobile) = (0, 0, 0);
    for (b, p) in &gt.static_positions() {
        let Some(r) = db.get(b) else { continue };
        if r.n_sightings < 5 {
            continue;
        }
        eligible += 1;
        match &r.class {
            ApClass::Static { pos, .. } => {
                let e = haversine_m(*pos, *p, EARTH_RADIUS_M);
                errs.push(e);
                good += usize::from(e <= 100.0);
            }
            ApClass::Mobile => static_mobile += 1,
            _ => {}
        }
    }
    errs.sort_by(f64::total_cmp);
    println!(
        "static: eligible {eligible} within 100 m {:.4} median err {:.2} read as mobile {:.4}",
        good as f64 / eligible.max(1) as f64,
        errs.get(errs.len() / 2).copied().unwrap_or(f64::NAN),
        static_mobile as f64 / eligible.max(1) as f64
    );
    let (mut mob_elig, mut mob_ok) = (0, 0);
    for a in &gt.mobile_aps {
        let Some(r) = db.get(&a.bssid) else { continue };
        if r.n_sightings >= 5 {
            mob_elig += 1;
            mob_ok += usize::from(r.class == ApClass::Mobile);
        }
    }
    println!("mobile recall {mob_ok}/{mob_elig}");
}
