//! Synthetic ground truth: a city with APs, people moving between places,
//! and the WiFi/GPS logs their phones would record.

pub mod mobility;
pub mod sensors;
pub mod truth_io;
pub mod world;

pub use mobility::{Leg, Routine, Trajectory, TrajectoryCursor, DAY_MS};
pub use sensors::{
    density_r2, max_sighting_distance, nonempty_fraction, r_squared, simulate_sensors, simulate_sensors_with_stats,
    SensorStats,
};
pub use truth_io::{
    read_truth_aps_csv, read_truth_positions_csv, write_dataset, write_truth_aps_csv, write_truth_positions_csv,
    TruthAp, TruthPosition, TRUTH_STEP_MS,
};
pub use world::{
    generate_world, BusLine, Carrier, DensityGrid, GroundTruth, MobileAp, Place, PlaceKind, StaticAp, UserTruth,
    Vehicle, WorldSpec, DEFAULT_START_MS, MOBILE_SSIDS,
};

/// Share of a user's time after `from_ms` spent at places they never
/// visited before it.
pub fn new_place_time_share(gt: &GroundTruth, user: usize, from_ms: u64) -> Option<f64> {
    let traj = &gt.users[user].trajectory;
    let before: std::collections::BTreeSet<usize> =
        traj.place_time(gt.epoch_ms(), from_ms).into_iter().map(|p| p.0).collect();
    let after = traj.place_time(from_ms, gt.end_ms());
    let total: u64 = after.iter().map(|p| p.1).sum();
    (total > 0).then(|| {
        let new: u64 = after.iter().filter(|p| !before.contains(&p.0)).map(|p| p.1).sum();
        new as f64 / total as f64
    })
}
