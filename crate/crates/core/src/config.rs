//! Flat `key = value` run configuration. Keys are the field names of
//! `WorldSpec`, `PairingConfig` and `LocatorConfig`, plus `bin_ms` and
//! `histogram_days`. `#` starts a comment; unknown keys are errors.

use std::path::Path;
use std::str::FromStr;

use crate::ap_locator::LocatorConfig;
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::pairing::PairingConfig;
use crate::reconstructor::DEFAULT_BIN_MS;
use crate::synthgen::WorldSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub world: WorldSpec,
    pub pairing: PairingConfig,
    pub locator: LocatorConfig,
    pub bin_ms: u64,
    pub histogram_days: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        RunConfig {
            world: WorldSpec::default(),
            pairing: e.pairing,
            locator: e.locator,
            bin_ms: DEFAULT_BIN_MS,
            histogram_days: e.histogram_days,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    match v {
        "" | "none" | "off" => Ok(None),
        _ => num(key, v).map(Some),
    }
}

impl RunConfig {
    pub fn from_str_checked(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.merge(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_checked(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let w = &mut self.world;
        match key {
            "seed" => w.seed = num(key, v)?,
            "n_users" => w.n_users = num(key, v)?,
            "n_days" => w.n_days = num(key, v)?,
            "city_width_km" => w.city_width_km = num(key, v)?,
            "city_height_km" => w.city_height_km = num(key, v)?,
            "density_cell_m" => w.density_cell_m = num(key, v)?,
            "density_noise_sigma" => w.density_noise_sigma = num(key, v)?,
            "ap_noise_sigma" => w.ap_noise_sigma = num(key, v)?,
            "background_aps_per_km2" => w.background_aps_per_km2 = num(key, v)?,
            "place_aps_mean" => w.place_aps_mean = num(key, v)?,
            "outdoor_place_fraction" => w.outdoor_place_fraction = num(key, v)?,
            "visibility_radius_m" => w.visibility_radius_m = num(key, v)?,
            "wifi_scan_period_s" => w.wifi_scan_period_s = num(key, v)?,
            "gps_period_s" => w.gps_period_s = num(key, v)?,
            "gps_noise_m" => w.gps_noise_m = num(key, v)?,
            "mobile_ap_fraction" => w.mobile_ap_fraction = num(key, v)?,
            "routine_change_day" => w.routine_change_day = optional(key, v)?,
            "colocated_fraction" => w.colocated_fraction = num(key, v)?,
            "bus_rider_fraction" => w.bus_rider_fraction = num(key, v)?,
            "start_ms" => w.start_ms = num(key, v)?,
            "origin_lat" => w.origin_lat = num(key, v)?,
            "origin_lon" => w.origin_lon = num(key, v)?,
            "window_ms" => self.pairing.window_ms = num(key, v)?,
            "max_accuracy_m" => self.pairing.max_accuracy_m = optional(key, v)?,
            "eps_m" => self.locator.eps_m = num(key, v)?,
            "min_sightings" => self.locator.min_sightings = num(key, v)?,
            "min_cluster_pts" => self.locator.min_cluster_pts = num(key, v)?,
            "clustered_fraction_min" => self.locator.clustered_fraction_min = num(key, v)?,
            "earth_radius_m" => self.locator.earth_radius_m = num(key, v)?,
            "bin_ms" => self.bin_ms = num(key, v)?,
            "histogram_days" => {
                self.histogram_days = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            pairing: self.pairing,
            locator: self.locator,
            bin_ms: self.bin_ms,
            histogram_days: self.histogram_days.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let c = RunConfig::from_str_checked("# world\nn_users = 5\nseed=9 # trailing\n\nroutine_change_day = none\n").unwrap();
        assert_eq!(c.world.n_users, 5);
        assert_eq!(c.world.seed, 9);
        assert_eq!(c.world.routine_change_day, None);
        let c = RunConfig::from_str_checked("eps_m = 50\nhistogram_days = 1, 2,3\nmax_accuracy_m = 20").unwrap();
        assert_eq!(c.locator.eps_m, 50.0);
        assert_eq!(c.histogram_days, vec![1, 2, 3]);
        assert_eq!(c.pairing.max_accuracy_m, Some(20.0));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let e = RunConfig::from_str_checked("n_user = 5").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("n_user"), "{e}");
        assert!(RunConfig::from_str_checked("n_users 5").is_err());
        assert!(RunConfig::from_str_checked("n_users = five").is_err());
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(RunConfig::from_str_checked("\n# nothing\n").unwrap(), RunConfig::default());
    }
}
