//! Python bindings for the `wifitrace` core crate.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wifitrace::ap_locator::{self as loc, ApLookup, LocatorConfig};
use wifitrace::coverage::{self, CoverageSeries};
use wifitrace::experiments::{self as exp, ExperimentConfig, ExperimentContext, SamplingStrategy, Scenario};
use wifitrace::geo::EARTH_RADIUS_M;
use wifitrace::pairing::{pair_observations, PairingConfig};
use wifitrace::reconstructor::{build_timeline, DEFAULT_BIN_MS};
use wifitrace::synthgen;
use wifitrace::trace_model::{self as tm, BssidId, GeoPoint, Timestamp};

fn err(e: wifitrace::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn geo(points: &[(f64, f64)]) -> PyResult<Vec<GeoPoint>> {
    points.iter().map(|&(lat, lon)| GeoPoint::new(lat, lon).map_err(err)).collect()
}

#[pyclass(name = "TraceSet", frozen)]
struct PyTraceSet {
    inner: tm::TraceSet,
}

#[pymethods]
impl PyTraceSet {
    /// Reads `gps.jsonl` and `wifi.jsonl`.
    #[staticmethod]
    fn load(gps: PathBuf, wifi: PathBuf) -> PyResult<Self> {
        let (inner, _) = tm::ingest_traces(&gps, &wifi).map_err(err)?;
        Ok(PyTraceSet { inner })
    }

    #[getter]
    fn n_fixes(&self) -> usize {
        self.inner.fixes().len()
    }

    #[getter]
    fn n_scans(&self) -> usize {
        self.inner.scans().len()
    }

    fn users(&self) -> Vec<String> {
        self.inner.users().iter().map(|u| u.to_string()).collect()
    }

    /// Share of scans hearing at least one AP.
    fn nonempty_fraction(&self) -> Option<f64> {
        synthgen::nonempty_fraction(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("TraceSet(fixes={}, scans={})", self.n_fixes(), self.n_scans())
    }
}

#[pyclass(name = "ApDatabase", frozen)]
struct PyApDatabase {
    inner: loc::ApDatabase,
}

#[pymethods]
impl PyApDatabase {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Ok(PyApDatabase { inner: loc::read_apdb_csv(f).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        loc::write_apdb_csv(&self.inner, f).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn census<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.inner.census();
        let d = PyDict::new(py);
        d.set_item("total", c.total)?;
        d.set_item("static", c.static_)?;
        d.set_item("relocated", c.relocated)?;
        d.set_item("mobile", c.mobile)?;
        d.set_item("insufficient", c.insufficient)?;
        Ok(d)
    }

    /// Class name of `bssid`, or None when unknown.
    fn classify(&self, bssid: &str) -> PyResult<Option<&'static str>> {
        let b: BssidId = tm::normalize_bssid(bssid).map_err(err)?;
        Ok(self.inner.get(&b).map(|r| r.class.name()))
    }

    /// `(lat, lon)` of `bssid` at `ts_ms`, if located.
    fn position(&self, bssid: &str, ts_ms: u64) -> PyResult<Option<(f64, f64)>> {
        let b = tm::normalize_bssid(bssid).map_err(err)?;
        Ok(self.inner.position_at(&b, Timestamp(ts_ms)).map(|p| (p.lat(), p.lon())))
    }
}

/// Generates a synthetic dataset into `out_dir`; returns its traces.
#[pyfunction]
#[pyo3(signature = (out_dir, n_users=30, n_days=30, seed=1, routine_change_day=None))]
fn synth(out_dir: PathBuf, n_users: usize, n_days: usize, seed: u64, routine_change_day: Option<usize>) -> PyResult<PyTraceSet> {
    let spec = synthgen::WorldSpec { n_users, n_days, seed, routine_change_day, ..Default::default() };
    let gt = synthgen::generate_world(&spec).map_err(err)?;
    let traces = synthgen::simulate_sensors(&gt, &spec);
    synthgen::write_dataset(&gt, &traces, &out_dir).map_err(err)?;
    Ok(PyTraceSet { inner: traces })
}

/// Pairs fixes with scans and classifies every AP.
#[pyfunction]
#[pyo3(signature = (traces, eps_m=100.0, min_sightings=5, window_ms=1000))]
fn locate(py: Python<'_>, traces: &PyTraceSet, eps_m: f64, min_sightings: usize, window_ms: u64) -> PyResult<PyApDatabase> {
    let pcfg = PairingConfig { window_ms, ..Default::default() };
    let lcfg = LocatorConfig { eps_m, min_sightings, ..Default::default() };
    pcfg.validate().map_err(err)?;
    lcfg.validate().map_err(err)?;
    let inner = py.detach(|| {
        let obs = pair_observations(&traces.inner, &pcfg);
        loc::build_database(&obs, &lcfg, "python")
    });
    Ok(PyApDatabase { inner })
}

/// Daily mean time coverage of `db` over `traces`, keyed by day index.
#[pyfunction]
fn daily_coverage(py: Python<'_>, traces: &PyTraceSet, db: &PyApDatabase) -> Vec<(u64, f64)> {
    py.detach(|| {
        let tl = build_timeline(traces.inner.scans(), &db.inner, DEFAULT_BIN_MS);
        let s = CoverageSeries::from_timelines(&tl, traces.inner.start().unwrap_or_default());
        s.daily_mean.into_iter().collect()
    })
}

#[pyfunction]
fn time_coverage(with_data: usize, covered: usize) -> PyResult<Option<f64>> {
    coverage::time_coverage(with_data, covered).map_err(err)
}

#[pyfunction]
fn entropy_bits(labels: Vec<String>) -> Option<f64> {
    coverage::entropy_bits(labels)
}

/// Cluster index lists and noise indices for `(lat, lon)` points.
#[pyfunction]
#[pyo3(signature = (points, eps_m=100.0, min_pts=5))]
fn dbscan(points: Vec<(f64, f64)>, eps_m: f64, min_pts: usize) -> PyResult<(Vec<Vec<usize>>, Vec<usize>)> {
    if min_pts == 0 {
        return Err(PyValueError::new_err("min_pts must be at least 1"));
    }
    let c = loc::dbscan_points(&geo(&points)?, eps_m, min_pts, EARTH_RADIUS_M);
    Ok((c.clusters, c.noise))
}

#[pyfunction]
fn geometric_median(points: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    if points.is_empty() {
        return Err(PyValueError::new_err("no points"));
    }
    let p = loc::geometric_median(&geo(&points)?, EARTH_RADIUS_M);
    Ok((p.lat(), p.lon()))
}

/// Mean coverage per scenario for one strategy: `initial` (param = days),
/// `random` (param = fraction) or `top` (param = k).
#[pyfunction]
#[pyo3(signature = (traces, strategy, param, seed=1))]
fn run_experiment<'py>(
    py: Python<'py>,
    traces: &PyTraceSet,
    strategy: &str,
    param: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = match strategy {
        "initial" => SamplingStrategy::InitialPeriod { days: param as u32 },
        "random" => SamplingStrategy::RandomFraction { f: param, seed },
        "top" => SamplingStrategy::TopRouters { k: param as usize },
        _ => return Err(PyValueError::new_err(format!("unknown strategy {strategy:?}"))),
    };
    let results = py
        .detach(|| {
            let ctx = ExperimentContext::new(&traces.inner, ExperimentConfig::default())?;
            exp::run_experiments(&ctx, s, &Scenario::ALL)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    for r in results {
        d.set_item(r.scenario.name(), r.mean_coverage)?;
    }
    Ok(d)
}

/// Greedy top-`k` routers from `(ts_ms, [bssid, ...])` scans.
#[pyfunction]
#[pyo3(signature = (scans, k, bin_ms=DEFAULT_BIN_MS))]
fn greedy_top_routers(scans: Vec<(u64, Vec<String>)>, k: usize, bin_ms: u64) -> PyResult<Vec<String>> {
    if k == 0 || bin_ms == 0 {
        return Err(PyValueError::new_err("k and bin_ms must be positive"));
    }
    let user = tm::UserId::new("py").map_err(err)?;
    let mut v = Vec::with_capacity(scans.len());
    for (ts, macs) in scans {
        let uniq: BTreeSet<BssidId> = macs.iter().map(|m| tm::normalize_bssid(m)).collect::<Result<_, _>>().map_err(err)?;
        let aps = uniq.into_iter().map(|b| tm::ApSighting::new(b, None, None)).collect::<Result<_, _>>().map_err(err)?;
        v.push(tm::WifiScan::new(user.clone(), Timestamp(ts), aps));
    }
    v.sort_by_key(|s| s.ts);
    Ok(exp::greedy_top_routers(&v, k, bin_ms).iter().map(|b| b.to_string()).collect())
}

#[pymodule]
fn pywifitrace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTraceSet>()?;
    m.add_class::<PyApDatabase>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(locate, m)?)?;
    m.add_function(wrap_pyfunction!(daily_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(time_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_bits, m)?)?;
    m.add_function(wrap_pyfunction!(dbscan, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_median, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_top_routers, m)?)?;
    Ok(())
}
