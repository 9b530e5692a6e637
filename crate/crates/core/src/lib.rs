//! Access-point geolocation and mobility reconstruction from WiFi scans and
//! sparse GPS fixes.

pub mod ap_locator;
pub mod cli;
pub mod config;
pub mod coverage;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod geo;
pub mod pairing;
pub mod reconstructor;
pub mod synthgen;
pub mod trace_model;

pub use error::{Error, Result};
