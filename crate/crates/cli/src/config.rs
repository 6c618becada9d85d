//! The resolved configuration of one run, as recorded in the manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    SteadyState,
    Report,
    Moran,
    Jcurve,
    Scenario,
    Ingest,
    Correlate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub system: Option<PathBuf>,
    pub scenario: Option<String>,
    pub trajectory: Option<PathBuf>,
    pub layout: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub activity: Option<PathBuf>,
    pub out: PathBuf,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub tol: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub band_width_km: f64,
    /// Growth-rate window in months.
    pub window: Option<f64>,
    pub bins: usize,
    pub shuffles: usize,
    /// Snapshot time for Moran's index; the final sample when absent.
    pub at: Option<f64>,
}

pub const DEFAULT_DT: f64 = 1.0;
pub const DEFAULT_T_END: f64 = 72.0;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_BINS: usize = 20;

impl RunConfig {
    pub fn new(command: CommandKind, out: PathBuf) -> Self {
        RunConfig {
            command,
            system: None,
            scenario: None,
            trajectory: None,
            layout: None,
            attributes: None,
            activity: None,
            out,
            dt: None,
            t_end: None,
            seed: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            threshold: DEFAULT_THRESHOLD,
            band_width_km: growth_centers::spatial::DEFAULT_BAND_WIDTH_KM,
            window: None,
            bins: DEFAULT_BINS,
            shuffles: 0,
            at: None,
        }
    }

    /// Range checks on the numeric overrides.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: String| Err(CliError::Input(format!("--{what} = {v} is out of range")));
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt", dt.to_string());
            }
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return bad("t-end", t.to_string());
            }
        }
        if let (Some(dt), Some(t)) = (self.dt, self.t_end) {
            if dt > t {
                return Err(CliError::Input(format!("--dt {dt} exceeds --t-end {t}")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("tol", self.tol.to_string());
        }
        if self.max_iter == 0 {
            return bad("max-iter", "0".into());
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad("threshold", self.threshold.to_string());
        }
        if !(self.band_width_km > 0.0 && self.band_width_km.is_finite()) {
            return bad("band-width-km", self.band_width_km.to_string());
        }
        if let Some(w) = self.window {
            if !(w > 0.0 && w.is_finite()) {
                return bad("window", w.to_string());
            }
        }
        if self.bins < 2 {
            return bad("bins", self.bins.to_string());
        }
        if self.shuffles == 1 {
            return bad("shuffles", "1".into());
        }
        Ok(())
    }
}
