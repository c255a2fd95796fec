//! CSV emission and the JSON metadata sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{MLE_GRID_POINTS, MLE_TOLERANCE, MLE_WINDOW};
use crate::fisher::{PROBABILITY_FLOOR, SLD_FLOOR};
use crate::interferometer::{Cutoffs, ENSEMBLE_CUT};

use super::config::ScenarioConfig;
use super::optimize::{GRID_POINTS, PARAMETER_TOLERANCE, TIE_TOLERANCE};
use super::sweep::MONOTONE_SLACK;

/// Version tag of the CSV layouts; bumped whenever a column changes.
pub const SCHEMA: &str = "phaseref-csv/1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub deficit_tolerance: f64,
    pub cutoff_guard: usize,
    pub ensemble_cut: f64,
    pub sld_floor: f64,
    pub probability_floor: f64,
    pub optimizer_grid_points: usize,
    pub optimizer_tolerance: f64,
    pub tie_tolerance: f64,
    pub mle_window: f64,
    pub mle_grid_points: usize,
    pub mle_tolerance: f64,
    pub monotone_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assumptions {
    pub reference_lossy: bool,
    pub input_phases: &'static str,
    pub squeezed_mode: &'static str,
    pub loss: &'static str,
    pub two_phase_split: &'static str,
    pub counting_convention: String,
    pub operating_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sidecar {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub columns: Vec<String>,
    /// Per-row cutoffs, `null` for failed rows.
    pub cutoffs: Vec<Option<Cutoffs>>,
    pub tolerances: Tolerances,
    pub assumptions: Assumptions,
    /// Command-specific summary.
    pub summary: serde_json::Value,
}

impl Sidecar {
    pub fn new(command: &str, cfg: &ScenarioConfig, columns: &[&str], cutoffs: Vec<Option<Cutoffs>>) -> Self {
        Self {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            cutoffs,
            tolerances: Tolerances {
                deficit_tolerance: cfg.deficit_tolerance,
                cutoff_guard: cfg.cutoff_guard,
                ensemble_cut: ENSEMBLE_CUT,
                sld_floor: SLD_FLOOR,
                probability_floor: PROBABILITY_FLOOR,
                optimizer_grid_points: GRID_POINTS,
                optimizer_tolerance: PARAMETER_TOLERANCE,
                tie_tolerance: TIE_TOLERANCE,
                mle_window: MLE_WINDOW,
                mle_grid_points: MLE_GRID_POINTS,
                mle_tolerance: MLE_TOLERANCE,
                monotone_slack: MONOTONE_SLACK,
            },
            assumptions: Assumptions {
                reference_lossy: cfg.reference_lossy,
                input_phases: if cfg.optimal_phases() {
                    "optimal: alpha and r real and positive"
                } else {
                    "as configured by alpha_phase and r_phase"
                },
                squeezed_mode: if cfg.swap_modes { "b" } else { "a" },
                loss: "equal pure loss on both arms",
                two_phase_split: "phi1 = phi/2, phi2 = -phi/2 relative to the reference",
                counting_convention: serde_json::to_value(cfg.counting_convention)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                operating_phase: cfg.phi,
            },
            summary: serde_json::Value::Null,
        }
    }

    pub fn with_summary(mut self, summary: impl Serialize) -> Self {
        self.summary = serde_json::to_value(summary).unwrap_or(serde_json::Value::Null);
        self
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// Writes rows with a header derived from their field names.
pub fn write_csv<T: Serialize>(writer: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the CSV to `out` and the sidecar next to it.
pub fn write_outputs<T: Serialize>(out: &Path, rows: &[T], sidecar: &Sidecar) -> Result<()> {
    let file = std::fs::File::create(out).map_err(|e| io_error(out, e))?;
    write_csv(std::io::BufWriter::new(file), rows)?;
    let meta = sidecar_path(out);
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| io_error(&meta, e))?;
    std::fs::write(&meta, json + "\n").map_err(|e| io_error(&meta, e))
}
