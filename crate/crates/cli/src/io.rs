//! State files, canonical JSON and CSV number formatting.

use std::path::Path;

use qfi_optics::ProbeState;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::{CliError, CliResult, TOOL_NAME, TOOL_VERSION};

/// Weights further than this from unit sum are rejected rather than
/// renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub n_photons: usize,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
}

impl StateFile {
    pub fn from_state(state: &ProbeState) -> Self {
        Self {
            n_photons: state.n_photons(),
            weights: state.weights().to_vec(),
            phases: state.has_phases().then(|| state.phases().to_vec()),
        }
    }

    pub fn to_state(&self) -> CliResult<ProbeState> {
        if self.weights.len() != self.n_photons + 1 {
            return Err(CliError::Input(format!(
                "n_photons = {} needs {} weights, found {}",
                self.n_photons,
                self.n_photons + 1,
                self.weights.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(CliError::Input(format!("weight {w} is not a nonnegative number")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(CliError::Input(format!("weights sum to {total}, expected 1 within {RENORMALIZE_TOLERANCE:e}")));
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w / total).collect();
        let state = match &self.phases {
            Some(p) => ProbeState::with_phases(weights, p.clone()),
            None => ProbeState::new(weights),
        };
        Ok(state?)
    }
}

/// Who produced a file, and how to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command_line: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn current(seed: Option<u64>) -> Self {
        let command_line = std::env::args().collect::<Vec<_>>().join(" ");
        Self { tool: TOOL_NAME.into(), version: TOOL_VERSION.into(), command_line, seed }
    }
}

/// Pretty JSON with keys sorted at every level and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> CliResult<String> {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let v = serde_json::to_value(value).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, to_canonical_json(value)?)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_state(path: &Path) -> CliResult<ProbeState> {
    read_json::<StateFile>(path)?.to_state()
}

/// C-style `%.12e`: `1.234000000000e-05`, `nan` for missing values.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// Inverse of [`format_sci`].
pub fn parse_sci(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}
