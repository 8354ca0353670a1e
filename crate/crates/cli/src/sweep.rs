//! Transmissivity sweeps over every strategy at a fixed photon number.

use std::fmt;
use std::str::FromStr;

use qfi_optics::optimizer::{certify_optimum, maximize_qfi};
use qfi_optics::qfi::{precision_from_fisher, qfi_exact_value};
use qfi_optics::strategies::{chop_one_arm, chop_two_arm, heisenberg, noon_precision, sil, sine_state};
use qfi_optics::{LossModel, Metric, OptimizerOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{format_sci, parse_sci, Provenance};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OneArm,
    TwoArm,
}

impl Mode {
    pub fn loss(self, eta: f64) -> CliResult<LossModel> {
        Ok(match self {
            Mode::OneArm => LossModel::one_arm(eta)?,
            Mode::TwoArm => LossModel::symmetric(eta)?,
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OneArm => "one-arm",
            Mode::TwoArm => "two-arm",
        })
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "one-arm" => Ok(Mode::OneArm),
            "two-arm" => Ok(Mode::TwoArm),
            other => Err(CliError::Input(format!("unknown mode '{other}', expected one-arm or two-arm"))),
        }
    }
}

/// `start:stop:steps`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Grid {
    /// Transmissivities must lie in `(0, 1]`: at `η = 0` the interferometer
    /// carries no information and the precision of every strategy diverges.
    pub fn new(start: f64, stop: f64, steps: usize) -> CliResult<Self> {
        if !(start > 0.0 && stop <= 1.0) {
            return Err(CliError::Input(format!("grid {start}:{stop} must lie in (0, 1]")));
        }
        if steps == 1 && start == stop {
            return Ok(Self { start, stop, steps });
        }
        if !(steps >= 2 && start < stop) {
            return Err(CliError::Input(format!("grid {start}:{stop}:{steps} is not strictly increasing")));
        }
        Ok(Self { start, stop, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.stop } else { self.start + h * i as f64 })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::Input(format!("grid '{s}' is not start:stop:steps"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts[..] else { return Err(bad()) };
        let start = a.trim().parse().map_err(|_| bad())?;
        let stop = b.trim().parse().map_err(|_| bad())?;
        let steps = c.trim().parse().map_err(|_| bad())?;
        Grid::new(start, stop, steps)
    }
}

/// One strategy's precision across the grid; `None` where it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub metric: String,
    pub delta_phi: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub index: usize,
    pub eta: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub n_photons: usize,
    pub mode: Mode,
    pub eta_grid: Vec<f64>,
    pub columns: Vec<Column>,
    /// Optimal weights per grid point.
    pub weights: Vec<Option<Vec<f64>>>,
    /// Bound minus exact QFI at the optimizer's state.
    pub bound_gap: Vec<Option<f64>>,
    pub failures: Vec<RowFailure>,
}

pub const OPTIMAL: &str = "optimal";
pub const OPTIMAL_EXACT: &str = "optimal_exact";

fn column_layout(mode: Mode) -> [(&'static str, &'static str); 7] {
    let optimal_metric = match mode {
        Mode::OneArm => "one_arm_closed_form",
        Mode::TwoArm => "bound",
    };
    [
        ("sil", "closed_form"),
        ("heisenberg", "closed_form"),
        ("noon", "exact"),
        ("chopping", "closed_form"),
        ("sine_state", "exact"),
        (OPTIMAL, optimal_metric),
        (OPTIMAL_EXACT, "exact"),
    ]
}

struct Row {
    values: [Option<f64>; 7],
    weights: Option<Vec<f64>>,
    bound_gap: Option<f64>,
    failure: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn compute_row(n: usize, mode: Mode, eta: f64, options: &OptimizerOptions) -> Row {
    let mut values = [None; 7];
    let mut failure = None;
    let mut note = |e: CliError| {
        failure.get_or_insert_with(|| e.to_string());
    };
    let loss = match mode.loss(eta) {
        Ok(l) => l,
        Err(e) => return Row { values, weights: None, bound_gap: None, failure: Some(e.to_string()) },
    };
    values[0] = finite(sil(n, loss));
    values[1] = finite(heisenberg(n));
    values[2] = finite(noon_precision(n, loss).0);
    let chop = match mode {
        Mode::OneArm => chop_one_arm(n, eta),
        Mode::TwoArm => chop_two_arm(n, eta),
    };
    match chop {
        Ok(c) => values[3] = finite(c.delta_phi),
        Err(e) => note(e.into()),
    }
    match sine_state(n).and_then(|s| qfi_exact_value(&s, loss, 0.0)) {
        Ok(f) => values[4] = finite(precision_from_fisher(f)),
        Err(e) => note(e.into()),
    }
    let metric = match mode {
        Mode::OneArm => Metric::OneArmClosedForm,
        Mode::TwoArm => Metric::Bound,
    };
    let mut weights = None;
    let mut bound_gap = None;
    let optimum = maximize_qfi(n, loss, metric, options).and_then(|r| certify_optimum(&r, loss).map(|_| r));
    match optimum {
        Ok(r) => match qfi_exact_value(&r.state, loss, 0.0) {
            Ok(exact) => {
                values[5] = finite(precision_from_fisher(r.objective));
                values[6] = finite(precision_from_fisher(exact));
                bound_gap = Some(r.objective - exact);
                weights = Some(r.state.weights().to_vec());
            }
            Err(e) => note(e.into()),
        },
        Err(e) => note(e.into()),
    }
    Row { values, weights, bound_gap, failure }
}

/// Runs every grid point in parallel; output order follows the grid.
pub fn run_sweep(n_photons: usize, mode: Mode, grid: &Grid, provenance: Provenance) -> CliResult<SweepResult> {
    if n_photons == 0 {
        return Err(CliError::Input("a sweep needs at least one photon".into()));
    }
    let options = OptimizerOptions::default();
    let eta_grid = grid.values();
    let rows: Vec<Row> = eta_grid.par_iter().map(|&eta| compute_row(n_photons, mode, eta, &options)).collect();
    let columns = column_layout(mode)
        .iter()
        .enumerate()
        .map(|(c, (name, metric))| Column {
            name: (*name).into(),
            metric: (*metric).into(),
            delta_phi: rows.iter().map(|r| r.values[c]).collect(),
        })
        .collect();
    let failures = rows
        .iter()
        .enumerate()
        .filter_map(|(index, r)| r.failure.clone().map(|message| RowFailure { index, eta: eta_grid[index], message }))
        .collect();
    Ok(SweepResult {
        provenance,
        n_photons,
        mode,
        columns,
        weights: rows.iter().map(|r| r.weights.clone()).collect(),
        bound_gap: rows.iter().map(|r| r.bound_gap).collect(),
        failures,
        eta_grid,
    })
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Comment lines carrying provenance and metric labels, a header row,
    /// then one row per grid point. Missing values are written as `nan`.
    pub fn to_csv(&self) -> CliResult<String> {
        let mut out = String::new();
        let p = &self.provenance;
        out.push_str(&format!("# tool: {} {}\n", p.tool, p.version));
        out.push_str(&format!("# command_line: {}\n", p.command_line));
        if let Some(seed) = p.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        out.push_str(&format!("# n_photons: {}\n# mode: {}\n", self.n_photons, self.mode));
        let metrics: Vec<String> = self.columns.iter().map(|c| format!("{}={}", c.name, c.metric)).collect();
        out.push_str(&format!("# metrics: {}\n", metrics.join(" ")));

        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["eta".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.push("bound_gap".into());
        header.extend((0..=self.n_photons).map(|k| format!("x_{k}")));
        w.write_record(&header).map_err(internal)?;
        let opt = |v: Option<f64>| format_sci(v.unwrap_or(f64::NAN));
        for (i, eta) in self.eta_grid.iter().enumerate() {
            let mut record = vec![format_sci(*eta)];
            record.extend(self.columns.iter().map(|c| opt(c.delta_phi[i])));
            record.push(opt(self.bound_gap[i]));
            match &self.weights[i] {
                Some(x) => record.extend(x.iter().map(|v| format_sci(*v))),
                None => record.extend((0..=self.n_photons).map(|_| opt(None))),
            }
            w.write_record(&record).map_err(internal)?;
        }
        out.push_str(&String::from_utf8(w.into_inner().map_err(internal)?).map_err(internal)?);
        Ok(out)
    }
}

fn internal(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Numeric table read back from [`SweepResult::to_csv`], with `None` for
/// `nan` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

pub fn parse_csv(text: &str) -> CliResult<CsvTable> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::Input(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| CliError::Input(e.to_string()))?;
        let row = record
            .iter()
            .map(|cell| match parse_sci(cell) {
                Some(v) if v.is_nan() => Ok(None),
                Some(v) => Ok(Some(v)),
                None => Err(CliError::Input(format!("bad number '{cell}'"))),
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}
