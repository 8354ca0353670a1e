use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfi_optics::measurement::{optimal_povm, simulate_ml, EstimationRun, MlOptions};
use qfi_optics::optimizer::{certify_optimum, fit_power_law, maximize_qfi, threshold_one_arm, threshold_two_arm};
use qfi_optics::qfi::{precision_from_fisher, qfi_exact_value, qfi_report};
use qfi_optics::optimizer::StartPoint;
use qfi_optics::{LossModel, Metric, OptimizerOptions, QfiReport, ThresholdResult};
use qfi_optics_cli::io::{load_state, read_json, to_canonical_json, Provenance, StateFile};
use qfi_optics_cli::plot::render_svg;
use qfi_optics_cli::sweep::{run_sweep, Grid, Mode, SweepResult};
use qfi_optics_cli::{CliError, CliResult};
use serde::Serialize;

const THREADS_VAR: &str = "QFI_OPTICS_THREADS";

#[derive(Parser)]
#[command(name = "qfi-optics", version, about = "Phase-estimation precision of lossy two-mode Fock probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information of a probe from a state file.
    Compute {
        state: PathBuf,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, default_value = "exact")]
        metric: Metric,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal probe weights for a photon number and loss.
    Optimize {
        #[arg(long)]
        photons: usize,
        #[command(flatten)]
        loss: LossArgs,
        /// `bound`, or `one_arm_closed_form` when only arm a is lossy.
        #[arg(long, default_value = "bound")]
        metric: Metric,
        /// Start from a random interior point instead of the uniform one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision of every strategy over a transmissivity grid.
    Sweep {
        #[arg(long)]
        photons: usize,
        #[arg(long)]
        mode: Mode,
        /// `start:stop:steps` inside (0, 1].
        #[arg(long)]
        grid: Grid,
        /// Output path without extension; `.csv` and `.json` are written.
        #[arg(long)]
        out: PathBuf,
    },
    /// Transmissivity below which the N00N state stops being optimal.
    Threshold {
        /// A single photon number or an inclusive range `lo:hi`.
        #[arg(long)]
        photons: String,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo maximum-likelihood estimation with the optimal POVM.
    Simulate {
        #[arg(long)]
        photons: usize,
        #[command(flatten)]
        loss: LossArgs,
        /// Repetitions per trial.
        #[arg(long)]
        nu: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        /// Half-width of the likelihood search window around `phi`. Probes
        /// with N photons need at most π/(2N) to avoid aliased maxima.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        half_width: f64,
        /// Probe to use instead of the optimal one.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG rendering of a sweep JSON file.
    Plot {
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct LossArgs {
    #[arg(long, default_value_t = 1.0)]
    eta_a: f64,
    #[arg(long, default_value_t = 1.0)]
    eta_b: f64,
}

impl LossArgs {
    fn model(self) -> CliResult<LossModel> {
        Ok(LossModel::new(self.eta_a, self.eta_b)?)
    }
}

#[derive(Serialize)]
struct LossRecord {
    eta_a: f64,
    eta_b: f64,
}

impl From<LossModel> for LossRecord {
    fn from(l: LossModel) -> Self {
        Self { eta_a: l.eta_a, eta_b: l.eta_b }
    }
}

#[derive(Serialize)]
struct ComputeRecord {
    provenance: Provenance,
    loss: LossRecord,
    phi: f64,
    #[serde(flatten)]
    report: QfiReport,
}

#[derive(Serialize)]
struct OptimizeRecord {
    provenance: Provenance,
    loss: LossRecord,
    metric: Metric,
    objective: f64,
    delta_phi: f64,
    f_exact: f64,
    kkt_residual: f64,
    iterations: usize,
    converged: bool,
    state: StateFile,
}

#[derive(Serialize)]
struct ThresholdRecord {
    provenance: Provenance,
    mode: Mode,
    thresholds: Vec<ThresholdResult>,
    fit_a: Option<f64>,
}

#[derive(Serialize)]
struct SimulateRecord {
    provenance: Provenance,
    loss: LossRecord,
    state: StateFile,
    run: EstimationRun,
    band: [f64; 2],
    pass: bool,
}

/// Acceptance band for `Var(φ̂)·νF`, widening as `ν` shrinks.
fn variance_band(nu: usize) -> [f64; 2] {
    match nu {
        n if n >= 10_000 => [0.7, 1.4],
        n if n >= 1_000 => [0.6, 1.6],
        _ => [0.5, 2.0],
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let text = to_canonical_json(value)?;
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn parse_photon_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Input(format!("photon range '{s}' is not N or lo:hi"));
    match s.split_once(':') {
        Some((a, b)) => {
            let (lo, hi): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if lo > hi {
                return Err(bad());
            }
            Ok((lo..=hi).collect())
        }
        None => Ok(vec![s.parse().map_err(|_| bad())?]),
    }
}

fn optimal_state(n: usize, loss: LossModel) -> CliResult<qfi_optics::ProbeState> {
    let metric = if loss.is_one_arm() { Metric::OneArmClosedForm } else { Metric::Bound };
    let r = maximize_qfi(n, loss, metric, &OptimizerOptions::default())?;
    certify_optimum(&r, loss)?;
    Ok(r.state)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Compute { state, loss, metric, phi, out } => {
            let probe = load_state(&state)?;
            let loss = loss.model()?;
            let report = qfi_report(&probe, loss, phi, metric)?;
            let record = ComputeRecord { provenance: Provenance::current(None), loss: loss.into(), phi, report };
            emit(&record, out.as_deref())
        }
        Command::Optimize { photons, loss, metric, seed, out } => {
            let loss = loss.model()?;
            let options = OptimizerOptions {
                start: seed.map_or(StartPoint::Uniform, StartPoint::Random),
                ..OptimizerOptions::default()
            };
            let r = maximize_qfi(photons, loss, metric, &options)?;
            let kkt_residual = certify_optimum(&r, loss)?;
            let record = OptimizeRecord {
                provenance: Provenance::current(seed),
                loss: loss.into(),
                metric,
                objective: r.objective,
                delta_phi: precision_from_fisher(r.objective),
                f_exact: qfi_exact_value(&r.state, loss, 0.0)?,
                kkt_residual,
                iterations: r.iterations,
                converged: r.converged,
                state: StateFile::from_state(&r.state),
            };
            emit(&record, out.as_deref())
        }
        Command::Sweep { photons, mode, grid, out } => {
            let result = run_sweep(photons, mode, &grid, Provenance::current(None))?;
            write_text(&out.with_extension("json"), &to_canonical_json(&result)?)?;
            write_text(&out.with_extension("csv"), &result.to_csv()?)?;
            for f in &result.failures {
                eprintln!("row {} (eta = {}): {}", f.index, f.eta, f.message);
            }
            Ok(())
        }
        Command::Threshold { photons, mode, out } => {
            let thresholds = parse_photon_range(&photons)?
                .into_iter()
                .map(|n| match mode {
                    Mode::OneArm => threshold_one_arm(n),
                    Mode::TwoArm => threshold_two_arm(n),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let fit_a = (thresholds.len() > 1).then(|| fit_power_law(&thresholds));
            emit(&ThresholdRecord { provenance: Provenance::current(None), mode, thresholds, fit_a }, out.as_deref())
        }
        Command::Simulate { photons, loss, nu, trials, seed, phi, half_width, state, out } => {
            let loss = loss.model()?;
            let probe = match state {
                Some(path) => load_state(&path)?,
                None => optimal_state(photons, loss)?,
            };
            if probe.n_photons() != photons {
                return Err(CliError::Input(format!("state has {} photons, --photons is {photons}", probe.n_photons())));
            }
            let povm = optimal_povm(&probe, loss, phi)?;
            if !(half_width > 0.0 && half_width <= std::f64::consts::PI) {
                return Err(CliError::Input(format!("half-width {half_width} outside (0, π]")));
            }
            let ml = MlOptions { half_width, ..MlOptions::default() };
            let run = simulate_ml(&probe, loss, &povm, phi, nu, trials, seed, &ml)?;
            let band = variance_band(nu);
            let pass = run.variance_ratio >= band[0] && run.variance_ratio <= band[1];
            let record = SimulateRecord {
                provenance: Provenance::current(Some(seed)),
                loss: loss.into(),
                state: StateFile::from_state(&probe),
                run,
                band,
                pass,
            };
            emit(&record, out.as_deref())
        }
        Command::Plot { sweep, out } => {
            let result: SweepResult = read_json(&sweep)?;
            let svg = render_svg(&result);
            match out {
                Some(path) => write_text(&path, &svg),
                None => {
                    print!("{svg}");
                    Ok(())
                }
            }
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("{THREADS_VAR}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfi-optics: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
