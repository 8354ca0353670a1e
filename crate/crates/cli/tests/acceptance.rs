//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the report reads top to bottom; exits nonzero on any failure.

use std::time::{Duration, Instant};

use qfi_optics::linalg::projected_max_eigenvalue;
use qfi_optics::measurement::{classical_fisher, optimal_povm, simulate_ml, MlOptions};
use qfi_optics::optimizer::{
    certify_optimum, fit_power_law, maximize_qfi, threshold_one_arm, threshold_two_arm, StartPoint,
};
use qfi_optics::qfi::{qfi_bound, qfi_exact_value, qfi_mixture, qfi_one_arm, BoundObjective};
use qfi_optics::qubits::{embed_symmetric, qfi_bound_qubits, symmetrize, QubitProbe};
use qfi_optics::strategies::{chop_coefficient, chop_eta0, chop_one_arm, noon_precision, sil};
use qfi_optics::{LossModel, Metric, OptimizerOptions, ProbeState};
use qfi_optics_cli::io::Provenance;
use qfi_optics_cli::sweep::{run_sweep, Grid, Mode, SweepResult, OPTIMAL, OPTIMAL_EXACT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn simplex(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let t: f64 = raw.iter().sum();
    raw.iter().map(|v| v / t).collect()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> ProbeState {
    let x = simplex(rng, n + 1);
    if rng.gen_bool(0.5) {
        let phases = (0..=n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        ProbeState::with_phases(x, phases).unwrap()
    } else {
        ProbeState::new(x).unwrap()
    }
}

fn eta(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.02..=1.0)
}

fn options(start: StartPoint) -> OptimizerOptions {
    OptimizerOptions { start, ..OptimizerOptions::default() }
}

fn lossless_optimum() -> Check {
    for n in [2usize, 5, 10] {
        let r = maximize_qfi(n, LossModel::lossless(), Metric::Bound, &OptimizerOptions::default()).map_err(|e| e.to_string())?;
        let target = (n * n) as f64;
        let x = r.state.weights();
        ensure((r.objective - target).abs() <= 1e-9, || format!("N = {n}: F = {}", r.objective))?;
        ensure((x[0] - 0.5).abs() <= 1e-9 && (x[n] - 0.5).abs() <= 1e-9, || format!("N = {n}: x = {x:?}"))?;
        let exact = qfi_exact_value(&r.state, LossModel::lossless(), 0.0).map_err(|e| e.to_string())?;
        ensure((exact - target).abs() <= 1e-9, || format!("N = {n}: exact F = {exact}"))?;
    }
    Ok("balanced N00N with F = N² for N = 2, 5, 10".into())
}

fn one_arm_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let s = random_state(&mut rng, n);
        let e = eta(&mut rng);
        let closed = qfi_one_arm(&s, e).unwrap();
        let exact = qfi_exact_value(&s, LossModel::one_arm(e).unwrap(), rng.gen_range(-1.0..1.0)).unwrap();
        worst = worst.max((closed - exact).abs());
    }
    ensure(worst <= 1e-9, || format!("max |difference| {worst:e}"))?;
    Ok(format!("max |difference| {worst:.1e} over 100 cases"))
}

fn bound_ordering() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let s = random_state(&mut rng, n);
        let loss = LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap();
        let exact = qfi_exact_value(&s, loss, 0.0).unwrap();
        let bound = qfi_bound(&s, loss).unwrap();
        worst_excess = worst_excess.max(exact - bound);
    }
    ensure(worst_excess <= 1e-9, || format!("exact exceeds bound by {worst_excess:e}"))?;
    let mut worst_noon = 0.0f64;
    for _ in 0..30 {
        let n = rng.gen_range(1..=10);
        let s = ProbeState::noon(n, rng.gen_range(0.0..=1.0)).unwrap();
        let loss = LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap();
        worst_noon = worst_noon.max((qfi_exact_value(&s, loss, 0.0).unwrap() - qfi_bound(&s, loss).unwrap()).abs());
    }
    ensure(worst_noon <= 1e-9, || format!("N00N gap {worst_noon:e}"))?;
    Ok(format!("max exact − bound {worst_excess:.1e}; N00N |gap| ≤ {worst_noon:.1e}"))
}

fn thresholds() -> Check {
    let one = threshold_one_arm(10).map_err(|e| e.to_string())?.eta_bar;
    let two = threshold_two_arm(10).map_err(|e| e.to_string())?.eta_bar;
    ensure((one - 0.91).abs() <= 0.005, || format!("one-arm η̄(10) = {one}"))?;
    ensure((two - 0.92).abs() <= 0.005, || format!("two-arm η̄(10) = {two}"))?;
    let ones: Vec<_> = (5..=100).into_par_iter().map(|n| threshold_one_arm(n).unwrap()).collect();
    let twos: Vec<_> = (2..=100).into_par_iter().map(|n| threshold_two_arm(n).unwrap()).collect();
    let (a1, a2) = (fit_power_law(&ones), fit_power_law(&twos));
    ensure((a1 - 2.61).abs() <= 0.05, || format!("one-arm a = {a1}"))?;
    ensure((a2 - 2.24).abs() <= 0.05, || format!("two-arm a = {a2}"))?;
    Ok(format!("η̄(10) = {one:.4} / {two:.4}; a = {a1:.4} / {a2:.4}"))
}

fn chopping_constants() -> Check {
    let (eta0, c) = (chop_eta0(), chop_coefficient());
    ensure((eta0 - 0.228).abs() <= 0.001, || format!("η₀ = {eta0}"))?;
    ensure((c - 1.478).abs() <= 0.002, || format!("coefficient = {c}"))?;
    for n in [1usize, 2, 5, 10, 50] {
        for i in 1..=40 {
            let e = eta0 * i as f64 / 40.0;
            let chop = chop_one_arm(n, e).unwrap().delta_phi;
            let s = sil(n, LossModel::one_arm(e).unwrap());
            ensure(chop == s, || format!("N = {n}, η = {e}: {chop} ≠ {s}"))?;
        }
    }
    Ok(format!("η₀ = {eta0:.5}, coefficient = {c:.5}, chopping = SIL below η₀"))
}

fn relative_gap(sweep: &SweepResult, i: usize) -> Option<f64> {
    let bound = sweep.column(OPTIMAL)?.delta_phi[i]?;
    let exact = sweep.column(OPTIMAL_EXACT)?.delta_phi[i]?;
    let span = sweep.column("sil")?.delta_phi[i]? - sweep.column("heisenberg")?.delta_phi[i]?;
    Some((exact - bound) / span)
}

fn bound_gap() -> Check {
    let grid = Grid::new(0.3, 0.995, 140).unwrap();
    let sweep = run_sweep(10, Mode::TwoArm, &grid, Provenance::current(None)).map_err(|e| e.to_string())?;
    ensure(sweep.failures.is_empty(), || format!("failed rows {:?}", sweep.failures))?;
    let (mut worst, mut at) = (0.0f64, 0.0);
    for i in 0..sweep.eta_grid.len() {
        let g = relative_gap(&sweep, i).ok_or("missing column")?;
        if g > worst {
            worst = g;
            at = sweep.eta_grid[i];
        }
    }
    ensure(worst <= 0.005, || format!("relative gap {:.3}% at η = {at}", 100.0 * worst))?;
    Ok(format!("max relative gap {:.3}% at η = {at:.3}", 100.0 * worst))
}

fn concavity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let loss = LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap();
        let x = simplex(&mut rng, n + 1);
        let h = BoundObjective::new(n, loss).unwrap().hessian(&x).map_err(|e| e.to_string())?;
        worst = worst.max(projected_max_eigenvalue(&h));
    }
    ensure(worst <= 1e-8, || format!("max projected eigenvalue {worst:e}"))?;
    Ok(format!("max projected eigenvalue {worst:.1e} over 200 points"))
}

/// Best bound value on the grid `x = m/steps` of the 4-component simplex.
fn brute_force_n3(loss: LossModel, steps: usize) -> f64 {
    let obj = BoundObjective::new(3, loss).unwrap();
    let h = 1.0 / steps as f64;
    (0..=steps)
        .into_par_iter()
        .map(|a| {
            let mut best = f64::NEG_INFINITY;
            for b in 0..=steps - a {
                for c in 0..=steps - a - b {
                    let d = steps - a - b - c;
                    best = best.max(obj.value(&[a as f64 * h, b as f64 * h, c as f64 * h, d as f64 * h]));
                }
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

fn optimizer_certification() -> Check {
    let cases = [
        (3, 0.6, 0.6),
        (3, 0.8, 1.0),
        (3, 0.5, 0.9),
        (6, 0.7, 0.7),
        (6, 0.4, 1.0),
        (6, 0.9, 0.6),
        (10, 0.8, 1.0),
        (10, 0.6, 0.6),
        (10, 0.95, 0.95),
        (10, 0.3, 0.8),
    ];
    let mut spread = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for (n, ea, eb) in cases {
        let loss = LossModel::new(ea, eb).unwrap();
        let values: Vec<f64> = (0..10u64)
            .map(|seed| {
                let r = maximize_qfi(n, loss, Metric::Bound, &options(StartPoint::Random(seed))).map_err(|e| e.to_string())?;
                let kkt = certify_optimum(&r, loss).map_err(|e| e.to_string())?;
                worst_kkt = worst_kkt.max(kkt).max(r.kkt_residual);
                Ok(r.objective)
            })
            .collect::<Result<_, String>>()?;
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        spread = spread.max(hi - lo);
    }
    ensure(spread <= 1e-7, || format!("restart spread {spread:e}"))?;
    ensure(worst_kkt <= 1e-7, || format!("KKT residual {worst_kkt:e}"))?;
    let mut excess = f64::NEG_INFINITY;
    for (ea, eb) in [(0.6, 0.6), (0.8, 1.0), (0.5, 0.9)] {
        let loss = LossModel::new(ea, eb).unwrap();
        let opt = maximize_qfi(3, loss, Metric::Bound, &OptimizerOptions::default()).unwrap().objective;
        excess = excess.max(brute_force_n3(loss, 500) - opt);
    }
    ensure(excess <= 1e-4, || format!("grid beats optimum by {excess:e}"))?;
    Ok(format!("restart spread {spread:.1e}, KKT ≤ {worst_kkt:.1e}, grid excess {excess:.1e}"))
}

fn measurement_saturation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let n = rng.gen_range(1..=4);
        let s = random_state(&mut rng, n);
        let loss = LossModel::one_arm(eta(&mut rng)).unwrap();
        let phi0 = rng.gen_range(-1.0..1.0);
        let povm = optimal_povm(&s, loss, phi0).map_err(|e| e.to_string())?;
        let cfi = classical_fisher(&povm, &s, loss, phi0).map_err(|e| e.to_string())?;
        let fq = qfi_exact_value(&s, loss, phi0).unwrap();
        worst = worst.max((cfi - fq).abs());
    }
    ensure(worst <= 1e-8, || format!("|CFI − F_Q| = {worst:e}"))?;
    let mut ratios = Vec::new();
    // a ±π/2 bracket holds a single likelihood period only for one photon
    for (e, seed) in [(1.0, 41u64), (0.7, 42)] {
        let loss = LossModel::one_arm(e).unwrap();
        let s = maximize_qfi(1, loss, Metric::OneArmClosedForm, &OptimizerOptions::default()).unwrap().state;
        let povm = optimal_povm(&s, loss, 0.3).unwrap();
        let run = simulate_ml(&s, loss, &povm, 0.3, 10_000, 200, seed, &MlOptions::default()).map_err(|e| e.to_string())?;
        ensure((0.7..=1.4).contains(&run.variance_ratio), || {
            format!("η = {e}: variance ratio {}", run.variance_ratio)
        })?;
        ratios.push(run.variance_ratio);
    }
    Ok(format!("max |CFI − F_Q| {worst:.1e}; ML variance ratios {:.3}, {:.3}", ratios[0], ratios[1]))
}

fn symmetrization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let p = QubitProbe::new(n, simplex(&mut rng, 1 << n)).unwrap();
        let loss = LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap();
        worst = worst.max(qfi_bound_qubits(&p, loss) - qfi_bound_qubits(&symmetrize(&p), loss));
    }
    ensure(worst <= 1e-9, || format!("symmetrization lowered the bound by {worst:e}"))?;
    let mut ghz_gap = 0.0f64;
    for n in 1..=8 {
        let x0 = rng.gen_range(0.0..=1.0);
        let loss = LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap();
        let ghz = QubitProbe::ghz(n, x0).unwrap();
        let noon = ProbeState::noon(n, x0).unwrap();
        let embedded = embed_symmetric(&ghz).map_err(|e| e.to_string())?;
        let values = [
            qfi_bound_qubits(&ghz, loss),
            qfi_bound(&embedded, loss).unwrap(),
            qfi_bound(&noon, loss).unwrap(),
            qfi_exact_value(&noon, loss, 0.0).unwrap(),
        ];
        for v in &values[1..] {
            ghz_gap = ghz_gap.max((v - values[0]).abs());
        }
    }
    // at the optimal split both equal the closed-form N00N precision
    for n in 1..=8 {
        let loss = LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap();
        let (delta, x0) = noon_precision(n, loss);
        let f = qfi_bound_qubits(&QubitProbe::ghz(n, x0).unwrap(), loss);
        ghz_gap = ghz_gap.max((f - delta.powi(-2)).abs() / f.max(1.0));
    }
    ensure(ghz_gap <= 1e-9, || format!("GHZ and N00N differ by {ghz_gap:e}"))?;
    Ok(format!("max decrease {worst:.1e}; GHZ vs N00N ≤ {ghz_gap:.1e}"))
}

fn mixture_convexity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::NEG_INFINITY;
    for case in 0..50 {
        let n1 = rng.gen_range(1..=4);
        let n2 = loop {
            let m = rng.gen_range(1..=4);
            if m != n1 {
                break m;
            }
        };
        let (s1, s2) = (random_state(&mut rng, n1), random_state(&mut rng, n2));
        let w = rng.gen_range(0.0..=1.0);
        let loss = if case % 2 == 0 { LossModel::lossless() } else { LossModel::new(eta(&mut rng), eta(&mut rng)).unwrap() };
        let mixed = qfi_mixture(&[(w, s1.clone()), (1.0 - w, s2.clone())], loss, 0.0).map_err(|e| e.to_string())?;
        let averaged = w * qfi_exact_value(&s1, loss, 0.0).unwrap() + (1.0 - w) * qfi_exact_value(&s2, loss, 0.0).unwrap();
        worst = worst.max(mixed - averaged);
    }
    ensure(worst <= 1e-9, || format!("mixture exceeds average by {worst:e}"))?;
    Ok(format!("max mixture − average {worst:.1e} over 50 cases"))
}

fn intermediate_weight(x: &[f64]) -> f64 {
    x[1..x.len() - 1].iter().sum()
}

fn check_figure_sweep(sweep: &SweepResult, eta_bar: f64) -> Result<f64, String> {
    let n = sweep.n_photons;
    ensure(sweep.failures.is_empty(), || format!("failed rows {:?}", sweep.failures))?;
    let col = |name: &str| sweep.column(name).unwrap().delta_phi.clone();
    let (best, bound) = (col(OPTIMAL_EXACT), col(OPTIMAL));
    let (sil_c, noon_c, heis) = (col("sil"), col("noon"), col("heisenberg"));
    let mut crossover = None;
    for (i, &e) in sweep.eta_grid.iter().enumerate() {
        let b = best[i].ok_or("missing optimum")?;
        ensure(bound[i].unwrap() <= b * (1.0 + 1e-9), || format!("η = {e}: bound precision above exact"))?;
        ensure(b >= heis[i].unwrap() * (1.0 - 1e-9), || format!("η = {e}: optimum beats Heisenberg"))?;
        for name in ["sil", "noon", "chopping", "sine_state"] {
            let base = col(name)[i].ok_or("missing baseline")?;
            ensure(b <= base * (1.0 + 1e-9), || format!("η = {e}: optimum {b} above {name} {base}"))?;
        }
        let noon_better = noon_c[i].unwrap() < sil_c[i].unwrap();
        match (crossover, noon_better) {
            (None, true) => crossover = Some(e),
            (Some(c), false) => return Err(format!("N00N beats SIL at {c} but not at {e}")),
            _ => {}
        }
        let x = sweep.weights[i].as_ref().unwrap();
        if e > eta_bar + 1e-3 {
            ensure(intermediate_weight(x) <= 1e-6, || format!("η = {e}: not a N00N state {x:?}"))?;
        } else if e < eta_bar - 1e-2 {
            ensure(intermediate_weight(x) > 1e-6, || format!("η = {e}: N00N below threshold"))?;
        }
    }
    let x = sweep.weights[0].as_ref().unwrap();
    ensure(intermediate_weight(x) > 0.5, || format!("strong loss profile {x:?}"))?;
    if sweep.mode == Mode::TwoArm {
        let argmax = (0..=n).max_by(|a, b| x[*a].total_cmp(&x[*b])).unwrap();
        ensure(argmax == n / 2, || format!("strong-loss peak at k = {argmax}"))?;
    }
    crossover.ok_or_else(|| "N00N never beats SIL".to_string())
}

fn figure_reproduction() -> Check {
    let grid = Grid::new(0.05, 1.0, 96).unwrap();
    let one = run_sweep(10, Mode::OneArm, &grid, Provenance::current(None)).map_err(|e| e.to_string())?;
    let two = run_sweep(10, Mode::TwoArm, &grid, Provenance::current(None)).map_err(|e| e.to_string())?;
    let c1 = check_figure_sweep(&one, threshold_one_arm(10).unwrap().eta_bar)?;
    let c2 = check_figure_sweep(&two, threshold_two_arm(10).unwrap().eta_bar)?;
    // N00N and SIL cross where N η^{N/2} = √(Nη), i.e. η = N^{-1/(N-1)}
    let analytic = 10f64.powf(-1.0 / 9.0);
    ensure(c2 >= analytic && c2 - analytic <= 0.01 + 1e-12, || {
        format!("two-arm N00N/SIL crossover at {c2}, expected just above {analytic}")
    })?;
    Ok(format!("orderings hold; N00N beats SIL from η = {c1:.2} (one-arm), {c2:.2} (two-arm, analytic {analytic:.3})"))
}

fn main() {
    let criteria: [(&str, Option<u64>, fn() -> Check); 12] = [
        ("lossless optimum", Some(1), lossless_optimum),
        ("one-arm equivalence", Some(10), one_arm_equivalence),
        ("bound ordering", None, bound_ordering),
        ("thresholds", Some(60), thresholds),
        ("chopping constants", None, chopping_constants),
        ("two-arm bound gap", Some(300), bound_gap),
        ("concavity", None, concavity),
        ("optimizer certification", None, optimizer_certification),
        ("measurement saturation", Some(120), measurement_saturation),
        ("symmetrization", None, symmetrization),
        ("mixture convexity", None, mixture_convexity),
        ("figure reproduction", Some(300), figure_reproduction),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, budget) {
            if elapsed > Duration::from_secs(*limit) {
                outcome = Err(format!("{detail}; over the {limit} s budget"));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("{tag} {:>2} {name}: {detail} [{:.2} s]", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
