//! Maximization of the concave bound `F̃_Q` over the probability simplex,
//! KKT certification of the result, and the transmissivity thresholds
//! below which the N00N state stops being optimal.
//!
//! The ascent is a projected gradient method with Barzilai-Borwein trial
//! steps and Armijo backtracking, run on iterates held at least
//! `interior_floor` away from the boundary. Once it stalls, the support is
//! read off and a Newton iteration restricted to that face drives the KKT
//! residual down to rounding level. Off-face violations send the iterate
//! back to the gradient phase.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{LossModel, ProbeState};
use crate::linalg::{projected_max_eigenvalue, sum_zero_basis};
use crate::qfi::{BoundObjective, Metric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    Uniform,
    /// Random interior point drawn from a flat Dirichlet distribution.
    Random(u64),
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    pub objective_tolerance: f64,
    pub interior_floor: f64,
    pub support_threshold: f64,
    pub start: StartPoint,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            kkt_tolerance: 1e-7,
            objective_tolerance: 1e-12,
            interior_floor: 1e-12,
            support_threshold: 1e-9,
            start: StartPoint::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub state: ProbeState,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub metric: Metric,
    pub loss: LossModel,
}

/// Euclidean projection onto `{x : x_i >= 0, Σ x_i = 1}` by sorting.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|vi| (vi - theta).max(0.0)).collect()
}

fn floor_interior(x: &[f64], floor: f64) -> Vec<f64> {
    let y: Vec<f64> = x.iter().map(|v| v.max(floor)).collect();
    let s: f64 = y.iter().sum();
    y.into_iter().map(|v| v / s).collect()
}

fn threshold_support(x: &[f64], threshold: f64) -> Vec<f64> {
    let y: Vec<f64> = x.iter().map(|v| if *v < threshold { 0.0 } else { *v }).collect();
    let s: f64 = y.iter().sum();
    y.into_iter().map(|v| v / s).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stationarity residual of `max F` over the simplex at `x`, given the
/// one-sided gradient `g`: the spread of `g` on the support around
/// `λ = Σ x_i g_i`, and the excess of `g` over `λ` off the support.
pub fn kkt_residual(x: &[f64], g: &[f64]) -> f64 {
    let lambda = dot(x, g);
    x.iter().zip(g).fold(0.0f64, |r, (xi, gi)| {
        if *xi > 0.0 {
            r.max((gi - lambda).abs())
        } else {
            r.max(gi - lambda)
        }
    })
}

struct Ascent<'a> {
    objective: &'a BoundObjective,
    options: &'a OptimizerOptions,
    iterations: usize,
}

impl Ascent<'_> {
    /// Projected gradient phase on floored iterates. Returns the last
    /// accepted iterate.
    fn gradient_phase(&mut self, start: Vec<f64>) -> Vec<f64> {
        let floor = self.options.interior_floor;
        let mut x = floor_interior(&start, floor);
        let mut f = self.objective.value(&x);
        let mut g = self.objective.gradient_one_sided(&x);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut step = 1.0 / gmax;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut stalls = 0;

        while self.iterations < self.options.max_iterations {
            self.iterations += 1;
            if let Some((px, pg)) = &prev {
                let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy < 0.0 {
                    step = (dot(&s, &s) / -sy).clamp(1e-12, 1e6);
                }
            }
            let mut accepted = None;
            let mut trial = step;
            for _ in 0..80 {
                let moved: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + trial * b).collect();
                let cand = floor_interior(&project_simplex(&moved), floor);
                let d: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
                let fc = self.objective.value(&cand);
                if fc >= f + 1e-4 * dot(&g, &d) && fc >= f {
                    accepted = Some((cand, fc));
                    break;
                }
                trial *= 0.5;
            }
            let Some((cand, fc)) = accepted else { break };
            let improvement = fc - f;
            prev = Some((x, g));
            x = cand;
            f = fc;
            g = self.objective.gradient_one_sided(&x);
            if improvement < self.options.objective_tolerance {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }
        x
    }

    /// Newton iteration on the face spanned by the support of `x`.
    /// Coordinates that reach zero leave the face.
    fn face_newton(&mut self, mut x: Vec<f64>) -> Vec<f64> {
        let mut f = self.objective.value(&x);
        for _ in 0..100 {
            if self.iterations >= self.options.max_iterations {
                break;
            }
            self.iterations += 1;
            let support: Vec<usize> = (0..x.len()).filter(|i| x[*i] > 0.0).collect();
            if support.len() < 2 {
                break;
            }
            let g = self.objective.gradient_one_sided(&x);
            let lambda = dot(&x, &g);
            let on_face = support.iter().fold(0.0f64, |r, i| r.max((g[*i] - lambda).abs()));
            if on_face < 1e-13 * lambda.abs().max(1.0) {
                break;
            }
            let h = self.objective.face_hessian(&x);
            let m = support.len();
            let hs = DMatrix::from_fn(m, m, |i, j| h[(support[i], support[j])]);
            let gs = DVector::from_iterator(m, support.iter().map(|i| g[*i]));
            let q = sum_zero_basis(m);
            let reduced = q.transpose() * &hs * &q;
            let scale = reduced.amax().max(1e-300);
            let neg = -reduced + DMatrix::identity(m - 1, m - 1) * (1e-13 * scale);
            let Some(chol) = neg.cholesky() else { break };
            let z = chol.solve(&(q.transpose() * &gs));
            let d = &q * z;

            // largest feasible step, then backtrack on the objective
            let mut t_max = 1.0f64;
            for (r, i) in support.iter().enumerate() {
                if d[r] < 0.0 {
                    t_max = t_max.min(-x[*i] / d[r]);
                }
            }
            let mut t = t_max;
            let mut moved = false;
            for _ in 0..40 {
                let mut cand = x.clone();
                for (r, i) in support.iter().enumerate() {
                    cand[*i] = (x[*i] + t * d[r]).max(0.0);
                }
                if t == t_max && t_max < 1.0 {
                    // the blocking coordinate leaves the face
                    for (r, i) in support.iter().enumerate() {
                        if d[r] < 0.0 && (x[*i] + t * d[r]) <= 1e-15 {
                            cand[*i] = 0.0;
                        }
                    }
                }
                let s: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|v| *v /= s);
                let fc = self.objective.value(&cand);
                if fc >= f {
                    x = cand;
                    f = fc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }
}

fn start_point(n: usize, start: &StartPoint) -> Result<Vec<f64>> {
    match start {
        StartPoint::Uniform => Ok(vec![1.0 / (n + 1) as f64; n + 1]),
        StartPoint::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let e: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            Ok(e.into_iter().map(|v| v / s).collect())
        }
        StartPoint::Given(x) => {
            if x.len() != n + 1 {
                return Err(Error::InvalidState(format!("start point has {} weights, expected {}", x.len(), n + 1)));
            }
            Ok(ProbeState::normalized(x.clone())?.weights().to_vec())
        }
    }
}

fn symmetrize(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|k| 0.5 * (x[k] + x[n - 1 - k])).collect()
}

/// Maximizes `F̃_Q` (or, for one-arm loss, the identical exact `F_Q`) over
/// all `N`-photon weight vectors. The returned point is certified by its
/// KKT residual; `converged` is false when the tolerance was not reached.
pub fn maximize_qfi(n_photons: usize, loss: LossModel, metric: Metric, options: &OptimizerOptions) -> Result<OptimizationResult> {
    if n_photons == 0 {
        return Err(Error::InvalidState("need at least one photon".into()));
    }
    match metric {
        Metric::Exact => return Err(Error::Domain("the exact two-arm QFI is not a concave objective; use the bound".into())),
        Metric::OneArmClosedForm if !loss.is_one_arm() => {
            return Err(Error::Domain(format!("one-arm objective needs eta_b = 1, got {}", loss.eta_b)))
        }
        _ => {}
    }
    let objective = BoundObjective::new(n_photons, loss)?;
    let mut ascent = Ascent { objective: &objective, options, iterations: 0 };
    let symmetric = loss.is_symmetric();

    let mut x = start_point(n_photons, &options.start)?;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for _round in 0..25 {
        x = ascent.gradient_phase(x);
        if symmetric {
            x = symmetrize(&x);
        }
        x = threshold_support(&x, options.support_threshold);
        x = ascent.face_newton(x);
        if symmetric {
            x = symmetrize(&x);
        }
        let g = objective.gradient_one_sided(&x);
        let residual = kkt_residual(&x, &g);
        let value = objective.value(&x);
        if best.as_ref().map_or(true, |b| value > b.1 || (value == b.1 && residual < b.2)) {
            best = Some((x.clone(), value, residual));
        }
        if residual <= options.kkt_tolerance || ascent.iterations >= options.max_iterations {
            break;
        }
    }
    let (x, objective_value, residual) = best.expect("at least one round runs");
    let state = ProbeState::normalized(x)?;
    Ok(OptimizationResult {
        state,
        objective: objective_value,
        kkt_residual: residual,
        iterations: ascent.iterations,
        converged: residual <= options.kkt_tolerance,
        metric,
        loss,
    })
}

/// Recomputes the KKT residual of `result` from a fresh gradient and
/// checks that the Hessian on the optimal face is negative semidefinite.
/// Fails when the residual exceeds ten times the default tolerance.
pub fn certify_optimum(result: &OptimizationResult, loss: LossModel) -> Result<f64> {
    let objective = BoundObjective::new(result.state.n_photons(), loss)?;
    let x = result.state.weights();
    let residual = kkt_residual(x, &objective.gradient_one_sided(x));
    let limit = 10.0 * OptimizerOptions::default().kkt_tolerance;
    if !(residual <= limit) {
        return Err(Error::CertificationFailed { residual, limit });
    }
    let support: Vec<usize> = (0..x.len()).filter(|i| x[*i] > 0.0).collect();
    let h = objective.face_hessian(x);
    let hs = DMatrix::from_fn(support.len(), support.len(), |i, j| h[(support[i], support[j])]);
    let top = projected_max_eigenvalue(&hs);
    if top > 1e-8 * hs.amax().max(1.0) {
        return Err(Error::NotConcave(top));
    }
    Ok(residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    PolynomialRoot,
    PerturbationScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub n_photons: usize,
    pub eta_bar: f64,
    pub method: ThresholdMethod,
    /// `a` such that `eta_bar = a^{-1/N}`, for a single `N`.
    pub fit_a: Option<f64>,
}

/// The bracketed polynomial whose root in `(0, 1)` is the one-arm N00N
/// threshold; positive below the threshold.
pub fn one_arm_threshold_polynomial(n_photons: usize, eta: f64) -> f64 {
    let n = n_photons as f64;
    let half = eta.powf(n / 2.0);
    (1.0 - 2.0 * n) * eta.powf(n) - 2.0 * n * (n - 1.0) * half * eta + 2.0 * (n - 1.0).powi(2) * half
        - n * (n - 2.0) * eta
        + (n - 1.0).powi(2)
}

fn bisect_sign(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo > 0.0 && fhi <= 0.0) {
        return Err(Error::Bracket(format!("f({lo}) = {flo}, f({hi}) = {fhi}")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transmissivity below which the unbalanced N00N state stops being
/// optimal for loss in one arm.
pub fn threshold_one_arm(n_photons: usize) -> Result<ThresholdResult> {
    if n_photons < 2 {
        return Err(Error::Domain("threshold needs N >= 2".into()));
    }
    let eta_bar = bisect_sign(0.0, 1.0, 1e-12, |e| one_arm_threshold_polynomial(n_photons, e))?;
    Ok(ThresholdResult {
        n_photons,
        eta_bar,
        method: ThresholdMethod::PolynomialRoot,
        fit_a: Some(eta_bar.powf(-(n_photons as f64))),
    })
}

/// Largest first-order gain from moving weight from the optimal N00N
/// state into one intermediate component `k`, at the expense of `x_0` and
/// `x_N` in proportion. Positive when the N00N state is not optimal.
///
/// Along `e_k - x` every event that is impossible for the N00N state sees
/// only component `k`, which has no spread, so the directional derivative
/// is `g_k - g·x` with the one-sided gradient `g`.
pub fn noon_perturbation_gain(n_photons: usize, loss: LossModel) -> Result<f64> {
    let objective = BoundObjective::new(n_photons, loss)?;
    let x0 = crate::strategies::noon_precision(n_photons, loss).1;
    let mut x = vec![0.0; n_photons + 1];
    x[0] = x0;
    x[n_photons] = 1.0 - x0;
    let g = objective.gradient_one_sided(&x);
    let base = x0 * g[0] + (1.0 - x0) * g[n_photons];
    Ok(g[1..n_photons].iter().map(|gk| gk - base).fold(f64::NEG_INFINITY, f64::max))
}

/// Transmissivity below which the balanced N00N state stops being optimal
/// for equal loss in both arms, located by bisection on the sign of
/// [`noon_perturbation_gain`].
pub fn threshold_two_arm(n_photons: usize) -> Result<ThresholdResult> {
    if n_photons < 2 {
        return Err(Error::Domain("threshold needs N >= 2".into()));
    }
    let gain = |eta: f64| noon_perturbation_gain(n_photons, LossModel { eta_a: eta, eta_b: eta }).unwrap_or(f64::NAN);
    // scan in u = -N ln η, where the threshold sits near u = ln 2.24
    let n = n_photons as f64;
    let mut hi = 1.0;
    let mut lo = None;
    for i in 1..=400 {
        let eta = (-(i as f64) * 0.02 / n).exp();
        if gain(eta) > 0.0 {
            lo = Some(eta);
            break;
        }
        hi = eta;
    }
    let lo = lo.ok_or_else(|| Error::Bracket(format!("no sign change found for N = {n_photons}")))?;
    let eta_bar = bisect_sign(lo, hi, 1e-12, gain)?;
    Ok(ThresholdResult {
        n_photons,
        eta_bar,
        method: ThresholdMethod::PerturbationScan,
        fit_a: Some(eta_bar.powf(-n)),
    })
}

/// Least-squares fit of `η̄(N) ≈ a^{-1/N}` in the transmissivity itself.
pub fn fit_power_law(thresholds: &[ThresholdResult]) -> f64 {
    let cost = |a: f64| -> f64 {
        thresholds
            .iter()
            .map(|t| (t.eta_bar - a.powf(-1.0 / t.n_photons as f64)).powi(2))
            .sum()
    };
    let (mut lo, mut hi) = (1.0f64, 10.0f64);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - r * (hi - lo), lo + r * (hi - lo));
    while hi - lo > 1e-12 {
        if cost(c) < cost(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - r * (hi - lo);
        d = lo + r * (hi - lo);
    }
    0.5 * (lo + hi)
}
