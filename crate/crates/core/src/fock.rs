//! Two-mode Fock probe states, the beam-splitter loss model and the
//! decomposition of the lossy output into conditional pure branches.
//!
//! A probe with `N` photons is `Σ_k α_k |k, N-k⟩`, where `k` counts the
//! photons in the phase-carrying arm `a`. Loss in each arm is a fictitious
//! beam splitter with power transmissivity `η`, so a Fock component loses
//! `l_a` photons from arm `a` and `l_b` from arm `b` with binomial weight
//! `B^k_{l_a l_b}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest photon number accepted anywhere in the crate. Binomials are
/// evaluated in `f64` by multiplicative recurrence; up to this bound they
/// stay finite with relative error near machine precision.
pub const MAX_PHOTONS: usize = 128;

/// Tolerance on `Σ x_k = 1` for a valid probe.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// `C(n, k)` as a float. Returns 0 for `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    debug_assert!(c.is_finite());
    c
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

fn check_photons(n: usize) -> Result<()> {
    if n > MAX_PHOTONS {
        return Err(Error::TooManyPhotons { n, max: MAX_PHOTONS });
    }
    Ok(())
}

/// An `N`-photon two-mode pure state with weights `x_k = |α_k|²` on
/// `|k, N-k⟩` and optional phases `arg α_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    n_photons: usize,
    weights: Vec<f64>,
    phases: Vec<f64>,
}

impl ProbeState {
    /// Builds a state from weights `x_0..x_N`. The weights must be
    /// nonnegative and sum to one within [`WEIGHT_TOLERANCE`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let phases = vec![0.0; weights.len()];
        Self::with_phases(weights, phases)
    }

    pub fn with_phases(weights: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidState("weights vector is empty".into()));
        }
        let n_photons = weights.len() - 1;
        check_photons(n_photons)?;
        if phases.len() != weights.len() {
            return Err(Error::InvalidState(format!(
                "{} phases given for {} weights",
                phases.len(),
                weights.len()
            )));
        }
        if let Some((k, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidState(format!("weight x_{k} = {w} is not a nonnegative number")));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidState("non-finite phase".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidState(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { n_photons, weights, phases })
    }

    /// Divides nonnegative weights by their sum before validating.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// Builds a state from complex amplitudes `α_k`, which must be
    /// normalized.
    pub fn from_amplitudes(amplitudes: &[Complex64]) -> Result<Self> {
        let weights = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let phases = amplitudes.iter().map(|a| a.arg()).collect();
        Self::with_phases(weights, phases)
    }

    /// `sqrt(x_N)|N,0⟩ + sqrt(x_0)|0,N⟩`.
    pub fn noon(n_photons: usize, x0: f64) -> Result<Self> {
        if n_photons == 0 {
            return Err(Error::InvalidState("a N00N state needs at least one photon".into()));
        }
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::InvalidState(format!("x_0 = {x0} outside [0, 1]")));
        }
        let mut w = vec![0.0; n_photons + 1];
        w[0] = x0;
        w[n_photons] = 1.0 - x0;
        Self::new(w)
    }

    /// The single Fock component `|k, N-k⟩`.
    pub fn fock(n_photons: usize, k: usize) -> Result<Self> {
        if k > n_photons {
            return Err(Error::IndexOutOfRange(format!("k = {k} > N = {n_photons}")));
        }
        let mut w = vec![0.0; n_photons + 1];
        w[k] = 1.0;
        Self::new(w)
    }

    pub fn uniform(n_photons: usize) -> Result<Self> {
        Self::new(vec![1.0 / (n_photons + 1) as f64; n_photons + 1])
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn has_phases(&self) -> bool {
        self.phases.iter().any(|p| *p != 0.0)
    }

    /// `α_k = sqrt(x_k) e^{i θ_k}`.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.weights
            .iter()
            .zip(&self.phases)
            .map(|(x, t)| Complex64::from_polar(x.sqrt(), *t))
            .collect()
    }

    /// Mean of `k` under the weights.
    pub fn mean_k(&self) -> f64 {
        self.weights.iter().enumerate().map(|(k, x)| k as f64 * x).sum()
    }

    /// Variance of `k` under the weights.
    pub fn variance_k(&self) -> f64 {
        let m = self.mean_k();
        self.weights
            .iter()
            .enumerate()
            .map(|(k, x)| (k as f64 - m).powi(2) * x)
            .sum()
    }
}

/// Per-arm power transmissivities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub eta_a: f64,
    pub eta_b: f64,
}

impl LossModel {
    pub fn new(eta_a: f64, eta_b: f64) -> Result<Self> {
        for (arm, eta) in [("a", eta_a), ("b", eta_b)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidLoss(format!("eta_{arm} = {eta} outside [0, 1]")));
            }
        }
        Ok(Self { eta_a, eta_b })
    }

    pub fn lossless() -> Self {
        Self { eta_a: 1.0, eta_b: 1.0 }
    }

    /// Loss in arm `a` only.
    pub fn one_arm(eta: f64) -> Result<Self> {
        Self::new(eta, 1.0)
    }

    /// Equal loss in both arms.
    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub fn is_one_arm(&self) -> bool {
        self.eta_b == 1.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.eta_a == self.eta_b
    }
}

/// `B^k_{l_a l_b}`, the probability that the component `|k, N-k⟩` loses
/// `l_a` photons from arm `a` and `l_b` from arm `b`.
///
/// Evaluated as `C(k,l_a) C(N-k,l_b) η_a^{k-l_a} (1-η_a)^{l_a} η_b^{N-k-l_b} (1-η_b)^{l_b}`,
/// which is exact at `η = 0` and `η = 1`.
pub fn loss_coefficient(n: usize, k: usize, lost_a: usize, lost_b: usize, loss: LossModel) -> Result<f64> {
    check_photons(n)?;
    if k > n || lost_a > k || lost_b > n - k {
        return Err(Error::IndexOutOfRange(format!(
            "need 0 <= l_a <= k <= N and 0 <= l_b <= N-k, got N={n} k={k} l_a={lost_a} l_b={lost_b}"
        )));
    }
    Ok(binomial(k, lost_a)
        * binomial(n - k, lost_b)
        * loss.eta_a.powi((k - lost_a) as i32)
        * (1.0 - loss.eta_a).powi(lost_a as i32)
        * loss.eta_b.powi((n - k - lost_b) as i32)
        * (1.0 - loss.eta_b).powi(lost_b as i32))
}

/// The coefficient vector `b_k = B^k_{l_a l_b}` of one loss event, zero
/// outside `l_a <= k <= N - l_b`.
#[derive(Debug, Clone)]
pub struct LossBranch {
    pub lost_a: usize,
    pub lost_b: usize,
    pub coefficients: Vec<f64>,
}

impl LossBranch {
    pub fn lost_total(&self) -> usize {
        self.lost_a + self.lost_b
    }

    /// Range of input components `k` that can produce this event.
    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.lost_a..=(self.coefficients.len() - 1 - self.lost_b)
    }
}

/// All loss events for `N` photons, ordered by total loss `l_a + l_b`
/// and then by `l_a`. Events that cannot occur for the given `η` (all
/// coefficients zero) are kept so that indices do not depend on `η`.
pub fn loss_branches(n: usize, loss: LossModel) -> Result<Vec<LossBranch>> {
    check_photons(n)?;
    let pow = |base: f64| {
        let mut v = vec![1.0; n + 1];
        for j in 1..=n {
            v[j] = v[j - 1] * base;
        }
        v
    };
    let (ta, ra) = (pow(loss.eta_a), pow(1.0 - loss.eta_a));
    let (tb, rb) = (pow(loss.eta_b), pow(1.0 - loss.eta_b));
    let rows: Vec<Vec<f64>> = (0..=n).map(binomial_row).collect();

    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for total in 0..=n {
        for lost_a in 0..=total {
            let lost_b = total - lost_a;
            let mut coefficients = vec![0.0; n + 1];
            for k in lost_a..=(n - lost_b) {
                coefficients[k] = rows[k][lost_a]
                    * rows[n - k][lost_b]
                    * ta[k - lost_a]
                    * ra[lost_a]
                    * tb[n - k - lost_b]
                    * rb[lost_b];
            }
            out.push(LossBranch { lost_a, lost_b, coefficients });
        }
    }
    Ok(out)
}

/// The normalized pure state left in the interferometer after `l_a` and
/// `l_b` photons were lost, and the probability of that event.
///
/// `amplitudes[j]` multiplies `|j, N - l_a - l_b - j⟩`, so the vector spans
/// the whole fixed-photon-number sector `l = l_a + l_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalBranch {
    pub lost_a: usize,
    pub lost_b: usize,
    pub probability: f64,
    pub amplitudes: Vec<Complex64>,
}

impl ConditionalBranch {
    pub fn lost_total(&self) -> usize {
        self.lost_a + self.lost_b
    }

    /// Photon number in arm `a` carried by `amplitudes[j]` before loss.
    pub fn input_index(&self, j: usize) -> usize {
        j + self.lost_a
    }
}

/// Unnormalized branch vector `sqrt(p) ξ(φ)` in the sector basis.
fn branch_vector(amps: &[Complex64], branch: &LossBranch, phase: f64) -> Vec<Complex64> {
    let n = amps.len() - 1;
    let dim = n - branch.lost_total() + 1;
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for k in branch.support() {
        v[k - branch.lost_a] = amps[k] * branch.coefficients[k].sqrt() * Complex64::from_polar(1.0, k as f64 * phase);
    }
    v
}

/// Splits the lossy output `ρ(φ)` into its conditional pure branches.
/// Only events with nonzero probability are returned.
pub fn decompose_output(state: &ProbeState, loss: LossModel, phase: f64) -> Result<Vec<ConditionalBranch>> {
    let amps = state.amplitudes();
    let mut out = Vec::new();
    for branch in loss_branches(state.n_photons(), loss)? {
        let v = branch_vector(&amps, &branch, phase);
        let p: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            out.push(ConditionalBranch {
                lost_a: branch.lost_a,
                lost_b: branch.lost_b,
                probability: p,
                amplitudes: v.into_iter().map(|c| c * s).collect(),
            });
        }
    }
    Ok(out)
}

/// Unnormalized branch vector `sqrt(p) ξ(φ)` together with its
/// `φ`-derivative, in the sector basis.
#[derive(Debug, Clone)]
pub struct BranchVector {
    pub lost_a: usize,
    pub lost_b: usize,
    pub vector: Vec<Complex64>,
    pub derivative: Vec<Complex64>,
}

impl BranchVector {
    pub fn lost_total(&self) -> usize {
        self.lost_a + self.lost_b
    }

    pub fn probability(&self) -> f64 {
        self.vector.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Branch vectors of all events with nonzero probability, in the order of
/// [`loss_branches`].
pub fn branch_vectors(state: &ProbeState, loss: LossModel, phase: f64) -> Result<Vec<BranchVector>> {
    let amps = state.amplitudes();
    let mut out = Vec::new();
    for branch in loss_branches(state.n_photons(), loss)? {
        let vector = branch_vector(&amps, &branch, phase);
        if vector.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        let derivative = vector
            .iter()
            .enumerate()
            .map(|(j, c)| c * Complex64::new(0.0, (j + branch.lost_a) as f64))
            .collect();
        out.push(BranchVector { lost_a: branch.lost_a, lost_b: branch.lost_b, vector, derivative });
    }
    Ok(out)
}

/// The output density matrix, block diagonal over total loss `l`.
/// Block `l` acts on `|j, N-l-j⟩`, `j = 0..=N-l`.
#[derive(Debug, Clone)]
pub struct OutputState {
    pub n_photons: usize,
    pub blocks: Vec<DMatrix<Complex64>>,
}

impl OutputState {
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// Applies `e^{i n_a φ}` after the loss channel.
    pub fn with_phase(&self, phase: f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * Complex64::from_polar(1.0, (i as f64 - j as f64) * phase)))
            .collect();
        Self { n_photons: self.n_photons, blocks }
    }

    /// Largest entrywise difference to another output of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

/// `ρ(φ)` and `∂ρ/∂φ` in block form, with the phase imprinted before the
/// loss channel. The derivative is analytic: each branch vector component
/// from input `k` picks up a factor `i k`.
pub fn output_state_with_derivative(state: &ProbeState, loss: LossModel, phase: f64) -> Result<(OutputState, OutputState)> {
    let n = state.n_photons();
    let amps = state.amplitudes();
    let mut rho: Vec<DMatrix<Complex64>> = (0..=n).map(|l| DMatrix::zeros(n - l + 1, n - l + 1)).collect();
    let mut drho = rho.clone();
    for branch in loss_branches(n, loss)? {
        let v = branch_vector(&amps, &branch, phase);
        let l = branch.lost_total();
        let dv: Vec<Complex64> = v
            .iter()
            .enumerate()
            .map(|(j, c)| c * Complex64::new(0.0, (j + branch.lost_a) as f64))
            .collect();
        let block = &mut rho[l];
        let dblock = &mut drho[l];
        for i in 0..v.len() {
            for j in 0..v.len() {
                block[(i, j)] += v[i] * v[j].conj();
                dblock[(i, j)] += dv[i] * v[j].conj() + v[i] * dv[j].conj();
            }
        }
    }
    Ok((OutputState { n_photons: n, blocks: rho }, OutputState { n_photons: n, blocks: drho }))
}

pub fn output_state(state: &ProbeState, loss: LossModel, phase: f64) -> Result<OutputState> {
    Ok(output_state_with_derivative(state, loss, phase)?.0)
}

/// Largest entrywise difference between the output with the phase imprinted
/// before the loss channel and the output with the phase imprinted after it.
pub fn loss_phase_commutation_check(state: &ProbeState, loss: LossModel, phase: f64) -> Result<f64> {
    let before = output_state(state, loss, phase)?;
    let after = output_state(state, loss, 0.0)?.with_phase(phase);
    Ok(before.max_abs_diff(&after))
}
