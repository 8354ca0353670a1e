//! Optimal measurements for the lossy output, their classical Fisher
//! information, and Monte Carlo maximum-likelihood estimation.
//!
//! The measurement first reads out how many photons were lost, which
//! selects a sector `l`. Inside a sector holding a single pure branch
//! `ξ`, it projects onto `|e±⟩ = (ξ ± ξ'⊥)/√2` built at the anchor phase
//! `φ₀`, completed to a basis by Gram-Schmidt over the Fock vectors in
//! order. A sector that mixes several branches (two-arm loss) is measured
//! in the eigenbasis of its symmetric logarithmic derivative at `φ₀`.
//!
//! A branch with path symmetry `ξ_j = ξ*_{M−j} e^{iχ}` is instead measured
//! by photon counting behind a balanced beam splitter, which saturates the
//! bound at every phase except isolated points. The bias phase in front of
//! the beam splitter is chosen to keep `φ₀` away from those points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{branch_vectors, BranchVector, LossModel, ProbeState};
use crate::qfi::sld_blocks;

/// Photon-number variance below which a branch counts as carrying no phase
/// information.
pub const VARIANCE_FLOOR: f64 = 1e-14;

/// Tolerance on `Σ Π_i = 1` inside each sector.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// A sector holding one pure branch `(l_a, l_b)`.
    Branch { lost_a: usize, lost_b: usize },
    /// A sector where several branches with the same total loss overlap.
    Merged { lost_total: usize },
    /// A sector the state never reaches.
    Empty { lost_total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Plus,
    Minus,
    Completion,
    SldEigenvector,
    PhotonCount,
}

/// A rank-one POVM element `|v⟩⟨v|` acting on sector `lost_total`.
#[derive(Debug, Clone)]
pub struct PovmElement {
    pub lost_total: usize,
    pub sector: Sector,
    pub kind: ElementKind,
    pub vector: DVector<Complex64>,
}

impl PovmElement {
    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.vector * self.vector.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct Povm {
    pub n_photons: usize,
    pub anchor_phase: f64,
    pub elements: Vec<PovmElement>,
    /// Branches whose photon-number variance vanishes; they are measured
    /// in the Fock basis and carry no information.
    pub zero_variance: Vec<(usize, usize)>,
}

impl Povm {
    /// Largest entrywise deviation of `Σ Π_i` from the identity over all
    /// sectors.
    pub fn completeness_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 0..=self.n_photons {
            let dim = self.n_photons - l + 1;
            let mut sum = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(-1.0, 0.0);
            for e in self.elements.iter().filter(|e| e.lost_total == l) {
                if e.vector.len() != dim {
                    return f64::INFINITY;
                }
                sum += e.projector();
            }
            worst = worst.max(sum.iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
        worst
    }
}

/// Gram-Schmidt completion of `seed` to an orthonormal basis of `C^dim`,
/// sweeping the Fock vectors in order.
fn complete_basis(seed: &[DVector<Complex64>], dim: usize) -> Vec<DVector<Complex64>> {
    let mut basis: Vec<DVector<Complex64>> = seed.to_vec();
    let mut extra = Vec::new();
    for j in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::<Complex64>::zeros(dim);
        v[j] = Complex64::new(1.0, 0.0);
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= Complex64::new(norm, 0.0);
            basis.push(v.clone());
            extra.push(v);
        }
    }
    extra
}

fn fock_vector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

/// The `|e±⟩` pair of a normalized branch `ξ` whose `j`-th component holds
/// `j` photons in arm `a`. `None` if the photon-number variance vanishes.
fn plus_minus(xi: &[Complex64]) -> Option<(DVector<Complex64>, DVector<Complex64>)> {
    let mean: f64 = xi.iter().enumerate().map(|(j, c)| j as f64 * c.norm_sqr()).sum();
    let var: f64 = xi.iter().enumerate().map(|(j, c)| (j as f64 - mean).powi(2) * c.norm_sqr()).sum();
    if var <= VARIANCE_FLOOR {
        return None;
    }
    let sigma = var.sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let build = |sign: f64| {
        DVector::from_iterator(
            xi.len(),
            xi.iter()
                .enumerate()
                .map(|(j, c)| c * Complex64::new(s, sign * s * (j as f64 - mean) / sigma)),
        )
    };
    Some((build(1.0), build(-1.0)))
}

/// Tolerance of the path-symmetry test on a normalized branch.
pub const PATH_SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Whether `ξ_j = ξ*_{M−j} e^{iχ}` for a common `χ`.
pub fn is_path_symmetric(xi: &[Complex64]) -> bool {
    let m = xi.len();
    let Some(j) = (0..m).max_by(|&a, &b| xi[a].norm_sqr().total_cmp(&xi[b].norm_sqr())) else {
        return false;
    };
    let partner = xi[m - 1 - j].conj();
    if partner.norm() <= PATH_SYMMETRY_TOLERANCE {
        return false;
    }
    let chi = xi[j] / partner;
    let chi = chi / chi.norm();
    (0..m).all(|k| (xi[k] - xi[m - 1 - k].conj() * chi).norm() <= PATH_SYMMETRY_TOLERANCE)
}

/// `exp(π/4 (a†b − ab†))` on the `M`-photon space, basis `|j, M−j⟩`.
pub fn balanced_beam_splitter(m: usize) -> DMatrix<f64> {
    let d = m + 1;
    let mut g = DMatrix::<f64>::zeros(d, d);
    for j in 0..m {
        let v = (((j + 1) * (m - j)) as f64).sqrt();
        g[(j + 1, j)] += v;
        g[(j, j + 1)] -= v;
    }
    (g * std::f64::consts::FRAC_PI_4).exp()
}

/// Counting vectors `v_m` with `⟨v_m|ξ⟩ = Σ_j u_{mj} e^{−ijγ} ξ_j`.
fn counting_vectors(u: &DMatrix<f64>, gamma: f64) -> Vec<DVector<Complex64>> {
    (0..u.nrows())
        .map(|m| DVector::from_iterator(u.ncols(), (0..u.ncols()).map(|j| Complex64::from_polar(u[(m, j)], j as f64 * gamma))))
        .collect()
}

/// Bias `γ` maximizing `Σ_m ln p_m` for the branch at the anchor, so that
/// no counting outcome is close to impossible there.
fn counting_bias(u: &DMatrix<f64>, xi: &[Complex64]) -> f64 {
    let score = |gamma: f64| -> f64 {
        counting_vectors(u, gamma)
            .iter()
            .map(|v| v.iter().zip(xi).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr().max(1e-300).ln())
            .sum()
    };
    let grid = 720;
    let h = 2.0 * std::f64::consts::PI / grid as f64;
    let best = (0..grid).map(|i| i as f64 * h).fold((0.0, f64::NEG_INFINITY), |acc, g| {
        let v = score(g);
        if v > acc.1 {
            (g, v)
        } else {
            acc
        }
    });
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (score(c), score(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = score(d);
        }
    }
    0.5 * (a + b)
}

/// Builds the measurement that saturates the quantum Cramér-Rao bound at
/// `phi0` wherever loss events with equal total loss do not overlap.
pub fn optimal_povm(state: &ProbeState, loss: LossModel, phi0: f64) -> Result<Povm> {
    let n = state.n_photons();
    let branches = branch_vectors(state, loss, phi0)?;
    let mut sld = None;
    let mut elements = Vec::new();
    let mut zero_variance = Vec::new();

    for l in 0..=n {
        let dim = n - l + 1;
        let in_sector: Vec<&BranchVector> = branches.iter().filter(|b| b.lost_total() == l).collect();
        match in_sector.as_slice() {
            [] => {
                let sector = Sector::Empty { lost_total: l };
                for v in complete_basis(&[], dim) {
                    elements.push(PovmElement { lost_total: l, sector, kind: ElementKind::Completion, vector: v });
                }
            }
            [b] => {
                let sector = Sector::Branch { lost_a: b.lost_a, lost_b: b.lost_b };
                let norm = b.probability().sqrt();
                let xi: Vec<Complex64> = b.vector.iter().map(|c| c / norm).collect();
                if is_path_symmetric(&xi) && plus_minus(&xi).is_some() {
                    let u = balanced_beam_splitter(dim - 1);
                    let gamma = counting_bias(&u, &xi);
                    for v in counting_vectors(&u, gamma) {
                        elements.push(PovmElement { lost_total: l, sector, kind: ElementKind::PhotonCount, vector: v });
                    }
                    continue;
                }
                let seed = match plus_minus(&xi) {
                    Some((plus, minus)) => {
                        elements.push(PovmElement { lost_total: l, sector, kind: ElementKind::Plus, vector: plus.clone() });
                        elements.push(PovmElement { lost_total: l, sector, kind: ElementKind::Minus, vector: minus.clone() });
                        vec![plus, minus]
                    }
                    None => {
                        zero_variance.push((b.lost_a, b.lost_b));
                        vec![fock_vector(&xi)]
                    }
                };
                if seed.len() == 1 {
                    elements.push(PovmElement { lost_total: l, sector, kind: ElementKind::Completion, vector: seed[0].clone() });
                }
                for v in complete_basis(&seed, dim) {
                    elements.push(PovmElement { lost_total: l, sector, kind: ElementKind::Completion, vector: v });
                }
            }
            _ => {
                let blocks = match &sld {
                    Some(b) => b,
                    None => sld.insert(sld_blocks(state, loss, phi0)?),
                };
                let block = &blocks[l];
                let (_, u) = crate::linalg::hermitian_eigen(&block.sld_block);
                let sector = Sector::Merged { lost_total: l };
                for c in 0..dim {
                    elements.push(PovmElement {
                        lost_total: l,
                        sector,
                        kind: ElementKind::SldEigenvector,
                        vector: u.column(c).into_owned(),
                    });
                }
            }
        }
    }
    Ok(Povm { n_photons: n, anchor_phase: phi0, elements, zero_variance })
}

/// `(p(i|φ), ∂p(i|φ)/∂φ)` for every element. Probabilities are assembled
/// from branch overlaps `c_b = ⟨v|ξ̃_b⟩`, so `p'²/p` stays bounded by
/// `4 Σ|⟨v|ξ̃'_b⟩|²` even where `p` is at rounding level.
pub fn outcome_probabilities(povm: &Povm, state: &ProbeState, loss: LossModel, phase: f64) -> Result<Vec<(f64, f64)>> {
    if state.n_photons() != povm.n_photons {
        return Err(Error::InvalidPovm(format!(
            "POVM built for N = {}, state has N = {}",
            povm.n_photons,
            state.n_photons()
        )));
    }
    let branches = branch_vectors(state, loss, phase)?;
    Ok(povm
        .elements
        .iter()
        .map(|e| {
            let (mut p, mut dp) = (0.0, 0.0);
            for b in branches.iter().filter(|b| b.lost_total() == e.lost_total) {
                let c: Complex64 = e.vector.iter().zip(&b.vector).map(|(v, x)| v.conj() * x).sum();
                let dc: Complex64 = e.vector.iter().zip(&b.derivative).map(|(v, x)| v.conj() * x).sum();
                p += c.norm_sqr();
                dp += 2.0 * (c.conj() * dc).re;
            }
            (p, dp)
        })
        .collect())
}

/// Classical Fisher information `Σ_i p'(i|φ)² / p(i|φ)` of the POVM.
pub fn classical_fisher(povm: &Povm, state: &ProbeState, loss: LossModel, phase: f64) -> Result<f64> {
    let err = povm.completeness_error();
    if !(err <= COMPLETENESS_TOLERANCE) {
        return Err(Error::InvalidPovm(format!("elements miss the identity by {err:e}")));
    }
    Ok(outcome_probabilities(povm, state, loss, phase)?
        .into_iter()
        .filter(|(p, _)| *p > 0.0)
        .map(|(p, dp)| dp * dp / p)
        .sum())
}

/// Outcome of a batch of simulated estimation experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationRun {
    pub true_phase: f64,
    pub anchor_phase: f64,
    /// Number of repetitions `ν` per experiment.
    pub repetitions: usize,
    pub trials: usize,
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance of the estimates.
    pub sample_variance: f64,
    /// Classical Fisher information of one repetition at the true phase.
    pub fisher: f64,
    /// `sample_variance · ν · F`; tends to one when the bound is saturated.
    pub variance_ratio: f64,
    pub bracket_failures: usize,
    /// Set when the outcome distribution carries no phase information.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct MlOptions {
    /// Half-width of the search interval around the anchor phase.
    pub half_width: f64,
    pub grid_points: usize,
    pub tolerance: f64,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self { half_width: std::f64::consts::FRAC_PI_2, grid_points: 721, tolerance: 1e-8 }
    }
}

fn log_likelihood(povm: &Povm, state: &ProbeState, loss: LossModel, counts: &[usize], phase: f64) -> f64 {
    let probs = outcome_probabilities(povm, state, loss, phase).expect("validated POVM");
    counts
        .iter()
        .zip(probs)
        .filter(|(n, _)| **n > 0)
        .map(|(n, (p, _))| if p > 0.0 { *n as f64 * p.ln() } else { f64::NEG_INFINITY })
        .sum()
}

/// Grid scan followed by golden-section refinement. `None` when the
/// maximum sits on the edge of the interval.
fn maximize_likelihood(f: impl Fn(f64) -> f64, center: f64, options: &MlOptions) -> Option<f64> {
    let m = options.grid_points.max(3);
    let lo = center - options.half_width;
    let h = 2.0 * options.half_width / (m - 1) as f64;
    let (best, _) = (0..m)
        .map(|i| (i, f(lo + i as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    if best == 0 || best == m - 1 {
        return None;
    }
    let (mut a, mut b) = (lo + (best - 1) as f64 * h, lo + (best + 1) as f64 * h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > options.tolerance {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    Some(0.5 * (a + b))
}

/// Samples `ν` outcomes per trial at `true_phase`, estimates the phase by
/// maximum likelihood around the POVM's anchor, and summarizes the spread
/// of the estimates. Trial `t` uses the seed `seed + t`.
pub fn simulate_ml(
    state: &ProbeState,
    loss: LossModel,
    povm: &Povm,
    true_phase: f64,
    repetitions: usize,
    trials: usize,
    seed: u64,
    options: &MlOptions,
) -> Result<EstimationRun> {
    if repetitions == 0 || trials == 0 {
        return Err(Error::Domain("need at least one repetition and one trial".into()));
    }
    let fisher = classical_fisher(povm, state, loss, true_phase)?;
    let probs: Vec<f64> = outcome_probabilities(povm, state, loss, true_phase)?
        .into_iter()
        .map(|(p, _)| p.max(0.0))
        .collect();
    let mut run = EstimationRun {
        true_phase,
        anchor_phase: povm.anchor_phase,
        repetitions,
        trials,
        seed,
        estimates: Vec::new(),
        mean: f64::NAN,
        sample_variance: f64::NAN,
        fisher,
        variance_ratio: f64::NAN,
        bracket_failures: 0,
        degenerate: fisher <= 1e-12,
    };
    if run.degenerate {
        return Ok(run);
    }
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidPovm(e.to_string()))?;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let mut counts = vec![0usize; probs.len()];
        for _ in 0..repetitions {
            counts[dist.sample(&mut rng)] += 1;
        }
        let ll = |phi: f64| log_likelihood(povm, state, loss, &counts, phi);
        match maximize_likelihood(ll, povm.anchor_phase, options) {
            Some(est) => run.estimates.push(est),
            None => run.bracket_failures += 1,
        }
    }
    let m = run.estimates.len();
    if m >= 2 {
        run.mean = run.estimates.iter().sum::<f64>() / m as f64;
        run.sample_variance = run.estimates.iter().map(|e| (e - run.mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        run.variance_ratio = run.sample_variance * repetitions as f64 * fisher;
    }
    Ok(run)
}
