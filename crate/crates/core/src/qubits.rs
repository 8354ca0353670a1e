//! Distinguishable photons as `N` qubits.
//!
//! String `k` is stored at the integer index whose bit `i` is set when
//! photon `i` travels in arm `a`; `k̄` is the popcount. A loss pattern
//! assigns each photon one of three fates (kept, lost from `a`, lost from
//! `b`), so patterns are indexed in base three.

use crate::error::{Error, Result};
use crate::fock::{binomial, LossModel, ProbeState};

pub const MAX_QUBITS: usize = 12;

/// Orbit spread under which a probe is treated as permutation
/// invariant by [`embed_symmetric`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QubitProbe {
    n_photons: usize,
    weights: Vec<f64>,
}

impl QubitProbe {
    pub fn new(n_photons: usize, weights: Vec<f64>) -> Result<Self> {
        if n_photons == 0 {
            return Err(Error::InvalidState("need at least one photon".into()));
        }
        if n_photons > MAX_QUBITS {
            return Err(Error::TooManyPhotons { n: n_photons, max: MAX_QUBITS });
        }
        if weights.len() != 1 << n_photons {
            return Err(Error::InvalidState(format!(
                "expected {} string weights, got {}",
                1usize << n_photons,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidState(format!("weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { n_photons, weights })
    }

    /// The GHZ-type probe with weight `x0` on `0…0` and `1 − x0` on `1…1`.
    pub fn ghz(n_photons: usize, x0: f64) -> Result<Self> {
        if n_photons == 0 || n_photons > MAX_QUBITS {
            return Self::new(n_photons, Vec::new());
        }
        let mut w = vec![0.0; 1 << n_photons];
        w[0] = x0;
        w[(1 << n_photons) - 1] = 1.0 - x0;
        Self::new(n_photons, w)
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_k k̄² x_k`, the term of the bound untouched by symmetrization.
    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, x)| (k.count_ones() as f64).powi(2) * x)
            .sum()
    }

    /// Largest spread of weights within a Hamming-weight orbit.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n_photons;
        let mut lo = vec![f64::INFINITY; n + 1];
        let mut hi = vec![f64::NEG_INFINITY; n + 1];
        for (k, &x) in self.weights.iter().enumerate() {
            let w = k.count_ones() as usize;
            lo[w] = lo[w].min(x);
            hi[w] = hi[w].max(x);
        }
        lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }

    /// Applies the photon relabelling `perm`: photon `i` moves to slot
    /// `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_photons;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidState(format!("{perm:?} is not a permutation of {n} photons")));
        }
        let mut w = vec![0.0; self.weights.len()];
        for (k, &x) in self.weights.iter().enumerate() {
            let target = (0..n).filter(|i| k >> i & 1 == 1).fold(0usize, |acc, i| acc | 1 << perm[i]);
            w[target] = x;
        }
        Ok(Self { n_photons: n, weights: w })
    }
}

fn pow3(n: usize) -> usize {
    3usize.pow(n as u32)
}

/// Bound by direct enumeration over all strings `k` and all loss patterns
/// `l_a ≤ k`, `l_b ≤ 1 − k`.
pub fn qfi_bound_qubits_enumerated(probe: &QubitProbe, loss: LossModel) -> f64 {
    let n = probe.n_photons;
    let m = pow3(n);
    let (mut s0, mut s1) = (vec![0.0; m], vec![0.0; m]);
    let p3: Vec<usize> = (0..n).map(pow3).collect();
    let (ea, eb) = (loss.eta_a, loss.eta_b);

    for (k, &x) in probe.weights.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let kb = k.count_ones() as f64;
        let in_a: Vec<usize> = (0..n).filter(|i| k >> i & 1 == 1).collect();
        let in_b: Vec<usize> = (0..n).filter(|i| k >> i & 1 == 0).collect();
        for la in 0usize..1 << in_a.len() {
            let mut idx_a = 0;
            let mut wa = 1.0;
            for (t, &i) in in_a.iter().enumerate() {
                if la >> t & 1 == 1 {
                    idx_a += p3[i];
                    wa *= 1.0 - ea;
                } else {
                    wa *= ea;
                }
            }
            if wa == 0.0 {
                continue;
            }
            for lb in 0usize..1 << in_b.len() {
                let mut idx = idx_a;
                let mut w = wa;
                for (t, &i) in in_b.iter().enumerate() {
                    if lb >> t & 1 == 1 {
                        idx += 2 * p3[i];
                        w *= 1.0 - eb;
                    } else {
                        w *= eb;
                    }
                }
                s0[idx] += x * w;
                s1[idx] += x * w * kb;
            }
        }
    }
    let subtracted: f64 = s0.iter().zip(&s1).filter(|(a, _)| **a > 0.0).map(|(a, b)| b * b / a).sum();
    4.0 * (probe.second_moment() - subtracted)
}

/// Bound for a permutation-invariant probe, grouping strings and loss
/// patterns by Hamming weight. Exact only for symmetric probes.
fn qfi_bound_qubits_grouped(probe: &QubitProbe, loss: LossModel) -> f64 {
    let n = probe.n_photons;
    let orbit: Vec<f64> = (0..=n).map(|w| probe.weights[(1usize << w) - 1]).collect();
    let (ea, eb) = (loss.eta_a, loss.eta_b);
    let mut subtracted = 0.0;
    for a in 0..=n {
        for b in 0..=n - a {
            let (mut s0, mut s1) = (0.0, 0.0);
            for w in a..=n - b {
                let c = binomial(n - a - b, w - a)
                    * orbit[w]
                    * (1.0 - ea).powi(a as i32)
                    * ea.powi((w - a) as i32)
                    * (1.0 - eb).powi(b as i32)
                    * eb.powi((n - w - b) as i32);
                s0 += c;
                s1 += c * w as f64;
            }
            if s0 > 0.0 {
                let patterns = binomial(n, a) * binomial(n - a, b);
                subtracted += patterns * s1 * s1 / s0;
            }
        }
    }
    4.0 * (probe.second_moment() - subtracted)
}

/// Fisher-information bound for distinguishable photons.
pub fn qfi_bound_qubits(probe: &QubitProbe, loss: LossModel) -> f64 {
    if probe.asymmetry() == 0.0 {
        qfi_bound_qubits_grouped(probe, loss)
    } else {
        qfi_bound_qubits_enumerated(probe, loss)
    }
}

/// Averages the weights over all photon permutations.
pub fn symmetrize(probe: &QubitProbe) -> QubitProbe {
    let n = probe.n_photons;
    let mut sums = vec![0.0; n + 1];
    for (k, &x) in probe.weights.iter().enumerate() {
        sums[k.count_ones() as usize] += x;
    }
    let weights = (0..probe.weights.len())
        .map(|k| {
            let w = k.count_ones() as usize;
            sums[w] / binomial(n, w)
        })
        .collect();
    QubitProbe { n_photons: n, weights }
}

/// Maps a permutation-invariant probe to the Fock probe with the same orbit
/// weights.
pub fn embed_symmetric(probe: &QubitProbe) -> Result<ProbeState> {
    let spread = probe.asymmetry();
    if spread > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(spread));
    }
    let n = probe.n_photons;
    let mut sums = vec![0.0; n + 1];
    for (k, &x) in probe.weights.iter().enumerate() {
        sums[k.count_ones() as usize] += x;
    }
    ProbeState::normalized(sums)
}
