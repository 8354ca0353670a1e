//! Reference implementations built without the library's loss formulas.
//!
//! Loss is applied as a beam-splitter unitary `exp(θ(a†e − ae†))` coupling
//! each arm to a vacuum environment mode, with `cos θ = √η`. The output
//! density matrix is obtained by tracing out the environments.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qfi_optics::{LossModel, ProbeState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type CMatrix = DMatrix<Complex64>;

/// Mode-plus-environment unitary on `(n, e)` with index `n·d + e`,
/// `d = n_max + 1`.
pub fn beam_splitter(n_max: usize, eta: f64) -> DMatrix<f64> {
    let d = n_max + 1;
    let mut g = DMatrix::<f64>::zeros(d * d, d * d);
    for n in 0..d {
        for e in 0..d {
            // a† e |n, e⟩ = √(n+1)√e |n+1, e-1⟩
            if e > 0 && n + 1 < d {
                let v = ((n + 1) as f64 * e as f64).sqrt();
                g[((n + 1) * d + e - 1, n * d + e)] += v;
                g[(n * d + e, (n + 1) * d + e - 1)] -= v;
            }
        }
    }
    let theta = eta.sqrt().clamp(0.0, 1.0).acos();
    (g * theta).exp()
}

/// Output state over `|j_a, j_b⟩` (index `j_a·d + j_b`) and the pure
/// conditional (unnormalized) states for each environment outcome.
pub struct DenseOutput {
    pub d: usize,
    pub rho: CMatrix,
    /// `(e_a, e_b, vector over (j_a, j_b))`.
    pub conditionals: Vec<(usize, usize, DVector<Complex64>)>,
}

pub fn dense_output(state: &ProbeState, loss: LossModel) -> DenseOutput {
    let n = state.n_photons();
    let d = n + 1;
    let ua = beam_splitter(n, loss.eta_a);
    let ub = beam_splitter(n, loss.eta_b);
    let amps = state.amplitudes();
    let mut conditionals = Vec::new();
    let mut rho = CMatrix::zeros(d * d, d * d);
    for ea in 0..d {
        for eb in 0..d {
            let mut v = DVector::<Complex64>::zeros(d * d);
            for (k, a) in amps.iter().enumerate() {
                for ja in 0..d {
                    let ca = ua[(ja * d + ea, k * d)];
                    if ca == 0.0 {
                        continue;
                    }
                    for jb in 0..d {
                        let cb = ub[(jb * d + eb, (n - k) * d)];
                        v[ja * d + jb] += a * ca * cb;
                    }
                }
            }
            if v.norm() > 0.0 {
                rho += &v * v.adjoint();
                conditionals.push((ea, eb, v));
            }
        }
    }
    DenseOutput { d, rho, conditionals }
}

/// Diagonal of the arm-`a` photon-number operator on `|j_a, j_b⟩`.
pub fn number_a(d: usize) -> Vec<f64> {
    (0..d * d).map(|i| (i / d) as f64).collect()
}

/// `i[G, ρ]` for diagonal `G`.
pub fn phase_derivative(rho: &CMatrix, g: &[f64]) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| Complex64::i() * (g[i] - g[j]) * rho[(i, j)])
}

/// `F = 2 Σ |⟨i|ρ'|j⟩|² / (λ_i + λ_j)` over pairs with `λ_i + λ_j` above
/// a relative cutoff. For `ρ ≥ 0` the left singular vectors are
/// eigenvectors, so the SVD doubles as the eigendecomposition.
pub fn qfi_dense(rho: &CMatrix, rho_prime: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let svd = h.clone().svd(true, false);
    let u = svd.u.as_ref().unwrap();
    let lam = &svd.singular_values;
    for (c, l) in lam.iter().enumerate() {
        let col = u.column(c);
        let r = (&h * col - col * Complex64::new(*l, 0.0)).norm();
        assert!(r < 1e-8, "oracle eigenpair residual {r}");
    }
    let dp = u.adjoint() * rho_prime * u;
    let cutoff = 1e-12 * rho.trace().re;
    let n = lam.len();
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = lam[i] + lam[j];
            if s > cutoff {
                f += 2.0 * dp[(i, j)].norm_sqr() / s;
            }
        }
    }
    f
}

/// Exact QFI from the dense purification.
pub fn exact_qfi_oracle(state: &ProbeState, loss: LossModel) -> f64 {
    let out = dense_output(state, loss);
    let g = number_a(out.d);
    qfi_dense(&out.rho, &phase_derivative(&out.rho, &g))
}

/// `Σ_outcomes p · 4 Var(n_a)` over the environment outcomes.
pub fn bound_oracle(state: &ProbeState, loss: LossModel) -> f64 {
    let out = dense_output(state, loss);
    let g = number_a(out.d);
    out.conditionals
        .iter()
        .map(|(_, _, v)| {
            let p: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            let m: f64 = v.iter().zip(&g).map(|(c, n)| c.norm_sqr() * n).sum::<f64>() / p;
            4.0 * v.iter().zip(&g).map(|(c, n)| c.norm_sqr() * (n - m).powi(2)).sum::<f64>()
        })
        .sum()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// A random probe, optionally with random phases and a random support.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize, phases: bool) -> ProbeState {
    let mut x = random_simplex(rng, n + 1);
    if rng.gen_bool(0.3) {
        for v in x.iter_mut() {
            if rng.gen_bool(0.3) {
                *v = 0.0;
            }
        }
        if x.iter().all(|v| *v == 0.0) {
            x[rng.gen_range(0..=n)] = 1.0;
        }
        let t: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= t);
    }
    if phases {
        let ph = (0..=n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        ProbeState::with_phases(x, ph).unwrap()
    } else {
        ProbeState::new(x).unwrap()
    }
}

pub fn random_eta(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.05..0.999)
}

/// Kraus evolution of `N` dual-rail photons, each a qutrit
/// `{|b⟩, |a⟩, |vac⟩}`, for a string-indexed pure state. Each photon
/// independently suffers one of `K_0 = √η_b|b⟩⟨b| + √η_a|a⟩⟨a|`,
/// `K_a = √(1−η_a)|vac⟩⟨a|`, `K_b = √(1−η_b)|vac⟩⟨b|`. Returns the output
/// density matrix over `3^N` and the arm-`a` number diagonal.
pub fn qubit_output(n: usize, amplitudes: &[f64], loss: LossModel) -> (CMatrix, Vec<f64>) {
    let dim = 3usize.pow(n as u32);
    let index = |digits: &[usize]| digits.iter().rev().fold(0, |acc, d| acc * 3 + d);
    let mut rho = CMatrix::zeros(dim, dim);
    for label in 0..dim {
        let kraus: Vec<usize> = (0..n).map(|i| label / 3usize.pow(i as u32) % 3).collect();
        let mut v = DVector::<Complex64>::zeros(dim);
        for (k, &amp) in amplitudes.iter().enumerate() {
            let mut coef = amp;
            let mut digits = vec![0usize; n];
            for i in 0..n {
                let in_a = k >> i & 1 == 1;
                coef *= match (kraus[i], in_a) {
                    (0, true) => loss.eta_a.sqrt(),
                    (0, false) => loss.eta_b.sqrt(),
                    (1, true) => (1.0 - loss.eta_a).sqrt(),
                    (2, false) => (1.0 - loss.eta_b).sqrt(),
                    _ => 0.0,
                };
                digits[i] = if kraus[i] == 0 { usize::from(in_a) } else { 2 };
            }
            v[index(&digits)] += Complex64::new(coef, 0.0);
        }
        rho += &v * v.adjoint();
    }
    let g = (0..dim)
        .map(|i| (0..n).filter(|t| i / 3usize.pow(*t as u32) % 3 == 1).count() as f64)
        .collect();
    (rho, g)
}
