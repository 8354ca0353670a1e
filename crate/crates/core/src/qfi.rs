//! Quantum Fisher information of lossy Fock probes.
//!
//! Three routes are provided:
//!
//! * [`qfi_pure`] for a pure state under a diagonal phase generator;
//! * the closed forms [`qfi_one_arm`] and [`qfi_bound`], where the bound
//!   treats every loss event `(l_a, l_b)` as distinguishable and is exact
//!   when loss happens in one arm only;
//! * [`qfi_exact`], which builds `ρ(φ)` block by block over the total number
//!   of lost photons and evaluates `Tr[ρ A²]` through the symmetric
//!   logarithmic derivative `A`.
//!
//! The bound is concave in the weights `x`. [`BoundObjective`] exposes its
//! value, gradient and Hessian for the optimizer.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{loss_branches, output_state_with_derivative, LossBranch, LossModel, ProbeState};
use crate::linalg::hermitian_eigen;

/// Relative eigenvalue cutoff for the SLD: pairs with
/// `p_i + p_j <= SLD_EIGEN_CUTOFF * Tr ρ_block` get `A_ij = 0`.
pub const SLD_EIGEN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Exact,
    Bound,
    OneArmClosedForm,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Exact => "exact",
            Metric::Bound => "bound",
            Metric::OneArmClosedForm => "one_arm_closed_form",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Metric::Exact),
            "bound" => Ok(Metric::Bound),
            "one_arm_closed_form" | "one-arm" | "one_arm" => Ok(Metric::OneArmClosedForm),
            other => Err(Error::Domain(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub f_exact: Option<f64>,
    pub f_bound: Option<f64>,
    /// `1/sqrt(F)` for the metric named in `metric`.
    pub delta_phi_min: f64,
    pub metric: Metric,
    /// `f_bound - f_exact` when both are present.
    pub gap: Option<f64>,
}

/// `1/sqrt(F)`, infinite for vanishing information.
pub fn precision_from_fisher(f: f64) -> f64 {
    if f > 0.0 {
        1.0 / f.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Pure-state QFI `4[⟨ψ'|ψ'⟩ - |⟨ψ'|ψ⟩|²]` for `|ψ(φ)⟩ = Σ α_k e^{i g_k φ}|k⟩`.
pub fn qfi_pure(amplitudes: &[Complex64], generator: &[f64]) -> Result<f64> {
    if amplitudes.len() != generator.len() {
        return Err(Error::InvalidState(format!(
            "{} amplitudes but {} generator weights",
            amplitudes.len(),
            generator.len()
        )));
    }
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("amplitudes have norm² {norm}")));
    }
    let deriv: Vec<Complex64> = amplitudes
        .iter()
        .zip(generator)
        .map(|(a, g)| a * Complex64::new(0.0, *g))
        .collect();
    let dd: f64 = deriv.iter().map(|d| d.norm_sqr()).sum();
    let overlap: Complex64 = deriv.iter().zip(amplitudes).map(|(d, a)| d.conj() * a).sum();
    Ok((4.0 * (dd - overlap.norm_sqr())).max(0.0))
}

/// One-arm loss (`η_b = 1`):
/// `F_Q = 4(Σ k² x_k - Σ_l (Σ_k x_k k B^k_{l0})² / Σ_k x_k B^k_{l0})`.
pub fn qfi_one_arm(state: &ProbeState, eta: f64) -> Result<f64> {
    let loss = LossModel::one_arm(eta)?;
    let x = state.weights();
    let mut f: f64 = x.iter().enumerate().map(|(k, xk)| (k * k) as f64 * xk).sum();
    for branch in loss_branches(state.n_photons(), loss)?.iter().filter(|b| b.lost_b == 0) {
        let (mut num, mut den) = (0.0, 0.0);
        for k in branch.support() {
            num += x[k] * k as f64 * branch.coefficients[k];
            den += x[k] * branch.coefficients[k];
        }
        if den > 0.0 {
            f -= num * num / den;
        }
    }
    Ok((4.0 * f).max(0.0))
}

/// Convexity bound `F̃_Q = Σ_{l_a,l_b} p_{l_a l_b} F_Q[ξ_{l_a l_b}]`.
pub fn qfi_bound(state: &ProbeState, loss: LossModel) -> Result<f64> {
    Ok(BoundObjective::new(state.n_photons(), loss)?.value(state.weights()))
}

/// Unconstrained partials `∂F̃_Q/∂x_i`.
pub fn qfi_bound_gradient(state: &ProbeState, loss: LossModel) -> Result<Vec<f64>> {
    BoundObjective::new(state.n_photons(), loss)?.gradient(state.weights())
}

/// `∂²F̃_Q/∂x_i∂x_j`.
pub fn qfi_bound_hessian(state: &ProbeState, loss: LossModel) -> Result<DMatrix<f64>> {
    BoundObjective::new(state.n_photons(), loss)?.hessian(state.weights())
}

/// `F̃_Q` as a function of unnormalized weights, with its derivatives.
///
/// Each loss event contributes `4 Σ_k x_k b_k (k - m)²` where
/// `m = Σ x_k k b_k / Σ x_k b_k`. Because `Σ_events B^k = 1` for every `k`
/// this equals the textbook form `4(Σ k² x_k - Σ a²/b)` on all of
/// `R^{N+1}_+`, is homogeneous of degree one, and avoids the cancellation
/// of the textbook form.
#[derive(Debug, Clone)]
pub struct BoundObjective {
    n_photons: usize,
    loss: LossModel,
    branches: Vec<LossBranch>,
}

impl BoundObjective {
    pub fn new(n_photons: usize, loss: LossModel) -> Result<Self> {
        let branches = loss_branches(n_photons, loss)?
            .into_iter()
            .filter(|b| b.coefficients.iter().any(|c| *c > 0.0))
            .collect();
        Ok(Self { n_photons, loss, branches })
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn loss(&self) -> LossModel {
        self.loss
    }

    fn check_len(&self, x: &[f64]) {
        assert_eq!(x.len(), self.n_photons + 1, "weight vector has the wrong length");
    }

    /// `(Σ x_k b_k, Σ x_k k b_k / Σ x_k b_k)` for one event; the mean is NaN
    /// when the event has zero probability.
    fn moments(branch: &LossBranch, x: &[f64]) -> (f64, f64) {
        let (mut p, mut a) = (0.0, 0.0);
        for k in branch.support() {
            let w = x[k] * branch.coefficients[k];
            p += w;
            a += w * k as f64;
        }
        (p, a / p)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.check_len(x);
        let mut f = 0.0;
        for b in &self.branches {
            let (p, m) = Self::moments(b, x);
            if p > 0.0 {
                f += b.support().map(|k| x[k] * b.coefficients[k] * (k as f64 - m).powi(2)).sum::<f64>();
            }
        }
        4.0 * f
    }

    fn singular_branch(&self, x: &[f64]) -> Option<&LossBranch> {
        self.branches.iter().find(|b| Self::moments(b, x).0 <= 0.0)
    }

    /// Unconstrained gradient. Fails with [`Error::BoundarySingularity`] if
    /// some possible loss event has zero probability at `x`, where the
    /// partials exist only one-sidedly.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x);
        if let Some(b) = self.singular_branch(x) {
            return Err(Error::BoundarySingularity { lost_a: b.lost_a, lost_b: b.lost_b });
        }
        Ok(self.gradient_one_sided(x))
    }

    /// Right partial derivatives `lim_{t↓0} (F(x + t e_i) - F(x))/t`. Equal
    /// to the gradient at interior points; at the simplex boundary a
    /// zero-probability event contributes nothing because a single added
    /// component carries no spread in `k`.
    pub fn gradient_one_sided(&self, x: &[f64]) -> Vec<f64> {
        self.check_len(x);
        let mut g = vec![0.0; self.n_photons + 1];
        for b in &self.branches {
            let (p, m) = Self::moments(b, x);
            if p > 0.0 {
                for k in b.support() {
                    g[k] += b.coefficients[k] * (k as f64 - m).powi(2);
                }
            }
        }
        g.iter_mut().for_each(|v| *v *= 4.0);
        g
    }

    /// One-sided derivative of `F̃_Q` at `x` along `d`. `d` must be
    /// feasible: `d_k >= 0` wherever an event has zero probability at `x`.
    pub fn directional_derivative(&self, x: &[f64], d: &[f64]) -> f64 {
        self.check_len(x);
        self.check_len(d);
        let mut out = 0.0;
        for b in &self.branches {
            let (p, m) = Self::moments(b, x);
            if p > 0.0 {
                out += b.support().map(|k| d[k] * b.coefficients[k] * (k as f64 - m).powi(2)).sum::<f64>();
            } else {
                // the event term is t·F(d restricted to the event), exactly
                let (pd, md) = Self::moments(b, d);
                if pd > 0.0 {
                    out += b.support().map(|k| d[k] * b.coefficients[k] * (k as f64 - md).powi(2)).sum::<f64>();
                }
            }
        }
        4.0 * out
    }

    /// `H_ij = -8 Σ_events b_i b_j (i - m)(j - m) / Σ x_k b_k`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(x);
        if let Some(b) = self.singular_branch(x) {
            return Err(Error::BoundarySingularity { lost_a: b.lost_a, lost_b: b.lost_b });
        }
        Ok(self.face_hessian(x))
    }

    /// Hessian of the objective restricted to the face of the simplex that
    /// contains `x`. Events with zero probability at `x` vanish identically
    /// on that face and are skipped; entries outside the face are not
    /// meaningful.
    pub fn face_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.check_len(x);
        let n = self.n_photons + 1;
        let mut h = DMatrix::zeros(n, n);
        for b in &self.branches {
            let (p, m) = Self::moments(b, x);
            if p <= 0.0 {
                continue;
            }
            let u: Vec<f64> = (0..n).map(|k| b.coefficients[k] * (k as f64 - m)).collect();
            for i in b.support() {
                for j in b.support() {
                    h[(i, j)] -= 8.0 * u[i] * u[j] / p;
                }
            }
        }
        h
    }
}

/// One block of the SLD construction, in the Fock basis of the sector with
/// `lost_total` photons missing.
#[derive(Debug, Clone)]
pub struct SldBlock {
    pub lost_total: usize,
    pub basis_dim: usize,
    pub rho_block: DMatrix<Complex64>,
    pub rho_prime_block: DMatrix<Complex64>,
    pub sld_block: DMatrix<Complex64>,
    /// Eigenvalues of `rho_block`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors of `rho_block` as columns.
    pub eigenvectors: DMatrix<Complex64>,
}

impl SldBlock {
    fn build(lost_total: usize, rho: DMatrix<Complex64>, drho: DMatrix<Complex64>) -> Self {
        let dim = rho.nrows();
        let (p, u) = hermitian_eigen(&rho);
        let cutoff = SLD_EIGEN_CUTOFF * rho.trace().re.max(0.0);
        let d_eig = u.adjoint() * &drho * &u;
        let a_eig = DMatrix::from_fn(dim, dim, |i, j| {
            let s = p[i] + p[j];
            if s > cutoff && s > 0.0 {
                d_eig[(i, j)] * (2.0 / s)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let sld = &u * a_eig * u.adjoint();
        Self {
            lost_total,
            basis_dim: dim,
            rho_block: rho,
            rho_prime_block: drho,
            sld_block: sld,
            eigenvalues: p,
            eigenvectors: u,
        }
    }

    /// `Tr[ρ A²]` on this block.
    pub fn fisher(&self) -> f64 {
        (&self.rho_block * &self.sld_block * &self.sld_block).trace().re.max(0.0)
    }

    /// Largest entrywise violation of `ρ' = (Aρ + ρA)/2`.
    pub fn sld_residual(&self) -> f64 {
        let lhs = (&self.sld_block * &self.rho_block + &self.rho_block * &self.sld_block) * Complex64::new(0.5, 0.0);
        (lhs - &self.rho_prime_block).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// SLD blocks of `ρ(φ)` for sectors `l = 0..=N`.
pub fn sld_blocks(state: &ProbeState, loss: LossModel, phase: f64) -> Result<Vec<SldBlock>> {
    let (rho, drho) = output_state_with_derivative(state, loss, phase)?;
    Ok(rho
        .blocks
        .into_iter()
        .zip(drho.blocks)
        .enumerate()
        .map(|(l, (r, d))| SldBlock::build(l, r, d))
        .collect())
}

/// Exact `F_Q` as a number; blocks with different total loss add linearly.
pub fn qfi_exact_value(state: &ProbeState, loss: LossModel, phase: f64) -> Result<f64> {
    Ok(sld_blocks(state, loss, phase)?.iter().map(SldBlock::fisher).sum())
}

/// Exact `F_Q` of the mixture `Σ w_i ρ_i(φ)` of probes with possibly
/// different photon numbers. Output sectors are keyed by the number of
/// surviving photons, so lossy components with different `N` can overlap.
pub fn qfi_mixture(components: &[(f64, ProbeState)], loss: LossModel, phase: f64) -> Result<f64> {
    let total: f64 = components.iter().map(|(w, _)| *w).sum();
    if components.is_empty() || components.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState(format!("mixture weights must be nonnegative and sum to 1, got {total}")));
    }
    let top = components.iter().map(|(_, s)| s.n_photons()).max().unwrap_or(0);
    let mut sectors: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)> =
        (0..=top).map(|m| (DMatrix::zeros(m + 1, m + 1), DMatrix::zeros(m + 1, m + 1))).collect();
    for (w, state) in components {
        let (rho, drho) = output_state_with_derivative(state, loss, phase)?;
        let n = state.n_photons();
        for (l, (r, d)) in rho.blocks.into_iter().zip(drho.blocks).enumerate() {
            let sector = &mut sectors[n - l];
            sector.0 += r * Complex64::new(*w, 0.0);
            sector.1 += d * Complex64::new(*w, 0.0);
        }
    }
    Ok(sectors
        .into_iter()
        .enumerate()
        .map(|(m, (r, d))| SldBlock::build(top - m, r, d).fisher())
        .sum())
}

/// Exact `F_Q` via the SLD, reported together with the bound.
pub fn qfi_exact(state: &ProbeState, loss: LossModel, phase: f64) -> Result<QfiReport> {
    qfi_report(state, loss, phase, Metric::Exact)
}

/// Computes both the exact value and the bound and selects
/// `delta_phi_min` by `metric`. Fails with a certification error when the
/// exact value exceeds the bound, which can only happen numerically.
pub fn qfi_report(state: &ProbeState, loss: LossModel, phase: f64, metric: Metric) -> Result<QfiReport> {
    let exact = qfi_exact_value(state, loss, phase)?;
    let bound = match metric {
        Metric::OneArmClosedForm => {
            if !loss.is_one_arm() {
                return Err(Error::Domain(format!(
                    "one-arm closed form needs eta_b = 1, got {}",
                    loss.eta_b
                )));
            }
            qfi_one_arm(state, loss.eta_a)?
        }
        _ => qfi_bound(state, loss)?,
    };
    let limit = 1e-9 * bound.max(1.0);
    if exact > bound + limit {
        return Err(Error::CertificationFailed { residual: exact - bound, limit });
    }
    let chosen = match metric {
        Metric::Exact => exact,
        Metric::Bound | Metric::OneArmClosedForm => bound,
    };
    Ok(QfiReport {
        f_exact: Some(exact),
        f_bound: Some(bound),
        delta_phi_min: precision_from_fisher(chosen),
        metric,
        gap: Some(bound - exact),
    })
}
