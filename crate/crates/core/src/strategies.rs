//! Closed-form reference precisions: the standard interferometric limit,
//! the Heisenberg limit, unbalanced N00N states, N00N chopping and the
//! sine state.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{LossModel, ProbeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Sil,
    Heisenberg,
    Noon,
    ChopOneArm,
    ChopTwoArm,
    SineState,
    Optimal,
}

/// Which piece of a chopping formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChopRegime {
    /// Single photons, `n = 1`.
    SinglePhoton,
    /// Chopped into `n`-photon pieces with `1 < n < N`.
    Chopped,
    /// One N00N state with all `N` photons.
    Unchopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyPrecision {
    pub name: Strategy,
    pub delta_phi: f64,
    pub regime: Option<ChopRegime>,
    pub optimal_n: Option<f64>,
}

pub fn heisenberg(n_photons: usize) -> f64 {
    1.0 / n_photons as f64
}

/// Standard interferometric limit `(√η_a + √η_b) / (2 √(N η_a η_b))`.
/// Infinite when either arm is dark.
pub fn sil(n_photons: usize, loss: LossModel) -> f64 {
    let LossModel { eta_a, eta_b } = loss;
    if eta_a <= 0.0 || eta_b <= 0.0 {
        return f64::INFINITY;
    }
    (eta_a.sqrt() + eta_b.sqrt()) / (2.0 * (n_photons as f64 * eta_a * eta_b).sqrt())
}

/// Best unbalanced N00N state: returns `(δφ, x_0)`.
pub fn noon_precision(n_photons: usize, loss: LossModel) -> (f64, f64) {
    let half = n_photons as f64 / 2.0;
    let ta = loss.eta_a.powf(half);
    let tb = loss.eta_b.powf(half);
    let x0 = if ta + tb > 0.0 { ta / (ta + tb) } else { 0.5 };
    if ta <= 0.0 || tb <= 0.0 {
        return (f64::INFINITY, x0);
    }
    ((ta + tb) / (2.0 * n_photons as f64 * ta * tb), x0)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Transmissivity `η₀` below which one-arm chopping degenerates to single
/// photons: the root of `1 + √η + ln η = 0`.
pub fn chop_eta0() -> f64 {
    static ETA0: OnceLock<f64> = OnceLock::new();
    *ETA0.get_or_init(|| bisect(1e-3, 1.0, |e| 1.0 + e.sqrt() + e.ln()))
}

/// The constant `c` in the optimal chop size `n = c / |ln η|`: the root of
/// `1 + e^{-c/2} - c = 0`.
pub fn chop_coefficient() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| bisect(1.0, 2.0, |c| 1.0 + (-c / 2.0).exp() - c))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("transmissivity {eta} outside (0, 1]")));
    }
    Ok(())
}

/// N00N chopping with loss in one arm, chop size relaxed to a real
/// `n ∈ [1, N]`.
pub fn chop_one_arm(n_photons: usize, eta: f64) -> Result<StrategyPrecision> {
    check_eta(eta)?;
    let n = n_photons as f64;
    let eta0 = chop_eta0();
    let (delta_phi, regime, optimal_n) = if eta <= eta0 {
        (sil(n_photons, LossModel { eta_a: eta, eta_b: 1.0 }), ChopRegime::SinglePhoton, 1.0)
    } else if eta <= eta0.powf(1.0 / n) {
        let base = (1.0 + eta0.sqrt()) / (2.0 * (n * eta0).sqrt());
        (base * (eta.ln() / eta0.ln()).sqrt(), ChopRegime::Chopped, chop_coefficient() / eta.ln().abs())
    } else {
        let t = eta.powf(n / 2.0);
        ((1.0 + t) / (2.0 * n * t), ChopRegime::Unchopped, n)
    };
    Ok(StrategyPrecision { name: Strategy::ChopOneArm, delta_phi, regime: Some(regime), optimal_n: Some(optimal_n) })
}

/// One-arm chopping restricted to integer chop sizes `n = 1..=N`.
pub fn chop_one_arm_integer(n_photons: usize, eta: f64) -> Result<StrategyPrecision> {
    check_eta(eta)?;
    let total = n_photons as f64;
    let (best_n, best_f) = (1..=n_photons)
        .map(|n| {
            let n = n as f64;
            let t = eta.powf(n / 2.0);
            (n, total / n * 4.0 * n * n * eta.powf(n) / (1.0 + t).powi(2))
        })
        .fold((1.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    let regime = if best_n == 1.0 {
        ChopRegime::SinglePhoton
    } else if best_n == total {
        ChopRegime::Unchopped
    } else {
        ChopRegime::Chopped
    };
    Ok(StrategyPrecision {
        name: Strategy::ChopOneArm,
        delta_phi: 1.0 / best_f.sqrt(),
        regime: Some(regime),
        optimal_n: Some(best_n),
    })
}

/// N00N chopping with equal loss `η` in both arms.
pub fn chop_two_arm(n_photons: usize, eta: f64) -> Result<StrategyPrecision> {
    check_eta(eta)?;
    let n = n_photons as f64;
    let (delta_phi, regime, optimal_n) = if eta <= (-1.0f64).exp() {
        (1.0 / (n * eta).sqrt(), ChopRegime::SinglePhoton, 1.0)
    } else if eta <= (-1.0 / n).exp() {
        ((E * eta.ln().abs() / n).sqrt(), ChopRegime::Chopped, 1.0 / eta.ln().abs())
    } else {
        (1.0 / (n * eta.powf(n / 2.0)), ChopRegime::Unchopped, n)
    };
    Ok(StrategyPrecision { name: Strategy::ChopTwoArm, delta_phi, regime: Some(regime), optimal_n: Some(optimal_n) })
}

/// `x_k = 2/(N+2) sin²(π(k+1)/(N+2))`.
pub fn sine_state(n_photons: usize) -> Result<ProbeState> {
    if n_photons == 0 {
        return Err(Error::InvalidState("sine state needs N >= 1".into()));
    }
    let m = (n_photons + 2) as f64;
    ProbeState::new(
        (0..=n_photons)
            .map(|k| 2.0 / m * (PI * (k + 1) as f64 / m).sin().powi(2))
            .collect(),
    )
}
