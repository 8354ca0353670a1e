mod common;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use qfi_optics::measurement::{
    classical_fisher, optimal_povm, simulate_ml, ElementKind, MlOptions, Povm, PovmElement, Sector,
};
use qfi_optics::qfi::{qfi_exact_value, qfi_one_arm};
use qfi_optics::{LossModel, ProbeState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.qr().q()
}

fn random_projective(rng: &mut ChaCha8Rng, n: usize) -> Povm {
    let mut elements = Vec::new();
    for l in 0..=n {
        let u = random_unitary(rng, n - l + 1);
        for c in 0..u.ncols() {
            elements.push(PovmElement {
                lost_total: l,
                sector: Sector::Merged { lost_total: l },
                kind: ElementKind::Completion,
                vector: u.column(c).into_owned(),
            });
        }
    }
    Povm { n_photons: n, anchor_phase: 0.0, elements, zero_variance: Vec::new() }
}

#[test]
fn path_symmetric_state_saturates_at_every_phase() {
    // α_k = α*_{N−k} e^{iχ}
    let chi = 0.7;
    let x = [0.1, 0.25, 0.3, 0.25, 0.1];
    let phases: Vec<f64> = (0..5).map(|k| 0.5 * chi + [0.4, -0.9, 0.0, 0.9, -0.4][k]).collect();
    let s = ProbeState::with_phases(x.to_vec(), phases).unwrap();
    let amps = s.amplitudes();
    for k in 0..5 {
        let d = amps[k] - amps[4 - k].conj() * Complex64::from_polar(1.0, chi);
        assert!(d.norm() < 1e-12);
    }
    let phi0 = 0.3;
    let povm = optimal_povm(&s, LossModel::lossless(), phi0).unwrap();
    let at = classical_fisher(&povm, &s, LossModel::lossless(), phi0).unwrap();
    let off = classical_fisher(&povm, &s, LossModel::lossless(), phi0 + 0.2).unwrap();
    assert!((at - off).abs() < 1e-8, "{at} vs {off}");
    assert!((at - 4.0 * s.variance_k()).abs() < 1e-8);
}

#[test]
fn asymmetric_state_loses_information_away_from_anchor() {
    let s = ProbeState::new(vec![0.5, 0.2, 0.0, 0.3]).unwrap();
    let loss = LossModel::lossless();
    let povm = optimal_povm(&s, loss, 0.0).unwrap();
    let fq = 4.0 * s.variance_k();
    let at = classical_fisher(&povm, &s, loss, 0.0).unwrap();
    let off = classical_fisher(&povm, &s, loss, 0.3).unwrap();
    assert!((at - fq).abs() < 1e-8);
    assert!(off < fq - 1e-3, "{off} vs {fq}");
}

#[test]
fn random_projective_measurements_obey_cramer_rao() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let n = rng.gen_range(1..=5);
        let phases = rng.gen_bool(0.5);
        let s = random_state(&mut rng, n, phases);
        let loss = LossModel::new(random_eta(&mut rng), random_eta(&mut rng)).unwrap();
        let povm = random_projective(&mut rng, n);
        let phi = rng.gen_range(-1.0..1.0);
        let cfi = classical_fisher(&povm, &s, loss, phi).unwrap();
        let fq = qfi_exact_value(&s, loss, phi).unwrap();
        assert!(cfi <= fq + 1e-8, "{cfi} > {fq}");
    }
}

#[test]
fn optimal_povm_never_beats_exact_qfi_two_arm() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..30 {
        let n = rng.gen_range(1..=6);
        let s = random_state(&mut rng, n, false);
        let loss = LossModel::new(random_eta(&mut rng), random_eta(&mut rng)).unwrap();
        let phi0 = rng.gen_range(-1.0..1.0);
        let povm = optimal_povm(&s, loss, phi0).unwrap();
        assert!(povm.completeness_error() < 1e-10);
        let cfi = classical_fisher(&povm, &s, loss, phi0).unwrap();
        let fq = qfi_exact_value(&s, loss, phi0).unwrap();
        assert!(cfi <= fq + 1e-8);
        assert!((cfi - fq).abs() < 1e-7 * fq.max(1.0), "SLD basis should saturate: {cfi} vs {fq}");
    }
}

#[test]
fn completion_choice_does_not_change_information_at_anchor() {
    let s = ProbeState::new(vec![0.2, 0.3, 0.1, 0.15, 0.25]).unwrap();
    let loss = LossModel::one_arm(0.75).unwrap();
    let phi0 = 0.1;
    let mut povm = optimal_povm(&s, loss, phi0).unwrap();
    let base = classical_fisher(&povm, &s, loss, phi0).unwrap();
    // rotate the completion vectors of each sector among themselves
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for l in 0..=4 {
        let idx: Vec<usize> = povm
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.lost_total == l && e.kind == ElementKind::Completion)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            continue;
        }
        let u = random_unitary(&mut rng, idx.len());
        let old: Vec<_> = idx.iter().map(|&i| povm.elements[i].vector.clone()).collect();
        for (c, &i) in idx.iter().enumerate() {
            povm.elements[i].vector = old.iter().enumerate().fold(old[0].clone() * Complex64::new(0.0, 0.0), |acc, (r, v)| acc + v * u[(r, c)]);
        }
    }
    assert!(povm.completeness_error() < 1e-10);
    let rotated = classical_fisher(&povm, &s, loss, phi0).unwrap();
    assert!((base - rotated).abs() < 1e-8);
    assert!((base - qfi_one_arm(&s, 0.75).unwrap()).abs() < 1e-8);
}

#[test]
fn ml_variance_tracks_fisher_information_as_repetitions_grow() {
    let s = ProbeState::new(vec![0.5, 0.5]).unwrap();
    let loss = LossModel::lossless();
    let povm = optimal_povm(&s, loss, 0.2).unwrap();
    for (nu, lo, hi) in [(100, 0.5, 2.0), (1_000, 0.6, 1.6), (10_000, 0.7, 1.4)] {
        let run = simulate_ml(&s, loss, &povm, 0.2, nu, 200, 1234, &MlOptions::default()).unwrap();
        assert_eq!(run.bracket_failures, 0);
        assert!((run.fisher - 1.0).abs() < 1e-10);
        assert!(run.variance_ratio >= lo && run.variance_ratio <= hi, "ν = {nu}: ratio {}", run.variance_ratio);
    }
}

#[test]
fn simulation_replays_from_seed() {
    let s = ProbeState::new(vec![0.3, 0.4, 0.3]).unwrap();
    let loss = LossModel::one_arm(0.8).unwrap();
    let povm = optimal_povm(&s, loss, 0.0).unwrap();
    let a = simulate_ml(&s, loss, &povm, 0.0, 500, 10, 99, &MlOptions::default()).unwrap();
    let b = simulate_ml(&s, loss, &povm, 0.0, 500, 10, 99, &MlOptions::default()).unwrap();
    assert_eq!(a.estimates, b.estimates);
    let c = simulate_ml(&s, loss, &povm, 0.0, 500, 10, 100, &MlOptions::default()).unwrap();
    assert_ne!(a.estimates, c.estimates);
    // trial t of seed s is trial t-1 of seed s+1
    assert_eq!(a.estimates[1..], c.estimates[..9]);
}
