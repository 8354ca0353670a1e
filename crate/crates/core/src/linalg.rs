//! Small dense eigenproblems and simplex-tangent helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and the matching unitary of a Hermitian matrix,
/// by cyclic complex Jacobi rotations. The input is symmetrized first so
/// that rounding noise in the anti-Hermitian part does not leak into the
/// result.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let mut a = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let scale = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // make a_pq real and positive with a diagonal phase on q
                let phase = apq / r;
                for k in 0..n {
                    a[(q, k)] *= phase;
                    a[(k, q)] *= phase.conj();
                    v[(k, q)] *= phase.conj();
                }
                let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * c - akq * s;
                    a[(k, q)] = akp * s + akq * c;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = apk * c - aqk * s;
                    a[(q, k)] = apk * s + aqk * c;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c - vkq * s;
                    v[(k, q)] = vkp * s + vkq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    hermitian_eigen(&m.map(|x| Complex64::new(x, 0.0))).0
}

/// Orthonormal basis of `{y : Σ y_i = 0}` in `R^n`, as the columns of an
/// `n × (n-1)` matrix (Helmert contrasts).
pub fn sum_zero_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n.saturating_sub(1));
    for c in 0..n.saturating_sub(1) {
        let m = (c + 1) as f64;
        let s = 1.0 / (m * (m + 1.0)).sqrt();
        for r in 0..=c {
            q[(r, c)] = s;
        }
        q[(c + 1, c)] = -m * s;
    }
    q
}

/// Largest eigenvalue of `H` restricted to `{y : Σ y_i = 0}`.
pub fn projected_max_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let q = sum_zero_basis(h.nrows());
    if q.ncols() == 0 {
        return 0.0;
    }
    let p = q.transpose() * h * &q;
    symmetric_eigenvalues(&p).last().copied().unwrap_or(0.0)
}
