//! Dense reference implementations used as test oracles.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcsdp_core::{FactoredPsd, PairMap, SymmetricMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(d: usize, p: usize, rng: &mut ChaCha8Rng) -> PairMap {
    PairMap::new(DMatrix::from_fn(d, p, |_, _| rng.random_range(-1.0..1.0))).unwrap()
}

pub fn random_factor(d: usize, m: usize, rng: &mut ChaCha8Rng) -> FactoredPsd {
    FactoredPsd::new(DMatrix::from_fn(d, m, |_, _| rng.random_range(-1.0..1.0))).unwrap()
}

pub fn random_symmetric(d: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    SymmetricMatrix::new(&m + m.transpose()).unwrap()
}

pub fn random_vector(p: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0))
}

/// The `p × d²` matrix whose i-th row is `vec(τᵢτᵢᵀ)` (column-major).
pub fn dense_operator(map: &PairMap) -> DMatrix<f64> {
    let (d, p) = (map.d(), map.p());
    let t = map.taus();
    DMatrix::from_fn(p, d * d, |i, k| t[(k % d, i)] * t[(k / d, i)])
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// `A(U)` by explicit quadratic forms.
pub fn apply_by_loops(map: &PairMap, u: &DMatrix<f64>) -> DVector<f64> {
    let t = map.taus();
    DVector::from_fn(map.p(), |i, _| {
        let tau = t.column(i);
        (tau.transpose() * u * tau)[(0, 0)]
    })
}

/// `A*(z)` as `Σ zᵢ τᵢτᵢᵀ`.
pub fn adjoint_by_sum(map: &PairMap, z: &DVector<f64>) -> DMatrix<f64> {
    let t = map.taus();
    let d = map.d();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..map.p() {
        let tau = t.column(i);
        out += tau * tau.transpose() * z[i];
    }
    out
}

pub fn dense_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    (e.eigenvalues, e.eigenvectors)
}

/// `Π₊(M)` by clamping the eigenvalues of a dense symmetric matrix.
pub fn proj_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = dense_eigen(m);
    let clamped = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0)));
    &vecs * clamped * vecs.transpose()
}

/// Gradient of the reduced dual
/// `h(z) = (n/4)‖z‖² + ⟨z, b⟩ + (1/2α)‖Π₋(A*z − Φ)‖²`.
pub fn reduced_dual_grad(
    a: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    b: &DVector<f64>,
    n: f64,
    alpha: f64,
    z: &DVector<f64>,
) -> DVector<f64> {
    let d = phi.nrows();
    let m = unvec(&(a.transpose() * z), d) - phi;
    let neg = &m - proj_psd(&m);
    z * (n / 2.0) + b + a * vec_of(&neg) / alpha
}

pub fn reduced_dual_value(
    a: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    b: &DVector<f64>,
    n: f64,
    alpha: f64,
    z: &DVector<f64>,
) -> f64 {
    let d = phi.nrows();
    let m = unvec(&(a.transpose() * z), d) - phi;
    let neg = &m - proj_psd(&m);
    n / 4.0 * z.norm_squared() + z.dot(b) + neg.norm_squared() / (2.0 * alpha)
}

/// Minimizes the strongly convex reduced dual by Newton steps with a
/// finite-difference Hessian and Armijo backtracking, falling back to
/// gradient steps when the Newton direction is not a descent direction.
/// Close to the minimizer full steps are taken, since function values no
/// longer resolve the decrease.
pub fn reference_dual_minimizer(
    a: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    b: &DVector<f64>,
    n: f64,
    alpha: f64,
) -> DVector<f64> {
    let p = b.len();
    let f = |z: &DVector<f64>| reduced_dual_value(a, phi, b, n, alpha, z);
    let g = |z: &DVector<f64>| reduced_dual_grad(a, phi, b, n, alpha, z);
    let mut z = DVector::zeros(p);
    for _ in 0..500 {
        let grad = g(&z);
        if grad.norm() <= 1e-13 * (1.0 + z.norm()) {
            break;
        }
        let h = 1e-7 * (1.0 + z.norm());
        let mut hess = DMatrix::zeros(p, p);
        for k in 0..p {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            hess.set_column(k, &((g(&zp) - g(&zm)) / (2.0 * h)));
        }
        let hess = (&hess + hess.transpose()) * 0.5 + DMatrix::identity(p, p) * 1e-12;
        let mut dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad.clone(),
        };
        if dir.dot(&grad) >= 0.0 {
            dir = -grad.clone();
        }
        if grad.norm() < 1e-6 {
            z += dir;
            continue;
        }
        let f0 = f(&z);
        let slope = dir.dot(&grad);
        let mut step = 1.0;
        loop {
            let cand = &z + &dir * step;
            if f(&cand) <= f0 + 1e-4 * step * slope || step < 1e-12 {
                z = cand;
                break;
            }
            step *= 0.5;
        }
    }
    z
}
