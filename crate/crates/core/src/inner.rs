//! Inner solver for the proximal subproblem
//!
//! ```text
//! min (1/n)‖A(U) − b‖² + c⟨U, I⟩ − ⟨W, U⟩ + (α/2)‖U − Uᵏ‖²   s.t. U ⪰ 0
//! ```
//!
//! through its dual in `(z, Y)`:
//!
//! ```text
//! min (n/4)‖z‖² + ⟨z, b⟩ + δ₊(Y) + (1/2α)‖A*(z) − Y − Φ‖²,   Φ = W − cI + αUᵏ
//! ```
//!
//! using accelerated block coordinate descent. The z-block is a p×p SPD
//! linear system solved by Jacobi-preconditioned CG; the Y-block is a PSD
//! projection whose negative part directly yields the primal iterate
//! `U⁽ʲ⁾ = −(1/α)Π₋(A*(z) − Φ)`. Once the KKT residual γ is below ζ, a
//! certified primal point `Ũ` and the norm of its perturbation `Δ` are
//! computed so the outer loop can run its sieving test.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pairs::PairMap;
use crate::spectral::{psd_split, psd_split_eigen, sym_eigen, FactoredPsd, SymmetricMatrix};

/// `Φ = W − c·I + α·Uᵏ`, kept as its low-rank pieces plus the diagonal shift.
#[derive(Debug, Clone)]
pub struct PhiTerm {
    pub w: FactoredPsd,
    pub c: f64,
    pub alpha: f64,
    pub u_prox: FactoredPsd,
}

impl PhiTerm {
    pub fn to_dense(&self) -> SymmetricMatrix {
        let d = self.w.order();
        let mut m = DMatrix::zeros(d, d);
        if self.w.columns() > 0 {
            m += self.w.factor() * self.w.factor().transpose();
        }
        if self.u_prox.columns() > 0 {
            m += self.u_prox.factor() * self.u_prox.factor().transpose() * self.alpha;
        }
        for i in 0..d {
            m[(i, i)] -= self.c;
        }
        SymmetricMatrix::symmetrized(m)
    }

    /// `A(Φ) = A(W) − c·(‖τᵢ‖²)ᵢ + α·A(Uᵏ)` through the factored path.
    pub fn image(&self, map: &PairMap) -> Result<DVector<f64>> {
        let aw = map.apply_factored(&self.w)?;
        let au = map.apply_factored(&self.u_prox)?;
        Ok(aw - map.sq_norms() * self.c + au * self.alpha)
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator. Stops when
/// `‖Mx − rhs‖ ≤ tol·max(1, ‖rhs‖)`; hitting `max_iter` is reported through
/// `converged = false`, not as an error.
pub fn pcg_solve<F>(
    matvec: F,
    rhs: &DVector<f64>,
    diag_precond: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = rhs.len();
    if diag_precond.len() != n {
        return Err(Error::invalid("preconditioner length mismatch"));
    }
    if diag_precond.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("preconditioner diagonal must be positive"));
    }
    let target = tol * rhs.norm().max(1.0);
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.clone(),
        Some(_) => return Err(Error::invalid("initial guess length mismatch")),
        None => DVector::zeros(n),
    };
    let mut r = if x.iter().all(|&v| v == 0.0) {
        rhs.clone()
    } else {
        rhs - matvec(&x)?
    };
    let mut rnorm = r.norm();
    if rnorm <= target {
        return Ok(PcgOutcome {
            x,
            iterations: 0,
            residual_norm: rnorm,
            converged: true,
        });
    }
    let mut zv = r.component_div(diag_precond);
    let mut p = zv.clone();
    let mut rz = r.dot(&zv);
    for it in 1..=max_iter {
        let ap = matvec(&p)?;
        let curv = p.dot(&ap);
        if !(curv > f64::MIN_POSITIVE) || !curv.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "conjugate gradient breakdown (curvature {curv:e})"
            )));
        }
        let step = rz / curv;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        rnorm = r.norm();
        if rnorm <= target {
            return Ok(PcgOutcome {
                x,
                iterations: it,
                residual_norm: rnorm,
                converged: true,
            });
        }
        zv = r.component_div(diag_precond);
        let rz_next = r.dot(&zv);
        let beta = rz_next / rz;
        rz = rz_next;
        p = &zv + p * beta;
    }
    Ok(PcgOutcome {
        x,
        iterations: max_iter,
        residual_norm: rnorm,
        converged: false,
    })
}

/// Operator of the z-block system, `(n/2)·z + (1/α)·AAᵀz`.
pub fn z_system_matvec(
    map: &PairMap,
    n: usize,
    alpha: f64,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(z * (n as f64 / 2.0) + map.gram_matvec(z)? / alpha)
}

/// Solves `(n/2)z + b + (1/α)A(A*(z) − Ỹ − Φ) = 0` for z. Only the images
/// `A(Ỹ)` and `A(Φ)` of the matrix terms enter the system. `tol` is the
/// absolute residual target.
#[allow(clippy::too_many_arguments)]
pub fn solve_z(
    map: &PairMap,
    a_phi: &DVector<f64>,
    a_ytilde: &DVector<f64>,
    b: &DVector<f64>,
    n: usize,
    alpha: f64,
    tol: f64,
    z0: Option<&DVector<f64>>,
    max_iter: usize,
) -> Result<PcgOutcome> {
    let rhs = (a_ytilde + a_phi) / alpha - b;
    let diag = map.gram_diagonal() / alpha + DVector::from_element(map.p(), n as f64 / 2.0);
    let rel = tol / rhs.norm().max(1.0);
    pcg_solve(
        |v| z_system_matvec(map, n, alpha, v),
        &rhs,
        &diag,
        z0,
        rel,
        max_iter,
    )
}

/// Result of the closed-form Y-block update.
#[derive(Debug, Clone)]
pub struct DualBlock {
    /// `Y = Π₊(A*(z) − Φ)`
    pub y: FactoredPsd,
    /// `U⁽ʲ⁾ = −(1/α)Π₋(A*(z) − Φ)`
    pub u: FactoredPsd,
    /// `A(Y)`
    pub a_y: DVector<f64>,
    /// `A(U⁽ʲ⁾)`
    pub a_u: DVector<f64>,
}

/// Y-update and primal recovery from one eigendecomposition of
/// `A*(z) − Φ`. `A(Y)` is evaluated from whichever of the positive and
/// negative factors has fewer columns.
pub fn project_y(
    map: &PairMap,
    z: &DVector<f64>,
    phi_dense: &SymmetricMatrix,
    a_phi: &DVector<f64>,
    alpha: f64,
) -> Result<DualBlock> {
    let m = map.adjoint(z)?.sub(phi_dense);
    let eig = sym_eigen(&m)?;
    let (pos, neg) = psd_split_eigen(&eig);
    let u = neg.scaled(1.0 / alpha);
    let a_neg = map.apply_factored(&neg)?;
    let a_y = if pos.columns() <= neg.columns() {
        map.apply_factored(&pos)?
    } else {
        map.gram_matvec(z)? - a_phi + &a_neg
    };
    Ok(DualBlock {
        y: pos,
        u,
        a_u: a_neg / alpha,
        a_y,
    })
}

/// KKT residual `γ = (n/2)z + b + (1/α)A(A*(z) − Y − Φ)`, evaluated with the
/// identity `A*(z) − Y − Φ = −α·U⁽ʲ⁾` as `(n/2)z + b − A(U⁽ʲ⁾)`.
pub fn kkt_gamma(z: &DVector<f64>, a_u: &DVector<f64>, b: &DVector<f64>, n: usize) -> DVector<f64> {
    z * (n as f64 / 2.0) + b - a_u
}

/// Nesterov sequence: returns `(t_{j+1}, β_j)` with
/// `t_{j+1} = (1 + √(1 + 4t_j²))/2` and `β_j = (t_j − 1)/t_{j+1}`.
pub fn momentum(t: f64) -> (f64, f64) {
    let next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
    (next, (t - 1.0) / next)
}

/// Quantities that can be extrapolated `y + β(y − y_prev)`.
pub trait Extrapolate: Sized {
    fn extrapolate(&self, prev: &Self, beta: f64) -> Self;
}

impl Extrapolate for DVector<f64> {
    fn extrapolate(&self, prev: &Self, beta: f64) -> Self {
        self * (1.0 + beta) - prev * beta
    }
}

impl Extrapolate for SymmetricMatrix {
    fn extrapolate(&self, prev: &Self, beta: f64) -> Self {
        self.axpby(1.0 + beta, prev, -beta)
    }
}

/// One accelerated step: `(Ỹ, t_{j+1}, β_j)`.
pub fn accelerate<T: Extrapolate>(y_cur: &T, y_prev: &T, t: f64) -> (T, f64, f64) {
    let (next, beta) = momentum(t);
    (y_cur.extrapolate(y_prev, beta), next, beta)
}

/// Dual tolerance `ζ = (n/2)·‖A‖_F⁻¹·‖(2/n)A*A + (α−1)I‖_F⁻¹·ε` under which
/// `‖γ‖ ≤ ζ` certifies `‖Δ‖_F ≤ ε`.
pub fn zeta_bound(map: &PairMap, n: usize, alpha: f64, eps_next: f64) -> f64 {
    let h = map.hessian_shift_norm(n, alpha);
    let fa = map.frob_a();
    if eps_next == 0.0 {
        return 0.0;
    }
    if fa == 0.0 || h == 0.0 {
        return f64::INFINITY;
    }
    0.5 * n as f64 / (fa * h) * eps_next
}

/// Certified primal point and perturbation size.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// `Ũ = Π₊((1−α)U − (2/n)A*(A(U) − b) + Φ)`
    pub u_tilde: FactoredPsd,
    /// `‖((2/n)A*A + (α−1)I)(Ũ − U)‖_F`
    pub delta_norm: f64,
}

/// Builds `(Ũ, ‖Δ‖_F)`. `‖Δ‖_F` is expanded as
/// `√(‖(2/n)A*(A(D))‖² + 2(α−1)(2/n)‖A(D)‖² + (α−1)²‖D‖²)` with `D = Ũ − U`.
pub fn certificate(
    map: &PairMap,
    u: &FactoredPsd,
    a_u: &DVector<f64>,
    phi_dense: &SymmetricMatrix,
    b: &DVector<f64>,
    n: usize,
    alpha: f64,
) -> Result<Certificate> {
    let nf = n as f64;
    let u_dense = u.to_dense();
    let resid = a_u - b;
    let arg = u_dense
        .scale(1.0 - alpha)
        .sub(&map.adjoint(&resid)?.scale(2.0 / nf))
        .add(phi_dense);
    let (u_tilde, _) = psd_split(&arg)?;
    let diff = u_tilde.to_dense().sub(&u_dense);
    let a_d = map.apply(&diff)?;
    let shift = alpha - 1.0;
    let sq = 4.0 / (nf * nf) * map.adjoint_norm_sq(&a_d)?
        + 2.0 * shift * (2.0 / nf) * a_d.norm_squared()
        + shift * shift * diff.frobenius_norm().powi(2);
    Ok(Certificate {
        u_tilde,
        delta_norm: sq.max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone)]
pub struct AbcdOptions {
    pub max_inner: usize,
    pub pcg_max_iter: usize,
    /// Ratio of the z-block CG residual target to ζ.
    pub pcg_zeta_ratio: f64,
    /// Relative floor on the CG residual target, in units of `max(1, ‖rhs‖)`.
    pub pcg_rel_floor: f64,
    /// Reset the momentum sequence to `t = 1` whenever `‖γ‖` increases.
    pub adaptive_restart: bool,
}

impl Default for AbcdOptions {
    fn default() -> Self {
        Self {
            max_inner: 2000,
            pcg_max_iter: 5000,
            pcg_zeta_ratio: 1e-2,
            pcg_rel_floor: 1e-13,
            adaptive_restart: true,
        }
    }
}

/// Warm start `(z⁰, Ỹ¹)`.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub z: DVector<f64>,
    pub y: FactoredPsd,
}

/// Borrowed view of one inner iterate, handed to observers.
#[derive(Debug)]
pub struct InnerIterate<'a> {
    pub j: usize,
    pub z: &'a DVector<f64>,
    pub y: &'a FactoredPsd,
    pub u: &'a FactoredPsd,
    pub gamma_norm: f64,
    pub pcg_iters: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub z: DVector<f64>,
    pub y: FactoredPsd,
    pub u: FactoredPsd,
    pub u_tilde: FactoredPsd,
    pub delta_norm: f64,
    pub gamma_norm: f64,
    pub inner_iters: usize,
    pub pcg_iters: usize,
    /// False when `max_inner` ran out before `‖γ‖ ≤ ζ`.
    pub converged: bool,
}

/// Accelerated block coordinate descent on the dual subproblem. Returns the
/// first iterate with `‖γ‖ ≤ ζ` together with its certificate; when the
/// iteration budget runs out the last iterate is returned with
/// `converged = false`.
#[allow(clippy::too_many_arguments)]
pub fn abcd_solve(
    map: &PairMap,
    phi: &PhiTerm,
    b: &DVector<f64>,
    n: usize,
    alpha: f64,
    zeta: f64,
    opts: &AbcdOptions,
    warm: Option<&WarmStart>,
    mut observer: Option<&mut dyn FnMut(&InnerIterate<'_>)>,
) -> Result<InnerResult> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("proximal parameter must be positive"));
    }
    if !(zeta >= 0.0) {
        return Err(Error::invalid("dual tolerance must be nonnegative"));
    }
    if b.len() != map.p() {
        return Err(Error::invalid("target length does not match pair count"));
    }
    let start = Instant::now();
    let phi_dense = phi.to_dense();
    let a_phi = phi.image(map)?;
    let p = map.p();

    let (mut z, mut a_ytilde) = match warm {
        Some(ws) => (ws.z.clone(), map.apply_factored(&ws.y)?),
        None => {
            let (pos, _) = psd_split(&phi_dense.scale(-1.0))?;
            (DVector::zeros(p), map.apply_factored(&pos)?)
        }
    };
    let mut a_y_prev = a_ytilde.clone();
    let mut t = 1.0;
    let mut pcg_total = 0;
    let pcg_target = (opts.pcg_zeta_ratio * zeta).max(0.0);

    let mut j = 0;
    let mut prev_gamma = f64::INFINITY;
    loop {
        j += 1;
        let rhs_scale = ((&a_ytilde + &a_phi) / alpha - b).norm().max(1.0);
        let tol = pcg_target.max(opts.pcg_rel_floor * rhs_scale);
        let sol = solve_z(
            map,
            &a_phi,
            &a_ytilde,
            b,
            n,
            alpha,
            tol,
            Some(&z),
            opts.pcg_max_iter,
        )?;
        pcg_total += sol.iterations;
        z = sol.x;

        let block = project_y(map, &z, &phi_dense, &a_phi, alpha)?;
        let gamma = kkt_gamma(&z, &block.a_u, b, n);
        let gamma_norm = gamma.norm();
        if let Some(obs) = observer.as_mut() {
            obs(&InnerIterate {
                j,
                z: &z,
                y: &block.y,
                u: &block.u,
                gamma_norm,
                pcg_iters: sol.iterations,
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }

        let done = gamma_norm <= zeta;
        if done || j >= opts.max_inner {
            let cert = certificate(map, &block.u, &block.a_u, &phi_dense, b, n, alpha)?;
            return Ok(InnerResult {
                z,
                y: block.y,
                u: block.u,
                u_tilde: cert.u_tilde,
                delta_norm: cert.delta_norm,
                gamma_norm,
                inner_iters: j,
                pcg_iters: pcg_total,
                converged: done,
            });
        }

        if opts.adaptive_restart && gamma_norm > prev_gamma {
            t = 1.0;
        }
        prev_gamma = gamma_norm;
        let (next_a_ytilde, t_next, _) = accelerate(&block.a_y, &a_y_prev, t);
        a_ytilde = next_a_ytilde;
        a_y_prev = block.a_y;
        t = t_next;
    }
}
