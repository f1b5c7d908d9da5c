//! Outer difference-of-convex loops for
//!
//! ```text
//! J_c(U) = (1/n)‖A(U) − b‖² + c⟨U, I⟩ − c‖U‖_(r)
//! ```
//!
//! over the PSD cone: the sieving inexact proximal DC method, classical
//! proximal DC with tight inner solves, proximal DC with extrapolation, and
//! geometric penalty continuation on top of any of them.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{abcd_solve, momentum, zeta_bound, AbcdOptions, PhiTerm, WarmStart};
use crate::problem::SdppInstance;
use crate::spectral::{
    factored_rank, kyfan_subgradient, psd_split, sym_eigen, FactoredPsd, SymmetricMatrix,
};

/// Solver tunables. Defaults follow the benchmark protocol on scaled
/// instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Proximal parameter α.
    pub alpha: f64,
    /// Sieving parameter κ ∈ (0, 1).
    pub kappa: f64,
    /// First inexactness bound ε₁.
    pub eps_init: f64,
    /// Geometric decay of the inexactness bounds.
    pub eps_decay: f64,
    pub eps_floor: f64,
    /// Initial penalty for continuation.
    pub c0: f64,
    /// Penalty growth factor ρ > 1.
    pub rho: f64,
    /// η threshold for the sieving and classical proximal DC methods.
    pub eta_tol: f64,
    /// η threshold for the extrapolated method.
    pub eta_tol_pdcae: f64,
    /// Absolute ‖V − U‖_F stopping threshold; 0 disables it.
    pub x_tol: f64,
    /// Relative ‖V − U‖_F / (1 + ‖U‖_F) stopping threshold; 0 disables it.
    pub x_tol_rel: f64,
    /// Measure η on J_c instead of J.
    pub eta_on_jc: bool,
    pub max_outer: usize,
    pub max_penalty_rounds: usize,
    /// Fixed dual tolerance ζ for the classical proximal DC inner solves.
    pub abcd_tol_pdca: f64,
    pub max_inner: usize,
    /// Momentum restart in the inner solver when the dual residual grows.
    pub abcd_restart: bool,
    /// Extrapolation on/off for the extrapolated method.
    pub pdcae_extrapolate: bool,
    /// Looser η used when computing the convex initial point.
    pub init_eta_tol: f64,
    pub init_max_iter: usize,
    /// Relative eigenvalue tolerance for rank decisions.
    pub rank_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 5e-6,
            kappa: 0.5,
            eps_init: 1e-4,
            eps_decay: 0.9,
            eps_floor: 1e-12,
            c0: 1e-4,
            rho: 10f64.sqrt(),
            eta_tol: 7e-8,
            eta_tol_pdcae: 1e-7,
            x_tol: 0.0,
            x_tol_rel: 0.0,
            eta_on_jc: false,
            max_outer: 5000,
            max_penalty_rounds: 12,
            abcd_tol_pdca: 1e-9,
            max_inner: 2000,
            abcd_restart: true,
            pdcae_extrapolate: true,
            init_eta_tol: 1e-3,
            init_max_iter: 5000,
            rank_tol: crate::spectral::DEFAULT_RANK_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("eps_init", self.eps_init),
            ("c0", self.c0),
            ("abcd_tol_pdca", self.abcd_tol_pdca),
            ("rank_tol", self.rank_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::invalid("kappa must lie in (0, 1)"));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(Error::invalid("eps_decay must lie in (0, 1]"));
        }
        if !(self.rho > 1.0) {
            return Err(Error::invalid("rho must exceed 1"));
        }
        let nonneg = [
            ("eps_floor", self.eps_floor),
            ("eta_tol", self.eta_tol),
            ("eta_tol_pdcae", self.eta_tol_pdcae),
            ("x_tol", self.x_tol),
            ("x_tol_rel", self.x_tol_rel),
            ("init_eta_tol", self.init_eta_tol),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if self.max_inner == 0 {
            return Err(Error::invalid("max_inner must be positive"));
        }
        Ok(())
    }

    fn abcd_options(&self) -> AbcdOptions {
        AbcdOptions {
            max_inner: self.max_inner,
            adaptive_restart: self.abcd_restart,
            ..AbcdOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Serious,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sipdca,
    Pdca,
    Pdcae,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sipdca => "sipdca",
            Algorithm::Pdca => "pdca",
            Algorithm::Pdcae => "pdcae",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sipdca" | "s-ipdca" => Ok(Algorithm::Sipdca),
            "pdca" => Ok(Algorithm::Pdca),
            "pdcae" => Ok(Algorithm::Pdcae),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Telemetry for one outer iteration. For the sieving method `J`/`Jc`
/// describe the trial point; `kind` says whether it became the new center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub kind: StepKind,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "Jc")]
    pub jc: f64,
    pub eta: f64,
    pub delta: f64,
    pub zeta: f64,
    pub inner: usize,
    pub rank: usize,
    pub t_ms: f64,
    pub c: f64,
    pub eps: f64,
    /// `‖V − Uᵏ‖_F`
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterateLog {
    pub initial_j: f64,
    pub initial_jc: f64,
    pub records: Vec<IterateRecord>,
}

impl IterateLog {
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn total_inner(&self) -> usize {
        self.records.iter().map(|r| r.inner).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    RankNotReached,
}

/// Solver output in the coordinates of the instance that was solved; use
/// [`Solution::unscaled`] for the original problem.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: FactoredPsd,
    pub objective_j: f64,
    pub objective_jc: f64,
    pub rank: usize,
    pub c_final: f64,
    pub log: IterateLog,
    pub status: SolveStatus,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Inner solves that exhausted their iteration budget.
    pub inner_failures: usize,
    pub seconds: f64,
}

impl Solution {
    pub fn unscaled(&self, inst: &SdppInstance) -> FactoredPsd {
        inst.unscale_solution(&self.u)
    }

    pub fn final_eta(&self) -> f64 {
        self.log.records.last().map(|r| r.eta).unwrap_or(0.0)
    }
}

/// `J(U) = (1/n)‖A(U) − b‖²`
pub fn objective_j(inst: &SdppInstance, u: &FactoredPsd) -> Result<f64> {
    let res = inst.map.apply_factored(u)? - &inst.b;
    Ok(res.norm_squared() / inst.n_samples as f64)
}

/// Eigenvalues of `VVᵀ` (nonincreasing) through the small Gram `VᵀV`.
fn factored_spectrum(u: &FactoredPsd) -> Result<Vec<f64>> {
    if u.columns() == 0 {
        return Ok(Vec::new());
    }
    let small = SymmetricMatrix::new(u.factor().transpose() * u.factor())?;
    Ok(sym_eigen(&small)?.values.iter().copied().collect())
}

/// `c(⟨U, I⟩ − ‖U‖_(r))`, computed as `c` times the spectral tail beyond r.
pub fn rank_penalty(u: &FactoredPsd, r: usize, c: f64) -> Result<f64> {
    let spec = factored_spectrum(u)?;
    Ok(c * spec.iter().skip(r).sum::<f64>())
}

/// `J_c(U) = J(U) + c(⟨U, I⟩ − ‖U‖_(r))`
pub fn objective_jc(inst: &SdppInstance, u: &FactoredPsd, c: f64) -> Result<f64> {
    Ok(objective_j(inst, u)? + rank_penalty(u, inst.r, c)?)
}

/// `η = |J_new − J_prev| / (1 + |J_prev|)`
pub fn stopping_eta(j_prev: f64, j_new: f64) -> f64 {
    (j_new - j_prev).abs() / (1.0 + j_prev.abs())
}

fn frob_distance(a: &FactoredPsd, b: &FactoredPsd) -> f64 {
    a.to_dense().sub(&b.to_dense()).frobenius_norm()
}

fn check_start(inst: &SdppInstance, c: f64, cfg: &SolverConfig, u0: &FactoredPsd) -> Result<()> {
    cfg.validate()?;
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "penalty must be nonnegative, got {c}"
        )));
    }
    if u0.order() != inst.d() {
        return Err(Error::invalid(format!(
            "initial point has order {} but instance has order {}",
            u0.order(),
            inst.d()
        )));
    }
    Ok(())
}

type Sink<'a> = Option<&'a mut dyn FnMut(&IterateRecord)>;

fn subgradient_at(u: &FactoredPsd, r: usize, c: f64) -> Result<FactoredPsd> {
    kyfan_subgradient(&sym_eigen(&u.to_dense())?, r, c)
}

#[derive(Clone, Copy, PartialEq)]
enum InnerMode {
    Sieving,
    Exact,
}

fn proximal_dc(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
    mode: InnerMode,
    mut sink: Sink<'_>,
) -> Result<Solution> {
    check_start(inst, c, cfg, u0)?;
    let start = Instant::now();
    let n = inst.n_samples;
    let alpha = cfg.alpha;
    let opts = cfg.abcd_options();

    let mut center = u0.clone();
    let mut w = subgradient_at(&center, inst.r, c)?;
    let mut j_center = objective_j(inst, &center)?;
    let mut jc_center = j_center + rank_penalty(&center, inst.r, c)?;
    let mut log = IterateLog {
        initial_j: j_center,
        initial_jc: jc_center,
        records: Vec::new(),
    };
    let mut eps = cfg.eps_init;
    let mut warm: Option<WarmStart> = None;
    let mut inner_total = 0;
    let mut failures = 0;

    for k in 0..cfg.max_outer {
        let phi = PhiTerm {
            w: w.clone(),
            c,
            alpha,
            u_prox: center.clone(),
        };
        let zeta = match mode {
            InnerMode::Sieving => zeta_bound(&inst.map, n, alpha, eps),
            InnerMode::Exact => cfg.abcd_tol_pdca,
        };
        let inner = abcd_solve(
            &inst.map,
            &phi,
            &inst.b,
            n,
            alpha,
            zeta,
            &opts,
            warm.as_ref(),
            None,
        )?;
        inner_total += inner.inner_iters;
        if !inner.converged {
            failures += 1;
        }
        warm = Some(WarmStart {
            z: inner.z.clone(),
            y: inner.y.clone(),
        });

        let trial = inner.u_tilde.clone().compact();
        let j_trial = objective_j(inst, &trial)?;
        let jc_trial = j_trial + rank_penalty(&trial, inst.r, c)?;
        let step = frob_distance(&trial, &center);
        let eta = if cfg.eta_on_jc {
            stopping_eta(jc_center, jc_trial)
        } else {
            stopping_eta(j_center, j_trial)
        };
        let serious = match mode {
            InnerMode::Exact => true,
            InnerMode::Sieving => inner.delta_norm < (1.0 - cfg.kappa) * alpha / 2.0 * step,
        };
        let record = IterateRecord {
            k: k + 1,
            kind: if serious {
                StepKind::Serious
            } else {
                StepKind::Null
            },
            j: j_trial,
            jc: jc_trial,
            eta,
            delta: inner.delta_norm,
            zeta,
            inner: inner.inner_iters,
            rank: factored_rank(&trial, cfg.rank_tol),
            t_ms: start.elapsed().as_secs_f64() * 1e3,
            c,
            eps,
            step,
        };
        if let Some(s) = sink.as_mut() {
            s(&record);
        }
        let rank = record.rank;
        log.records.push(record);

        let center_norm = center.to_dense().frobenius_norm();
        let stop = eta <= cfg.eta_tol
            || (cfg.x_tol > 0.0 && step <= cfg.x_tol)
            || (cfg.x_tol_rel > 0.0 && step / (1.0 + center_norm) <= cfg.x_tol_rel);
        if stop {
            return Ok(Solution {
                u: trial,
                objective_j: j_trial,
                objective_jc: jc_trial,
                rank,
                c_final: c,
                log,
                status: SolveStatus::Converged,
                outer_iters: k + 1,
                inner_iters: inner_total,
                inner_failures: failures,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        if serious {
            center = trial;
            w = subgradient_at(&center, inst.r, c)?;
            j_center = j_trial;
            jc_center = jc_trial;
        }
        if mode == InnerMode::Sieving {
            eps = (eps * cfg.eps_decay).max(cfg.eps_floor);
        }
    }
    Ok(Solution {
        rank: factored_rank(&center, cfg.rank_tol),
        u: center,
        objective_j: j_center,
        objective_jc: jc_center,
        c_final: c,
        log,
        status: SolveStatus::MaxIterations,
        outer_iters: cfg.max_outer,
        inner_iters: inner_total,
        inner_failures: failures,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Sieving inexact proximal DC. Each subproblem is solved only to
/// `‖Δ‖_F ≤ εₖ₊₁`; the trial point becomes the new stability center (serious
/// step) when `‖Δ‖_F < (1−κ)(α/2)‖V − Uᵏ‖_F`, otherwise the center and
/// subgradient are kept and only ε shrinks (null step).
pub fn sipdca_solve(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
) -> Result<Solution> {
    proximal_dc(inst, c, cfg, u0, InnerMode::Sieving, None)
}

pub fn sipdca_solve_observed(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
    sink: &mut dyn FnMut(&IterateRecord),
) -> Result<Solution> {
    proximal_dc(inst, c, cfg, u0, InnerMode::Sieving, Some(sink))
}

/// Classical proximal DC: every subproblem solved to the fixed dual
/// tolerance `abcd_tol_pdca`, every step accepted.
pub fn pdca_solve(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
) -> Result<Solution> {
    proximal_dc(inst, c, cfg, u0, InnerMode::Exact, None)
}

pub fn pdca_solve_observed(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
    sink: &mut dyn FnMut(&IterateRecord),
) -> Result<Solution> {
    proximal_dc(inst, c, cfg, u0, InnerMode::Exact, Some(sink))
}

/// Upper bound `L = (2/n)‖AAᵀ‖₂` on the gradient Lipschitz constant of J.
pub fn lipschitz_constant(inst: &SdppInstance) -> Result<f64> {
    let top = inst.map.gram_spectral_norm(10_000, 1e-12)?;
    Ok(2.0 / inst.n_samples as f64 * top)
}

fn pdcae_run(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
    eta_tol: f64,
    max_iter: usize,
    mut sink: Sink<'_>,
) -> Result<Solution> {
    check_start(inst, c, cfg, u0)?;
    let start = Instant::now();
    let nf = inst.n_samples as f64;
    let lip = lipschitz_constant(inst)?;
    let mut log = IterateLog::default();
    let mut u = u0.clone();
    let mut j_u = objective_j(inst, &u)?;
    let mut jc_u = j_u + rank_penalty(&u, inst.r, c)?;
    log.initial_j = j_u;
    log.initial_jc = jc_u;
    if lip == 0.0 {
        return Err(Error::DegenerateData("operator is identically zero".into()));
    }
    let mut u_dense = u.to_dense();
    let mut prev_dense = u_dense.clone();
    let mut t = 1.0;

    for k in 0..max_iter {
        let (t_next, beta) = momentum(t);
        let beta = if cfg.pdcae_extrapolate { beta } else { 0.0 };
        let extrap = if beta == 0.0 {
            u_dense.clone()
        } else {
            u_dense.axpby(1.0 + beta, &prev_dense, -beta)
        };
        let w = kyfan_subgradient(&sym_eigen(&u_dense)?, inst.r, c)?;
        let resid = inst.map.apply(&extrap)? - &inst.b;
        let grad = inst.map.adjoint(&resid)?.scale(2.0 / nf);
        let arg = extrap
            .scale(lip)
            .add(&w.to_dense())
            .shift_diagonal(-c)
            .sub(&grad);
        let (pos, _) = psd_split(&arg)?;
        let next = pos.scaled(1.0 / lip).compact();
        let j_next = objective_j(inst, &next)?;
        let jc_next = j_next + rank_penalty(&next, inst.r, c)?;
        let next_dense = next.to_dense();
        let step = next_dense.sub(&u_dense).frobenius_norm();
        let eta = if cfg.eta_on_jc {
            stopping_eta(jc_u, jc_next)
        } else {
            stopping_eta(j_u, j_next)
        };
        let record = IterateRecord {
            k: k + 1,
            kind: StepKind::Serious,
            j: j_next,
            jc: jc_next,
            eta,
            delta: 0.0,
            zeta: 0.0,
            inner: 0,
            rank: factored_rank(&next, cfg.rank_tol),
            t_ms: start.elapsed().as_secs_f64() * 1e3,
            c,
            eps: 0.0,
            step,
        };
        if let Some(s) = sink.as_mut() {
            s(&record);
        }
        let rank = record.rank;
        log.records.push(record);
        let u_norm = u_dense.frobenius_norm();
        prev_dense = std::mem::replace(&mut u_dense, next_dense);
        u = next;
        j_u = j_next;
        jc_u = jc_next;
        t = t_next;
        let stop = eta <= eta_tol
            || (cfg.x_tol > 0.0 && step <= cfg.x_tol)
            || (cfg.x_tol_rel > 0.0 && step / (1.0 + u_norm) <= cfg.x_tol_rel);
        if stop {
            return Ok(Solution {
                u,
                objective_j: j_u,
                objective_jc: jc_u,
                rank,
                c_final: c,
                log,
                status: SolveStatus::Converged,
                outer_iters: k + 1,
                inner_iters: 0,
                inner_failures: 0,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(Solution {
        rank: factored_rank(&u, cfg.rank_tol),
        u,
        objective_j: j_u,
        objective_jc: jc_u,
        c_final: c,
        log,
        status: SolveStatus::MaxIterations,
        outer_iters: max_iter,
        inner_iters: 0,
        inner_failures: 0,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Proximal DC with extrapolation: closed-form projected step
/// `U⁺ = (1/L)Π₊(L·Ũ + W − cI − (2/n)A*(A(Ũ) − b))` from the extrapolated
/// point `Ũ = Uᵏ + βₖ(Uᵏ − Uᵏ⁻¹)`.
pub fn pdcae_solve(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
) -> Result<Solution> {
    pdcae_run(inst, c, cfg, u0, cfg.eta_tol_pdcae, cfg.max_outer, None)
}

pub fn pdcae_solve_observed(
    inst: &SdppInstance,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
    sink: &mut dyn FnMut(&IterateRecord),
) -> Result<Solution> {
    pdcae_run(
        inst,
        c,
        cfg,
        u0,
        cfg.eta_tol_pdcae,
        cfg.max_outer,
        Some(sink),
    )
}

/// Runs the chosen method at a fixed penalty.
pub fn solve_fixed(
    inst: &SdppInstance,
    algorithm: Algorithm,
    c: f64,
    cfg: &SolverConfig,
    u0: &FactoredPsd,
    sink: Option<&mut dyn FnMut(&IterateRecord)>,
) -> Result<Solution> {
    match algorithm {
        Algorithm::Sipdca => proximal_dc(inst, c, cfg, u0, InnerMode::Sieving, sink),
        Algorithm::Pdca => proximal_dc(inst, c, cfg, u0, InnerMode::Exact, sink),
        Algorithm::Pdcae => pdcae_run(inst, c, cfg, u0, cfg.eta_tol_pdcae, cfg.max_outer, sink),
    }
}

/// Low-precision solution of the convex problem (c = 0) by the extrapolated
/// projected gradient method, used as the starting point.
pub fn initial_point(inst: &SdppInstance, cfg: &SolverConfig) -> Result<FactoredPsd> {
    if inst.b.iter().all(|&v| v == 0.0) {
        return Ok(FactoredPsd::empty(inst.d()));
    }
    let start = FactoredPsd::empty(inst.d());
    let sol = pdcae_run(
        inst,
        0.0,
        cfg,
        &start,
        cfg.init_eta_tol,
        cfg.init_max_iter,
        None,
    )?;
    Ok(sol.u)
}

/// Geometric penalty continuation from the convex initial point.
pub fn penalty_continuation(
    inst: &SdppInstance,
    cfg: &SolverConfig,
    algorithm: Algorithm,
) -> Result<Solution> {
    let u0 = initial_point(inst, cfg)?;
    penalty_continuation_from(inst, cfg, algorithm, &u0, None)
}

/// Solves with `c = c₀, ρc₀, ρ²c₀, …`, warm-starting each round from the
/// previous solution, until the numerical rank is at most r. After
/// `max_penalty_rounds` the lowest-rank solution is returned with status
/// [`SolveStatus::RankNotReached`].
pub fn penalty_continuation_from(
    inst: &SdppInstance,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    u0: &FactoredPsd,
    mut sink: Sink<'_>,
) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let mut c = cfg.c0;
    let mut current = u0.clone();
    let mut best: Option<Solution> = None;
    let mut merged = IterateLog::default();
    let (mut outer, mut inner, mut failures) = (0, 0, 0);
    let rounds = cfg.max_penalty_rounds.max(1);

    for round in 0..rounds {
        let sol = match sink.as_mut() {
            Some(s) => solve_fixed(inst, algorithm, c, cfg, &current, Some(&mut **s))?,
            None => solve_fixed(inst, algorithm, c, cfg, &current, None)?,
        };
        if round == 0 {
            merged.initial_j = sol.log.initial_j;
            merged.initial_jc = sol.log.initial_jc;
        }
        merged.records.extend(sol.log.records.iter().cloned());
        outer += sol.outer_iters;
        inner += sol.inner_iters;
        failures += sol.inner_failures;
        current = sol.u.clone();

        let reached = sol.rank <= inst.r;
        let better = match &best {
            None => true,
            Some(b) => sol.rank < b.rank || (sol.rank == b.rank && sol.objective_j < b.objective_j),
        };
        if better || reached {
            best = Some(sol);
        }
        if reached {
            break;
        }
        c *= cfg.rho;
    }
    let mut out = best.expect("at least one round ran");
    out.status = if out.rank <= inst.r {
        match out.status {
            SolveStatus::MaxIterations => SolveStatus::MaxIterations,
            _ => SolveStatus::Converged,
        }
    } else {
        SolveStatus::RankNotReached
    };
    out.log = merged;
    out.outer_iters = outer;
    out.inner_iters = inner;
    out.inner_failures = failures;
    out.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Residual vector `A(U) − b`.
pub fn residual(inst: &SdppInstance, u: &FactoredPsd) -> Result<DVector<f64>> {
    Ok(inst.map.apply_factored(u)? - &inst.b)
}
