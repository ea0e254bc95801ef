//! Consensus ADMM over households.
//!
//! The splitting is `u = v`: each household keeps its own block `uᵢ` inside
//! `𝕌ᵢ` with the group penalty `σ̃ᵢ‖uᵢ‖_p`, while the coordinator owns the
//! copy `v` carrying the peak-shaving term `(1/N)‖A v − b‖²`. One iteration is
//!
//! 1. parallel step: `uᵢ ← argmin σ̃ᵢ‖uᵢ‖_p + (ρ/2)‖uᵢ − vᵢ − λᵢ/ρ‖²` over `𝕌ᵢ`,
//!    and (default order) `λᵢ ← λᵢ + ρ(vᵢ − uᵢ)` with the old `vᵢ`;
//! 2. consensus step: `v ← argmin (1/N)‖A v − b‖² + (ρ/2)‖v − u + λ/ρ‖²`;
//! 3. stop when `ρ‖u − v‖ ≤ ε` and `ρ‖v − v_old‖ ≤ ε`;
//! 4. adapt `ρ` from the ratio of the two residuals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::problem::{objective_value, GroupNorm, PeakShavingProblem};
use crate::qpcore::{Polytope, ProjectionStats, Projector, QpStatus, QP_MAX_ITER};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualUpdateOrder {
    /// `λ` is updated in the parallel step with the previous `v`. Spelled
    /// `paper` in configs and on the command line.
    #[default]
    #[serde(rename = "paper", alias = "lagged")]
    Lagged,
    /// `λ` is updated after the consensus step with the new `v`.
    Standard,
}

impl std::str::FromStr for DualUpdateOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "lagged" => Ok(Self::Lagged),
            "standard" => Ok(Self::Standard),
            other => Err(Error::InvalidInput(format!("unknown dual update order {other:?}"))),
        }
    }
}

/// How the `p = 2` local problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSolver {
    /// Root-finding on the norm of the solution; each evaluation is one
    /// projection onto `𝕌ᵢ`.
    #[default]
    Exact,
    /// Inner ADMM alternating a projection and a group soft-threshold.
    InnerAdmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    /// Initial dual step size; `None` uses the curvature `2c/N` of the
    /// tracking term (see [`PeakShavingProblem::tracking_curvature`]).
    pub rho0: Option<f64>,
    pub eps: f64,
    pub eta: f64,
    pub mu: f64,
    pub max_iter: usize,
    /// Relative bracket width for [`LocalSolver::Exact`], residual tolerance
    /// for [`LocalSolver::InnerAdmm`].
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub dual_update_order: DualUpdateOrder,
    pub local_solver: LocalSolver,
    /// Record one trace row per iteration.
    pub record_trace: bool,
    /// Track the largest constraint violation of any `u` iterate.
    pub monitor_feasibility: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho0: None,
            eps: 1e-6,
            eta: 2.0,
            mu: 10.0,
            max_iter: 5000,
            inner_tol: 1e-12,
            inner_max_iter: 10_000,
            dual_update_order: DualUpdateOrder::Lagged,
            local_solver: LocalSolver::Exact,
            record_trace: true,
            monitor_feasibility: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.rho0.map_or(true, |r| r > 0.0 && r.is_finite()), "rho0 must be positive"),
            (self.eps > 0.0, "eps must be positive"),
            (self.eta > 1.0, "eta must exceed 1"),
            (self.mu > 1.0, "mu must exceed 1"),
            (self.max_iter > 0, "max_iter must be positive"),
            (self.inner_tol > 0.0, "inner_tol must be positive"),
            (self.inner_max_iter > 0, "inner_max_iter must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidInput((*msg).into())),
            None => Ok(()),
        }
    }

    pub fn initial_rho(&self, problem: &PeakShavingProblem) -> f64 {
        self.rho0.unwrap_or_else(|| problem.tracking_curvature())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub iteration: usize,
}

impl AdmmState {
    pub fn zeros(len: usize, rho: f64) -> Self {
        Self::warm(vec![0.0; len], vec![0.0; len], rho)
    }

    /// Warm start with `v = u`.
    pub fn warm(u: Vec<f64>, lambda: Vec<f64>, rho: f64) -> Self {
        Self {
            v: u.clone(),
            u,
            lambda,
            rho,
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub r_pri: f64,
    pub r_dual: f64,
}

/// Floats exchanged between households and the coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommsLedger {
    pub floats_up_per_iter: usize,
    pub floats_down_per_iter: usize,
    pub iterations: usize,
}

impl CommsLedger {
    /// Each household sends `uᵢ` and `λᵢ` (`4N`) and receives `vᵢ` and `ρ` (`2N+1`).
    pub fn new(subsystems: usize, horizon: usize) -> Self {
        Self {
            floats_up_per_iter: 4 * horizon * subsystems,
            floats_down_per_iter: (2 * horizon + 1) * subsystems,
            iterations: 0,
        }
    }

    pub fn floats_up(&self) -> usize {
        self.floats_up_per_iter * self.iterations
    }

    pub fn floats_down(&self) -> usize {
        self.floats_down_per_iter * self.iterations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub r_pri: f64,
    pub r_dual: f64,
    pub rho: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmmStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    /// Final iterates; `state.rho` is the last step size used.
    pub state: AdmmState,
    pub residuals: Residuals,
    pub trace: Vec<TraceRow>,
    pub ledger: CommsLedger,
    pub status: AdmmStatus,
    /// Local solves that hit their iteration cap.
    pub inner_failures: usize,
    pub work: LocalWork,
    /// Largest violation of `𝕌ᵢ` seen on any `u` iterate (when monitored).
    pub max_iterate_violation: f64,
}

/// Effort spent in local solves, summed over households and iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LocalWork {
    pub projections: usize,
    pub qp_iterations: usize,
}

/// Group soft-threshold `S_a(x) = max(1 − a/‖x‖₂, 0) x`, with `S_a(0) = 0`.
pub fn soft_threshold(a: f64, x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    soft_threshold_in_place(a, &mut out);
    out
}

fn soft_threshold_in_place(a: f64, x: &mut [f64]) {
    let norm = l2(x);
    let scale = if norm > a { 1.0 - a / norm } else { 0.0 };
    x.iter_mut().for_each(|v| *v *= scale);
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Per-household solver state reused across iterations.
pub struct LocalWorker {
    projector: Projector,
    point: Vec<f64>,
    scratch: Vec<f64>,
    target: Vec<f64>,
    inner_s: Vec<f64>,
    inner_xi: Vec<f64>,
    cone_radius: f64,
    /// Tangent cone at the origin when it is an orthant.
    orthant: Option<Vec<SignBound>>,
    last_t: Option<f64>,
}

/// Sign restriction of one coordinate in an orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SignBound {
    Free,
    Nonnegative,
    Nonpositive,
    Zero,
}

impl SignBound {
    fn clamp(self, x: f64) -> f64 {
        match self {
            Self::Free => x,
            Self::Nonnegative => x.max(0.0),
            Self::Nonpositive => x.min(0.0),
            Self::Zero => 0.0,
        }
    }
}

/// Result of one local solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalStats {
    pub converged: bool,
    pub projections: usize,
    /// Active-set iterations summed over all projections.
    pub qp_iterations: usize,
}

impl LocalWorker {
    /// The polytope must contain the origin, which every household set does.
    pub fn new(polytope: Polytope) -> Self {
        let dim = polytope.dim();
        // 𝕌 agrees with its tangent cone at 0 inside this radius.
        let cone_radius = (0..polytope.rows())
            .filter(|&j| polytope.rhs(j) > 0.0)
            .map(|j| polytope.rhs(j) / l2(polytope.row(j)).max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        let mut orthant = Some(vec![SignBound::Free; dim]);
        for j in (0..polytope.rows()).filter(|&j| polytope.rhs(j) == 0.0) {
            let row = polytope.row(j);
            let nz: Vec<usize> = (0..dim).filter(|&k| row[k] != 0.0).collect();
            match (nz.as_slice(), orthant.as_mut()) {
                ([], _) | (_, None) => {}
                (&[k], Some(signs)) => {
                    let tighter = if row[k] > 0.0 { SignBound::Nonpositive } else { SignBound::Nonnegative };
                    signs[k] = match (signs[k], tighter) {
                        (SignBound::Free, t) => t,
                        (a, b) if a == b => a,
                        _ => SignBound::Zero,
                    };
                }
                _ => orthant = None,
            }
        }
        Self {
            orthant,
            last_t: None,
            projector: Projector::new(polytope, QP_MAX_ITER),
            point: vec![0.0; dim],
            scratch: vec![0.0; dim],
            target: vec![0.0; dim],
            inner_s: vec![0.0; dim],
            inner_xi: vec![0.0; dim],
            cone_radius,
        }
    }

    pub fn polytope(&self) -> &Polytope {
        self.projector.polytope()
    }

    fn project(&mut self, out: &mut [f64], stats: &mut LocalStats) {
        let ProjectionStats { status, iterations } = self.projector.project_into(&self.point, out);
        stats.projections += 1;
        stats.qp_iterations += iterations;
        stats.converged &= status == QpStatus::Solved;
    }
}

/// `argmin σ̃‖u‖₁ + (ρ/2)‖u − target‖²` over `𝕌ᵢ`.
///
/// On `𝕌ᵢ` the sign of every coordinate is fixed (`u⁺ ≥ 0`, `u⁻ ≤ 0`), so the
/// ℓ1 norm is the linear function `Σ u⁺ − Σ u⁻` and the problem is the
/// projection of `target − (σ̃/ρ)(1, −1, …)`. This is the same minimizer as
/// the epigraph lifting `−s ≤ u ≤ s`, without the extra variables.
pub fn local_update_p1(
    worker: &mut LocalWorker,
    target: &[f64],
    weight: f64,
    rho: f64,
    out: &mut [f64],
) -> LocalStats {
    let tau = weight / rho;
    for (k, (p, t)) in worker.point.iter_mut().zip(target).enumerate() {
        *p = if k % 2 == 0 { t - tau } else { t + tau };
    }
    let mut stats = LocalStats {
        converged: true,
        projections: 0,
        qp_iterations: 0,
    };
    worker.project(out, &mut stats);
    stats
}

/// `argmin σ̃‖u‖₂ + (ρ/2)‖u − target‖²` over `𝕌ᵢ`.
pub fn local_update_p2(
    worker: &mut LocalWorker,
    target: &[f64],
    weight: f64,
    rho: f64,
    config: &AdmmConfig,
    out: &mut [f64],
) -> LocalStats {
    match config.local_solver {
        LocalSolver::Exact => prox_l2_exact(worker, target, weight / rho, config.inner_tol, out),
        LocalSolver::InnerAdmm => prox_l2_inner_admm(worker, target, weight, rho, config, out),
    }
}

/// For `y ≠ 0` the optimality conditions read `y = P(target · t/(t + τ))` with
/// `t = ‖y‖`, so the solution is the root of the scalar function
/// `h(t) = ‖P(target · t/(t+τ))‖ − t` on `(0, ‖target‖ − τ]`. The root is
/// unique because the minimizer is; `h` is piecewise smooth and its slope
/// comes from the final working set of the projection, so a safeguarded
/// Newton iteration needs only a few projections. `y = 0` exactly when the
/// projection of `target` onto the tangent cone `K` of `𝕌` at the origin has
/// norm at most `τ`.
fn prox_l2_exact(worker: &mut LocalWorker, target: &[f64], tau: f64, tol: f64, out: &mut [f64]) -> LocalStats {
    let mut stats = LocalStats {
        converged: true,
        projections: 0,
        qp_iterations: 0,
    };
    let norm_a = l2(target);
    if tau == 0.0 {
        worker.point.copy_from_slice(target);
        worker.project(out, &mut stats);
        return stats;
    }
    if norm_a <= tau {
        out.fill(0.0);
        return stats;
    }
    // Unconstrained prox, if it happens to be feasible.
    worker.scratch.copy_from_slice(target);
    soft_threshold_in_place(tau, &mut worker.scratch);
    if worker.polytope().max_violation(&worker.scratch) <= 0.0 {
        out.copy_from_slice(&worker.scratch);
        return stats;
    }

    let cone_norm = match &worker.orthant {
        Some(signs) => target
            .iter()
            .zip(signs)
            .map(|(a, s)| s.clamp(*a).powi(2))
            .sum::<f64>()
            .sqrt(),
        None => {
            // Inside this scale 𝕌 coincides with K.
            let s0 = (worker.cone_radius / norm_a).min(1.0);
            worker.point.iter_mut().zip(target).for_each(|(p, a)| *p = s0 * a);
            worker.project(out, &mut stats);
            l2(out) / s0
        }
    };
    if cone_norm <= tau {
        out.fill(0.0);
        return stats;
    }

    let (mut lo, mut hi) = (0.0, norm_a - tau);
    let mut t = match worker.last_t {
        Some(t) if t > 0.0 && t < hi => t,
        _ => (cone_norm - tau).min(hi),
    };
    let mut h = f64::INFINITY;
    for _ in 0..100 {
        let s = t / (t + tau);
        worker.point.iter_mut().zip(target).for_each(|(p, a)| *p = s * a);
        worker.project(out, &mut stats);
        let ny = l2(out);
        h = ny - t;
        if h.abs() <= tol * (1.0 + t) {
            break;
        }
        if h > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= tol * (1.0 + hi) {
            break;
        }
        let slope = if ny > 0.0 {
            let mut dy = std::mem::take(&mut worker.scratch);
            worker.projector.tangent_into(target, &mut dy);
            let along: f64 = out.iter().zip(&dy).map(|(y, d)| y * d).sum();
            worker.scratch = dy;
            along / ny * tau / (t + tau).powi(2) - 1.0
        } else {
            -1.0
        };
        let newton = t - h / slope;
        t = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    worker.last_t = Some(t);
    stats.converged &= h.abs() <= 1e-9 * (1.0 + t);
    stats
}

/// Inner ADMM on `u = s` with `u ∈ 𝕌`, penalty `σ̃‖s‖₂` and step size `ρ`:
/// `u ← P((target + s − ξ/ρ)/2)`, `s ← S_{σ̃/ρ}(u + ξ/ρ)`, `ξ ← ξ + ρ(u − s)`.
fn prox_l2_inner_admm(
    worker: &mut LocalWorker,
    target: &[f64],
    weight: f64,
    rho: f64,
    config: &AdmmConfig,
    out: &mut [f64],
) -> LocalStats {
    let mut stats = LocalStats {
        converged: false,
        projections: 0,
        qp_iterations: 0,
    };
    let tau = weight / rho;
    worker.inner_s.fill(0.0);
    worker.inner_xi.fill(0.0);
    let mut all_solved = true;
    for _ in 0..config.inner_max_iter {
        for k in 0..target.len() {
            worker.point[k] = 0.5 * (target[k] + worker.inner_s[k] - worker.inner_xi[k] / rho);
        }
        let mut step = LocalStats {
            converged: true,
            projections: 0,
            qp_iterations: 0,
        };
        worker.project(out, &mut step);
        stats.projections += 1;
        stats.qp_iterations += step.qp_iterations;
        all_solved &= step.converged;
        for k in 0..target.len() {
            worker.scratch[k] = out[k] + worker.inner_xi[k] / rho;
        }
        soft_threshold_in_place(tau, &mut worker.scratch);
        let mut gap = 0.0;
        let mut moved = 0.0;
        for k in 0..target.len() {
            let s_new = worker.scratch[k];
            gap += (out[k] - s_new).powi(2);
            moved += (s_new - worker.inner_s[k]).powi(2);
            worker.inner_xi[k] += rho * (out[k] - s_new);
            worker.inner_s[k] = s_new;
        }
        if gap.sqrt() <= config.inner_tol && rho * moved.sqrt() <= config.inner_tol {
            stats.converged = all_solved;
            break;
        }
    }
    stats
}

/// `λ ← λ + ρ (v − u)`.
pub fn dual_update(lambda: &mut [f64], rho: f64, v: &[f64], u: &[f64]) {
    for ((l, vk), uk) in lambda.iter_mut().zip(v).zip(u) {
        *l += rho * (vk - uk);
    }
}

/// `v = ((2/N)AᵀA + ρI)⁻¹((2/N)Aᵀb − λ + ρu)`.
///
/// With `A Aᵀ = cI` the inverse is `(1/ρ)(I − AᵀA/(ρN/2 + c))`, so the step
/// costs two applications of `A`.
pub fn consensus_update(problem: &PeakShavingProblem, u: &[f64], lambda: &[f64], rho: f64) -> Result<Vec<f64>> {
    let len = problem.coupling.stacked_len();
    if u.len() != len || lambda.len() != len {
        return Err(Error::dim("consensus update", len, u.len().min(lambda.len())));
    }
    let mut v = vec![0.0; len];
    let mut ws = ConsensusWorkspace::new(problem);
    ws.update(problem, u, lambda, rho, &mut v);
    Ok(v)
}

struct ConsensusWorkspace {
    atb: Vec<f64>,
    ar: Vec<f64>,
    correction: Vec<f64>,
}

impl ConsensusWorkspace {
    fn new(problem: &PeakShavingProblem) -> Self {
        let len = problem.coupling.stacked_len();
        let mut atb = vec![0.0; len];
        problem.coupling.transpose_into(&problem.b, &mut atb);
        Self {
            atb,
            ar: vec![0.0; problem.horizon()],
            correction: vec![0.0; len],
        }
    }

    fn update(&mut self, problem: &PeakShavingProblem, u: &[f64], lambda: &[f64], rho: f64, v: &mut [f64]) {
        let n = problem.horizon() as f64;
        let s = 2.0 / n;
        for k in 0..v.len() {
            v[k] = rho * u[k] - lambda[k] + s * self.atb[k];
        }
        problem.coupling.apply_into(v, &mut self.ar);
        let denom = rho / s + problem.coupling.gram_scalar();
        self.ar.iter_mut().for_each(|a| *a /= denom);
        problem.coupling.transpose_into(&self.ar, &mut self.correction);
        for (vk, ck) in v.iter_mut().zip(&self.correction) {
            *vk = (*vk - ck) / rho;
        }
    }
}

/// `r_pri = ρ‖u − v‖₂`, `r_dual = ρ‖v − v_old‖₂`.
pub fn residuals(u: &[f64], v: &[f64], v_old: &[f64], rho: f64) -> Residuals {
    let pri: f64 = u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
    let dual: f64 = v.iter().zip(v_old).map(|(a, b)| (a - b).powi(2)).sum();
    Residuals {
        r_pri: rho * pri.sqrt(),
        r_dual: rho * dual.sqrt(),
    }
}

/// `ρη` if `r_pri ≥ μ r_dual`, else `ρ/η` if `r_dual ≥ μ r_pri`, else `ρ`.
pub fn adapt_rho(rho: f64, res: Residuals, eta: f64, mu: f64) -> f64 {
    if res.r_pri >= mu * res.r_dual {
        rho * eta
    } else if res.r_dual >= mu * res.r_pri {
        rho / eta
    } else {
        rho
    }
}

/// Runs the consensus iteration from `init` (zeros with `ρ⁰` if `None`).
///
/// `polytopes[i]` is `𝕌ᵢ` in the stacked control layout. Results do not depend
/// on the number of worker threads.
pub fn solve(
    problem: &PeakShavingProblem,
    polytopes: &[Polytope],
    config: &AdmmConfig,
    init: Option<AdmmState>,
) -> Result<AdmmOutcome> {
    config.validate()?;
    let subsystems = problem.subsystems();
    let block = problem.coupling.block_len();
    let len = problem.coupling.stacked_len();
    if polytopes.len() != subsystems {
        return Err(Error::dim("admm polytopes", subsystems, polytopes.len()));
    }
    if let Some(p) = polytopes.iter().find(|p| p.dim() != block) {
        return Err(Error::dim("admm polytope dimension", block, p.dim()));
    }
    let mut state = init.unwrap_or_else(|| AdmmState::zeros(len, config.initial_rho(problem)));
    for (name, x) in [("admm init u", &state.u), ("admm init v", &state.v), ("admm init lambda", &state.lambda)] {
        if x.len() != len {
            return Err(Error::dim(name, len, x.len()));
        }
    }
    if !(state.rho > 0.0) {
        return Err(Error::InvalidInput(format!("initial rho {} must be positive", state.rho)));
    }
    state.iteration = 0;

    let mut workers: Vec<LocalWorker> = polytopes.iter().cloned().map(LocalWorker::new).collect();
    let weights: Vec<f64> = (0..subsystems).map(|i| problem.scaled_weight(i)).collect();
    let mut consensus = ConsensusWorkspace::new(problem);
    let mut ledger = CommsLedger::new(subsystems, problem.horizon());
    let mut trace = Vec::new();
    let mut v_old = state.v.clone();
    let mut inner_failures = 0;
    let mut work = LocalWork::default();
    let mut max_violation = 0.0f64;
    let mut res = Residuals::default();
    let mut status = AdmmStatus::MaxIter;

    while state.iteration < config.max_iter {
        let rho = state.rho;
        let lagged = config.dual_update_order == DualUpdateOrder::Lagged;

        let (failures, projections, qp_iterations) = state
            .u
            .par_chunks_mut(block)
            .zip(state.lambda.par_chunks_mut(block))
            .zip(state.v.par_chunks(block))
            .zip(workers.par_iter_mut())
            .zip(weights.par_iter())
            .map(|((((u_i, lambda_i), v_i), worker), &weight)| {
                let mut target = std::mem::take(&mut worker.target);
                for k in 0..block {
                    target[k] = v_i[k] + lambda_i[k] / rho;
                }
                let stats = match problem.norm {
                    GroupNorm::L1 => local_update_p1(worker, &target, weight, rho, u_i),
                    GroupNorm::L2 => local_update_p2(worker, &target, weight, rho, config, u_i),
                };
                worker.target = target;
                if lagged {
                    dual_update(lambda_i, rho, v_i, u_i);
                }
                (usize::from(!stats.converged), stats.projections, stats.qp_iterations)
            })
            .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        inner_failures += failures;
        work.projections += projections;
        work.qp_iterations += qp_iterations;
        if failures > 0 {
            log::debug!("{failures} local solves did not converge at iteration {}", state.iteration);
        }
        if config.monitor_feasibility {
            for (u_i, worker) in state.u.chunks(block).zip(&workers) {
                max_violation = max_violation.max(worker.polytope().max_violation(u_i));
            }
        }

        v_old.copy_from_slice(&state.v);
        consensus.update(problem, &state.u, &state.lambda, rho, &mut state.v);
        if !lagged {
            dual_update(&mut state.lambda, rho, &state.v, &state.u);
        }
        state.iteration += 1;
        ledger.iterations += 1;

        res = residuals(&state.u, &state.v, &v_old, rho);
        if config.record_trace {
            trace.push(TraceRow {
                iteration: state.iteration,
                r_pri: res.r_pri,
                r_dual: res.r_dual,
                rho,
                objective: objective_value(problem, &state.u),
            });
        }
        if res.r_pri <= config.eps && res.r_dual <= config.eps {
            status = AdmmStatus::Converged;
            break;
        }
        state.rho = adapt_rho(rho, res, config.eta, config.mu);
    }

    Ok(AdmmOutcome {
        state,
        residuals: res,
        trace,
        ledger,
        status,
        inner_failures,
        work,
        max_iterate_violation: max_violation,
    })
}
