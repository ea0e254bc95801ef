//! Receding-horizon control: at every step the households solve the
//! group-sparse problem over the next `N` steps with the distributed ADMM,
//! apply the first control if it is large enough and shift the solution as
//! the next warm start.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, AdmmOutcome, AdmmState, AdmmStatus};
use crate::model::{step_dynamics, ControlInput, GridScenario};
use crate::problem::{GroupNorm, PeakShavingProblem};
use crate::qpcore::{build_polytope_u, Polytope};
use crate::{Error, Result};

/// Default threshold below which a household's first control is not applied.
pub const DEFAULT_APPLY_EPS: f64 = 1e-4;

/// Default number of steps between weight draws (3 h at `T = 0.5 h`).
pub const DEFAULT_WEIGHT_REFRESH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// All weights equal to one.
    Fixed,
    /// `σᵢ = |gᵢ|`, `gᵢ ~ N(0,1)`, redrawn every `weight_refresh_steps`.
    #[default]
    PeriodicRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon: usize,
    pub apply_eps: f64,
    pub weight_mode: WeightMode,
    pub weight_refresh_steps: usize,
    pub weight_seed: u64,
    pub kappa: f64,
    pub norm: GroupNorm,
    pub sim_steps: usize,
    /// Absolute time of the first step; `None` means `N − 1`, the first
    /// instant whose trailing average needs no padding.
    pub start_step: Option<usize>,
    pub constrain_terminal: bool,
    /// Magnitude above which a component counts as nonzero.
    pub nonzero_tol: f64,
    pub admm: AdmmConfig,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: crate::model::DEFAULT_HORIZON,
            apply_eps: DEFAULT_APPLY_EPS,
            weight_mode: WeightMode::PeriodicRandom,
            weight_refresh_steps: DEFAULT_WEIGHT_REFRESH,
            weight_seed: 0,
            kappa: 1e-3,
            norm: GroupNorm::L2,
            sim_steps: 48,
            start_step: None,
            constrain_terminal: true,
            nonzero_tol: DEFAULT_APPLY_EPS,
            admm: AdmmConfig::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidInput(format!("horizon {} must be at least 2", self.horizon)));
        }
        if self.weight_refresh_steps == 0 {
            return Err(Error::InvalidInput("weight refresh period must be at least 1".into()));
        }
        if !(self.apply_eps >= 0.0) || !(self.nonzero_tol >= 0.0) {
            return Err(Error::InvalidInput("thresholds must be nonnegative".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidInput(format!("kappa = {} must be nonnegative", self.kappa)));
        }
        self.admm.validate()
    }

    pub fn start(&self) -> usize {
        self.start_step.unwrap_or(self.horizon - 1)
    }
}

/// `|gᵢ|` for standard normal `gᵢ` from stream `epoch` of `seed`.
pub fn draw_weights(seed: u64, epoch: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    (0..count)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g.abs()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPolicy {
    pub mode: WeightMode,
    pub sigma: Vec<f64>,
    pub refresh_steps: usize,
    pub seed: u64,
    /// Epoch of the current weights; `None` before the first refresh.
    pub epoch: Option<u64>,
}

impl WeightPolicy {
    pub fn new(mode: WeightMode, count: usize, refresh_steps: usize, seed: u64) -> Self {
        Self {
            mode,
            sigma: vec![1.0; count],
            refresh_steps: refresh_steps.max(1),
            seed,
            epoch: None,
        }
    }

    /// Weights for run step `k`; draws happen at `k = 0, r, 2r, …` and only
    /// depend on the seed and `k / r`.
    pub fn refresh_weights(&mut self, k: usize) -> &[f64] {
        let epoch = match self.mode {
            WeightMode::Fixed => 0,
            WeightMode::PeriodicRandom => (k / self.refresh_steps) as u64,
        };
        if self.epoch != Some(epoch) {
            if self.mode == WeightMode::PeriodicRandom {
                self.sigma = draw_weights(self.seed, epoch, self.sigma.len());
            }
            self.epoch = Some(epoch);
        }
        &self.sigma
    }
}

/// Applies `uᵢ*(k)` when `‖uᵢ*(k)‖₂ ≥ ε` and zero otherwise.
pub fn apply_threshold(first: &[ControlInput], eps: f64) -> Vec<ControlInput> {
    first
        .iter()
        .map(|u| if u.norm() >= eps { *u } else { ControlInput::ZERO })
        .collect()
}

/// Drops the first step of every block and appends a zero step; the same
/// shift is applied to `λ`. Returns `(u⁰, λ⁰)`.
pub fn shift_warm_start(u: &[f64], lambda: &[f64], horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let shift = |x: &[f64]| {
        let mut out = Vec::with_capacity(x.len());
        for block in x.chunks_exact(2 * horizon) {
            out.extend_from_slice(&block[2..]);
            out.extend_from_slice(&[0.0, 0.0]);
        }
        out
    };
    (shift(u), shift(lambda))
}

/// `100 · |{j : |u_j| > tol}| / len`.
pub fn sparsity_percentage(u: &[f64], tol: f64) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    100.0 * u.iter().filter(|v| v.abs() > tol).count() as f64 / u.len() as f64
}

/// `|z̄(n;κ) − z̄(n;0)| / ‖z̄(·;0)‖_∞`.
pub fn relative_deviation(z_kappa: &[f64], z_zero: &[f64]) -> Result<Vec<f64>> {
    if z_kappa.len() != z_zero.len() {
        return Err(Error::dim("relative deviation", z_zero.len(), z_kappa.len()));
    }
    let peak = z_zero.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::Degenerate("reference demand is identically zero".into()));
    }
    Ok(z_kappa.iter().zip(z_zero).map(|(a, b)| (a - b).abs() / peak).collect())
}

/// Household constraint sets at the given states of charge.
pub fn household_polytopes(scenario: &GridScenario, soc: &[f64], horizon: usize, constrain_terminal: bool) -> Vec<Polytope> {
    scenario
        .subsystems
        .iter()
        .zip(soc)
        .map(|(p, &x)| build_polytope_u(p, x.clamp(0.0, p.capacity), horizon, scenario.dt, constrain_terminal))
        .collect()
}

/// Mutable state carried between steps.
#[derive(Debug, Clone)]
pub struct MpcState {
    /// Run step counter, starting at zero.
    pub k: usize,
    pub soc: Vec<f64>,
    pub warm: Option<AdmmState>,
    pub weights: WeightPolicy,
}

impl MpcState {
    pub fn new(scenario: &GridScenario, config: &MpcConfig) -> Self {
        Self {
            k: 0,
            soc: scenario.initial_soc.clone(),
            warm: None,
            weights: WeightPolicy::new(
                config.weight_mode,
                scenario.len(),
                config.weight_refresh_steps,
                config.weight_seed,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Absolute time index into the profiles.
    pub time: usize,
    pub applied: Vec<ControlInput>,
    pub soc_before: Vec<f64>,
    pub soc_after: Vec<f64>,
    /// Realized average demand `w̄(k) + (1/I) Σ (u⁺ + γ u⁻)`.
    pub z_bar: f64,
    pub zeta_bar: f64,
    pub w_bar: f64,
    /// Nonzero percentage of the optimized horizon trajectory.
    pub solution_nonzero_pct: f64,
    /// Nonzero percentage of the applied controls.
    pub applied_nonzero_pct: f64,
    pub admm_iterations: usize,
    pub rho_final: f64,
    pub admm_status: AdmmStatus,
    pub weight_epoch: u64,
    pub inner_failures: usize,
    pub max_iterate_violation: f64,
}

/// One receding-horizon step; advances `state` in place.
pub fn mpc_step(scenario: &GridScenario, state: &mut MpcState, config: &MpcConfig) -> Result<(StepRecord, AdmmOutcome)> {
    let horizon = config.horizon;
    let time = config.start() + state.k;
    let sigma = state.weights.refresh_weights(state.k).to_vec();
    let epoch = state.weights.epoch.unwrap_or(0);
    let problem = PeakShavingProblem::from_scenario(scenario, time, horizon, config.kappa, sigma, config.norm)?;
    let polytopes = household_polytopes(scenario, &state.soc, horizon, config.constrain_terminal);
    let init = state.warm.take().map(|mut w| {
        w.rho = config.admm.initial_rho(&problem);
        w
    });
    let outcome = admm::solve(&problem, &polytopes, &config.admm, init)?;
    if outcome.status == AdmmStatus::MaxIter {
        log::warn!("ADMM hit its iteration cap at step {}", state.k);
    }

    let block = 2 * horizon;
    let first: Vec<ControlInput> = outcome
        .state
        .u
        .chunks_exact(block)
        .map(|b| ControlInput::new(b[0], b[1]))
        .collect();
    let applied = apply_threshold(&first, config.apply_eps);
    let soc_before = state.soc.clone();
    let soc_after: Vec<f64> = scenario
        .subsystems
        .iter()
        .zip(&soc_before)
        .zip(&applied)
        .map(|((p, &x), &u)| step_dynamics(x, u, p, scenario.dt))
        .collect();
    let count = scenario.len() as f64;
    let shift: f64 = applied
        .iter()
        .zip(&scenario.subsystems)
        .map(|(u, p)| u.charge + p.gamma * u.discharge)
        .sum::<f64>()
        / count;
    let flat: Vec<f64> = applied.iter().flat_map(|u| [u.charge, u.discharge]).collect();
    let record = StepRecord {
        k: state.k,
        time,
        applied,
        soc_before,
        soc_after: soc_after.clone(),
        z_bar: problem.w_bar[0] + shift,
        zeta_bar: problem.zeta_bar[0],
        w_bar: problem.w_bar[0],
        solution_nonzero_pct: sparsity_percentage(&outcome.state.u, config.nonzero_tol),
        applied_nonzero_pct: sparsity_percentage(&flat, config.nonzero_tol),
        admm_iterations: outcome.state.iteration,
        rho_final: outcome.state.rho,
        admm_status: outcome.status,
        weight_epoch: epoch,
        inner_failures: outcome.inner_failures,
        max_iterate_violation: outcome.max_iterate_violation,
    };

    let (u0, lambda0) = shift_warm_start(&outcome.state.u, &outcome.state.lambda, horizon);
    state.warm = Some(AdmmState::warm(u0, lambda0, config.admm.initial_rho(&problem)));
    state.soc = soc_after;
    state.k += 1;
    Ok((record, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopLog {
    pub config: MpcConfig,
    pub initial_soc: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl ClosedLoopLog {
    /// Nonzero percentage of the applied control sequence, `2·I·steps` entries.
    pub fn applied_nonzero_pct(&self) -> f64 {
        let n = self.steps.len() as f64;
        self.steps.iter().map(|s| s.applied_nonzero_pct).sum::<f64>() / n.max(1.0)
    }

    /// Mean over steps of the nonzero percentage of the optimized trajectory.
    pub fn mean_solution_nonzero_pct(&self) -> f64 {
        let n = self.steps.len() as f64;
        self.steps.iter().map(|s| s.solution_nonzero_pct).sum::<f64>() / n.max(1.0)
    }

    pub fn total_admm_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.admm_iterations).sum()
    }

    pub fn any_max_iter(&self) -> bool {
        self.steps.iter().any(|s| s.admm_status == AdmmStatus::MaxIter)
    }
}

/// Runs `config.sim_steps` steps from the scenario's initial charge.
pub fn run_closed_loop(scenario: &GridScenario, config: &MpcConfig) -> Result<ClosedLoopLog> {
    run_closed_loop_with(scenario, config, |_, _| {})
}

/// Like [`run_closed_loop`], calling `observe` after every step.
pub fn run_closed_loop_with(
    scenario: &GridScenario,
    config: &MpcConfig,
    mut observe: impl FnMut(&StepRecord, &AdmmOutcome),
) -> Result<ClosedLoopLog> {
    config.validate()?;
    scenario.validate()?;
    if config.sim_steps == 0 {
        return Err(Error::InvalidInput("closed loop needs at least one step".into()));
    }
    let needed = config.start() + config.sim_steps + config.horizon - 1;
    if scenario.profile_len() < needed {
        return Err(Error::InvalidInput(format!(
            "profiles cover {} steps but the run needs {needed}",
            scenario.profile_len()
        )));
    }
    let mut state = MpcState::new(scenario, config);
    let mut steps = Vec::with_capacity(config.sim_steps);
    for _ in 0..config.sim_steps {
        let (record, outcome) = mpc_step(scenario, &mut state, config)?;
        log::info!(
            "step {}: {} ADMM iterations, {:.2}% applied nonzero",
            record.k,
            record.admm_iterations,
            record.applied_nonzero_pct
        );
        observe(&record, &outcome);
        steps.push(record);
    }
    Ok(ClosedLoopLog {
        config: config.clone(),
        initial_soc: scenario.initial_soc.clone(),
        steps,
    })
}
