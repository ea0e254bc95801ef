//! The peak-shaving problem: reference trajectory, coupling operator,
//! weighted mixed `ℓ_{p,1}` norm and the composite objective
//!
//! ```text
//!   (1/N) ‖Σᵢ Aᵢ uᵢ − b‖² + κ Σᵢ σᵢ ‖uᵢ‖_p,   b = ζ̄ − w̄,
//!   Aᵢ = (1/I) · I_N ⊗ (1  γᵢ).
//! ```
//!
//! Controls of all households are stacked group by group; each group is
//! `(u⁺(k), u⁻(k), …, u⁺(k+N−1), u⁻(k+N−1))`.

use serde::{Deserialize, Serialize};

use crate::model::{ControlInput, GridScenario};
use crate::{Error, Result};

/// Stacked controls of one household over the horizon, `(u⁺, u⁻)` adjacent per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlTrajectory {
    values: Vec<f64>,
}

impl ControlTrajectory {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            values: vec![0.0; 2 * horizon],
        }
    }

    pub fn from_stacked(values: Vec<f64>) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "stacked control vector has odd length {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn from_inputs(inputs: &[ControlInput]) -> Self {
        Self {
            values: inputs.iter().flat_map(|u| [u.charge, u.discharge]).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len() / 2
    }

    pub fn step(&self, n: usize) -> ControlInput {
        ControlInput::new(self.values[2 * n], self.values[2 * n + 1])
    }

    pub fn steps(&self) -> impl Iterator<Item = ControlInput> + '_ {
        self.values
            .chunks_exact(2)
            .map(|c| ControlInput::new(c[0], c[1]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Which group norm the regularizer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum GroupNorm {
    /// `ℓ_{1,1}`: sparse groups and sparse entries within groups.
    L1,
    /// `ℓ_{2,1}`: group lasso.
    L2,
}

impl GroupNorm {
    pub fn p(self) -> u8 {
        match self {
            GroupNorm::L1 => 1,
            GroupNorm::L2 => 2,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            GroupNorm::L1 => x.iter().map(|v| v.abs()).sum(),
            GroupNorm::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

impl TryFrom<u8> for GroupNorm {
    type Error = String;

    fn try_from(p: u8) -> std::result::Result<Self, String> {
        match p {
            1 => Ok(GroupNorm::L1),
            2 => Ok(GroupNorm::L2),
            other => Err(format!("unsupported group norm p = {other}; expected 1 or 2")),
        }
    }
}

impl From<GroupNorm> for u8 {
    fn from(n: GroupNorm) -> u8 {
        n.p()
    }
}

impl std::fmt::Display for GroupNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "l{},1", self.p())
    }
}

/// The stacked coupling `A = (A₁ … A_I)`, kept implicit through the `γᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingOperator {
    gammas: Vec<f64>,
    horizon: usize,
}

impl CouplingOperator {
    pub fn new(gammas: Vec<f64>, horizon: usize) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidInput("coupling needs at least one subsystem".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidInput("coupling horizon must be positive".into()));
        }
        Ok(Self { gammas, horizon })
    }

    pub fn subsystems(&self) -> usize {
        self.gammas.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block_len(&self) -> usize {
        2 * self.horizon
    }

    pub fn stacked_len(&self) -> usize {
        self.block_len() * self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `Σᵢ Aᵢ uᵢ`; slot `n` is `(1/I) Σᵢ (uᵢ⁺(n) + γᵢ uᵢ⁻(n))`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.stacked_len() {
            return Err(Error::dim("coupling apply", self.stacked_len(), u.len()));
        }
        let mut out = vec![0.0; self.horizon];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    /// Unchecked `apply`; summation runs over subsystems in index order.
    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (block, &gamma) in u.chunks_exact(self.block_len()).zip(&self.gammas) {
            for (o, pair) in out.iter_mut().zip(block.chunks_exact(2)) {
                *o += pair[0] + gamma * pair[1];
            }
        }
        let scale = 1.0 / self.gammas.len() as f64;
        out.iter_mut().for_each(|o| *o *= scale);
    }

    /// `Aᵀ y`: block `i` holds `(y(n), γᵢ y(n)) / I` per step.
    pub(crate) fn transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let scale = 1.0 / self.gammas.len() as f64;
        for (block, &gamma) in out.chunks_exact_mut(self.block_len()).zip(&self.gammas) {
            for (pair, &yn) in block.chunks_exact_mut(2).zip(y) {
                pair[0] = scale * yn;
                pair[1] = scale * gamma * yn;
            }
        }
    }

    /// The scalar `c` with `A Aᵀ = c I_N`, i.e. `(1/I²) Σᵢ (1 + γᵢ²)`.
    pub fn gram_scalar(&self) -> f64 {
        let count = self.gammas.len() as f64;
        self.gammas.iter().map(|g| 1.0 + g * g).sum::<f64>() / (count * count)
    }
}

/// One instance of the group-sparse peak-shaving problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakShavingProblem {
    pub coupling: CouplingOperator,
    /// `b = ζ̄ − w̄`.
    pub b: Vec<f64>,
    pub zeta_bar: Vec<f64>,
    pub w_bar: Vec<f64>,
    pub kappa: f64,
    pub sigma: Vec<f64>,
    pub norm: GroupNorm,
}

impl PeakShavingProblem {
    pub fn new(
        coupling: CouplingOperator,
        w_bar: Vec<f64>,
        zeta_bar: Vec<f64>,
        kappa: f64,
        sigma: Vec<f64>,
        norm: GroupNorm,
    ) -> Result<Self> {
        let horizon = coupling.horizon();
        if w_bar.len() != horizon {
            return Err(Error::dim("problem w_bar", horizon, w_bar.len()));
        }
        if zeta_bar.len() != horizon {
            return Err(Error::dim("problem zeta_bar", horizon, zeta_bar.len()));
        }
        if sigma.len() != coupling.subsystems() {
            return Err(Error::dim("problem sigma", coupling.subsystems(), sigma.len()));
        }
        if !(kappa >= 0.0) {
            return Err(Error::InvalidInput(format!("kappa = {kappa} must be nonnegative")));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0)) {
            return Err(Error::InvalidInput(format!("weight {s} must be nonnegative")));
        }
        let b = zeta_bar.iter().zip(&w_bar).map(|(z, w)| z - w).collect();
        Ok(Self {
            coupling,
            b,
            zeta_bar,
            w_bar,
            kappa,
            sigma,
            norm,
        })
    }

    /// The problem seen at time `k` with horizon `N`, using perfect foresight
    /// of the scenario's profiles.
    pub fn from_scenario(
        scenario: &GridScenario,
        k: usize,
        horizon: usize,
        kappa: f64,
        sigma: Vec<f64>,
        norm: GroupNorm,
    ) -> Result<Self> {
        let w_all = scenario.mean_profile();
        if w_all.len() < k + horizon {
            return Err(Error::InvalidInput(format!(
                "profiles cover {} steps but the window [{k}, {}) is requested",
                w_all.len(),
                k + horizon
            )));
        }
        let zeta_bar = reference_trajectory(&w_all, k, horizon)?;
        let w_bar = w_all[k..k + horizon].to_vec();
        let coupling = CouplingOperator::new(scenario.gammas(), horizon)?;
        Self::new(coupling, w_bar, zeta_bar, kappa, sigma, norm)
    }

    pub fn horizon(&self) -> usize {
        self.coupling.horizon()
    }

    pub fn subsystems(&self) -> usize {
        self.coupling.subsystems()
    }

    /// Effective group weights `σ̃ᵢ = κ σᵢ`.
    pub fn scaled_weight(&self, i: usize) -> f64 {
        self.kappa * self.sigma[i]
    }

    /// Largest eigenvalue `2c/N` of the Hessian of the tracking term.
    pub fn tracking_curvature(&self) -> f64 {
        2.0 * self.coupling.gram_scalar() / self.horizon() as f64
    }

    /// Peak-shaving term `(1/N) ‖A u − b‖²`.
    pub fn tracking_cost(&self, u: &[f64]) -> f64 {
        let au = self.coupling.apply(u).expect("stacked control dimension");
        let n = self.horizon() as f64;
        au.iter().zip(&self.b).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n
    }
}

/// Trailing `N`-average of `w̄` at each horizon instant `n ∈ [k, k+N−1]`.
///
/// `w_bar` is indexed by absolute time from zero. Instants before zero are
/// padded with `w̄(0)`, so the first `N−1` steps of a run are well defined.
pub fn reference_trajectory(w_bar: &[f64], k: usize, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    if w_bar.len() < k + horizon {
        return Err(Error::dim("reference history", k + horizon, w_bar.len()));
    }
    let at = |j: isize| w_bar[j.max(0) as usize];
    let n_len = horizon as isize;
    Ok((k..k + horizon)
        .map(|n| {
            let n = n as isize;
            (n - n_len + 1..=n).map(at).sum::<f64>() / horizon as f64
        })
        .collect())
}

/// `Σᵢ σᵢ ‖uᵢ‖_p` over groups of equal length `u.len() / σ.len()`.
pub fn mixed_norm(u: &[f64], sigma: &[f64], norm: GroupNorm) -> f64 {
    assert!(
        !sigma.is_empty() && u.len() % sigma.len() == 0,
        "stacked vector of length {} does not split into {} groups",
        u.len(),
        sigma.len()
    );
    let block = u.len() / sigma.len();
    if block == 0 {
        return 0.0;
    }
    u.chunks_exact(block)
        .zip(sigma)
        .map(|(g, s)| s * norm.eval(g))
        .sum()
}

/// `(1/N) ‖A u − b‖² + κ Σᵢ σᵢ ‖uᵢ‖_p`.
///
/// Panics if `u` does not have the stacked dimension `2·N·I`.
pub fn objective_value(problem: &PeakShavingProblem, u: &[f64]) -> f64 {
    let reg = if problem.kappa == 0.0 {
        0.0
    } else {
        problem.kappa * mixed_norm(u, &problem.sigma, problem.norm)
    };
    problem.tracking_cost(u) + reg
}

/// Aggregated demand `z̄ = w̄ + A u` from per-household net-consumption windows.
pub fn aggregate_demand(u: &[f64], windows: &[Vec<f64>], gammas: &[f64]) -> Result<Vec<f64>> {
    if windows.len() != gammas.len() {
        return Err(Error::dim("aggregate windows", gammas.len(), windows.len()));
    }
    let horizon = windows.first().map_or(0, |w| w.len());
    if let Some(w) = windows.iter().find(|w| w.len() != horizon) {
        return Err(Error::dim("aggregate window length", horizon, w.len()));
    }
    let coupling = CouplingOperator::new(gammas.to_vec(), horizon)?;
    let mut z = coupling.apply(u)?;
    let count = windows.len() as f64;
    for (n, zn) in z.iter_mut().enumerate() {
        *zn += windows.iter().map(|w| w[n]).sum::<f64>() / count;
    }
    Ok(z)
}
