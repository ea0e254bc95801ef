//! Open-loop experiments: single solves, replications over weight draws and
//! sweeps over the regularization weight κ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, AdmmOutcome, AdmmStatus};
use crate::model::{generate_scenario, GridScenario, ParameterStats};
use crate::mpc::{draw_weights, household_polytopes, relative_deviation, sparsity_percentage, DEFAULT_APPLY_EPS};
use crate::problem::{GroupNorm, PeakShavingProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenLoopConfig {
    pub horizon: usize,
    /// Absolute time of the solve; `None` means `N − 1`.
    pub time: Option<usize>,
    pub kappa: f64,
    pub norm: GroupNorm,
    pub constrain_terminal: bool,
    pub nonzero_tol: f64,
    pub admm: AdmmConfig,
}

impl Default for OpenLoopConfig {
    fn default() -> Self {
        Self {
            horizon: crate::model::DEFAULT_HORIZON,
            time: None,
            kappa: 1e-3,
            norm: GroupNorm::L2,
            constrain_terminal: true,
            nonzero_tol: DEFAULT_APPLY_EPS,
            admm: AdmmConfig::default(),
        }
    }
}

impl OpenLoopConfig {
    pub fn time(&self) -> usize {
        self.time.unwrap_or(self.horizon.saturating_sub(1))
    }
}

#[derive(Debug, Clone)]
pub struct OpenLoopResult {
    pub problem: PeakShavingProblem,
    pub outcome: AdmmOutcome,
    /// Aggregated average demand `w̄ + A u` over the horizon.
    pub z_bar: Vec<f64>,
    pub nonzero_pct: f64,
}

impl OpenLoopResult {
    pub fn u(&self) -> &[f64] {
        &self.outcome.state.u
    }

    pub fn converged(&self) -> bool {
        self.outcome.status == AdmmStatus::Converged
    }
}

/// One solve of the horizon problem from the scenario's initial charge.
pub fn open_loop(scenario: &GridScenario, sigma: Vec<f64>, config: &OpenLoopConfig) -> Result<OpenLoopResult> {
    let problem = PeakShavingProblem::from_scenario(scenario, config.time(), config.horizon, config.kappa, sigma, config.norm)?;
    let polytopes = household_polytopes(scenario, &scenario.initial_soc, config.horizon, config.constrain_terminal);
    let outcome = admm::solve(&problem, &polytopes, &config.admm, None)?;
    let au = problem.coupling.apply(&outcome.state.u)?;
    let z_bar = problem.w_bar.iter().zip(&au).map(|(w, a)| w + a).collect();
    let nonzero_pct = sparsity_percentage(&outcome.state.u, config.nonzero_tol);
    Ok(OpenLoopResult {
        problem,
        outcome,
        z_bar,
        nonzero_pct,
    })
}

/// Mean, sample standard deviation and median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_dev: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("cannot summarize an empty sample".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Ok(Self {
            mean,
            std_dev: var.sqrt(),
            median,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCell {
    pub subsystems: usize,
    pub norm: GroupNorm,
    pub kappa: f64,
    /// Nonzero percentage per replication, in replication order.
    pub samples: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub summary: Summary,
}

/// Plan of an open-loop replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub subsystems: Vec<usize>,
    pub norms: Vec<GroupNorm>,
    pub replications: usize,
    /// Seed of the weight streams.
    pub seed: u64,
    pub base: OpenLoopConfig,
}

/// Household population for a study over grid sizes up to `largest`.
pub fn population(largest: usize, stats: &ParameterStats, seed: u64, profile_len: usize) -> Result<GridScenario> {
    generate_scenario(largest, stats, seed, profile_len)
}

/// The grid of size `I` consists of the first `I` households of
/// `population`. Replication `r` draws the weights from stream `r` of
/// `plan.seed`, so weights are nested across grid sizes too and the cells for
/// different norms are paired.
pub fn replication_study(population: &GridScenario, plan: &ReplicationPlan) -> Result<Vec<ReplicationCell>> {
    if plan.subsystems.is_empty() || plan.norms.is_empty() || plan.replications == 0 {
        return Err(Error::InvalidInput("replication grid is empty".into()));
    }
    let mut cells = Vec::new();
    for &count in &plan.subsystems {
        let scenario = population.prefix(count)?;
        for &norm in &plan.norms {
            let config = OpenLoopConfig {
                norm,
                ..plan.base.clone()
            };
            let runs: Vec<(f64, usize, bool)> = (0..plan.replications)
                .into_par_iter()
                .map(|r| {
                    let sigma = draw_weights(plan.seed, r as u64, count);
                    open_loop(&scenario, sigma, &config).map(|res| (res.nonzero_pct, res.outcome.state.iteration, res.converged()))
                })
                .collect::<Result<_>>()?;
            let samples: Vec<f64> = runs.iter().map(|r| r.0).collect();
            log::info!("I = {count}, {norm}: {} replications done", runs.len());
            cells.push(ReplicationCell {
                subsystems: count,
                norm,
                kappa: config.kappa,
                summary: Summary::of(&samples)?,
                samples,
                iterations: runs.iter().map(|r| r.1).collect(),
                converged: runs.iter().map(|r| r.2).collect(),
            });
        }
    }
    Ok(cells)
}

/// `points` logarithmically spaced values on `[lo, hi]`.
pub fn kappa_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        return Err(Error::InvalidInput(format!("invalid kappa grid [{lo}, {hi}] with {points} points")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..points)
        .map(|j| 10f64.powf(a + (b - a) * j as f64 / (points - 1) as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kappa: f64,
    pub z_bar: Vec<f64>,
    pub deviation: Vec<f64>,
    pub mean_deviation: f64,
    pub nonzero_pct: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    pub norm: GroupNorm,
    pub baseline_z_bar: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Solves at `κ = 0` and at each `κ` of the grid with the same weights, and
/// reports the deviation of the aggregated demand from the `κ = 0` solution.
pub fn kappa_sweep(scenario: &GridScenario, sigma: &[f64], base: &OpenLoopConfig, kappas: &[f64]) -> Result<KappaSweep> {
    if kappas.is_empty() {
        return Err(Error::InvalidInput("kappa grid is empty".into()));
    }
    let with_kappa = |kappa: f64| OpenLoopConfig {
        kappa,
        ..base.clone()
    };
    let baseline = open_loop(scenario, sigma.to_vec(), &with_kappa(0.0))?;
    let points = kappas
        .par_iter()
        .map(|&kappa| {
            let res = open_loop(scenario, sigma.to_vec(), &with_kappa(kappa))?;
            let deviation = relative_deviation(&res.z_bar, &baseline.z_bar)?;
            let mean_deviation = deviation.iter().sum::<f64>() / deviation.len() as f64;
            Ok(SweepPoint {
                kappa,
                mean_deviation,
                deviation,
                nonzero_pct: res.nonzero_pct,
                iterations: res.outcome.state.iteration,
                converged: res.converged(),
                z_bar: res.z_bar,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KappaSweep {
        norm: base.norm,
        baseline_z_bar: baseline.z_bar,
        points,
    })
}

/// Number of adjacent pairs where the sequence decreases.
pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}
