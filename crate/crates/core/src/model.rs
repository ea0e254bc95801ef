//! Residential energy systems: battery dynamics, operating constraints,
//! scenario generation and net-consumption profiles.
//!
//! Each household `i` is a discrete-time system with state of charge `x`
//! (kWh) and controls `u⁺ ≥ 0` (charging, kW) and `u⁻ ≤ 0` (discharging, kW):
//!
//! ```text
//!   x(n+1) = α x(n) + T (β u⁺(n) + u⁻(n))
//!   z(n)   = w(n) + u⁺(n) + γ u⁻(n)
//! ```
//!
//! subject to `0 ≤ x ≤ C`, `u̲ ≤ u⁻ ≤ 0`, `0 ≤ u⁺ ≤ ū` and
//! `0 ≤ u⁻/u̲ + u⁺/ū ≤ 1`.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::problem::ControlTrajectory;
use crate::{Error, Result};

/// Default feasibility tolerance in kWh / kW.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Default sampling interval in hours.
pub const DEFAULT_DT: f64 = 0.5;

/// Default prediction horizon.
pub const DEFAULT_HORIZON: usize = 24;

/// Default initial state of charge in kWh.
pub const DEFAULT_INITIAL_SOC: f64 = 0.5;

/// Lower clamp applied to sampled efficiencies, capacities and rate bounds.
const SAMPLE_FLOOR: f64 = 0.01;

/// Physical parameters of one household battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemParams {
    /// Self-discharge efficiency α.
    pub alpha: f64,
    /// Charging efficiency β.
    pub beta: f64,
    /// Discharging efficiency γ.
    pub gamma: f64,
    /// Capacity in kWh.
    #[serde(rename = "C")]
    pub capacity: f64,
    /// Maximal charging rate ū in kW (≥ 0).
    pub u_max: f64,
    /// Maximal discharging rate u̲ in kW (≤ 0).
    pub u_min: f64,
}

impl SubsystemParams {
    /// The household with every parameter at its default mean.
    pub fn mean() -> Self {
        ParameterStats::default().mean_params()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} = {v} must lie in (0, 1]")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        unit("gamma", self.gamma)?;
        if !(self.capacity >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "capacity = {} must be nonnegative",
                self.capacity
            )));
        }
        if !(self.u_max >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "u_max = {} must be nonnegative",
                self.u_max
            )));
        }
        if !(self.u_min <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "u_min = {} must be nonpositive",
                self.u_min
            )));
        }
        Ok(())
    }

    /// Left-hand side of the simultaneous charge/discharge constraint,
    /// `u⁻/u̲ + u⁺/ū`, with a zero bound contributing a zero term.
    pub fn rate_ratio(&self, u: ControlInput) -> f64 {
        let down = if self.u_min == 0.0 { 0.0 } else { u.discharge / self.u_min };
        let up = if self.u_max == 0.0 { 0.0 } else { u.charge / self.u_max };
        down + up
    }
}

/// State of charge of one household at time index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemState {
    pub soc: f64,
    pub n: usize,
}

/// One time step of battery action: `charge = u⁺ ≥ 0`, `discharge = u⁻ ≤ 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub charge: f64,
    pub discharge: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        charge: 0.0,
        discharge: 0.0,
    };

    pub fn new(charge: f64, discharge: f64) -> Self {
        Self { charge, discharge }
    }

    pub fn norm(&self) -> f64 {
        self.charge.hypot(self.discharge)
    }
}

/// Net consumption (load minus generation) in kW, one value per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetConsumptionProfile {
    pub values: Vec<f64>,
}

impl NetConsumptionProfile {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at time index `n`; indices before zero are padded with the first value.
    pub fn at(&self, n: isize) -> f64 {
        if n < 0 {
            self.values[0]
        } else {
            self.values[n as usize]
        }
    }
}

/// A grid of households with their profiles and initial charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScenario {
    pub subsystems: Vec<SubsystemParams>,
    pub profiles: Vec<NetConsumptionProfile>,
    /// Sampling interval in hours.
    pub dt: f64,
    pub initial_soc: Vec<f64>,
    pub seed: u64,
}

impl GridScenario {
    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn profile_len(&self) -> usize {
        self.profiles.iter().map(|p| p.len()).min().unwrap_or(0)
    }

    /// The first `count` households.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.len() {
            return Err(Error::InvalidInput(format!("cannot take {count} of {} households", self.len())));
        }
        Ok(Self {
            subsystems: self.subsystems[..count].to_vec(),
            profiles: self.profiles[..count].to_vec(),
            initial_soc: self.initial_soc[..count].to_vec(),
            ..self.clone()
        })
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.subsystems.iter().map(|p| p.gamma).collect()
    }

    /// Grid-average net consumption `w̄(n)` over all available time steps.
    pub fn mean_profile(&self) -> Vec<f64> {
        let len = self.profile_len();
        let count = self.len() as f64;
        (0..len)
            .map(|n| self.profiles.iter().map(|p| p.values[n]).sum::<f64>() / count)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let count = self.subsystems.len();
        if count == 0 {
            return Err(Error::InvalidInput("scenario has no subsystems".into()));
        }
        if self.profiles.len() != count {
            return Err(Error::dim("scenario profiles", count, self.profiles.len()));
        }
        if self.initial_soc.len() != count {
            return Err(Error::dim("scenario initial_soc", count, self.initial_soc.len()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt = {} must be positive", self.dt)));
        }
        for (i, (p, &x0)) in self.subsystems.iter().zip(&self.initial_soc).enumerate() {
            p.validate()
                .map_err(|e| Error::InvalidInput(format!("subsystem {i}: {e}")))?;
            if !(0.0..=p.capacity).contains(&x0) {
                return Err(Error::InvalidInput(format!(
                    "subsystem {i}: initial soc {x0} outside [0, {}]",
                    p.capacity
                )));
            }
        }
        Ok(())
    }
}

/// Expected value and standard deviation of one sampled parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std_dev: f64,
}

impl Moments {
    pub const fn new(mean: f64, std_dev: f64) -> Self {
        Self { mean, std_dev }
    }
}

/// Normal distribution of household parameters. Defaults describe a
/// heterogeneous fleet of small residential batteries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterStats {
    pub capacity: Moments,
    pub u_max: Moments,
    pub u_min: Moments,
    pub alpha: Moments,
    pub beta: Moments,
    pub gamma: Moments,
}

impl Default for ParameterStats {
    fn default() -> Self {
        Self {
            capacity: Moments::new(2.0563, 0.2431),
            u_max: Moments::new(0.5229, 0.1563),
            u_min: Moments::new(-0.5105, 0.1474),
            alpha: Moments::new(0.9913, 0.0053),
            beta: Moments::new(0.9494, 0.0098),
            gamma: Moments::new(0.9487, 0.0100),
        }
    }
}

impl ParameterStats {
    pub fn mean_params(&self) -> SubsystemParams {
        SubsystemParams {
            alpha: self.alpha.mean,
            beta: self.beta.mean,
            gamma: self.gamma.mean,
            capacity: self.capacity.mean,
            u_max: self.u_max.mean,
            u_min: self.u_min.mean,
        }
    }

    /// Every parameter with zero spread.
    pub fn degenerate(&self) -> Self {
        let z = |m: Moments| Moments::new(m.mean, 0.0);
        Self {
            capacity: z(self.capacity),
            u_max: z(self.u_max),
            u_min: z(self.u_min),
            alpha: z(self.alpha),
            beta: z(self.beta),
            gamma: z(self.gamma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("capacity", self.capacity),
            ("u_max", self.u_max),
            ("u_min", self.u_min),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(m.std_dev >= 0.0) || !m.mean.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name}: invalid moments ({}, {})",
                    m.mean, m.std_dev
                )));
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> SubsystemParams {
        let mut draw = |m: Moments| {
            let g: f64 = StandardNormal.sample(rng);
            m.mean + m.std_dev * g
        };
        let capacity = draw(self.capacity).max(SAMPLE_FLOOR);
        let u_max = draw(self.u_max).max(SAMPLE_FLOOR);
        let u_min = draw(self.u_min).min(-SAMPLE_FLOOR);
        let alpha = draw(self.alpha).clamp(SAMPLE_FLOOR, 1.0);
        let beta = draw(self.beta).clamp(SAMPLE_FLOOR, 1.0);
        let gamma = draw(self.gamma).clamp(SAMPLE_FLOOR, 1.0);
        SubsystemParams {
            alpha,
            beta,
            gamma,
            capacity,
            u_max,
            u_min,
        }
    }
}

/// One step of the storage dynamics, `α x + T (β u⁺ + u⁻)`. No clipping.
pub fn step_dynamics(x: f64, u: ControlInput, p: &SubsystemParams, dt: f64) -> f64 {
    p.alpha * x + dt * (p.beta * u.charge + u.discharge)
}

/// Grid-visible demand `w + u⁺ + γ u⁻`; negative values feed into the grid.
pub fn power_demand(u: ControlInput, w: f64, gamma: f64) -> f64 {
    w + u.charge + gamma * u.discharge
}

/// States `x(k), …, x(k+N)` reached from `x0` under `controls`.
pub fn simulate_trajectory(
    x0: f64,
    controls: &ControlTrajectory,
    p: &SubsystemParams,
    dt: f64,
) -> Vec<f64> {
    let mut states = Vec::with_capacity(controls.horizon() + 1);
    let mut x = x0;
    states.push(x);
    for u in controls.steps() {
        x = step_dynamics(x, u, p, dt);
        states.push(x);
    }
    states
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    ChargeBounds,
    DischargeBounds,
    RateRatio,
    StateOfCharge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Step offset within the horizon (state index for `StateOfCharge`).
    pub step: usize,
    pub kind: ViolationKind,
    /// Amount by which the bound is exceeded.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn max_excess(&self) -> f64 {
        self.violations.iter().map(|v| v.excess).fold(0.0, f64::max)
    }
}

/// Checks box, ratio and state-of-charge constraints along the horizon.
///
/// States `x(k+1), …, x(k+N-1)` are always checked; `x(k+N)` only when
/// `constrain_terminal` is set. `x(k) = x0` is taken as given.
pub fn check_feasible(
    controls: &ControlTrajectory,
    x0: f64,
    p: &SubsystemParams,
    dt: f64,
    tol: f64,
    constrain_terminal: bool,
) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut push = |step, kind, excess: f64| {
        if excess > tol {
            violations.push(Violation { step, kind, excess });
        }
    };
    for (n, u) in controls.steps().enumerate() {
        push(n, ViolationKind::ChargeBounds, (-u.charge).max(u.charge - p.u_max));
        push(
            n,
            ViolationKind::DischargeBounds,
            (u.discharge).max(p.u_min - u.discharge),
        );
        let ratio = p.rate_ratio(u);
        push(n, ViolationKind::RateRatio, (-ratio).max(ratio - 1.0));
    }
    let states = simulate_trajectory(x0, controls, p, dt);
    let last = if constrain_terminal {
        states.len() - 1
    } else {
        states.len() - 2
    };
    for (j, &x) in states.iter().enumerate().take(last + 1).skip(1) {
        push(j, ViolationKind::StateOfCharge, (-x).max(x - p.capacity));
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Shape of the synthetic net-consumption generator.
///
/// A household profile is
///
/// ```text
///   w(t) = base + A_load·s·cos(4π(t − 8 − φ)/24)
///        − A_pv·s·(max(0, cos(2π(t − 13 − φ)/24)) − m_φ)
///        + Σ_h a_{d,h} cos(2π h t/24 + θ_{d,h})
/// ```
///
/// with `t` in hours, `φ` a per-household phase shift, `s` a per-household
/// amplitude factor, `m_φ` the daily sample mean of the clipped solar bump and
/// fresh per-day noise harmonics `h ∈ [3, 2 + noise_harmonics]`. Every term
/// except `base` sums to zero over a whole day when `24/T` is an integer, so
/// the daily mean equals `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub base_load: f64,
    pub load_amplitude: f64,
    pub solar_amplitude: f64,
    pub noise_amplitude: f64,
    pub noise_harmonics: usize,
    /// Standard deviation of the per-household phase shift in hours.
    pub phase_jitter_h: f64,
    /// Relative standard deviation of the per-household amplitude factor.
    pub amplitude_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            base_load: 0.4,
            load_amplitude: 0.1155,
            solar_amplitude: 0.33,
            noise_amplitude: 0.0825,
            noise_harmonics: 6,
            phase_jitter_h: 1.0,
            amplitude_jitter: 0.25,
        }
    }
}

/// Synthetic profiles with the default generator shape.
pub fn synth_profiles(
    count: usize,
    length: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<NetConsumptionProfile>> {
    synth_profiles_with(count, length, dt, seed, &SynthConfig::default())
}

pub fn synth_profiles_with(
    count: usize,
    length: usize,
    dt: f64,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Vec<NetConsumptionProfile>> {
    if length == 0 {
        return Err(Error::InvalidInput("profile length must be at least 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_day = (24.0 / dt).round().max(1.0) as usize;
    let days = length.div_ceil(per_day);
    let solar_bump = |t: f64, phase: f64| (2.0 * PI * (t - 13.0 - phase) / 24.0).cos().max(0.0);

    let mut profiles = Vec::with_capacity(count);
    for _ in 0..count {
        let phase = cfg.phase_jitter_h * rng.sample::<f64, _>(StandardNormal);
        let scale = (1.0 + cfg.amplitude_jitter * rng.sample::<f64, _>(StandardNormal)).max(0.0);
        let solar_mean =
            (0..per_day).map(|m| solar_bump(m as f64 * dt, phase)).sum::<f64>() / per_day as f64;

        // Per-day noise harmonics: (harmonic, amplitude, phase).
        let noise: Vec<Vec<(f64, f64, f64)>> = (0..days)
            .map(|_| {
                (0..cfg.noise_harmonics)
                    .map(|h| {
                        let amp = cfg.noise_amplitude / (cfg.noise_harmonics as f64).sqrt()
                            * rng.sample::<f64, _>(StandardNormal);
                        let theta = rng.gen_range(0.0..2.0 * PI);
                        ((h + 3) as f64, amp, theta)
                    })
                    .collect()
            })
            .collect();

        let values = (0..length)
            .map(|n| {
                let t = n as f64 * dt;
                let load = cfg.load_amplitude * scale * (4.0 * PI * (t - 8.0 - phase) / 24.0).cos();
                let solar = cfg.solar_amplitude * scale * (solar_bump(t, phase) - solar_mean);
                let day = &noise[n / per_day];
                let eps: f64 = day
                    .iter()
                    .map(|&(h, a, th)| a * (2.0 * PI * h * t / 24.0 + th).cos())
                    .sum();
                cfg.base_load + load - solar + eps
            })
            .collect();
        profiles.push(NetConsumptionProfile::new(values));
    }
    Ok(profiles)
}

/// Random heterogeneous grid with default profile shape, `T = 0.5 h` and
/// initial charge 0.5 kWh (capped by capacity).
pub fn generate_scenario(
    count: usize,
    stats: &ParameterStats,
    seed: u64,
    horizon_length: usize,
) -> Result<GridScenario> {
    generate_scenario_with(
        count,
        stats,
        seed,
        horizon_length,
        &SynthConfig::default(),
        DEFAULT_DT,
        DEFAULT_INITIAL_SOC,
    )
}

pub fn generate_scenario_with(
    count: usize,
    stats: &ParameterStats,
    seed: u64,
    horizon_length: usize,
    synth: &SynthConfig,
    dt: f64,
    initial_soc: f64,
) -> Result<GridScenario> {
    if count == 0 {
        return Err(Error::InvalidInput("number of subsystems must be at least 1".into()));
    }
    stats.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subsystems: Vec<SubsystemParams> = (0..count).map(|_| stats.sample(&mut rng)).collect();
    let profiles = synth_profiles_with(
        count,
        horizon_length,
        dt,
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1),
        synth,
    )?;
    let initial_soc = subsystems
        .iter()
        .map(|p| initial_soc.clamp(0.0, p.capacity))
        .collect();
    Ok(GridScenario {
        subsystems,
        profiles,
        dt,
        initial_soc,
        seed,
    })
}

/// Reads a profile CSV: one row per household, comma-separated kW values.
pub fn load_profiles(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<NetConsumptionProfile>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profiles(&text, has_header, path)
}

pub(crate) fn parse_profiles(
    text: &str,
    has_header: bool,
    path: &Path,
) -> Result<Vec<NetConsumptionProfile>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut profiles: Vec<NetConsumptionProfile> = Vec::new();
    let mut width = None;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: record.len().min(w) + 1,
                    message: format!("ragged row: expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        column: c + 1,
                        message: format!("not a number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        profiles.push(NetConsumptionProfile::new(values));
    }
    if profiles.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: "no profile rows".into(),
        });
    }
    Ok(profiles)
}

/// Per-parameter sample mean and standard deviation of a scenario.
pub fn sample_stats(subsystems: &[SubsystemParams]) -> ParameterStats {
    let moments = |f: &dyn Fn(&SubsystemParams) -> f64| {
        let n = subsystems.len() as f64;
        let mean = subsystems.iter().map(f).sum::<f64>() / n;
        let var = if subsystems.len() > 1 {
            subsystems.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Moments::new(mean, var.sqrt())
    };
    ParameterStats {
        capacity: moments(&|p| p.capacity),
        u_max: moments(&|p| p.u_max),
        u_min: moments(&|p| p.u_min),
        alpha: moments(&|p| p.alpha),
        beta: moments(&|p| p.beta),
        gamma: moments(&|p| p.gamma),
    }
}
