//! `gridsparse`: scenario generation, open- and closed-loop runs, sweeps and
//! reports for group-sparse distributed battery coordination.
//!
//! Exit codes: 0 success, 1 the solver did not converge, 2 I/O or
//! configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use gridsparse::admm::{AdmmConfig, DualUpdateOrder};
use gridsparse::io;
use gridsparse::model::{
    generate_scenario, sample_stats, GridScenario, Moments, ParameterStats, DEFAULT_HORIZON,
};
use gridsparse::mpc::{draw_weights, run_closed_loop, MpcConfig, DEFAULT_WEIGHT_REFRESH};
use gridsparse::problem::{objective_value, GroupNorm};
use gridsparse::study::{
    kappa_grid, kappa_sweep, open_loop, replication_study, KappaSweep, OpenLoopConfig, ReplicationCell,
    ReplicationPlan,
};

const DEFAULT_PROFILE_LEN: usize = 96;

#[derive(Parser)]
#[command(name = "gridsparse", version, about = "Group-sparse distributed MPC for residential batteries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON plus a profile CSV.
    Gen(GenArgs),
    /// Solve the horizon problem once from the initial charge.
    OpenLoop(RunArgs),
    /// Run the receding-horizon loop.
    ClosedLoop(RunArgs),
    /// Replications over grid sizes and norms, optionally a sweep over kappa.
    Sweep(SweepArgs),
    /// Print the tables of a finished run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of households.
    #[arg(long = "I", default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    subsystems: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Profile length in steps.
    #[arg(long, default_value_t = DEFAULT_PROFILE_LEN)]
    len: usize,
    #[arg(long = "N", default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Output directory; files are `scenario.json` and `scenario_profiles.csv`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Embed the profiles in the JSON instead of writing a CSV.
    #[arg(long)]
    inline: bool,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-3)]
    kappa: f64,
    /// Group norm exponent.
    #[arg(long, default_value = "2", value_parser = parse_norm)]
    p: GroupNorm,
    #[arg(long = "N", default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Stop tolerance on both residuals.
    #[arg(long)]
    eps: Option<f64>,
    /// Initial dual step size; defaults to the tracking curvature.
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long = "dual-order", default_value = "paper", value_parser = parse_order)]
    dual_order: DualUpdateOrder,
}

impl SolverArgs {
    fn admm(&self) -> AdmmConfig {
        let d = AdmmConfig::default();
        AdmmConfig {
            rho0: self.rho0.or(d.rho0),
            eps: self.eps.unwrap_or(d.eps),
            eta: self.eta.unwrap_or(d.eta),
            mu: self.mu.unwrap_or(d.mu),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            dual_update_order: self.dual_order,
            ..d
        }
    }

    fn open_loop(&self) -> OpenLoopConfig {
        OpenLoopConfig {
            horizon: self.horizon,
            kappa: self.kappa,
            norm: self.p,
            admm: self.admm(),
            ..OpenLoopConfig::default()
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON; without it a scenario is generated from `--I` and `--seed`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seed of the generated scenario and of the weight draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Profile length of a generated scenario.
    #[arg(long, default_value_t = DEFAULT_PROFILE_LEN)]
    len: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Number of households of a generated scenario.
    #[arg(long = "I", default_value_t = 50)]
    subsystems: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Closed-loop steps.
    #[arg(long, default_value_t = 48)]
    steps: usize,
    /// Steps between weight draws.
    #[arg(long = "weight-refresh", default_value_t = DEFAULT_WEIGHT_REFRESH)]
    weight_refresh: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replay a `config.json` written by an earlier run; other flags except
    /// `--out` are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Grid sizes, e.g. `25,50,100`.
    #[arg(long = "I", value_delimiter = ',', default_value = "25,50,100")]
    subsystems: Vec<usize>,
    /// Norm exponents, e.g. `1,2`.
    #[arg(long = "norms", value_delimiter = ',', default_value = "1,2", value_parser = parse_norm)]
    norms: Vec<GroupNorm>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    /// Also sweep kappa on a grid of `--kappa-grid-I` households.
    #[arg(long = "kappa-sweep")]
    kappa_sweep: bool,
    #[arg(long = "kappa-min", default_value_t = 1e-5)]
    kappa_min: f64,
    #[arg(long = "kappa-max", default_value_t = 1e-2)]
    kappa_max: f64,
    #[arg(long = "kappa-points", default_value_t = 13)]
    kappa_points: usize,
    /// Grid size of the kappa sweep.
    #[arg(long = "kappa-grid-I", default_value_t = 50)]
    kappa_subsystems: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory to summarize.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_norm(s: &str) -> std::result::Result<GroupNorm, String> {
    let p: u8 = s.trim().parse().map_err(|_| format!("p must be 1 or 2, got {s:?}"))?;
    GroupNorm::try_from(p)
}

fn parse_order(s: &str) -> std::result::Result<DualUpdateOrder, String> {
    s.parse().map_err(|e: gridsparse::Error| e.to_string())
}

/// Where the scenario of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ScenarioSource {
    File { path: PathBuf },
    Generated { subsystems: usize, seed: u64, profile_len: usize },
}

impl ScenarioSource {
    fn from_args(args: &ScenarioArgs, subsystems: usize) -> Result<Self> {
        Ok(match &args.scenario {
            Some(p) => Self::File {
                path: fs::canonicalize(p).map_err(|e| gridsparse::Error::io(p, e))?,
            },
            None => Self::Generated {
                subsystems,
                seed: args.seed,
                profile_len: args.len,
            },
        })
    }

    fn load(&self) -> Result<GridScenario> {
        Ok(match self {
            Self::File { path } => io::read_scenario(path)?.0,
            Self::Generated {
                subsystems,
                seed,
                profile_len,
            } => generate_scenario(*subsystems, &ParameterStats::default(), *seed, *profile_len)?,
        })
    }
}

/// Everything needed to reproduce a run; written as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum RunConfig {
    OpenLoop {
        scenario: ScenarioSource,
        /// Weights are stream `weight_stream` of `weight_seed`.
        weight_seed: u64,
        weight_stream: u64,
        config: OpenLoopConfig,
    },
    ClosedLoop {
        scenario: ScenarioSource,
        config: MpcConfig,
    },
    Sweep {
        scenario: ScenarioSource,
        plan: ReplicationPlan,
        kappa: Option<KappaPlan>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KappaPlan {
    subsystems: usize,
    min: f64,
    max: f64,
    points: usize,
}

/// Errors that map to exit code 1.
#[derive(Debug)]
struct NotConverged(String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for NotConverged {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::OpenLoop(a) => load_or_build(a.config.as_deref(), || open_loop_config(&a)).and_then(|c| run(&c, &a.out)),
        Command::ClosedLoop(a) => {
            load_or_build(a.config.as_deref(), || closed_loop_config(&a)).and_then(|c| run(&c, &a.out))
        }
        Command::Sweep(a) => load_or_build(a.config.as_deref(), || sweep_config(&a)).and_then(|c| run(&c, &a.out)),
        Command::Report(a) => cmd_report(&a.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<NotConverged>() => {
            log::error!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            log::error!("{}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn load_or_build(path: Option<&Path>, build: impl FnOnce() -> Result<RunConfig>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| gridsparse::Error::io(p, e))?;
            serde_json::from_str(&text).with_context(|| format!("invalid run config {}", p.display()))
        }
        None => build(),
    }
}

fn open_loop_config(a: &RunArgs) -> Result<RunConfig> {
    Ok(RunConfig::OpenLoop {
        scenario: ScenarioSource::from_args(&a.scenario, a.subsystems)?,
        weight_seed: a.scenario.seed,
        weight_stream: 0,
        config: a.solver.open_loop(),
    })
}

fn closed_loop_config(a: &RunArgs) -> Result<RunConfig> {
    Ok(RunConfig::ClosedLoop {
        scenario: ScenarioSource::from_args(&a.scenario, a.subsystems)?,
        config: MpcConfig {
            horizon: a.solver.horizon,
            kappa: a.solver.kappa,
            norm: a.solver.p,
            sim_steps: a.steps,
            weight_refresh_steps: a.weight_refresh,
            weight_seed: a.scenario.seed,
            admm: a.solver.admm(),
            ..MpcConfig::default()
        },
    })
}

fn sweep_config(a: &SweepArgs) -> Result<RunConfig> {
    if a.subsystems.is_empty() || a.subsystems.contains(&0) || a.norms.is_empty() || a.replications == 0 {
        bail!(gridsparse::Error::InvalidInput("sweep grid is empty".into()));
    }
    let mut largest = *a.subsystems.iter().max().unwrap_or(&0);
    if a.kappa_sweep {
        largest = largest.max(a.kappa_subsystems);
    }
    Ok(RunConfig::Sweep {
        scenario: ScenarioSource::from_args(&a.scenario, largest)?,
        plan: ReplicationPlan {
            subsystems: a.subsystems.clone(),
            norms: a.norms.clone(),
            replications: a.replications,
            seed: a.scenario.seed,
            base: a.solver.open_loop(),
        },
        kappa: a.kappa_sweep.then_some(KappaPlan {
            subsystems: a.kappa_subsystems,
            min: a.kappa_min,
            max: a.kappa_max,
            points: a.kappa_points,
        }),
    })
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| gridsparse::Error::io(out, e))?;
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    create_dir(&a.out)?;
    let stats = ParameterStats::default();
    let scenario = generate_scenario(a.subsystems as usize, &stats, a.seed, a.len)?;
    let written = io::write_scenario(a.out.join("scenario.json"), &scenario, a.horizon, a.inline)?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    let sample = sample_stats(&scenario.subsystems);
    println!("parameter  target_mean  target_std  sample_mean  sample_std");
    let rows: [(&str, Moments, Moments); 6] = [
        ("C", stats.capacity, sample.capacity),
        ("u_max", stats.u_max, sample.u_max),
        ("u_min", stats.u_min, sample.u_min),
        ("alpha", stats.alpha, sample.alpha),
        ("beta", stats.beta, sample.beta),
        ("gamma", stats.gamma, sample.gamma),
    ];
    for (name, target, got) in rows {
        println!(
            "{name:<9} {:>12.4} {:>11.4} {:>12.4} {:>11.4}",
            target.mean, target.std_dev, got.mean, got.std_dev
        );
    }
    Ok(())
}

fn run(config: &RunConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    io::write_json(out.join("config.json"), config)?;
    match config {
        RunConfig::OpenLoop {
            scenario,
            weight_seed,
            weight_stream,
            config,
        } => run_open_loop(&scenario.load()?, *weight_seed, *weight_stream, config, out),
        RunConfig::ClosedLoop { scenario, config } => run_closed(&scenario.load()?, config, out, scenario),
        RunConfig::Sweep { scenario, plan, kappa } => run_sweep(&scenario.load()?, plan, kappa.as_ref(), out),
    }
}

#[derive(Serialize, Deserialize)]
struct OpenLoopMetrics {
    subsystems: usize,
    horizon: usize,
    p: u8,
    kappa: f64,
    nonzero_pct: f64,
    active_households: usize,
    objective: f64,
    tracking_cost: f64,
    iterations: usize,
    converged: bool,
    r_pri: f64,
    r_dual: f64,
    rho_final: f64,
    floats_up: usize,
    floats_down: usize,
    inner_failures: usize,
}

fn run_open_loop(scenario: &GridScenario, seed: u64, stream: u64, config: &OpenLoopConfig, out: &Path) -> Result<()> {
    let sigma = draw_weights(seed, stream, scenario.len());
    log::info!("open loop: I = {}, N = {}, {}, kappa = {}", scenario.len(), config.horizon, config.norm, config.kappa);
    let res = open_loop(scenario, sigma, config)?;
    let horizon = config.horizon;
    let u = res.u();
    io::write_control_matrix(out.join("u.csv"), u, horizon)?;
    io::write_sparsity_pattern(out.join("sparsity.csv"), u, horizon, config.nonzero_tol)?;
    io::write_trace(out.join("trace.csv"), &res.outcome.trace)?;
    let aggregate: Vec<Vec<f64>> = (0..horizon)
        .map(|n| vec![n as f64, res.problem.w_bar[n], res.problem.zeta_bar[n], res.z_bar[n]])
        .collect();
    io::write_rows(out.join("aggregate.csv"), Some(&["n", "w_bar", "zeta_bar", "z_bar"]), &aggregate)?;
    let metrics = OpenLoopMetrics {
        subsystems: scenario.len(),
        horizon,
        p: config.norm.p(),
        kappa: config.kappa,
        nonzero_pct: res.nonzero_pct,
        active_households: u
            .chunks_exact(2 * horizon)
            .filter(|b| b.iter().any(|v| v.abs() > config.nonzero_tol))
            .count(),
        objective: objective_value(&res.problem, u),
        tracking_cost: res.problem.tracking_cost(u),
        iterations: res.outcome.state.iteration,
        converged: res.converged(),
        r_pri: res.outcome.residuals.r_pri,
        r_dual: res.outcome.residuals.r_dual,
        rho_final: res.outcome.state.rho,
        floats_up: res.outcome.ledger.floats_up(),
        floats_down: res.outcome.ledger.floats_down(),
        inner_failures: res.outcome.inner_failures,
    };
    io::write_json(out.join("metrics.json"), &metrics)?;
    println!(
        "nonzero {:.2}%  active households {}/{}  objective {:.6e}  iterations {}",
        metrics.nonzero_pct, metrics.active_households, metrics.subsystems, metrics.objective, metrics.iterations
    );
    if !metrics.converged {
        return Err(NotConverged(format!("ADMM stopped after {} iterations without converging", metrics.iterations)).into());
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ClosedLoopSummary {
    scenario: ScenarioSource,
    scenario_seed: u64,
    config: MpcConfig,
    applied_nonzero_pct: f64,
    mean_solution_nonzero_pct: f64,
    total_admm_iterations: usize,
    steps_not_converged: usize,
}

fn run_closed(scenario: &GridScenario, config: &MpcConfig, out: &Path, source: &ScenarioSource) -> Result<()> {
    log::info!(
        "closed loop: I = {}, N = {}, {}, kappa = {}, {} steps",
        scenario.len(),
        config.horizon,
        config.norm,
        config.kappa,
        config.sim_steps
    );
    let log = run_closed_loop(scenario, config)?;
    io::write_closed_loop(out, &log)?;
    let summary = ClosedLoopSummary {
        scenario: source.clone(),
        scenario_seed: scenario.seed,
        config: config.clone(),
        applied_nonzero_pct: log.applied_nonzero_pct(),
        mean_solution_nonzero_pct: log.mean_solution_nonzero_pct(),
        total_admm_iterations: log.total_admm_iterations(),
        steps_not_converged: log
            .steps
            .iter()
            .filter(|s| s.admm_status != gridsparse::admm::AdmmStatus::Converged)
            .count(),
    };
    io::write_json(out.join("summary.json"), &summary)?;
    println!(
        "applied nonzero {:.2}%  planned nonzero {:.2}%  ADMM iterations {}",
        summary.applied_nonzero_pct, summary.mean_solution_nonzero_pct, summary.total_admm_iterations
    );
    if summary.steps_not_converged > 0 {
        return Err(NotConverged(format!("{} MPC steps hit the ADMM iteration cap", summary.steps_not_converged)).into());
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SweepResult {
    cells: Vec<ReplicationCell>,
    kappa: Vec<KappaSweep>,
}

fn run_sweep(population: &GridScenario, plan: &ReplicationPlan, kappa: Option<&KappaPlan>, out: &Path) -> Result<()> {
    let cells = replication_study(population, plan)?;
    let mut table = Vec::new();
    for cell in &cells {
        let dir = out.join("cells").join(format!("I{}_p{}", cell.subsystems, cell.norm.p()));
        create_dir(&dir)?;
        let rows: Vec<Vec<f64>> = cell
            .samples
            .iter()
            .zip(&cell.iterations)
            .zip(&cell.converged)
            .enumerate()
            .map(|(r, ((s, it), c))| vec![r as f64, *s, *it as f64, f64::from(u8::from(*c))])
            .collect();
        io::write_rows(dir.join("samples.csv"), Some(&["replication", "nonzero_pct", "iterations", "converged"]), &rows)?;
        table.push(vec![
            cell.subsystems as f64,
            f64::from(cell.norm.p()),
            cell.kappa,
            cell.summary.mean,
            cell.summary.std_dev,
            cell.summary.median,
            cell.samples.len() as f64,
        ]);
    }
    io::write_json(out.join("table.json"), &cells)?;
    io::write_rows(
        out.join("table.csv"),
        Some(&["I", "p", "kappa", "mean", "std_dev", "median", "replications"]),
        &table,
    )?;

    let mut sweeps = Vec::new();
    if let Some(k) = kappa {
        let scenario = population.prefix(k.subsystems)?;
        let sigma = draw_weights(plan.seed, 0, k.subsystems);
        let grid = kappa_grid(k.min, k.max, k.points)?;
        let mut rows = Vec::new();
        for &norm in &plan.norms {
            log::info!("kappa sweep for {norm} on I = {}", k.subsystems);
            let base = OpenLoopConfig {
                norm,
                ..plan.base.clone()
            };
            let sweep = kappa_sweep(&scenario, &sigma, &base, &grid)?;
            for pt in &sweep.points {
                let mut row = vec![f64::from(norm.p()), pt.kappa, pt.mean_deviation, pt.nonzero_pct];
                row.extend(&pt.deviation);
                rows.push(row);
            }
            sweeps.push(sweep);
        }
        let mut header: Vec<String> = ["p", "kappa", "mean_deviation", "nonzero_pct"].map(String::from).to_vec();
        header.extend((0..plan.base.horizon).map(|n| format!("deviation_{n}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_rows(out.join("deviation.csv"), Some(&header), &rows)?;
    }

    let result = SweepResult { cells, kappa: sweeps };
    io::write_json(out.join("sweep.json"), &result)?;
    print_sweep(&result);
    let failed = result.cells.iter().flat_map(|c| &c.converged).filter(|c| !**c).count()
        + result.kappa.iter().flat_map(|s| &s.points).filter(|p| !p.converged).count();
    if failed > 0 {
        return Err(NotConverged(format!("{failed} solves of the sweep did not converge")).into());
    }
    Ok(())
}

fn print_sweep(result: &SweepResult) {
    if !result.cells.is_empty() {
        println!("{:>6} {:>3} {:>10} {:>9} {:>9} {:>9}", "I", "p", "kappa", "mean%", "std%", "median%");
        for c in &result.cells {
            println!(
                "{:>6} {:>3} {:>10.1e} {:>9.2} {:>9.2} {:>9.2}",
                c.subsystems,
                c.norm.p(),
                c.kappa,
                c.summary.mean,
                c.summary.std_dev,
                c.summary.median
            );
        }
    }
    for s in &result.kappa {
        println!("{} relative deviation:", s.norm);
        println!("{:>10} {:>14} {:>9}", "kappa", "mean_dev", "nonzero%");
        for p in &s.points {
            println!("{:>10.2e} {:>14.6e} {:>9.2}", p.kappa, p.mean_deviation, p.nonzero_pct);
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| gridsparse::Error::io(path, e))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn cmd_report(out: &Path) -> Result<()> {
    let mut found = false;
    let metrics = out.join("metrics.json");
    if metrics.exists() {
        let m: OpenLoopMetrics = read_json(&metrics)?;
        println!("open loop  I = {}  N = {}  p = {}  kappa = {}", m.subsystems, m.horizon, m.p, m.kappa);
        println!("  nonzero components   {:.2}%", m.nonzero_pct);
        println!("  active households    {}/{}", m.active_households, m.subsystems);
        println!("  objective            {:.6e}", m.objective);
        println!("  tracking cost        {:.6e}", m.tracking_cost);
        println!("  iterations           {} (converged {})", m.iterations, m.converged);
        println!("  floats up / down     {} / {}", m.floats_up, m.floats_down);
        found = true;
    }
    let summary = out.join("summary.json");
    if summary.exists() {
        let s: ClosedLoopSummary = read_json(&summary)?;
        println!(
            "closed loop  N = {}  p = {}  kappa = {}  steps = {}",
            s.config.horizon,
            s.config.norm.p(),
            s.config.kappa,
            s.config.sim_steps
        );
        println!("  applied nonzero      {:.2}%", s.applied_nonzero_pct);
        println!("  planned nonzero      {:.2}%", s.mean_solution_nonzero_pct);
        println!("  ADMM iterations      {}", s.total_admm_iterations);
        println!("  steps not converged  {}", s.steps_not_converged);
        found = true;
    }
    let sweep = out.join("sweep.json");
    if sweep.exists() {
        print_sweep(&read_json(&sweep)?);
        found = true;
    }
    if !found {
        bail!(gridsparse::Error::InvalidInput(format!("no run results in {}", out.display())));
    }
    Ok(())
}
