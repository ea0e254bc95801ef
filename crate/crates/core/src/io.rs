//! File formats: scenario JSON, profile CSV, run logs and traces.
//!
//! Every CSV written here is rectangular with a header row of column names
//! and numeric cells only, so it reads back through
//! [`load_profiles`](crate::model::load_profiles) with `has_header = true`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::admm::{AdmmStatus, TraceRow};
use crate::model::{load_profiles, GridScenario, NetConsumptionProfile, SubsystemParams};
use crate::mpc::ClosedLoopLog;
use crate::{Error, Result};

/// A household entry of the scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemEntry {
    #[serde(flatten)]
    pub params: SubsystemParams,
    pub x0: f64,
}

/// Profiles are either a CSV path (relative to the scenario file) or inline rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSource {
    Path(String),
    Inline(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(rename = "T")]
    pub dt: f64,
    #[serde(rename = "N_default")]
    pub horizon: usize,
    pub subsystems: Vec<SubsystemEntry>,
    pub profiles: ProfileSource,
    pub seed: u64,
}

impl ScenarioFile {
    pub fn from_scenario(scenario: &GridScenario, horizon: usize, profiles: ProfileSource) -> Self {
        Self {
            dt: scenario.dt,
            horizon,
            subsystems: scenario
                .subsystems
                .iter()
                .zip(&scenario.initial_soc)
                .map(|(p, &x0)| SubsystemEntry { params: *p, x0 })
                .collect(),
            profiles,
            seed: scenario.seed,
        }
    }

    /// Resolves profiles (relative paths against `base_dir`) and validates.
    pub fn into_scenario(self, base_dir: &Path) -> Result<GridScenario> {
        let profiles = match self.profiles {
            ProfileSource::Inline(rows) => rows.into_iter().map(NetConsumptionProfile::new).collect(),
            ProfileSource::Path(p) => load_profiles(base_dir.join(p), false)?,
        };
        let scenario = GridScenario {
            subsystems: self.subsystems.iter().map(|s| s.params).collect(),
            initial_soc: self.subsystems.iter().map(|s| s.x0).collect(),
            profiles,
            dt: self.dt,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Reads a scenario JSON; returns the scenario and its default horizon.
pub fn read_scenario(path: impl AsRef<Path>) -> Result<(GridScenario, usize)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScenarioFile = serde_json::from_str(&text)?;
    let horizon = file.horizon;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok((file.into_scenario(base)?, horizon))
}

/// Writes `<stem>.json` and, unless `inline`, `<stem>_profiles.csv` next to it.
pub fn write_scenario(path: impl AsRef<Path>, scenario: &GridScenario, horizon: usize, inline: bool) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let mut written = Vec::new();
    let source = if inline {
        ProfileSource::Inline(scenario.profiles.iter().map(|p| p.values.clone()).collect())
    } else {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        let name = format!("{stem}_profiles.csv");
        let csv_path = path.with_file_name(&name);
        write_profiles(&csv_path, &scenario.profiles)?;
        written.push(csv_path);
        ProfileSource::Path(name)
    };
    write_json(path, &ScenarioFile::from_scenario(scenario, horizon, source))?;
    written.insert(0, path.to_path_buf());
    Ok(written)
}

/// One row per household, no header.
pub fn write_profiles(path: impl AsRef<Path>, profiles: &[NetConsumptionProfile]) -> Result<()> {
    let rows: Vec<Vec<f64>> = profiles.iter().map(|p| p.values.clone()).collect();
    write_rows(path, None, &rows)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Numeric CSV with an optional header.
pub fn write_rows(path: impl AsRef<Path>, header: Option<&[&str]>, rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(file);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRow]) -> Result<()> {
    let rows: Vec<Vec<f64>> = trace
        .iter()
        .map(|t| vec![t.iteration as f64, t.r_pri, t.r_dual, t.rho, t.objective])
        .collect();
    write_rows(path, Some(&["iteration", "r_pri", "r_dual", "rho", "objective"]), &rows)
}

/// Stacked controls as a matrix: one row per household, columns
/// `u⁺(0), u⁻(0), u⁺(1), …`.
pub fn write_control_matrix(path: impl AsRef<Path>, u: &[f64], horizon: usize) -> Result<()> {
    let rows: Vec<Vec<f64>> = u.chunks(2 * horizon).map(<[f64]>::to_vec).collect();
    let header: Vec<String> = (0..horizon)
        .flat_map(|n| [format!("u_plus_{n}"), format!("u_minus_{n}")])
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(path, Some(&header), &rows)
}

/// 0/1 matrix marking components with magnitude above `tol`; one row per
/// household.
pub fn write_sparsity_pattern(path: impl AsRef<Path>, u: &[f64], horizon: usize, tol: f64) -> Result<()> {
    let pattern: Vec<f64> = u.iter().map(|v| f64::from(u8::from(v.abs() > tol))).collect();
    write_control_matrix(path, &pattern, horizon)
}

/// `closed_loop.csv` (one row per step and household) and
/// `closed_loop_steps.csv` (one row per step).
pub fn write_closed_loop(dir: impl AsRef<Path>, log: &ClosedLoopLog) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let per_household: Vec<Vec<f64>> = log
        .steps
        .iter()
        .flat_map(|s| {
            s.applied.iter().zip(&s.soc_after).enumerate().map(move |(i, (u, x))| {
                vec![s.k as f64, s.time as f64, i as f64, u.charge, u.discharge, *x]
            })
        })
        .collect();
    let a = dir.join("closed_loop.csv");
    write_rows(&a, Some(&["k", "time", "i", "u_plus", "u_minus", "soc"]), &per_household)?;

    let per_step: Vec<Vec<f64>> = log
        .steps
        .iter()
        .map(|s| {
            vec![
                s.k as f64,
                s.time as f64,
                s.z_bar,
                s.zeta_bar,
                s.w_bar,
                s.solution_nonzero_pct,
                s.applied_nonzero_pct,
                s.admm_iterations as f64,
                s.rho_final,
                f64::from(u8::from(s.admm_status == AdmmStatus::Converged)),
                s.weight_epoch as f64,
            ]
        })
        .collect();
    let b = dir.join("closed_loop_steps.csv");
    write_rows(
        &b,
        Some(&[
            "k",
            "time",
            "z_bar",
            "zeta_bar",
            "w_bar",
            "solution_nonzero_pct",
            "applied_nonzero_pct",
            "admm_iterations",
            "rho_final",
            "converged",
            "weight_epoch",
        ]),
        &per_step,
    )?;
    Ok(vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_scenario, ParameterStats};

    #[test]
    fn scenario_round_trips_both_ways() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = generate_scenario(4, &ParameterStats::default(), 7, 30).unwrap();
        for inline in [false, true] {
            let path = dir.path().join(format!("s_{inline}.json"));
            let written = write_scenario(&path, &scenario, 24, inline).unwrap();
            assert_eq!(written.len(), if inline { 1 } else { 2 });
            let (back, horizon) = read_scenario(&path).unwrap();
            assert_eq!(horizon, 24);
            assert_eq!(back, scenario);
        }
    }

    #[test]
    fn csv_outputs_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let u = vec![0.1, -0.2, 0.0, 0.0, 1e-9, -3.5];
        let p = dir.path().join("u.csv");
        write_control_matrix(&p, &u, 1).unwrap();
        let back = load_profiles(&p, true).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2].values, vec![1e-9, -3.5]);

        let p = dir.path().join("pattern.csv");
        write_sparsity_pattern(&p, &u, 3, 1e-4).unwrap();
        assert_eq!(load_profiles(&p, true).unwrap()[0].values, vec![1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_scenario_is_io_error() {
        let err = read_scenario("/nonexistent/scenario.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
