//! Grid sweeps over scenario parameters.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{set_path, GridConfig, ScenarioConfig};
use super::sim::run_simulation;
use crate::analysis::{regret_floor, FloorParams};
use crate::error::{Error, Result};
use crate::model::NUM_ACTIONS;

pub const THREADS_VAR: &str = "IFL_THREADS";

/// One (grid point, seed) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_index: usize,
    /// Parameter path to assigned value.
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub gamma_hat: f64,
    pub delta_hat: f64,
    pub maturity_hat: Option<f64>,
    pub delay_hat: f64,
    pub q_hat: f64,
    pub final_regret: f64,
    /// Floor shape for the grid point; `None` where the floor is undefined.
    pub floor_value: Option<f64>,
}

/// Floor inputs implied by a resolved scenario: expected cumulative delay
/// `T * E[lag]`, share-weighted censorship and corruption, the declared
/// decline rate and `ln |class|`.
pub fn floor_params(config: &ScenarioConfig) -> Result<FloorParams> {
    let sc = config.scenario()?;
    let (eps10, eps01) = sc.env.mean_corruption();
    Ok(FloorParams {
        k: NUM_ACTIONS as u32,
        t: config.horizon,
        d: config.horizon as f64 * sc.env.mean_delay(),
        log_n: (sc.class.size() as f64).ln(),
        gamma_bar: sc.env.mean_gamma(),
        delta_bar: config.analysis.delta_bar,
        eps10,
        eps01,
        m_bar: None,
        c: config.analysis.c,
    })
}

fn floor_value(config: &ScenarioConfig) -> Option<f64> {
    floor_params(config).and_then(|p| regret_floor(&p)).ok()
}

/// Every grid point as a list of `(path, value)` assignments, first axis
/// varying slowest.
fn grid_points(grid: &GridConfig) -> Vec<Vec<(String, Value)>> {
    grid.axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                (0..axis.len()).map(move |i| {
                    let mut point = prefix.clone();
                    point.extend(axis.assignment(i));
                    point
                })
            })
            .collect()
    })
}

/// Resolve every grid point into a concrete config. Fails before anything
/// runs if a path does not resolve or a point is invalid.
pub fn expand_grid(base: &ScenarioConfig, grid: &GridConfig) -> Result<Vec<(BTreeMap<String, Value>, ScenarioConfig)>> {
    grid.validate()?;
    base.validate()?;
    let base_value = serde_json::to_value(base)?;
    let points = grid_points(grid);
    let runs = points.len().saturating_mul(base.seeds.len());
    if runs > grid.max_runs {
        return Err(Error::config(format!(
            "sweep needs {runs} runs, above the cap of {}",
            grid.max_runs
        )));
    }
    points
        .into_iter()
        .map(|point| {
            let mut value = base_value.clone();
            for (path, v) in &point {
                set_path(&mut value, path, v.clone())?;
            }
            let config: ScenarioConfig = serde_json::from_value(value)
                .map_err(|e| Error::config(format!("grid point {point:?}: {e}")))?;
            config.scenario()?;
            Ok((point.into_iter().collect(), config))
        })
        .collect()
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(format!("{THREADS_VAR} must be a positive integer, got `{s}`"))),
        },
    }
}

/// Sweep output: the swept parameter paths, sorted, and one row per run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub param_paths: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Run every (grid point, seed) pair. Rows come back ordered by grid point,
/// then by position in the seed list, whatever the execution order.
pub fn run_sweep(base: &ScenarioConfig, grid: &GridConfig) -> Result<SweepTable> {
    let mut param_paths: Vec<String> = grid.axes.iter().flat_map(|a| a.paths()).map(String::from).collect();
    param_paths.sort();
    param_paths.dedup();
    let points = expand_grid(base, grid)?;
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..base.seeds.len()).map(move |s| (g, s)))
        .collect();
    let floors: Vec<Option<f64>> = points.iter().map(|(_, c)| floor_value(c)).collect();

    let work = || -> Result<Vec<SweepRow>> {
        tasks
            .par_iter()
            .map(|&(g, s)| {
                let (params, config) = &points[g];
                let seed = config.seeds[s];
                let result = run_simulation(config, seed)?;
                let rates = result.realized_rates;
                Ok(SweepRow {
                    grid_index: g,
                    params: params.clone(),
                    seed,
                    gamma_hat: rates.gamma_hat,
                    delta_hat: rates.delta_hat,
                    maturity_hat: rates.maturity_hat,
                    delay_hat: rates.delay_hat,
                    q_hat: rates.q_hat,
                    final_regret: result.final_regret(),
                    floor_value: floors[g],
                })
            })
            .collect()
    };
    // `collect` on an indexed parallel iterator preserves task order.
    let rows = match thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(SweepTable { param_paths, rows })
}

/// Median of `values`; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Median final regret per grid point, in grid order.
pub fn median_regret_by_point(rows: &[SweepRow]) -> Vec<f64> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.grid_index).or_default().push(r.final_regret);
    }
    groups.values().filter_map(|v| median(v)).collect()
}
