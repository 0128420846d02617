//! Experiment runner: repeat simulator-backed tuning runs, aggregate the
//! Elo gains and emit reports.
//!
//! Runs are embarrassingly parallel. Each run derives its own seed from the
//! master seed (see [`crate::seeds`]), owns its RNG streams, and the
//! aggregation always walks the results in run order, so the report is
//! byte-identical however many threads executed the runs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::optimizers::{Method, ParamSpec, Tuner};
use crate::schedules::ScheduleParams;
use crate::seeds::{
    derive_run_seed, stream_rng, STREAM_GAMES, STREAM_OFFSETS, STREAM_PERTURBATION,
};
use crate::simulator::QuadraticLandscape;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Fully resolved configuration of one experiment cell
/// (method x parameter count).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub n_iterations: u64,
    pub repeats: u32,
    pub seed: u64,
    pub initial_total_elo: f64,
    pub tau: f64,
    pub landscape: QuadraticLandscape,
    pub specs: Vec<ParamSpec>,
    pub schedule: ScheduleParams,
    /// Worker threads for the repeats; 0 means all available cores.
    pub parallelism: usize,
    /// Record a sampled (iteration, elo_loss) trajectory per run.
    pub record_trajectories: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations < 1 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if self.repeats < 1 {
            return Err(Error::config("repeats must be >= 1"));
        }
        if self.initial_total_elo <= 0.0 || !self.initial_total_elo.is_finite() {
            return Err(Error::config("initial_total_elo must be > 0"));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::config(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.specs.is_empty() {
            return Err(Error::config("at least one parameter is required"));
        }
        if self.landscape.dim() != self.specs.len() {
            return Err(Error::config(format!(
                "landscape has {} curvatures but {} parameters are configured",
                self.landscape.dim(),
                self.specs.len()
            )));
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Outcome of a single tuning run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub run: u32,
    pub seed: u64,
    pub initial_theta: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `initial_loss - final_loss`; at most the initial distance whenever
    /// the final loss is nonnegative.
    pub elo_gain: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub k: u64,
    pub elo_loss: f64,
}

/// Aggregated result of one experiment cell. Serializes deterministically:
/// identical config and seed give a byte-identical JSON document (wall time
/// is deliberately kept out of the serialized form).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub elo_gain_mean: f64,
    pub elo_gain_std: f64,
    pub runs: Vec<RunResult>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Place `n` parameters at a total of `total_elo` away from the optimum:
/// the budget is split evenly, so `|theta_i| = sqrt((total_elo/n) / a_i)`,
/// with an independently random sign per component.
pub fn initial_offsets(
    n: usize,
    total_elo: f64,
    curvatures: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if n == 0 || curvatures.len() != n {
        return Err(Error::invalid("offset count must match curvature count"));
    }
    if total_elo <= 0.0 || !total_elo.is_finite() {
        return Err(Error::invalid("total_elo must be > 0"));
    }
    let share = total_elo / n as f64;
    Ok(curvatures
        .iter()
        .map(|&a| {
            let magnitude = (share / a).sqrt();
            if rng.gen::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect())
}

/// Execute one tuning run against the simulator. Deterministic in
/// `run_seed`: the perturbation stream, the game stream and the offset
/// signs are all derived from it.
pub fn run_single(config: &ExperimentConfig, run_seed: u64) -> Result<RunResult> {
    config.validate()?;
    let n = config.specs.len();

    let mut offset_rng = stream_rng(run_seed, STREAM_OFFSETS);
    let theta0 = initial_offsets(
        n,
        config.initial_total_elo,
        config.landscape.curvatures(),
        &mut offset_rng,
    )?;
    let initial_loss = config.landscape.elo_loss(&theta0);

    let mut tuner = Tuner::new(
        config.method,
        config.specs.clone(),
        config.schedule,
        config.n_iterations,
        config.tau,
        Some(theta0.clone()),
        stream_rng(run_seed, STREAM_PERTURBATION),
    )?;
    let mut game_rng = stream_rng(run_seed, STREAM_GAMES);

    let sample_every = (config.n_iterations / 1000).max(1);
    let mut trajectory = config.record_trajectories.then(Vec::new);

    for k in 1..=config.n_iterations {
        let proposal = tuner.propose()?;
        let (plus, minus) = proposal.emitted(&config.specs);
        let w = config.landscape.play_match(&plus, &minus, &mut game_rng)?;
        tuner.observe(&proposal.draw, w)?;
        if let Some(t) = trajectory.as_mut() {
            if k % sample_every == 0 || k == config.n_iterations {
                t.push(TrajectoryPoint {
                    k,
                    elo_loss: config.landscape.elo_loss(&tuner.state().theta),
                });
            }
        }
    }

    let final_theta = tuner.state().theta.clone();
    let final_loss = config.landscape.elo_loss(&final_theta);
    Ok(RunResult {
        run: 0,
        seed: run_seed,
        initial_theta: theta0,
        final_theta,
        initial_loss,
        final_loss,
        elo_gain: initial_loss - final_loss,
        trajectory,
    })
}

/// Run `repeats` independent tuning runs and aggregate their Elo gains.
/// Fails if any run fails, naming the run and its seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();

    let indices: Vec<u32> = (0..config.repeats).collect();
    let execute = || -> Vec<Result<RunResult>> {
        indices
            .par_iter()
            .map(|&i| {
                let seed = derive_run_seed(config.seed, u64::from(i));
                run_single(config, seed)
                    .map(|mut r| {
                        r.run = i;
                        r
                    })
                    .map_err(|e| e.in_run(i as usize, seed))
            })
            .collect()
    };

    let outcomes = if config.parallelism == 0 {
        execute()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
        pool.install(execute)
    };

    let mut runs = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        runs.push(outcome?);
    }

    // Sums accumulate in run order regardless of execution order.
    let count = runs.len() as f64;
    let mean = runs.iter().map(|r| r.elo_gain).sum::<f64>() / count;
    let std = if runs.len() > 1 {
        let ss = runs
            .iter()
            .map(|r| (r.elo_gain - mean).powi(2))
            .sum::<f64>();
        (ss / (count - 1.0)).sqrt()
    } else {
        0.0
    };

    let mut warnings = Vec::new();
    if runs.len() == 1 {
        warnings.push("single repeat: standard deviation reported as 0".to_string());
    }

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.clone(),
        elo_gain_mean: mean,
        elo_gain_std: std,
        runs,
        warnings,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

impl ExperimentReport {
    /// Pretty-printed JSON document, newline terminated. This is the stable
    /// machine-readable form; its bytes depend only on config and seed.
    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Human-readable table mirroring the mean/std layout of the
    /// experiment grid, plus a hyperparameter echo.
    pub fn render_table(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>7} {:>11} {:>8} {:>15} {:>14}\n",
            "method", "params", "iterations", "repeats", "elo gain mean", "elo gain std"
        ));
        out.push_str(&format!(
            "{:<8} {:>7} {:>11} {:>8} {:>15.5} {:>14.5}\n",
            c.method.to_string(),
            c.specs.len(),
            c.n_iterations,
            c.repeats,
            self.elo_gain_mean,
            self.elo_gain_std
        ));
        let c_ends: Vec<String> = c.specs.iter().map(|s| format!("{}", s.c_end)).collect();
        out.push_str(&format!(
            "tau={} alpha={} gamma={} A={} seed={} c_end=[{}]\n",
            c.tau,
            c.schedule.alpha,
            c.schedule.gamma,
            c.schedule.stability,
            c.seed,
            c_ends.join(", ")
        ));
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    /// Per-run results as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["run", "seed", "elo_gain", "initial_loss", "final_loss"])
            .map_err(|e| Error::config(format!("csv: {e}")))?;
        for r in &self.runs {
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                r.elo_gain.to_string(),
                r.initial_loss.to_string(),
                r.final_loss.to_string(),
            ])
            .map_err(|e| Error::config(format!("csv: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Standard benchmark cell: uniform curvature 0.01 (so a 100-unit move
/// costs 100 Elo), 2 Elo total initial distance, tau 0.6, recommended
/// schedule shape, and hyperparameters derived from the landscape.
pub fn benchmark_config(
    method: Method,
    n_params: usize,
    n_iterations: u64,
    repeats: u32,
    seed: u64,
    c_end: f64,
) -> Result<ExperimentConfig> {
    let curvature = 0.01f64;
    let total_elo = 2.0;
    let elo100 = (100.0 / curvature).sqrt();
    let delta_theta = (total_elo / n_params as f64 / curvature).sqrt();
    let hyper = crate::elo::HyperInputs::new(elo100, n_iterations, c_end, delta_theta)?;
    let r_end = crate::elo::spsa_r(&hyper);
    let (s1, sigma) = crate::elo::bspsa_hyperparams(&hyper);

    let specs = (0..n_params)
        .map(|i| ParamSpec {
            name: format!("p{}", i + 1),
            theta_start: 0.0,
            c_end,
            s1: Some(s1),
            sigma: Some(sigma),
            r_end: Some(r_end),
            lower: None,
            upper: None,
            integer_valued: false,
        })
        .collect();

    Ok(ExperimentConfig {
        method,
        n_iterations,
        repeats,
        seed,
        initial_total_elo: total_elo,
        tau: 0.6,
        landscape: QuadraticLandscape::uniform(n_params, curvature, 0.82)?,
        specs,
        schedule: ScheduleParams::recommended(n_iterations),
        parallelism: 0,
        record_trajectories: false,
    })
}
