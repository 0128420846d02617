//! Config-file parsing and validation.
//!
//! One TOML format serves both `simulate` and `tune`. Unknown keys are
//! rejected, validation failures name the offending field, and every
//! hyperparameter the tuners need can either be given directly
//! (`r_end`, `s1`, `sigma`) or derived from the measurable quantities
//! `elo100` and `delta_theta`. In simulate mode even those have defaults
//! computed from the landscape.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Duration;

use pairtune_core::{
    bspsa_hyperparams, spsa_r, tau_from_draw_rate, CkRule, Error, ExperimentConfig, HyperInputs,
    Method, ParamSpec, QuadraticLandscape, Result, ScheduleParams, SessionConfig,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    method: Method,
    iterations: u64,
    tau: Option<f64>,
    draw_rate: Option<f64>,
    #[serde(default)]
    params: Vec<ParamEntry>,
    param_template: Option<ParamTemplate>,
    schedule: Option<ScheduleSection>,
    simulator: Option<SimulatorSection>,
    experiment: Option<ExperimentSection>,
    oracle: Option<OracleSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    #[serde(default)]
    start: f64,
    c_end: f64,
    s1: Option<f64>,
    delta_theta: Option<f64>,
    sigma: Option<f64>,
    elo100: Option<f64>,
    r_end: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
    #[serde(default)]
    integer: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamTemplate {
    n_params: usize,
    #[serde(default)]
    start: f64,
    c_end: f64,
    s1: Option<f64>,
    delta_theta: Option<f64>,
    sigma: Option<f64>,
    elo100: Option<f64>,
    r_end: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
    #[serde(default)]
    integer: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    alpha: Option<f64>,
    gamma: Option<f64>,
    stability: Option<f64>,
    ck: Option<CkRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulatorSection {
    curvature: Option<f64>,
    curvatures: Option<Vec<f64>>,
    draw_rate: Option<f64>,
    initial_total_elo: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    repeats: Option<u32>,
    seed: Option<u64>,
    parallelism: Option<usize>,
    trajectories: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSection {
    command: Option<Vec<String>>,
    checkpoint_path: Option<PathBuf>,
    checkpoint_every: Option<u64>,
    timeout_secs: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// A fully resolved simulate invocation.
#[derive(Debug)]
pub struct ResolvedSimulate {
    pub experiment: ExperimentConfig,
    pub json_path: PathBuf,
    pub csv_path: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// A fully resolved tune invocation.
#[derive(Debug)]
pub struct ResolvedTune {
    pub session: SessionConfig,
    pub oracle_command: Option<Vec<String>>,
    pub checkpoint_path: Option<PathBuf>,
    pub timeout: Option<Duration>,
    pub warnings: Vec<String>,
}

fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    // toml reports unknown keys and type mismatches with line/column info.
    toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

struct ParamFields {
    name: String,
    start: f64,
    c_end: f64,
    s1: Option<f64>,
    delta_theta: Option<f64>,
    sigma: Option<f64>,
    elo100: Option<f64>,
    r_end: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
    integer: bool,
}

impl ConfigFile {
    fn param_fields(&self) -> Result<Vec<ParamFields>> {
        match (&self.param_template, self.params.is_empty()) {
            (Some(_), false) => Err(Error::config(
                "params and param_template are mutually exclusive",
            )),
            (None, true) => Err(Error::config("params (or param_template) is required")),
            (Some(t), true) => {
                if t.n_params < 1 {
                    return Err(Error::config("param_template.n_params: must be >= 1"));
                }
                Ok((0..t.n_params)
                    .map(|i| ParamFields {
                        name: format!("p{}", i + 1),
                        start: t.start,
                        c_end: t.c_end,
                        s1: t.s1,
                        delta_theta: t.delta_theta,
                        sigma: t.sigma,
                        elo100: t.elo100,
                        r_end: t.r_end,
                        min: t.min,
                        max: t.max,
                        integer: t.integer,
                    })
                    .collect())
            }
            (None, false) => {
                let mut seen = std::collections::HashSet::new();
                for (i, p) in self.params.iter().enumerate() {
                    if !seen.insert(p.name.clone()) {
                        return Err(Error::config(format!(
                            "params[{i}].name: duplicate name {:?}",
                            p.name
                        )));
                    }
                }
                Ok(self
                    .params
                    .iter()
                    .cloned()
                    .map(|p| ParamFields {
                        name: p.name,
                        start: p.start,
                        c_end: p.c_end,
                        s1: p.s1,
                        delta_theta: p.delta_theta,
                        sigma: p.sigma,
                        elo100: p.elo100,
                        r_end: p.r_end,
                        min: p.min,
                        max: p.max,
                        integer: p.integer,
                    })
                    .collect())
            }
        }
    }

    fn schedule(&self, n_iterations: u64, warnings: &mut Vec<String>) -> ScheduleParams {
        let defaults = ScheduleParams::recommended(n_iterations);
        let s = match &self.schedule {
            None => return defaults,
            Some(s) => s,
        };
        let params = ScheduleParams {
            alpha: s.alpha.unwrap_or(defaults.alpha),
            gamma: s.gamma.unwrap_or(defaults.gamma),
            stability: s.stability.unwrap_or(defaults.stability),
            ck_rule: s.ck.unwrap_or(defaults.ck_rule),
        };
        if params.ck_rule == CkRule::PowerLaw && params.alpha <= params.gamma {
            warnings.push(format!(
                "schedule: alpha ({}) <= gamma ({}) is outside the recommended regime",
                params.alpha, params.gamma
            ));
        }
        params
    }

    /// The tuners' outcome noise. An explicit tau wins over draw_rate.
    fn tau(&self, warnings: &mut Vec<String>) -> Result<f64> {
        let derived = self
            .draw_rate
            .or(self.simulator.as_ref().and_then(|s| s.draw_rate));
        match (self.tau, derived) {
            (Some(tau), Some(_)) => {
                warnings.push("both tau and draw_rate given: tau wins".to_string());
                Ok(tau)
            }
            (Some(tau), None) => Ok(tau),
            (None, Some(d)) => {
                tau_from_draw_rate(d).map_err(|e| Error::config(format!("draw_rate: {e}")))
            }
            (None, None) => Err(Error::config("either tau or draw_rate is required")),
        }
    }
}

/// Resolve one parameter. `landscape` carries the per-parameter curvature
/// and the total initial distance in simulate mode; tune mode has neither,
/// so everything the method needs must be given explicitly.
fn resolve_param(
    method: Method,
    f: &ParamFields,
    index: usize,
    n_iterations: u64,
    landscape: Option<(f64, f64, usize)>,
    warnings: &mut Vec<String>,
) -> Result<ParamSpec> {
    let ctx = || format!("params[{index}] ({})", f.name);
    if f.c_end <= 0.0 || !f.c_end.is_finite() {
        return Err(Error::config(format!("{}: c_end must be > 0", ctx())));
    }

    let elo100 = f
        .elo100
        .or_else(|| landscape.map(|(curvature, _, _)| (100.0 / curvature).sqrt()));
    let delta_theta = f
        .delta_theta
        .or_else(|| landscape.map(|(curvature, total, n)| (total / n as f64 / curvature).sqrt()));

    let sigma = match (f.sigma, elo100) {
        (Some(s), _) => Some(s),
        (None, Some(e)) => {
            let h = HyperInputs::new(e, n_iterations, f.c_end, delta_theta.unwrap_or(1.0))
                .map_err(|e| Error::config(format!("{}: {e}", ctx())))?;
            Some(bspsa_hyperparams(&h).1)
        }
        (None, None) => None,
    };
    let s1 = match (f.s1, delta_theta) {
        (Some(s), _) => Some(s),
        (None, Some(d)) => Some(d),
        (None, None) => None,
    };
    let r_end = match (f.r_end, elo100) {
        (Some(r), _) => Some(r),
        (None, Some(e)) => {
            let h = HyperInputs::new(e, n_iterations, f.c_end, delta_theta.unwrap_or(1.0))
                .map_err(|e| Error::config(format!("{}: {e}", ctx())))?;
            Some(spsa_r(&h))
        }
        (None, None) => None,
    };

    match method {
        Method::Spsa if r_end.is_none() => {
            return Err(Error::config(format!(
                "{}: spsa needs r_end or elo100 to derive it",
                ctx()
            )));
        }
        Method::Bspsas | Method::Bspsa => {
            if s1.is_none() {
                return Err(Error::config(format!(
                    "{}: {method} needs s1 or delta_theta",
                    ctx()
                )));
            }
            if sigma.is_none() {
                return Err(Error::config(format!(
                    "{}: {method} needs sigma or elo100",
                    ctx()
                )));
            }
        }
        _ => {}
    }
    if f.integer && landscape.is_some() && f.c_end < 0.5 {
        warnings.push(format!(
            "{}: c_end {} rounds to zero perturbation for an integer parameter",
            ctx(),
            f.c_end
        ));
    }

    let spec = ParamSpec {
        name: f.name.clone(),
        theta_start: f.start,
        c_end: f.c_end,
        s1,
        sigma,
        r_end,
        lower: f.min,
        upper: f.max,
        integer_valued: f.integer,
    };
    spec.validate()
        .map_err(|e| Error::config(format!("{}: {e}", ctx())))?;
    Ok(spec)
}

pub fn resolve_simulate(path: &Path) -> Result<ResolvedSimulate> {
    let file = load(path)?;
    let mut warnings = Vec::new();

    if file.iterations < 1 {
        return Err(Error::config("iterations: must be >= 1"));
    }
    let fields = file.param_fields()?;
    let n = fields.len();

    let sim = file.simulator.as_ref();
    let curvatures = match (
        sim.and_then(|s| s.curvatures.clone()),
        sim.and_then(|s| s.curvature),
    ) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "simulator: curvature and curvatures are mutually exclusive",
            ));
        }
        (Some(list), None) => {
            if list.len() != n {
                return Err(Error::config(format!(
                    "simulator.curvatures: {} entries for {n} parameters",
                    list.len()
                )));
            }
            list
        }
        (None, Some(a)) => vec![a; n],
        (None, None) => vec![0.01; n],
    };
    let total_elo = sim.and_then(|s| s.initial_total_elo).unwrap_or(2.0);
    if total_elo <= 0.0 || !total_elo.is_finite() {
        return Err(Error::config("simulator.initial_total_elo: must be > 0"));
    }

    let tau = file.tau(&mut warnings)?;
    let sim_draw_rate = match sim.and_then(|s| s.draw_rate).or(file.draw_rate) {
        Some(d) => d,
        // Invert tau = sqrt(2(1-d)).
        None => {
            let d = 1.0 - tau * tau / 2.0;
            if !(0.0..1.0).contains(&d) {
                return Err(Error::config(format!(
                    "tau {tau} implies a draw rate of {d}; give draw_rate explicitly"
                )));
            }
            d
        }
    };

    let schedule = file.schedule(file.iterations, &mut warnings);
    let specs = fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            resolve_param(
                file.method,
                f,
                i,
                file.iterations,
                Some((curvatures[i], total_elo, n)),
                &mut warnings,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let exp = file.experiment.as_ref();
    let experiment = ExperimentConfig {
        method: file.method,
        n_iterations: file.iterations,
        repeats: exp.and_then(|e| e.repeats).unwrap_or(1),
        seed: exp.and_then(|e| e.seed).unwrap_or(0),
        initial_total_elo: total_elo,
        tau,
        landscape: QuadraticLandscape::new(curvatures, sim_draw_rate)
            .map_err(|e| Error::config(format!("simulator: {e}")))?,
        specs,
        schedule,
        parallelism: exp.and_then(|e| e.parallelism).unwrap_or(0),
        record_trajectories: exp.and_then(|e| e.trajectories).unwrap_or(false),
    };
    experiment.validate()?;

    if file.oracle.is_some() {
        warnings.push("oracle section is ignored in simulate mode".to_string());
    }

    let out = file.output.as_ref();
    Ok(ResolvedSimulate {
        experiment,
        json_path: out
            .and_then(|o| o.json.clone())
            .unwrap_or_else(|| PathBuf::from("report.json")),
        csv_path: out.and_then(|o| o.csv.clone()),
        warnings,
    })
}

pub fn resolve_tune(path: &Path) -> Result<ResolvedTune> {
    let file = load(path)?;
    let mut warnings = Vec::new();

    if file.iterations < 1 {
        return Err(Error::config("iterations: must be >= 1"));
    }
    if file.simulator.is_some() {
        warnings.push("simulator section is ignored in tune mode".to_string());
    }
    let tau = file.tau(&mut warnings)?;
    let schedule = file.schedule(file.iterations, &mut warnings);
    let fields = file.param_fields()?;
    let specs = fields
        .iter()
        .enumerate()
        .map(|(i, f)| resolve_param(file.method, f, i, file.iterations, None, &mut warnings))
        .collect::<Result<Vec<_>>>()?;

    let oracle = file.oracle.as_ref();
    let session = SessionConfig {
        method: file.method,
        n_iterations: file.iterations,
        tau,
        seed: file.experiment.as_ref().and_then(|e| e.seed).unwrap_or(0),
        specs,
        schedule,
        checkpoint_every: oracle.and_then(|o| o.checkpoint_every).unwrap_or(100),
    };
    session.validate()?;

    let timeout = match oracle.and_then(|o| o.timeout_secs) {
        Some(secs) if secs > 0.0 => Some(Duration::from_secs_f64(secs)),
        Some(_) | None => None,
    };

    Ok(ResolvedTune {
        session,
        oracle_command: oracle.and_then(|o| o.command.clone()),
        checkpoint_path: oracle.and_then(|o| o.checkpoint_path.clone()),
        timeout,
        warnings,
    })
}
