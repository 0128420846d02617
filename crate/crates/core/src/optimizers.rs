//! The three update rules: SPSA, BSPSAS and BSPSA.
//!
//! All three share one cycle: propose a pair of parameter vectors
//! `theta +/- delta * c_k`, have the pair play a two-game match, then fold
//! the outcome `w` back into the state. They differ only in what the state
//! is and how `w` moves it:
//!
//! * SPSA keeps nothing but `theta` and steps by `a_k / (delta c_k) * w`.
//! * BSPSAS keeps an independent normal belief per parameter (mean `theta`,
//!   spread `s`) and applies the conjugate posterior update with an
//!   independence approximation for the cross terms.
//! * BSPSA keeps a full Gaussian belief: a rank-1 precision update followed
//!   by one pivot-free Gauss-Jordan solve per match.
//!
//! The posterior after match `k` is the prior for match `k+1`, so a state
//! is owned by exactly one strictly sequential tuning loop.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::PrecisionMatrix;
use crate::schedules::{GainSchedule, ScheduleParams};

/// Which update rule a state is driven by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spsa,
    Bspsas,
    Bspsa,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spsa => "spsa",
            Method::Bspsas => "bspsas",
            Method::Bspsa => "bspsa",
        })
    }
}

/// Static description of one tunable parameter.
///
/// `s1` (prior spread) and `sigma` (strength scale) drive the Bayesian
/// methods; `r_end` drives SPSA. Each is optional here and checked for the
/// method actually in use when a tuner is built.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub theta_start: f64,
    pub c_end: f64,
    pub s1: Option<f64>,
    pub sigma: Option<f64>,
    pub r_end: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub integer_valued: bool,
}

impl ParamSpec {
    pub fn validate(&self) -> Result<()> {
        let ctx = &self.name;
        if !self.theta_start.is_finite() {
            return Err(Error::invalid(format!("{ctx}: theta_start must be finite")));
        }
        if self.c_end <= 0.0 || !self.c_end.is_finite() {
            return Err(Error::invalid(format!("{ctx}: c_end must be > 0")));
        }
        for (field, v) in [
            ("s1", self.s1),
            ("sigma", self.sigma),
            ("r_end", self.r_end),
        ] {
            if let Some(v) = v {
                if v <= 0.0 || !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "{ctx}: {field} must be > 0, got {v}"
                    )));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo >= hi || lo.is_nan() || hi.is_nan() {
                return Err(Error::invalid(format!(
                    "{ctx}: lower bound {lo} must be < upper bound {hi}"
                )));
            }
        }
        Ok(())
    }

    fn require(&self, method: Method) -> Result<()> {
        match method {
            Method::Spsa => {
                if self.r_end.is_none() {
                    return Err(Error::config(format!(
                        "{}: spsa needs r_end (or elo100 to derive it)",
                        self.name
                    )));
                }
            }
            Method::Bspsas | Method::Bspsa => {
                if self.s1.is_none() {
                    return Err(Error::config(format!(
                        "{}: {method} needs s1 (or delta_theta)",
                        self.name
                    )));
                }
                if self.sigma.is_none() {
                    return Err(Error::config(format!(
                        "{}: {method} needs sigma (or elo100)",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One vector of simultaneous-perturbation signs, each exactly +1 or -1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationDraw {
    pub delta: Vec<i8>,
}

impl PerturbationDraw {
    pub fn new(delta: Vec<i8>) -> Result<Self> {
        if delta.iter().any(|&d| d != 1 && d != -1) {
            return Err(Error::invalid("perturbation signs must be +1 or -1"));
        }
        Ok(Self { delta })
    }

    pub fn sample(n: usize, rng: &mut impl Rng) -> Self {
        let delta = (0..n)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        Self { delta }
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.delta[i])
    }
}

/// Result of a two-game match from the first engine's perspective:
/// one point per win, minus one per loss, summed over the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct MatchOutcome(i8);

impl MatchOutcome {
    pub fn new(w: i32) -> Result<Self> {
        if !(-2..=2).contains(&w) {
            return Err(Error::invalid(format!(
                "match outcome must be in -2..=2, got {w}"
            )));
        }
        Ok(Self(w as i8))
    }

    pub fn value(self) -> i32 {
        i32::from(self.0)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<i32> for MatchOutcome {
    type Error = Error;
    fn try_from(w: i32) -> Result<Self> {
        Self::new(w)
    }
}

impl From<MatchOutcome> for i32 {
    fn from(w: MatchOutcome) -> i32 {
        w.value()
    }
}

/// Mutable per-iteration state of a tuning run.
///
/// `k` is the 1-based index of the next match to be played; it advances by
/// exactly one per observed outcome. `spreads` holds the per-parameter
/// posterior spreads for BSPSAS (empty otherwise); `precision` holds the
/// full posterior precision for BSPSA.
#[derive(Clone, Debug)]
pub struct TunerState {
    pub method: Method,
    pub k: u64,
    pub theta: Vec<f64>,
    pub spreads: Vec<f64>,
    pub precision: Option<PrecisionMatrix>,
    pub tau: f64,
}

impl TunerState {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// A proposed two-game match: the two parameter vectors and the draw that
/// produced them. The vectors here are the raw `theta +/- delta c_k`;
/// rounding and clamping for emission happen in [`Proposal::emitted`].
#[derive(Clone, Debug)]
pub struct Proposal {
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    pub draw: PerturbationDraw,
    pub k: u64,
}

impl Proposal {
    /// The vectors actually handed to the match source: integer-valued
    /// parameters are rounded to the nearest integer, then both sides are
    /// clamped into their bounds.
    pub fn emitted(&self, specs: &[ParamSpec]) -> (Vec<f64>, Vec<f64>) {
        let adjust = |v: f64, spec: &ParamSpec| {
            let mut v = if spec.integer_valued { v.round() } else { v };
            if let Some(lo) = spec.lower {
                v = v.max(lo);
            }
            if let Some(hi) = spec.upper {
                v = v.min(hi);
            }
            v
        };
        let plus = self
            .theta_plus
            .iter()
            .zip(specs)
            .map(|(&v, s)| adjust(v, s))
            .collect();
        let minus = self
            .theta_minus
            .iter()
            .zip(specs)
            .map(|(&v, s)| adjust(v, s))
            .collect();
        (plus, minus)
    }
}

/// Deterministic half of [`propose`]: build the perturbed pair for a given
/// draw at the state's current iteration.
pub fn proposal_for_draw(
    state: &TunerState,
    schedules: &[GainSchedule],
    draw: PerturbationDraw,
) -> Result<Proposal> {
    let n = state.dim();
    if draw.delta.len() != n || schedules.len() != n {
        return Err(Error::invalid(
            "draw/schedule length does not match state dimension",
        ));
    }
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for i in 0..n {
        let c = schedules[i].c_k(state.k)?;
        let step = draw.sign(i) * c;
        plus.push(state.theta[i] + step);
        minus.push(state.theta[i] - step);
    }
    Ok(Proposal {
        theta_plus: plus,
        theta_minus: minus,
        draw,
        k: state.k,
    })
}

/// Draw fair +/-1 signs for every parameter and build the perturbed pair
/// `theta +/- delta c_k` for the current iteration.
pub fn propose(
    state: &TunerState,
    schedules: &[GainSchedule],
    rng: &mut impl Rng,
) -> Result<Proposal> {
    let draw = PerturbationDraw::sample(state.dim(), rng);
    proposal_for_draw(state, schedules, draw)
}

/// Classic SPSA step: `theta_i += a_k / (delta_i c_k) * w`.
pub fn spsa_update(
    state: &mut TunerState,
    draw: &PerturbationDraw,
    w: MatchOutcome,
    schedules: &[GainSchedule],
) -> Result<()> {
    debug_assert_eq!(state.method, Method::Spsa);
    let n = state.dim();
    if draw.delta.len() != n || schedules.len() != n {
        return Err(Error::invalid(
            "draw/schedule length does not match state dimension",
        ));
    }
    let wf = w.as_f64();
    for i in 0..n {
        let a = schedules[i].a_k(state.k)?;
        let c = schedules[i].c_k(state.k)?;
        state.theta[i] += draw.sign(i) * (a / c) * wf;
    }
    state.k += 1;
    Ok(())
}

/// Single-parameter conjugate posterior update, the reference form of the
/// Bayesian rule:
///
/// ```text
/// theta' = theta + 2 c s^2 sigma^2 / (4 c^2 s^2 + tau^2 sigma^4) * w
/// s'^2   = s^2 tau^2 sigma^4 / (4 c^2 s^2 + tau^2 sigma^4)
/// ```
///
/// Returns `(theta', s')`. In the limit `tau -> 0` the step becomes
/// `sigma^2 / (2c) * w`, the SPSA step with `sigma^2 / 2` in place of `a_k`.
pub fn bspsa1_update(theta: f64, s: f64, c: f64, sigma: f64, tau: f64, w: f64) -> (f64, f64) {
    let s2 = s * s;
    let sigma2 = sigma * sigma;
    let denom = 4.0 * c * c * s2 + tau * tau * sigma2 * sigma2;
    let theta_next = theta + (2.0 * c * s2 * sigma2 / denom) * w;
    let s2_next = s2 * tau * tau * sigma2 * sigma2 / denom;
    (theta_next, s2_next.sqrt())
}

/// BSPSAS step: the per-parameter posterior update plus the cross-term sum
/// over the *frozen* pre-update `theta`, under the independence
/// approximation. With one parameter this reduces exactly to
/// [`bspsa1_update`].
pub fn bspsas_update(
    state: &mut TunerState,
    draw: &PerturbationDraw,
    w: MatchOutcome,
    specs: &[ParamSpec],
    schedules: &[GainSchedule],
) -> Result<()> {
    debug_assert_eq!(state.method, Method::Bspsas);
    let n = state.dim();
    if draw.delta.len() != n || schedules.len() != n || specs.len() != n {
        return Err(Error::invalid(
            "draw/spec/schedule length does not match state dimension",
        ));
    }
    let tau2 = state.tau * state.tau;
    let wf = w.as_f64();

    let mut c_k = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    for i in 0..n {
        c_k.push(schedules[i].c_k(state.k)?);
        let sg = specs[i].sigma.ok_or_else(|| {
            Error::config(format!("{}: sigma is required for bspsas", specs[i].name))
        })?;
        sigma2.push(sg * sg);
    }

    // Cross-term sum over all parameters; each component subtracts its own
    // contribution below. Uses the pre-update theta throughout.
    let mut total = 0.0;
    for j in 0..n {
        total += draw.sign(j) * c_k[j] * state.theta[j] / sigma2[j];
    }

    for i in 0..n {
        let s2 = state.spreads[i] * state.spreads[i];
        let denom = 4.0 * c_k[i] * c_k[i] * s2 + tau2 * sigma2[i] * sigma2[i];
        let base = 2.0 * draw.sign(i) * c_k[i] * s2 * sigma2[i] / denom;
        let own = draw.sign(i) * c_k[i] * state.theta[i] / sigma2[i];
        state.theta[i] += base * ((total - own) + wf);
        state.spreads[i] = (s2 * tau2 * sigma2[i] * sigma2[i] / denom).sqrt();
    }
    state.k += 1;
    Ok(())
}

/// Full BSPSA step: rank-1 precision update with
/// `g_i = 2 delta_i c_k_i / sigma_i^2`, then solve
/// `S_{k+1}^{-1} b = (w / tau^2) g` and move `theta` by `b`.
///
/// The solve runs against the *post-update* precision matrix. A drawn pair
/// (`w = 0`) still sharpens the posterior even though `theta` stays put.
pub fn bspsa_update(
    state: &mut TunerState,
    draw: &PerturbationDraw,
    w: MatchOutcome,
    specs: &[ParamSpec],
    schedules: &[GainSchedule],
) -> Result<()> {
    debug_assert_eq!(state.method, Method::Bspsa);
    let n = state.dim();
    if draw.delta.len() != n || schedules.len() != n || specs.len() != n {
        return Err(Error::invalid(
            "draw/spec/schedule length does not match state dimension",
        ));
    }
    let tau2 = state.tau * state.tau;

    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let c = schedules[i].c_k(state.k)?;
        let sg = specs[i].sigma.ok_or_else(|| {
            Error::config(format!("{}: sigma is required for bspsa", specs[i].name))
        })?;
        g.push(2.0 * draw.sign(i) * c / (sg * sg));
    }

    let precision = state
        .precision
        .as_mut()
        .ok_or_else(|| Error::invalid("bspsa state is missing its precision matrix"))?;
    precision.rank1_update(&g, state.tau)?;

    let wf = w.as_f64();
    let rhs: Vec<f64> = g.iter().map(|gi| wf / tau2 * gi).collect();
    let step = precision.solve_gauss_jordan(&rhs)?;
    for i in 0..n {
        state.theta[i] += step[i];
    }
    state.k += 1;
    Ok(())
}

/// Clamp each component into its configured bounds; identity when a
/// parameter has none.
pub fn apply_constraints(theta: &mut [f64], specs: &[ParamSpec]) {
    for (v, spec) in theta.iter_mut().zip(specs) {
        if let Some(lo) = spec.lower {
            *v = v.max(lo);
        }
        if let Some(hi) = spec.upper {
            *v = v.min(hi);
        }
    }
}

/// One tuning run: state, specs and schedules plus the perturbation RNG,
/// driven through a strict propose -> observe cycle.
pub struct Tuner {
    state: TunerState,
    specs: Vec<ParamSpec>,
    schedules: Vec<GainSchedule>,
    rng: ChaCha8Rng,
}

impl Tuner {
    /// Build a fresh tuner at iteration 1. `theta0` overrides the specs'
    /// start values when given (the simulator harness uses this to place
    /// the run at a known distance from the optimum).
    pub fn new(
        method: Method,
        specs: Vec<ParamSpec>,
        schedule_params: ScheduleParams,
        n_iterations: u64,
        tau: f64,
        theta0: Option<Vec<f64>>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::config("at least one parameter is required"));
        }
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::config(format!("tau must be > 0, got {tau}")));
        }
        for spec in &specs {
            spec.validate()?;
            spec.require(method)?;
        }
        let theta = match theta0 {
            Some(t) => {
                if t.len() != specs.len() {
                    return Err(Error::config(
                        "theta0 length does not match parameter count",
                    ));
                }
                t
            }
            None => specs.iter().map(|s| s.theta_start).collect(),
        };
        let spreads: Vec<f64> = match method {
            Method::Bspsas => specs.iter().map(|s| s.s1.unwrap()).collect(),
            _ => Vec::new(),
        };
        let precision = match method {
            Method::Bspsa => {
                let s1: Vec<f64> = specs.iter().map(|s| s.s1.unwrap()).collect();
                Some(PrecisionMatrix::from_spreads(&s1)?)
            }
            _ => None,
        };
        let schedules = build_schedules(&specs, schedule_params, n_iterations)?;
        Ok(Self {
            state: TunerState {
                method,
                k: 1,
                theta,
                spreads,
                precision,
                tau,
            },
            specs,
            schedules,
            rng,
        })
    }

    /// Rebuild a tuner from a restored state (checkpoint resume). The RNG
    /// must already be positioned where the interrupted run left it.
    pub fn from_state(
        state: TunerState,
        specs: Vec<ParamSpec>,
        schedule_params: ScheduleParams,
        n_iterations: u64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if specs.len() != state.dim() {
            return Err(Error::config(
                "spec count does not match restored state dimension",
            ));
        }
        for spec in &specs {
            spec.validate()?;
            spec.require(state.method)?;
        }
        let schedules = build_schedules(&specs, schedule_params, n_iterations)?;
        Ok(Self {
            state,
            specs,
            schedules,
            rng,
        })
    }

    pub fn state(&self) -> &TunerState {
        &self.state
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn schedules(&self) -> &[GainSchedule] {
        &self.schedules
    }

    /// Position of the perturbation stream, for checkpointing.
    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn propose(&mut self) -> Result<Proposal> {
        propose(&self.state, &self.schedules, &mut self.rng)
    }

    /// Fold one match outcome into the state and clamp the new `theta`
    /// into bounds.
    pub fn observe(&mut self, draw: &PerturbationDraw, w: MatchOutcome) -> Result<()> {
        match self.state.method {
            Method::Spsa => spsa_update(&mut self.state, draw, w, &self.schedules)?,
            Method::Bspsas => {
                bspsas_update(&mut self.state, draw, w, &self.specs, &self.schedules)?
            }
            Method::Bspsa => bspsa_update(&mut self.state, draw, w, &self.specs, &self.schedules)?,
        }
        apply_constraints(&mut self.state.theta, &self.specs);
        Ok(())
    }
}

pub fn build_schedules(
    specs: &[ParamSpec],
    params: ScheduleParams,
    n_iterations: u64,
) -> Result<Vec<GainSchedule>> {
    specs
        .iter()
        .map(|s| GainSchedule::new(s.c_end, s.r_end, params, n_iterations))
        .collect()
}
