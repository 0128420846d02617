//! Elo/score conversions and the closed-form hyperparameter formulas.
//!
//! Both tuner families are configured from the same two measurable
//! quantities: `elo100` (how far, in parameter units, a parameter must move
//! to cost 100 Elo) and the estimated distance from the optimum. This module
//! turns those into the raw tuner inputs (`R` for SPSA, `s1`/`sigma` for the
//! Bayesian updates).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rating difference in Elo points. May be negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloDiff(pub f64);

/// Inputs to the hyperparameter formulas, per parameter.
///
/// `elo100` is the parameter-space distance that costs 100 Elo points;
/// `delta_theta` is the estimated distance of the start value from the
/// optimum. Both are scalars because parameters may live on different
/// scales.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HyperInputs {
    pub elo100: f64,
    pub n_iterations: u64,
    pub c_end: f64,
    pub delta_theta: f64,
}

impl HyperInputs {
    pub fn new(elo100: f64, n_iterations: u64, c_end: f64, delta_theta: f64) -> Result<Self> {
        if elo100 <= 0.0 || !elo100.is_finite() {
            return Err(Error::invalid(format!("elo100 must be > 0, got {elo100}")));
        }
        if n_iterations < 1 {
            return Err(Error::invalid("n_iterations must be >= 1"));
        }
        if c_end <= 0.0 || !c_end.is_finite() {
            return Err(Error::invalid(format!("c_end must be > 0, got {c_end}")));
        }
        if delta_theta <= 0.0 || !delta_theta.is_finite() {
            return Err(Error::invalid(format!(
                "delta_theta must be > 0, got {delta_theta}"
            )));
        }
        Ok(Self {
            elo100,
            n_iterations,
            c_end,
            delta_theta,
        })
    }
}

/// Expected score of the stronger side at a rating gap of `x` Elo points:
/// `1 / (1 + 10^(-x/400))`.
pub fn wp_from_elo(x: EloDiff) -> Result<f64> {
    if !x.0.is_finite() {
        return Err(Error::invalid(format!(
            "elo difference must be finite, got {}",
            x.0
        )));
    }
    Ok(1.0 / (1.0 + 10f64.powf(-x.0 / 400.0)))
}

/// Standard deviation of the two-game outcome `w` for equally strong
/// engines at draw rate `d`: each game is +1/0/-1 with win and loss
/// probability `(1-d)/2` each, so `Var(w) = 2(1-d)`.
pub fn tau_from_draw_rate(d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::invalid(format!(
            "draw rate must be in [0,1], got {d}"
        )));
    }
    Ok((2.0 * (1.0 - d)).sqrt())
}

/// The SPSA gain ratio `R = a_N / c_N^2` that works well on quadratic
/// landscapes: `19362 * ln(1 + elo100/11405) / (N^0.6 * c_N^1.6)`.
pub fn spsa_r(h: &HyperInputs) -> f64 {
    let num = 19362.0 * (1.0 + h.elo100 / 11405.0).ln();
    num / ((h.n_iterations as f64).powf(0.6) * h.c_end.powf(1.6))
}

/// Prior spread and strength scale for the Bayesian tuners:
/// `s1 = delta_theta`, `sigma = elo100`.
pub fn bspsa_hyperparams(h: &HyperInputs) -> (f64, f64) {
    (h.delta_theta, h.elo100)
}
