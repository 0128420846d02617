//! Gain sequences `c_k` (perturbation size) and `a_k` (SPSA step size).
//!
//! Both are parameterized from their *final* values: the user supplies
//! `c_end = c_N` and, for SPSA, `R = a_N / c_N^2`. The conventional
//! forms `c_k = c / k^gamma` and `a_k = a / (A + k)^alpha` are recovered
//! by solving for `c` and `a` at `k = N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `c_k` evolves over the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CkRule {
    /// `c_k = c_end * N^gamma / k^gamma` (the usual decaying schedule).
    PowerLaw,
    /// `c_k = c_end` for every k. Keeps the posterior spreads shrinking
    /// toward zero at a constant rate.
    Constant,
}

/// Schedule-shape settings shared by every parameter of a run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub alpha: f64,
    pub gamma: f64,
    /// Stability constant A. Conventionally 0.1 * N.
    pub stability: f64,
    pub ck_rule: CkRule,
}

impl ScheduleParams {
    /// Recommended shape: alpha = 0.602, gamma = 0.101, A = 0.1 * N
    /// (rounded to the nearest integer, stored as a real).
    pub fn recommended(n_iterations: u64) -> Self {
        Self {
            alpha: 0.602,
            gamma: 0.101,
            stability: (0.1 * n_iterations as f64).round(),
            ck_rule: CkRule::PowerLaw,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::invalid(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::invalid(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !self.stability.is_finite() || self.stability < 0.0 {
            return Err(Error::invalid(format!(
                "stability constant must be >= 0, got {}",
                self.stability
            )));
        }
        Ok(())
    }
}

/// One parameter's fully resolved gain schedule.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GainSchedule {
    pub c_end: f64,
    /// `R = a_N / c_N^2`. Only SPSA consumes it.
    pub r_end: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub stability: f64,
    pub n_iterations: u64,
    pub ck_rule: CkRule,
}

impl GainSchedule {
    pub fn new(
        c_end: f64,
        r_end: Option<f64>,
        params: ScheduleParams,
        n_iterations: u64,
    ) -> Result<Self> {
        params.validate()?;
        if c_end <= 0.0 || !c_end.is_finite() {
            return Err(Error::invalid(format!("c_end must be > 0, got {c_end}")));
        }
        if let Some(r) = r_end {
            if r <= 0.0 || !r.is_finite() {
                return Err(Error::invalid(format!("r_end must be > 0, got {r}")));
            }
        }
        if n_iterations < 1 {
            return Err(Error::invalid("n_iterations must be >= 1"));
        }
        let s = Self {
            c_end,
            r_end,
            alpha: params.alpha,
            gamma: params.gamma,
            stability: params.stability,
            n_iterations,
            ck_rule: params.ck_rule,
        };
        if !s.c_scale().is_finite() {
            return Err(Error::invalid("derived c = c_end * N^gamma is not finite"));
        }
        Ok(s)
    }

    fn check_k(&self, k: u64) -> Result<()> {
        if k < 1 || k > self.n_iterations {
            return Err(Error::invalid(format!(
                "iteration k={k} outside [1, {}]",
                self.n_iterations
            )));
        }
        Ok(())
    }

    /// `c` such that `c / N^gamma = c_end`.
    fn c_scale(&self) -> f64 {
        self.c_end * (self.n_iterations as f64).powf(self.gamma)
    }

    /// Perturbation magnitude at iteration `k` (1-based). Non-increasing in
    /// `k`, with `c_k(N) = c_end` exactly.
    pub fn c_k(&self, k: u64) -> Result<f64> {
        self.check_k(k)?;
        Ok(match self.ck_rule {
            CkRule::Constant => self.c_end,
            CkRule::PowerLaw => {
                if k == self.n_iterations {
                    self.c_end
                } else {
                    self.c_scale() / (k as f64).powf(self.gamma)
                }
            }
        })
    }

    /// SPSA step size at iteration `k`: `a / (A + k)^alpha` with `a` chosen
    /// so that `a_N / c_N^2 = R` exactly.
    pub fn a_k(&self, k: u64) -> Result<f64> {
        self.check_k(k)?;
        let r = self
            .r_end
            .ok_or_else(|| Error::invalid("a_k requires r_end, which is only set for SPSA runs"))?;
        let a_n = r * self.c_end * self.c_end;
        if k == self.n_iterations {
            return Ok(a_n);
        }
        let a = a_n * (self.stability + self.n_iterations as f64).powf(self.alpha);
        Ok(a / (self.stability + k as f64).powf(self.alpha))
    }
}
