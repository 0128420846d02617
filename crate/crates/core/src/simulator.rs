//! Ground-truth match source: a quadratic Elo landscape with its optimum
//! at the origin, and a stochastic two-game outcome model with a constant
//! draw rate.
//!
//! Each parameter contributes `a_i * theta_i^2` Elo of loss. A match
//! between two parameter vectors converts their loss difference into an
//! expected score through the usual logistic Elo curve and samples two
//! independent games. At the default calibration (82% draws) the two-game
//! outcome of equal engines has standard deviation 0.6, which is where the
//! tuners' `tau` comes from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elo::{wp_from_elo, EloDiff};
use crate::error::{Error, Result};
use crate::optimizers::{MatchOutcome, PerturbationDraw};

/// Per-parameter curvatures (Elo per squared parameter unit) and the
/// single-game draw probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadraticLandscape {
    curvatures: Vec<f64>,
    draw_rate: f64,
}

/// Win/draw/loss probabilities for a single game, from the first engine's
/// perspective. `clamped` flags that the raw split left [0,1] and had to be
/// renormalized (only happens at extreme rating gaps combined with a high
/// draw rate).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameProbabilities {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
    pub clamped: bool,
}

/// Split a single game at rating gap `x` into win/draw/loss: the draw
/// probability is the constant `d`, and the remaining mass is placed so
/// the expected score stays `WP(x)`.
pub fn game_probabilities(x: EloDiff, d: f64) -> Result<GameProbabilities> {
    if !(0.0..1.0).contains(&d) {
        return Err(Error::invalid(format!(
            "draw rate must be in [0,1), got {d}"
        )));
    }
    let wp = wp_from_elo(x)?;
    let raw_win = wp - d / 2.0;
    let raw_loss = 1.0 - wp - d / 2.0;
    let clamped = raw_win < 0.0 || raw_loss < 0.0;
    if !clamped {
        return Ok(GameProbabilities {
            win: raw_win,
            draw: d,
            loss: raw_loss,
            clamped,
        });
    }
    let win = raw_win.clamp(0.0, 1.0);
    let loss = raw_loss.clamp(0.0, 1.0);
    let total = win + d + loss;
    Ok(GameProbabilities {
        win: win / total,
        draw: d / total,
        loss: loss / total,
        clamped,
    })
}

impl QuadraticLandscape {
    pub fn new(curvatures: Vec<f64>, draw_rate: f64) -> Result<Self> {
        if curvatures.is_empty() {
            return Err(Error::invalid("at least one curvature is required"));
        }
        for (i, &a) in curvatures.iter().enumerate() {
            if a <= 0.0 || !a.is_finite() {
                return Err(Error::invalid(format!(
                    "curvature[{i}] must be > 0, got {a}"
                )));
            }
        }
        if !(0.0..1.0).contains(&draw_rate) {
            return Err(Error::invalid(format!(
                "draw rate must be in [0,1), got {draw_rate}"
            )));
        }
        Ok(Self {
            curvatures,
            draw_rate,
        })
    }

    /// Uniform curvature for every parameter.
    pub fn uniform(n: usize, curvature: f64, draw_rate: f64) -> Result<Self> {
        Self::new(vec![curvature; n], draw_rate)
    }

    pub fn dim(&self) -> usize {
        self.curvatures.len()
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    pub fn draw_rate(&self) -> f64 {
        self.draw_rate
    }

    /// Elo deficit of `theta` relative to the optimum at the origin:
    /// `sum_i a_i theta_i^2`.
    pub fn elo_loss(&self, theta: &[f64]) -> f64 {
        self.curvatures
            .iter()
            .zip(theta)
            .map(|(a, t)| a * t * t)
            .sum()
    }

    /// Play a two-game match between the engines at `theta_plus` and
    /// `theta_minus`; the outcome is from `theta_plus`'s perspective.
    pub fn play_match(
        &self,
        theta_plus: &[f64],
        theta_minus: &[f64],
        rng: &mut impl Rng,
    ) -> Result<MatchOutcome> {
        if theta_plus.len() != self.dim() || theta_minus.len() != self.dim() {
            return Err(Error::invalid(
                "parameter vector length does not match landscape",
            ));
        }
        // The plus engine's Elo advantage.
        let x = EloDiff(self.elo_loss(theta_minus) - self.elo_loss(theta_plus));
        let probs = game_probabilities(x, self.draw_rate)?;
        let mut w = 0i32;
        for _ in 0..2 {
            let u: f64 = rng.gen();
            if u < probs.win {
                w += 1;
            } else if u >= probs.win + probs.draw {
                w -= 1;
            }
        }
        Ok(MatchOutcome::new(w).expect("two games sum to -2..=2"))
    }
}

/// Expected two-game outcome under the tuners' internal strength model,
/// for an engine pair perturbed from `theta_k` while the true optimum sits
/// at `theta`. Diagnostic only; no update uses it.
pub fn expected_w(
    theta: &[f64],
    theta_k: &[f64],
    c_k: &[f64],
    draw: &PerturbationDraw,
    sigmas: &[f64],
) -> Result<f64> {
    let n = theta.len();
    if theta_k.len() != n || c_k.len() != n || draw.delta.len() != n || sigmas.len() != n {
        return Err(Error::invalid("expected_w inputs must share one length"));
    }
    let mut exponent = 0.0;
    for i in 0..n {
        exponent += 2.0 * draw.sign(i) * c_k[i] * (theta[i] - theta_k[i]) / (sigmas[i] * sigmas[i]);
    }
    let wr = exponent.exp();
    Ok(2.0 * (wr - 1.0) / (wr + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{stream_rng, STREAM_GAMES};

    #[test]
    fn elo_loss_examples() {
        let l = QuadraticLandscape::uniform(1, 0.01, 0.82).unwrap();
        assert_eq!(l.elo_loss(&[0.0]), 0.0);
        assert_eq!(l.elo_loss(&[100.0]), 100.0);

        let l = QuadraticLandscape::uniform(2, 0.01, 0.82).unwrap();
        assert!((l.elo_loss(&[10.0, 10.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn game_probabilities_split_symmetrically_at_zero() {
        let p = game_probabilities(EloDiff(0.0), 0.82).unwrap();
        assert!((p.win - 0.09).abs() < 1e-12);
        assert_eq!(p.draw, 0.82);
        assert!((p.loss - 0.09).abs() < 1e-12);
        assert!(!p.clamped);

        let p = game_probabilities(EloDiff(0.0), 0.0).unwrap();
        assert_eq!((p.win, p.draw, p.loss), (0.5, 0.0, 0.5));
    }

    #[test]
    fn game_probabilities_clamp_and_renormalize() {
        let p = game_probabilities(EloDiff(-800.0), 0.9).unwrap();
        assert!(p.clamped);
        assert!(p.win >= 0.0 && p.loss >= 0.0);
        assert!((p.win + p.draw + p.loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn match_outcomes_stay_in_range() {
        let l = QuadraticLandscape::uniform(1, 0.01, 0.5).unwrap();
        let mut rng = stream_rng(5, STREAM_GAMES);
        for _ in 0..2000 {
            let w = l.play_match(&[30.0], &[-10.0], &mut rng).unwrap().value();
            assert!((-2..=2).contains(&w));
        }
    }

    #[test]
    fn mean_outcome_tracks_the_expected_score() {
        // E[w] at Elo gap x is 2*(2*WP(x) - 1) under the symmetric draw
        // split; Monte-Carlo check within four standard errors.
        let l = QuadraticLandscape::uniform(1, 0.01, 0.82).unwrap();
        let mut rng = stream_rng(7, STREAM_GAMES);
        for gap in [0.0f64, 10.0, 50.0] {
            // plus engine sits at the optimum, minus engine `gap` Elo below
            let minus = (gap / 0.01).sqrt();
            let samples = 1_000_000u32;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..samples {
                let w = l.play_match(&[0.0], &[minus], &mut rng).unwrap().as_f64();
                sum += w;
                sum_sq += w * w;
            }
            let mean = sum / f64::from(samples);
            let var = sum_sq / f64::from(samples) - mean * mean;
            let stderr = (var / f64::from(samples)).sqrt();
            let want = 2.0 * (2.0 * wp_from_elo(EloDiff(gap)).unwrap() - 1.0);
            assert!(
                (mean - want).abs() <= 4.0 * stderr,
                "gap {gap}: mean {mean} vs {want} (se {stderr})"
            );
        }
    }

    #[test]
    fn big_gap_without_draws_gives_double_wins() {
        // At +400 Elo and d=0, P(w=2) = (10/11)^2.
        let l = QuadraticLandscape::uniform(1, 0.01, 0.0).unwrap();
        let mut rng = stream_rng(6, STREAM_GAMES);
        let samples = 200_000;
        let mut double_wins = 0u32;
        for _ in 0..samples {
            if l.play_match(&[0.0], &[200.0], &mut rng).unwrap().value() == 2 {
                double_wins += 1;
            }
        }
        let freq = f64::from(double_wins) / f64::from(samples);
        let want = (10.0f64 / 11.0).powi(2);
        assert!((freq - want).abs() < 0.004, "freq={freq} want={want}");
    }

    #[test]
    fn expected_w_examples() {
        let draw = PerturbationDraw::new(vec![1]).unwrap();
        let w = expected_w(&[5.0], &[5.0], &[10.0], &draw, &[100.0]).unwrap();
        assert_eq!(w, 0.0);

        // exponent = 2*10*50/100^2 = 0.1
        let w = expected_w(&[50.0], &[0.0], &[10.0], &draw, &[100.0]).unwrap();
        assert!((w - 0.09991674991576).abs() < 1e-11, "w={w}");
    }

    #[test]
    fn expected_w_linearizes_for_small_exponents() {
        let draw = PerturbationDraw::new(vec![1, -1]).unwrap();
        let theta = [1.2, -0.7];
        let theta_k = [0.0, 0.0];
        let c = [4.0, 6.0];
        let sigmas = [100.0, 80.0];
        let exact = expected_w(&theta, &theta_k, &c, &draw, &sigmas).unwrap();
        let linear: f64 = (0..2)
            .map(|i| 2.0 * draw.sign(i) * c[i] * (theta[i] - theta_k[i]) / (sigmas[i] * sigmas[i]))
            .sum();
        assert!(linear.abs() <= 0.05);
        assert!((exact - linear).abs() <= 1e-3 * linear.abs());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn probabilities_sum_to_one(x in -1500.0f64..1500.0, d in 0.0f64..0.999) {
                let p = game_probabilities(EloDiff(x), d).unwrap();
                prop_assert!((p.win + p.draw + p.loss - 1.0).abs() < 1e-12);
                prop_assert!(p.win >= 0.0 && p.draw >= 0.0 && p.loss >= 0.0);
            }

            #[test]
            fn elo_loss_is_even(t0 in -100.0f64..100.0, t1 in -100.0f64..100.0) {
                let l = QuadraticLandscape::new(vec![0.01, 0.5], 0.82).unwrap();
                let a = l.elo_loss(&[t0, t1]);
                prop_assert_eq!(a, l.elo_loss(&[-t0, t1]));
                prop_assert_eq!(a, l.elo_loss(&[t0, -t1]));
                prop_assert_eq!(a, l.elo_loss(&[-t0, -t1]));
            }
        }
    }
}
