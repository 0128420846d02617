//! Tuning toolkit for parameters whose quality can only be observed
//! through noisy pairwise comparisons — two-game matches between two
//! perturbed parameter sets.
//!
//! Three update rules share one propose/observe cycle:
//!
//! * **SPSA** — simultaneous perturbation stochastic approximation with
//!   the usual decaying gain sequences.
//! * **BSPSAS** — a Bayesian per-parameter posterior update (normal
//!   conjugate) with an independence approximation across parameters.
//! * **BSPSA** — the full-covariance variant: rank-1 precision updates
//!   and one small pivot-free solve per match.
//!
//! The crate also ships a calibrated quadratic match simulator with an
//! experiment harness ([`harness`]), and a subprocess protocol plus
//! resumable checkpoints for tuning against real match runners
//! ([`oracle`]).

// Flat row-major indexing reads better than iterator chains in the small
// dense kernels here.
#![allow(clippy::needless_range_loop)]

pub mod elo;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizers;
pub mod oracle;
pub mod schedules;
pub mod seeds;
pub mod simulator;

pub use elo::{bspsa_hyperparams, spsa_r, tau_from_draw_rate, wp_from_elo, EloDiff, HyperInputs};
pub use error::{Error, Result};
pub use harness::{
    benchmark_config, initial_offsets, run_experiment, run_single, ExperimentConfig,
    ExperimentReport, RunResult,
};
pub use linalg::PrecisionMatrix;
pub use optimizers::{
    apply_constraints, bspsa1_update, bspsa_update, bspsas_update, propose, spsa_update,
    MatchOutcome, Method, ParamSpec, PerturbationDraw, Proposal, Tuner, TunerState,
};
pub use oracle::{
    decode_response, encode_request, run_tuning_session, run_tuning_session_with, Checkpoint,
    CheckpointStore, MatchOracle, OracleRequest, OracleResponse, SessionConfig, SubprocessOracle,
};
pub use schedules::{CkRule, GainSchedule, ScheduleParams};
pub use simulator::{expected_w, game_probabilities, QuadraticLandscape};
