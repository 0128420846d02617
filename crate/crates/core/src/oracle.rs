//! External match source: drive a user-supplied subprocess that plays the
//! two-game matches, with resumable persisted tuning state.
//!
//! The wire protocol is newline-delimited JSON over the subprocess's
//! standard input/output, UTF-8, one object per line. Requests carry
//! `{"id", "theta_plus", "theta_minus"}`; the oracle answers
//! `{"id", "result"}` with the matching id and a result in -2..=2. Exactly
//! one request is outstanding at any time: the posterior after match k is
//! the prior for match k+1, so the loop is strictly sequential.
//!
//! Checkpoints are single JSON documents written atomically
//! (temp file + rename); real tuning runs take days, so an interrupted
//! session must resume exactly where it stopped.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::linalg::PrecisionMatrix;
use crate::optimizers::{MatchOutcome, Method, ParamSpec, Tuner, TunerState};
use crate::schedules::ScheduleParams;
use crate::seeds::{stream_rng, STREAM_PERTURBATION};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Resolved configuration of an oracle-driven tuning session.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionConfig {
    pub method: Method,
    pub n_iterations: u64,
    pub tau: f64,
    pub seed: u64,
    pub specs: Vec<ParamSpec>,
    pub schedule: ScheduleParams,
    /// Write a checkpoint every this many completed matches.
    pub checkpoint_every: u64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations < 1 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if self.checkpoint_every < 1 {
            return Err(Error::config("checkpoint_every must be >= 1"));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::config(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.specs.is_empty() {
            return Err(Error::config("at least one parameter is required"));
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        Ok(())
    }

    /// Hash tying a checkpoint to the config that produced it. Resuming
    /// under a different config is refused.
    pub fn fingerprint(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}

/// One match request: the iteration id and both parameter assignments.
/// Integer-valued parameters are emitted as JSON integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleRequest {
    pub id: u64,
    pub theta_plus: BTreeMap<String, serde_json::Value>,
    pub theta_minus: BTreeMap<String, serde_json::Value>,
}

impl OracleRequest {
    pub fn new(id: u64, specs: &[ParamSpec], plus: &[f64], minus: &[f64]) -> Self {
        let encode = |values: &[f64]| {
            specs
                .iter()
                .zip(values)
                .map(|(spec, &v)| {
                    let value = if spec.integer_valued {
                        serde_json::Value::from(v as i64)
                    } else {
                        serde_json::Value::from(v)
                    };
                    (spec.name.clone(), value)
                })
                .collect()
        };
        Self {
            id,
            theta_plus: encode(plus),
            theta_minus: encode(minus),
        }
    }
}

/// The oracle's answer to one request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleResponse {
    pub id: u64,
    pub result: i32,
}

/// One request as a single JSON line (without the trailing newline).
pub fn encode_request(request: &OracleRequest) -> Result<String> {
    Ok(serde_json::to_string(request)?)
}

/// Parse and validate one response line.
pub fn decode_response(line: &str) -> Result<OracleResponse> {
    let response: OracleResponse = serde_json::from_str(line)
        .map_err(|e| Error::protocol(format!("malformed response line {line:?}: {e}")))?;
    if !(-2..=2).contains(&response.result) {
        return Err(Error::protocol(format!(
            "result {} out of range -2..=2 in line {line:?}",
            response.result
        )));
    }
    Ok(response)
}

/// Anything that can answer match requests. Production code talks to a
/// subprocess; tests plug in deterministic mocks.
pub trait MatchOracle {
    fn play(&mut self, request: &OracleRequest) -> Result<OracleResponse>;
}

/// A spawned oracle subprocess speaking the NDJSON protocol. A reader
/// thread owns the child's stdout so that responses can be awaited with an
/// optional watchdog timeout.
pub struct SubprocessOracle {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<Option<Vec<u8>>>>,
    timeout: Option<Duration>,
}

impl SubprocessOracle {
    pub fn spawn(command: &[String], timeout: Option<Duration>) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::config("oracle command is empty"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::OracleFailure(format!("cannot spawn {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");

        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = Vec::new();
                let sent = match read_until_newline(&mut reader, &mut line) {
                    Ok(0) => tx.send(Ok(None)),
                    Ok(_) => tx.send(Ok(Some(line))),
                    Err(e) => tx.send(Err(e)),
                };
                if sent.is_err() {
                    break;
                }
            }
        });

        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }

    fn next_line(&mut self) -> Result<Vec<u8>> {
        let received = match self.timeout {
            Some(t) => self
                .lines
                .recv_timeout(t)
                .map_err(|_| Error::OracleFailure(format!("no response within {t:?}")))?,
            None => self
                .lines
                .recv()
                .map_err(|_| Error::OracleFailure("oracle output stream closed".into()))?,
        };
        match received {
            Ok(Some(line)) => Ok(line),
            Ok(None) => Err(Error::OracleFailure(
                "oracle closed its output stream (EOF)".into(),
            )),
            Err(e) => Err(Error::OracleFailure(format!("reading oracle output: {e}"))),
        }
    }
}

fn read_until_newline<R: Read>(
    reader: &mut BufReader<R>,
    buf: &mut Vec<u8>,
) -> std::io::Result<usize> {
    use std::io::BufRead;
    let n = reader.read_until(b'\n', buf)?;
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    Ok(n)
}

impl MatchOracle for SubprocessOracle {
    fn play(&mut self, request: &OracleRequest) -> Result<OracleResponse> {
        let mut line = encode_request(request)?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|()| self.stdin.flush())
            .map_err(|e| Error::OracleFailure(format!("writing request {}: {e}", request.id)))?;
        let raw = self.next_line()?;
        let text = std::str::from_utf8(&raw)
            .map_err(|_| Error::protocol(format!("response is not valid UTF-8: {raw:?}")))?;
        decode_response(text)
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Serialized tuner state, written atomically after every
/// `checkpoint_every` matches and once more at the end of the session.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config_hash: String,
    pub method: Method,
    /// 1-based index of the next match to play.
    pub k: u64,
    pub theta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spreads: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionMatrix>,
    /// Position of the perturbation RNG, as a decimal string (u128).
    pub rng_word_pos: String,
}

/// Atomic load/store of checkpoints at a fixed path.
pub struct CheckpointStore {
    path: PathBuf,
}

impl CheckpointStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn exists(&self) -> bool {
        self.path.exists()
    }

    pub fn load(&self) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", self.path.display())))?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("cannot parse {}: {e}", self.path.display())))?;
        Ok(checkpoint)
    }

    /// Write-temp-then-rename so a crash never leaves a torn file.
    pub fn save(&self, checkpoint: &Checkpoint) -> Result<()> {
        let dir = self.path.parent().filter(|p| !p.as_os_str().is_empty());
        let mut tmp = match dir {
            Some(d) => tempfile::NamedTempFile::new_in(d),
            None => tempfile::NamedTempFile::new(),
        }
        .map_err(|e| Error::Checkpoint(format!("cannot create temp file: {e}")))?;
        let mut text = serde_json::to_string_pretty(checkpoint)?;
        text.push('\n');
        tmp.write_all(text.as_bytes())
            .map_err(|e| Error::Checkpoint(format!("cannot write checkpoint: {e}")))?;
        tmp.persist(&self.path)
            .map_err(|e| Error::Checkpoint(format!("cannot persist checkpoint: {e}")))?;
        Ok(())
    }
}

fn checkpoint_of(tuner: &Tuner, config_hash: &str) -> Checkpoint {
    let state = tuner.state();
    Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        config_hash: config_hash.to_string(),
        method: state.method,
        k: state.k,
        theta: state.theta.clone(),
        spreads: (!state.spreads.is_empty()).then(|| state.spreads.clone()),
        precision: state.precision.clone(),
        rng_word_pos: tuner.rng_word_pos().to_string(),
    }
}

fn tuner_from_checkpoint(config: &SessionConfig, checkpoint: &Checkpoint) -> Result<Tuner> {
    let expected = config.fingerprint()?;
    if checkpoint.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint schema version {}",
            checkpoint.schema_version
        )));
    }
    if checkpoint.config_hash != expected {
        return Err(Error::Checkpoint(
            "checkpoint was produced by a different configuration".into(),
        ));
    }
    if checkpoint.method != config.method {
        return Err(Error::Checkpoint("checkpoint method mismatch".into()));
    }
    if checkpoint.theta.len() != config.specs.len() {
        return Err(Error::Checkpoint("checkpoint dimension mismatch".into()));
    }
    if checkpoint.k < 1 || checkpoint.k > config.n_iterations + 1 {
        return Err(Error::Checkpoint(format!(
            "checkpoint iteration {} outside 1..={}",
            checkpoint.k,
            config.n_iterations + 1
        )));
    }
    if let Some(p) = &checkpoint.precision {
        // Revalidate through the constructor; the file is outside our control.
        PrecisionMatrix::from_entries(p.order(), p.entries().to_vec())?;
    }

    let word_pos: u128 = checkpoint
        .rng_word_pos
        .parse()
        .map_err(|_| Error::Checkpoint("rng_word_pos is not a valid u128".into()))?;
    let mut rng: ChaCha8Rng = stream_rng(config.seed, STREAM_PERTURBATION);
    rng.set_word_pos(word_pos);

    let state = TunerState {
        method: checkpoint.method,
        k: checkpoint.k,
        theta: checkpoint.theta.clone(),
        spreads: checkpoint.spreads.clone().unwrap_or_default(),
        precision: checkpoint.precision.clone(),
        tau: config.tau,
    };
    Tuner::from_state(
        state,
        config.specs.clone(),
        config.schedule,
        config.n_iterations,
        rng,
    )
}

/// Drive a full tuning session against `oracle`, checkpointing as
/// configured. With `resume` the session continues from the stored
/// checkpoint instead of starting fresh; the checkpoint must match the
/// config. On oracle or protocol errors the last good checkpoint is left
/// in place.
pub fn run_tuning_session_with(
    config: &SessionConfig,
    oracle: &mut dyn MatchOracle,
    store: &CheckpointStore,
    resume: bool,
) -> Result<TunerState> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;

    let mut tuner = if resume {
        if !store.exists() {
            return Err(Error::config(format!(
                "--resume requested but no checkpoint exists at {}",
                store.path().display()
            )));
        }
        tuner_from_checkpoint(config, &store.load()?)?
    } else {
        Tuner::new(
            config.method,
            config.specs.clone(),
            config.schedule,
            config.n_iterations,
            config.tau,
            None,
            stream_rng(config.seed, STREAM_PERTURBATION),
        )?
    };

    while tuner.state().k <= config.n_iterations {
        let k = tuner.state().k;
        let proposal = tuner.propose()?;
        let (plus, minus) = proposal.emitted(tuner.specs());
        let request = OracleRequest::new(k, tuner.specs(), &plus, &minus);
        let response = oracle.play(&request)?;
        if response.id != k {
            return Err(Error::protocol(format!(
                "response id {} does not match outstanding request {k}",
                response.id
            )));
        }
        let outcome = MatchOutcome::new(response.result)?;
        tuner.observe(&proposal.draw, outcome)?;
        if k % config.checkpoint_every == 0 {
            store.save(&checkpoint_of(&tuner, &fingerprint))?;
        }
    }

    store.save(&checkpoint_of(&tuner, &fingerprint))?;
    Ok(tuner.state().clone())
}

/// Convenience wrapper: spawn `command` as the oracle subprocess and run
/// the session against it.
pub fn run_tuning_session(
    config: &SessionConfig,
    command: &[String],
    checkpoint_path: impl Into<PathBuf>,
    resume: bool,
    timeout: Option<Duration>,
) -> Result<TunerState> {
    let mut oracle = SubprocessOracle::spawn(command, timeout)?;
    let store = CheckpointStore::new(checkpoint_path);
    run_tuning_session_with(config, &mut oracle, &store, resume)
}
