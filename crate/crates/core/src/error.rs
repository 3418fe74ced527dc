use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("heading is undefined for a zero velocity")]
    UndefinedHeading,
    #[error("wall normal is undefined at the tank center")]
    UndefinedNormal,
    #[error("coincident positions have no viewing angle")]
    DegeneratePair,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("arena {name} must be positive and finite, got {value}")]
    InvalidArena { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: time {t} precedes previous row time {prev}")]
    NonMonotonic {
        path: PathBuf,
        line: u64,
        t: f64,
        prev: f64,
    },
    #[error("{0}: no trajectory rows")]
    Empty(PathBuf),
    #[error("runs disagree on frame rate: {0} Hz vs {1} Hz")]
    FrameRateMismatch(f64, f64),
    #[error("target step {target} s is not an integer multiple of source step {source_step} s")]
    ResampleRatio { target: f64, source_step: f64 },
    #[error("{count} frame(s) lie outside the arena (first: segment {segment}, frame {frame}, |u| = {norm})")]
    OutOfArena {
        count: usize,
        segment: usize,
        frame: usize,
        norm: f64,
    },
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("dataset has {segments} segment(s); cannot populate the {set} set")]
    TooSmall { segments: usize, set: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("window must hold exactly {expected} states, got {got}")]
    WindowLength { expected: usize, got: usize },
    #[error("non-finite state component in slot {0}")]
    NonFiniteState(usize),
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite train nll {last})")]
    NonFiniteLoss { epoch: usize, batch: usize, last: f64 },
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite state after tick {last_good}")]
    NonFinite { last_good: usize },
    #[error("invalid rollout configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("collective observables need exactly two agents, got {0}")]
    NotAPair(usize),
    #[error("no segment is longer than the requested lag {0}")]
    EmptyCurve(usize),
    #[error("histograms have different bin edges")]
    EdgeMismatch,
    #[error("invalid histogram range [{lo}, {hi}] with {bins} bins")]
    BadRange { lo: f64, hi: f64, bins: usize },
}

#[derive(Debug, Error)]
pub enum AbcError {
    #[error("duration must be positive, got {0}")]
    Duration(f64),
    #[error("tick {t} s lies outside the simulated span [{start}, {end}] s")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("kick table: {0}")]
    KickTable(String),
    #[error("invalid interaction parameter {name} = {value}")]
    Param { name: &'static str, value: f64 },
}
