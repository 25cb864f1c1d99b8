use thiserror::Error;

use crate::lattice::DisplacementField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("problem validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("lattice: {0}")]
    Lattice(String),

    #[error("unknown bond id {id} (lattice has {count} bonds)")]
    UnknownBond { id: usize, count: usize },

    #[error("crack sets belong to different lattices")]
    LatticeMismatch,

    #[error("inadmissible pair at node {node}: expected boundary value {expected}, found {found}")]
    Inadmissible { node: usize, expected: f64, found: f64 },

    #[error("energy unbounded: fragment containing node {node} is detached from every grip under a load without a minimum")]
    Unbounded { node: usize },

    #[error("descent did not converge after {iterations} iterations (scaled gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        best: Box<DisplacementField>,
    },

    #[error("candidate set of {free} bonds needs {count} evaluations, above the exhaustive limit {limit}; enable greedy fallback")]
    SearchTooLarge { free: usize, count: u128, limit: u64 },

    #[error("initial configuration is not globally stable at t=0 (worst margin {margin:e})")]
    InitialNotStable { margin: f64 },

    #[error("evolution aborted at step {step}: {source}")]
    Aborted {
        step: usize,
        partial: Box<crate::evolution::EvolutionTrace>,
        #[source]
        source: Box<Error>,
    },

    #[error("time {t} outside the run interval [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("lemma sequence: {0}")]
    Sequence(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("output directory {0} is locked by another run")]
    Locked(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
