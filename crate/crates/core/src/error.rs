use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh bounds extent {extent:?} is smaller than one lattice cell of size {dx}")]
    BoundsTooSmall { extent: [f64; 3], dx: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported quadrature sample count {0} (supported: 1, 4, 10, 20, 35)")]
    UnsupportedSampleCount(usize),

    #[error("non-finite node positions after relaxation in frame {frame}")]
    NonFinitePositions { frame: usize },

    #[error("mesh topology mismatch between frames: {0}")]
    TopologyMismatch(String),

    #[error("pressure solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("{}", fmt_config(.path, .line, .message))]
    Config {
        path: String,
        line: Option<usize>,
        message: String,
    },

    #[error("bake file: {0}")]
    BakeFormat(String),

    #[error("dump file: {0}")]
    DumpFormat(String),

    #[error("missing frame dump {0}")]
    MissingDump(PathBuf),

    #[error("malformed diagnostics: {0}")]
    Diagnostics(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_config(path: &str, line: &Option<usize>, message: &str) -> String {
    match line {
        Some(line) => format!("scene config `{path}` (line {line}): {message}"),
        None => format!("scene config `{path}`: {message}"),
    }
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}
