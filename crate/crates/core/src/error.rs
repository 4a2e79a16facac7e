use std::path::PathBuf;

/// Errors raised anywhere in the separation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("length error: {0}")]
    Length(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("energy error: {0}")]
    Energy(String),
    #[error("design error: {0}")]
    Design(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("compatibility error: {0}")]
    Compatibility(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Broad class used by the CLI to pick an exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::Divergence(_)
                | Error::Design(_)
                | Error::DegenerateWeight(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
