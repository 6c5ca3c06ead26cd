use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("tiling error: {0}")]
    Tiling(String),

    #[error("periodic pairing error: boundary node {node} at ({x}, {y}) has no partner")]
    Pairing { node: usize, x: f64, y: f64 },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("inverted element{} (J = {jacobian:e})", element.map(|e| format!(" {e}")).unwrap_or_default())]
    InvertedElement { element: Option<usize>, jacobian: f64 },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("step-size error: {0}; reduce the time step")]
    StepSize(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed{}: {source}", point.map(|p| format!(" at sample point {p}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        point: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str, point: Option<usize>) -> Error {
        Error::Stage {
            stage,
            point,
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
