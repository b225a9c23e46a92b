use thiserror::Error;

/// Errors raised by the depth-fusion library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input carries no usable spread (e.g. a constant disparity map).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An operation was applied to data with the wrong semantics or owner.
    #[error("misuse: {0}")]
    Misuse(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("face {face}: {source}")]
    Face {
        face: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("provider directory is missing faces {0:?}")]
    MissingFaces(Vec<usize>),

    #[error("provider contract violation: {0}")]
    Provider(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Tags an error with the tangent face it came from.
    pub fn for_face(self, face: usize) -> Self {
        Error::Face {
            face,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
