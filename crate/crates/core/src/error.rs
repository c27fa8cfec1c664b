use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported datatype: {0}")]
    UnsupportedDatatype(String),

    #[error("voxel value {value} out of range for {kind}")]
    ValueOutOfRange { kind: &'static str, value: i64 },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("mask is not binary: found value {0}")]
    NonBinaryMask(u8),

    #[error("vessel voxel at {0:?} lies outside the organ mask")]
    VesselOutsideOrgan([usize; 3]),

    #[error("organ mask is empty")]
    EmptyOrgan,

    #[error("seed voxel {0:?} is outside the organ")]
    SeedOutsideOrgan([usize; 3]),

    #[error("no voxel satisfies the seed margin of {0} voxels")]
    NoEligibleSeed(f64),

    #[error("tumor map is empty")]
    EmptyTumor,

    #[error("mask is empty")]
    EmptyMask,

    #[error("input list is empty")]
    EmptyInput,

    #[error("shape rasterizes to an empty mask")]
    DegenerateShape,

    #[error("lesion placement failed after {0} attempts")]
    PlacementFailed(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid manifest row {line}: {reason}")]
    ManifestRowInvalid { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips any stage wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Attaches a pipeline stage name to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
