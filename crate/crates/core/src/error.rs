use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KfsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KfsError {
    #[error("frame {frame} out of range for sample of {n_frames} frames")]
    FrameOutOfRange { frame: usize, n_frames: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("metric {metric} undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("sampling weights are degenerate: {0}")]
    DegenerateWeights(String),

    #[error("invalid clustering: {0}")]
    InvalidClustering(String),

    #[error("k-means infeasible: {k_clusters} clusters requested for {n_points} points")]
    ClusteringInfeasible { k_clusters: usize, n_points: usize },

    #[error("feature row {row} has zero norm and cannot be normalized")]
    ZeroNormRow { row: usize },

    #[error("temporal binning needs at least {bins} frames, got {n_frames}")]
    Binning { bins: usize, n_frames: usize },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("capacity exceeded for {region}: requested {requested}, achievable {achievable}")]
    Capacity {
        region: String,
        requested: usize,
        achievable: usize,
    },

    #[error("layout generation failed for sample {sample}: {reason}")]
    Layout { sample: String, reason: String },

    #[error("invalid annotation for sample `{sample}` ({field}): {reason}")]
    Annotation {
        sample: String,
        field: String,
        reason: String,
    },

    #[error("sample `{sample}`: {source}")]
    InSample {
        sample: String,
        #[source]
        source: Box<KfsError>,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("truncated file {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("non-finite value in {path} at element {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("parse error in {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KfsError {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        KfsError::Precondition(msg.into())
    }

    /// Attach the id of the sample being processed.
    pub fn in_sample(self, sample: &str) -> Self {
        match self {
            e @ (KfsError::InSample { .. } | KfsError::Annotation { .. }) => e,
            e => KfsError::InSample {
                sample: sample.to_string(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KfsError::Io {
            path: path.into(),
            source,
        }
    }
}
