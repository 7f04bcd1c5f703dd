//! Pipeline orchestration for the fundus screening CLI.
//!
//! Stages communicate through on-disk artifacts only: `prepare` writes
//! enhanced images and merged label masks plus a prepared manifest,
//! `train-seg` consumes those and writes a weight file and a training log,
//! `segment` writes predicted masks and a segmentation report, `features`
//! writes the feature CSV, `train-clf` a model file and CV table, and
//! `evaluate` the final report. Identical (config, manifest, seed) triples
//! produce byte-identical artifacts.

pub mod config;
pub mod manifest;
pub mod phantom_data;
pub mod stages;
pub mod workers;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] manifest::ManifestError),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Imaging(#[from] fundus_core::imaging::ImagingError),
    #[error(transparent)]
    SegNet(#[from] fundus_core::segnet::SegNetError),
    #[error(transparent)]
    Geometry(#[from] fundus_core::geometry::GeometryError),
    #[error(transparent)]
    Svm(#[from] fundus_core::classifier::SvmError),
    #[error(transparent)]
    Metrics(#[from] fundus_core::metrics::MetricsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("malformed artifact {path}: {msg}")]
    MalformedArtifact { path: String, msg: String },
    #[error("rows without labels: {0}")]
    MissingLabels(String),
}

impl PipelineError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
