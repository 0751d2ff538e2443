//! Layer-wise linear probing of dumped model activations.
//!
//! A run directory holds one representation matrix per layer plus binary
//! labels. [`pipeline::run_pipeline`] fits an L2 logistic-regression probe
//! per layer on a shared train/test split, scores each layer on the test
//! split, and locates where the concept becomes linearly decodable
//! ([`metrics::depth_metrics`]).
//!
//! ```no_run
//! use concept_depth::pipeline::{run_pipeline, PipelineConfig};
//!
//! let report = run_pipeline("runs/gemma2b-cities".as_ref(), &PipelineConfig::default())?;
//! println!("{:?}", report.depth_metrics.jumping_point);
//! # Ok::<(), concept_depth::Error>(())
//! ```

pub mod datasets;
pub mod json;
pub mod metrics;
pub mod pipeline;
pub mod probe;
pub mod report;
pub mod reps_io;
pub mod rng;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Format(#[from] reps_io::FormatError),
    #[error(transparent)]
    Probe(#[from] probe::ProbeError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Dataset(#[from] datasets::DatasetError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
}

impl Error {
    /// True when the failure came from the filesystem rather than bad input.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Format(e) => e.is_io(),
            Error::Dataset(e) => e.is_io(),
            Error::Synth(e) => e.is_io(),
            Error::Pipeline(e) => e.is_io(),
            Error::Report(e) => e.is_io(),
            Error::Probe(_) | Error::Metrics(_) => false,
        }
    }
}
