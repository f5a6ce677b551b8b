//! Partition-based neural graph similarity.
//!
//! Graphs are split into communities with fluid community detection, each
//! community is embedded with a GIN encoder, and the best-matching community
//! pairs are compared node by node with cross-graph attention. Ground truth
//! comes from graph edit distance: exact A* for small graphs, bipartite
//! assignment and beam search bounds, and bookkept edit costs for
//! synthetically trimmed graphs.
//!
//! Modules, bottom up: [`graph`], [`partition`], [`ged`], [`dataset`],
//! [`autodiff`], [`model`], [`train`].

pub mod autodiff;
pub mod dataset;
pub mod ged;
pub mod graph;
pub mod model;
pub mod partition;
pub mod train;

use thiserror::Error;

/// Any error raised by the library, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph: {0}")]
    Graph(#[from] graph::GraphError),
    #[error("partition: {0}")]
    Partition(#[from] partition::PartitionError),
    #[error("ged: {0}")]
    Ged(#[from] ged::GedError),
    #[error("dataset: {0}")]
    Dataset(#[from] dataset::DatasetError),
    #[error("autodiff: {0}")]
    Autodiff(#[from] autodiff::AutodiffError),
    #[error("model: {0}")]
    Model(#[from] model::ModelError),
    #[error("train: {0}")]
    Train(#[from] train::TrainError),
    #[error("metrics: {0}")]
    Metric(#[from] train::MetricError),
}

impl Error {
    /// True for numeric failures (non-finite values) as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Autodiff(e) => autodiff_numeric(e),
            Error::Model(e) => model_numeric(e),
            Error::Train(e) => train_numeric(e),
            Error::Metric(e) => matches!(e, train::MetricError::NonFinite(_)),
            Error::Ged(e) => matches!(e, ged::GedError::NegativeGed(_)),
            _ => false,
        }
    }
}

fn autodiff_numeric(e: &autodiff::AutodiffError) -> bool {
    matches!(e, autodiff::AutodiffError::NonFinite { .. })
}

fn model_numeric(e: &model::ModelError) -> bool {
    matches!(e, model::ModelError::Autodiff(a) if autodiff_numeric(a))
}

fn train_numeric(e: &train::TrainError) -> bool {
    use train::TrainError as T;
    match e {
        T::NonFinite { .. } | T::Metric(train::MetricError::NonFinite(_)) => true,
        T::Autodiff(a) => autodiff_numeric(a),
        T::Model(m) => model_numeric(m),
        _ => false,
    }
}

/// Classifies any error value from this crate, whether or not it was
/// wrapped in [`Error`].
pub fn is_numeric_failure(err: &(dyn std::error::Error + 'static)) -> bool {
    if let Some(e) = err.downcast_ref::<Error>() {
        e.is_numeric()
    } else if let Some(e) = err.downcast_ref::<autodiff::AutodiffError>() {
        autodiff_numeric(e)
    } else if let Some(e) = err.downcast_ref::<model::ModelError>() {
        model_numeric(e)
    } else if let Some(e) = err.downcast_ref::<train::TrainError>() {
        train_numeric(e)
    } else if let Some(e) = err.downcast_ref::<train::MetricError>() {
        matches!(e, train::MetricError::NonFinite(_))
    } else if let Some(e) = err.downcast_ref::<ged::GedError>() {
        matches!(e, ged::GedError::NegativeGed(_))
    } else {
        false
    }
}

pub type Result<T> = std::result::Result<T, Error>;
