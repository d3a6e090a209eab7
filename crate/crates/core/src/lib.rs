//! Disease-burden indices from per-cause DALY series: principal components
//! per cause group, symbolic regression on each retained component score,
//! and short-horizon forecasts from the selected models.

pub mod error;
pub mod expr;
pub mod forecast;
pub mod ingest;
pub mod metrics;
pub mod pca;
pub mod pipeline;
pub mod sr;
pub mod synthetic;

pub use error::{Error, Stage};
