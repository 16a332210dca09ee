//! Statistical comparison of classifiers by per-class precision.
//!
//! Predictions from several classifiers on one shared test set are
//! correlated, so the tests here either model that correlation explicitly
//! (the concordance covariance of the closed-form statistics, the cluster
//! sandwich of the marginal logistic fit) or avoid it (relative precision on
//! the log scale with a paired variance). Per-class results can be combined
//! into a single global p-value, updated for a known class prevalence, and
//! checked for replicability.
//!
//! Module map:
//!
//! * [`data`]: prediction ingest, stacking, and the count tables
//! * [`gee`]: IRLS logistic fit, cluster sandwich, Wald and multi-classifier odds ratios
//! * [`closed_form`]: count-level Wald, score and multinomial Wald statistics
//! * [`relative`]: relative precision and its interval test
//! * [`combine`]: Simes and the Satterthwaite-scaled Lancaster combination
//! * [`prevalence`], [`replicability`]: auxiliary metrics
//! * [`sim`]: Gaussian-copula power simulation
//! * [`report`]: report model, TSV/JSON number formatting and the forest plot

pub mod closed_form;
pub mod combine;
pub mod data;
pub mod error;
pub mod gee;
pub mod prevalence;
pub mod relative;
pub mod replicability;
pub mod report;
pub mod resample;
pub mod sim;
pub mod special;
pub mod test_result;

pub use error::{Error, Result};
pub use test_result::{Method, TestResult};
