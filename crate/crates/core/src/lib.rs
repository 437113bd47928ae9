//! Appliance detection in very-low-frequency smart-meter load curves.
//!
//! The crate is organised around one binary question: was a given appliance
//! switched on at least once during a load-curve window? It provides
//!
//! * the shared domain types ([`series`], [`classifier`]),
//! * CSV ingestion and a synthetic household generator ([`dataio`]),
//! * the resample / interpolate / slice / label / balance / split pipeline
//!   ([`preprocess`]),
//! * distance, interval and dictionary classifiers ([`classic`]),
//! * random-convolution transforms with a ridge head ([`kernel`]),
//! * a small 1-D network stack with hand-written gradients ([`neural`]),
//! * metrics ([`eval`]) and the experiment runner behind the CLI
//!   ([`harness`]).

pub mod classic;
pub mod classifier;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod harness;
pub mod kernel;
pub mod neural;
pub mod preprocess;
pub mod rng;
pub mod series;

pub use classifier::{ClassifierKind, Deadline, FittedClassifier, Model};
pub use error::{Error, Result};
pub use series::{ExperimentSplit, Label, LabeledInstance, TimeSeries};
