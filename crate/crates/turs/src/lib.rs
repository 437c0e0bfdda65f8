//! Data loading, model files, cross-validation and the `turs` command line
//! on top of [`turs_core`].

pub mod cv;
pub mod error;
pub mod load;
pub mod modelio;

pub use crate::cv::{cross_validate, stratified_folds, CvOptions, EvalReport, FoldReport, OverlapOn};
pub use crate::error::{Error, Result};
pub use crate::load::{load_csv, load_instances, Instances};
pub use turs_core;
