//! Auditing toolkit for classifier fairness.
//!
//! * [`dataset`]: outcome tables and the COMPAS preparation recipe
//! * [`metrics`]: confusion matrices and accuracy metrics
//! * [`fairness`]: independence / separation / sufficiency gaps, verdicts,
//!   the four-fifths test and incompatibility advisories
//! * [`compas`]: bundled COMPAS counts and the published reference figures
//! * [`gaming`]: strategic gaming of a disclosed linear classifier
//! * [`stereotype`]: embedding bias scores, projection debiasing, decoding
//! * [`report`]: provenance headers, atomic outputs and renderers

pub mod compas;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fairness;
pub mod gaming;
pub mod metrics;
pub mod report;
pub mod stereotype;

pub use error::{Error, ErrorKind, Result};
