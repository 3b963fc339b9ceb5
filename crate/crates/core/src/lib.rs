//! Privacy auditing for mobile health app corpora.
//!
//! The pipeline observes what apps actually do (embedded tracker libraries,
//! contacted tracker hosts, PII/PHI found in outbound HTTP requests), then
//! contrasts those observations with the data scope expected for each app's
//! feature category and with the app's declared privacy labels.

pub mod assess;
pub mod capture;
pub mod detect;
pub mod error;
pub mod fixtures;
pub mod hostclass;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod staticscan;
pub mod stats;

pub use error::{Error, Result};
