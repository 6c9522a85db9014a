//! Image compression by measurement-probability matching.
//!
//! A parameterized quantum circuit is trained so that the first `W·H`
//! entries of its measurement distribution, rescaled to the target's mean
//! and standard deviation, reproduce a normalized image. The trained angles
//! are the compressed representation.

pub mod ansatz;
pub mod codec;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod optimize;
pub mod postproc;
pub mod statevec;

pub use error::{Error, Result};
