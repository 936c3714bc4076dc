//! Secrecy-rate optimization for STAR-RIS assisted wiretap channels whose
//! eavesdroppers double as energy harvesters.

pub mod error;
pub mod experiment;
pub mod model;
pub mod optimizer;
pub mod scenario;
pub mod sdp;

pub use error::{Error, Result};
