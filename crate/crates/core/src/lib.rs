//! Two-stage compressed-sensing detection of active devices in clustered
//! machine-type networks.
//!
//! Devices signal activity with sparse structured signatures
//! ([`signature`]). The base station recovers which clusters are active and
//! how many devices each holds with a median block sketch ([`sketch`]), and
//! broadcasts counts plus collided rows. Each listener then recovers the
//! active devices of its own cluster with count-limited OMP ([`inblock`])
//! and maps them onto the granted resource slots by rank.
//!
//! Numerical code is generic over [`Real`]; the `*64` / `*32` aliases below
//! fix the scalar.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod inblock;
mod linalg;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod seed;
pub mod signature;
pub mod sketch;

pub use error::{Error, Result};
pub use model::{ActivationPattern, ModelParams, SizePolicy};
pub use scalar::{Cplx, Real};

pub type MatrixParams64 = signature::MatrixParams<f64>;
pub type MatrixParams32 = signature::MatrixParams<f32>;
pub type StructuredMatrix64 = signature::StructuredMatrix<f64>;
pub type StructuredMatrix32 = signature::StructuredMatrix<f32>;
pub type BsDetection64 = sketch::BsDetection<f64>;
pub type BsDetection32 = sketch::BsDetection<f32>;
pub type DeviceSideProblem64 = inblock::DeviceSideProblem<f64>;
pub type DeviceSideProblem32 = inblock::DeviceSideProblem<f32>;
pub type InBlockDetection64 = inblock::InBlockDetection<f64>;
pub type InBlockDetection32 = inblock::InBlockDetection<f32>;
pub type ChannelRealization64 = channel::ChannelRealization<f64>;
pub type ChannelRealization32 = channel::ChannelRealization<f32>;
pub type AcquisitionResult64 = channel::AcquisitionResult<f64>;
pub type GaussianMatrix64 = baselines::GaussianMatrix<f64>;
pub type GaussianMatrix32 = baselines::GaussianMatrix<f32>;
