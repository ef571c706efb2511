//! Univariate samplers: adaptive rejection sampling, truncated normals,
//! random-walk Metropolis steps, and counter-based random streams.

mod ars;
mod mh;
mod stream;
mod truncnorm;

pub use ars::{ars_sample, ArsError, LogDensity, MAX_ABSCISSAE};
pub use mh::rw_mh_step;
pub use stream::{derive_stream_id, RandomStream};
pub use truncnorm::{truncated_normal, TruncNormError};
