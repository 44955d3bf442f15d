pub mod channel;
pub mod distributions;
pub mod error;
pub mod metrics;
pub mod optimize;
pub mod pipeline;
pub mod profiles;
pub mod rng;
pub mod stats;
pub mod taps;

pub use distributions::{DistributionSpec, Family};
pub use error::{Error, Result};
