//! Maximum-likelihood fitting of truncated normal and truncated lognormal
//! distributions in a parameterization that degrades gracefully into pure
//! power laws and exponentials.

pub mod cli;
pub mod estimator;
pub mod model;
pub mod quadrature;
pub mod synth;

pub use estimator::{FitConfig, FitError, FitReport, SampleMoments};
pub use model::{ModelError, StandardParams, TruncatedModel};
pub use quadrature::{Interval, QuadratureConfig, QuadratureError};
pub use synth::{SampleMethod, SamplerConfig, SynthError};
