//! Spectrum sharing between a matrix-completion MIMO radar and a MIMO
//! communication link.
//!
//! The communication transmitter shapes its per-symbol covariance to keep the
//! interference landing on *sampled* radar entries small while meeting an
//! average-capacity target under a power budget; the radar can additionally
//! permute its sampling mask to dodge that interference. The crate covers the
//! whole loop: scenario generation, interference metrics, covariance design,
//! mask optimization, matrix-completion recovery and a CSV-producing harness.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the harness uses.

pub mod covdesign;
pub mod error;
pub mod harness;
pub mod interference;
pub mod mc;
pub mod num;
pub mod rng;
pub mod samplingopt;
pub mod scenario;

pub use error::{Error, Result};
pub use num::Real;
pub use scenario::{SamplingMask, ScenarioConfig, Scheme};

pub type Scenario64 = scenario::Scenario<f64>;
pub type ChannelSet64 = scenario::ChannelSet<f64>;
pub type CovarianceSchedule64 = interference::CovarianceSchedule<f64>;
pub type WeightSchedule64 = interference::WeightSchedule<f64>;
pub type NoiseCovSchedule64 = interference::NoiseCovSchedule<f64>;
pub type DesignSolution64 = covdesign::DesignSolution<f64>;
pub type JointDesignResult64 = samplingopt::JointDesignResult<f64>;

pub type Scenario32 = scenario::Scenario<f32>;
pub type CovarianceSchedule32 = interference::CovarianceSchedule<f32>;
pub type DesignSolution32 = covdesign::DesignSolution<f32>;
