// SPDX-License-Identifier: Apache-2.0

//! Energy-efficient robust beamforming for a multi-user MIMO base station
//! that also tracks a radar target.
//!
//! The optimizer alternates a conic beamforming program with closed-form
//! and conic auxiliary updates; see [`optimizer::run`].

pub mod channel;
pub mod config;
pub mod conic;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod verification;

pub use channel::{ChannelSet, SteeringContext};
pub use config::{ConvergenceRule, SystemConfig};
pub use error::{ChannelError, ConfigError, ConicError, ExperimentError, MetricsError, VerificationError};
pub use experiment::{OutputFormat, SweepKind, SweepRow, SweepSpec};
pub use metrics::BeamformerSet;
pub use rng::Rng;
pub use verification::VerificationReport;
