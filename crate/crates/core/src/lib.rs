//! Emulates broadcast-derived player tracking by censoring full tracking
//! data with a simulated camera, computes external load metrics on the
//! observed and censored parts, and predicts the censored load.
//!
//! The usual flow is [`tracking`] (parse, censor, segment) → [`dataset`]
//! (assemble player-games) → [`metrics`] and [`features`] → [`models`] →
//! [`evaluation`]. [`synth`] generates corpora to run it on.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod kinematics;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod synth;
pub mod tracking;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use metrics::{LoadMetrics, Metric};
pub use tracking::{Frame, PlayerTrack, Position};
