//! trajmine: batch mining of passive Wi-Fi probe-request logs.
//!
//! The pipeline turns raw `(device, sensor, timestamp)` probe observations
//! into per-day, building-level trajectories and then mines them from three
//! angles: how each building's days cluster over the calendar, how device
//! days cluster into visit patterns, and how crowds flow between buildings
//! in fixed time windows. A seeded synthetic generator produces probe logs
//! with known structure so every stage can be exercised end to end.

pub mod cluster;
pub mod ingest;
pub mod error;
pub mod model;
pub mod perspective;
pub mod config;
pub mod pipeline;
pub mod preprocess;
pub mod seeds;
pub mod synth;

pub use error::{Error, Result};
