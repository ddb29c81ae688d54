//! Building blocks for AI-assisted music devices: an OSC codec and UDP
//! transport, a layered stage pipeline with deterministic replay, a
//! nearest-centroid gesture classifier, and two reference devices.

pub mod devices;
pub mod learning;
pub mod osc;
pub mod pipeline;
pub mod transport;

pub use learning::{CentroidModel, Classification, LabeledSample, LearningError};
pub use osc::{OscBundle, OscError, OscMessage, OscPacket, OscValue, TimeTag};
pub use pipeline::{DeviceGraph, Event, Payload, PipelineError, StageKind};
