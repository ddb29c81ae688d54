//! The layered device architecture as a deterministic event pipeline.
//!
//! A [`DeviceGraph`] wires typed stages (capture, adaptation, learning,
//! music adaptation, production, feedback) into a DAG whose edges never
//! point from a later layer to an earlier one. A [`Scheduler`] pushes each
//! ingested [`Event`] through the graph in topological order, and
//! [`run_replay`] drives a whole recorded stream through it in simulated
//! time, rate-limiting production output with a [`Coalescer`].

mod graph;
mod replay;
mod scheduler;
mod throttle;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::osc::OscMessage;

pub use graph::{
    Behavior, Binding, BindingSource, DeviceGraph, ParamSpec, ParamTransform, ProductionSpec,
    StageLogic, Violation, Violations,
};
pub use replay::{
    parse_replay, read_replay_file, run_replay, write_replay, ReplayError, ReplayLine,
};
pub use scheduler::Scheduler;
pub use throttle::{Coalescer, Throttle, DEFAULT_MAX_RATE};

/// Layer of the architecture a stage belongs to. Edges may only go from a
/// kind to the same or a later kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    StimulusCapture = 0,
    StimulusAdaptation = 1,
    Learning = 2,
    MusicAdaptation = 3,
    Production = 4,
    Feedback = 5,
}

impl StageKind {
    pub const ALL: [StageKind; 6] = [
        StageKind::StimulusCapture,
        StageKind::StimulusAdaptation,
        StageKind::Learning,
        StageKind::MusicAdaptation,
        StageKind::Production,
        StageKind::Feedback,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(StageId);
string_id!(ChannelId);

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// A normalized sensor reading in `[0, 1]`.
    Stimulus {
        channel: ChannelId,
        value: f64,
    },
    Gesture {
        features: Vec<f64>,
    },
    Class {
        label: String,
        confidence: f64,
    },
    Control {
        message: OscMessage,
    },
}

impl Payload {
    /// Stimulus payload with `value` clamped into `[0, 1]`. NaN maps to 0.
    pub fn stimulus(channel: impl Into<ChannelId>, value: f64) -> Payload {
        let value = if value.is_nan() {
            0.0
        } else {
            value.clamp(0.0, 1.0)
        };
        Payload::Stimulus {
            channel: channel.into(),
            value,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Payload::Stimulus { .. } => "stimulus",
            Payload::Gesture { .. } => "gesture",
            Payload::Class { .. } => "class",
            Payload::Control { .. } => "control",
        }
    }
}

/// A timestamped payload moving through the pipeline.
///
/// Events are totally ordered by `(t, seq)`. `source` is the stage that
/// produced the event (`None` for ingested events) and `learned_from` the
/// most recent learning stage on its path.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Microseconds on the device clock.
    pub t: u64,
    pub seq: u64,
    pub payload: Payload,
    pub source: Option<StageId>,
    pub learned_from: Option<StageId>,
}

impl Event {
    pub fn ingest(t: u64, seq: u64, payload: Payload) -> Event {
        let payload = match payload {
            Payload::Stimulus { channel, value } => Payload::stimulus(channel, value),
            other => other,
        };
        Event {
            t,
            seq,
            payload,
            source: None,
            learned_from: None,
        }
    }

    pub fn stimulus(t: u64, seq: u64, channel: impl Into<ChannelId>, value: f64) -> Event {
        Event::ingest(t, seq, Payload::stimulus(channel, value))
    }

    pub fn gesture(t: u64, seq: u64, features: Vec<f64>) -> Event {
        Event::ingest(t, seq, Payload::Gesture { features })
    }

    pub fn order_key(&self) -> (u64, u64) {
        (self.t, self.seq)
    }

    pub fn control(&self) -> Option<&OscMessage> {
        match &self.payload {
            Payload::Control { message } => Some(message),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid device graph: {0}")]
    InvalidGraph(Violations),
    #[error("stage {stage} failed: {reason}")]
    StageFailure { stage: StageId, reason: String },
    #[error("event stream not sorted by (t, seq) at index {index}")]
    UnsortedStream { index: usize },
}
