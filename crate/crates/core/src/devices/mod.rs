//! Reference devices built on the pipeline, plus the device taxonomy.
//!
//! OSC namespace emitted by these devices:
//!
//! | address           | arguments                                              |
//! |-------------------|--------------------------------------------------------|
//! | `/theralmin/note` | `f` freq (Hz), `f` amp, `s` synth, then `s`/`f` effect name/value pairs |
//! | `/player/play`    | `s` track id                                           |

mod emotiwatch;
mod taxonomy;
mod theralmin;

use std::collections::BTreeSet;

use crate::learning::LearningError;
use crate::pipeline::{Behavior, DeviceGraph, Throttle};

pub use emotiwatch::{
    build_emotiwatch, recommend_track, EmotiWatchConfig, Track, PHYSIO_CHANNELS, PLAYER_ADDRESS,
};
pub use taxonomy::{validate_taxonomy, TaxonomyCode};
pub use theralmin::{
    amp_map, audit_independence, build_theralmin, pitch_map, timbre_select, TherAlminConfig,
    Timbre, NOTE_ADDRESS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeviceError {
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid taxonomy code {0:?}")]
    InvalidCode(String),
    #[error("invalid device config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Learning(#[from] LearningError),
}

/// A device: its name, where it sits in the taxonomy, and its stage graph.
#[derive(Debug, Clone)]
pub struct DeviceDescriptor {
    pub name: String,
    pub codes: BTreeSet<TaxonomyCode>,
    pub graph: DeviceGraph,
}

impl DeviceDescriptor {
    /// Apply `throttle` to every production stage.
    pub fn set_throttle(&mut self, throttle: Throttle) {
        let ids: Vec<_> = self
            .graph
            .production_stages()
            .map(|(id, _)| id.clone())
            .collect();
        for id in ids {
            if let Some(node) = self.graph.stages.get_mut(&id) {
                if let Behavior::Production(spec) = &mut node.behavior {
                    spec.throttle = throttle;
                }
            }
        }
    }
}

fn check_unit(v: f64) -> Result<f64, DeviceError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(DeviceError::OutOfRange(v))
    }
}
