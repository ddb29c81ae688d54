//! Wearable mood-driven music recommender.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DeviceDescriptor, DeviceError, TaxonomyCode};
use crate::learning::CentroidModel;
use crate::osc::{OscMessage, OscValue};
use crate::pipeline::{
    Behavior, BindingSource, ChannelId, DeviceGraph, ParamSpec, ParamTransform, Payload,
    ProductionSpec, StageKind, StageLogic, Throttle,
};

pub const PLAYER_ADDRESS: &str = "/player/play";

/// Feature order fed to the mood model.
pub const PHYSIO_CHANNELS: [&str; 3] = ["hrv", "eda", "spo2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: String,
    pub mood: String,
    #[serde(default)]
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotiWatchConfig {
    pub model: CentroidModel,
    pub catalog: Vec<Track>,
}

impl EmotiWatchConfig {
    pub fn new(model: CentroidModel, catalog: Vec<Track>) -> Result<Self, DeviceError> {
        let cfg = EmotiWatchConfig { model, catalog };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |msg: String| Err(DeviceError::InvalidConfig(msg));
        if self.model.dim() != PHYSIO_CHANNELS.len() {
            return bad(format!(
                "mood model has {} features, expected {}",
                self.model.dim(),
                PHYSIO_CHANNELS.len()
            ));
        }
        if self.catalog.is_empty() {
            return bad("catalog is empty".into());
        }
        for track in &self.catalog {
            let known = track.mood == self.model.background_label()
                || self.model.centroids().contains_key(&track.mood);
            if !known {
                return bad(format!(
                    "track {} has unknown mood {:?}",
                    track.id, track.mood
                ));
            }
            if track.id.contains('\0') {
                return bad("track ids must not contain NUL".into());
            }
        }
        Ok(())
    }
}

/// Lowest track id tagged with `mood`, or the lowest id overall when no
/// track matches. `None` only for an empty catalog.
pub fn recommend_track<'a>(mood: &str, catalog: &'a [Track]) -> Option<&'a str> {
    catalog
        .iter()
        .filter(|t| t.mood == mood)
        .map(|t| t.id.as_str())
        .min()
        .or_else(|| catalog.iter().map(|t| t.id.as_str()).min())
}

/// Holds the latest reading per physiological channel and emits the full
/// feature vector once every channel has reported.
#[derive(Debug, Clone, Default)]
struct PhysioFeatures {
    latest: [Option<f64>; 3],
}

impl StageLogic for PhysioFeatures {
    fn process(&mut self, input: &Payload) -> Result<Vec<Payload>, String> {
        let Payload::Stimulus { channel, value } = input else {
            return Ok(vec![]);
        };
        let Some(idx) = PHYSIO_CHANNELS.iter().position(|c| *c == channel.as_str()) else {
            return Ok(vec![]);
        };
        self.latest[idx] = Some(*value);
        let features: Option<Vec<f64>> = self.latest.iter().copied().collect();
        Ok(features
            .map(|features| Payload::Gesture { features })
            .into_iter()
            .collect())
    }

    fn clone_box(&self) -> Box<dyn StageLogic> {
        Box::new(self.clone())
    }
}

/// Picks a track whenever the estimated mood changes.
#[derive(Debug, Clone)]
struct Recommender {
    catalog: Vec<Track>,
    last_mood: Option<String>,
}

impl StageLogic for Recommender {
    fn process(&mut self, input: &Payload) -> Result<Vec<Payload>, String> {
        let Payload::Class { label, .. } = input else {
            return Ok(vec![]);
        };
        if self.last_mood.as_ref() == Some(label) {
            return Ok(vec![]);
        }
        self.last_mood = Some(label.clone());
        let track = recommend_track(label, &self.catalog).ok_or("empty catalog")?;
        let message = OscMessage::new("/player/select", vec![OscValue::Str(track.to_owned())]);
        Ok(vec![Payload::Control { message }])
    }

    fn clone_box(&self) -> Box<dyn StageLogic> {
        Box::new(self.clone())
    }
}

/// ```text
/// wearable -> physio_features -> mood_estimator -> recommender -> player -> feedback
/// ```
pub fn build_emotiwatch(cfg: &EmotiWatchConfig) -> Result<DeviceDescriptor, DeviceError> {
    cfg.validate()?;
    let player = ProductionSpec {
        address: PLAYER_ADDRESS.into(),
        params: vec![ParamSpec::new("track", ParamTransform::Linear)],
        throttle: Throttle::default(),
    };
    let mut graph = DeviceGraph::new();
    graph
        .add_stage(
            "wearable",
            StageKind::StimulusCapture,
            Behavior::capture(PHYSIO_CHANNELS.map(ChannelId::from), false),
        )
        .add_stage(
            "physio_features",
            StageKind::StimulusAdaptation,
            Behavior::Custom(Box::<PhysioFeatures>::default()),
        )
        .add_stage(
            "mood_estimator",
            StageKind::Learning,
            Behavior::Classify(cfg.model.clone()),
        )
        .add_stage(
            "recommender",
            StageKind::Learning,
            Behavior::Custom(Box::new(Recommender {
                catalog: cfg.catalog.clone(),
                last_mood: None,
            })),
        )
        .add_stage(
            "player",
            StageKind::Production,
            Behavior::Production(player),
        )
        .add_stage("feedback", StageKind::Feedback, Behavior::Sink)
        .connect("wearable", "physio_features")
        .connect("physio_features", "mood_estimator")
        .connect("mood_estimator", "recommender")
        .connect("recommender", "player")
        .connect("player", "feedback")
        .bind(
            "player",
            "track",
            BindingSource::LearningOutput("recommender".into()),
        );
    Ok(DeviceDescriptor {
        name: "emotiwatch".into(),
        codes: BTreeSet::from([TaxonomyCode::USER_AWARE_RECOMMENDATION]),
        graph,
    })
}
