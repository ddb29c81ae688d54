//! Augmented theremin: antennas drive pitch and volume, a gesture
//! classifier drives timbre and effects.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{check_unit, DeviceDescriptor, DeviceError, TaxonomyCode};
use crate::learning::CentroidModel;
use crate::osc::{OscMessage, OscValue};
use crate::pipeline::{
    Behavior, BindingSource, DeviceGraph, ParamSpec, ParamTransform, Payload, ProductionSpec,
    StageId, StageKind, StageLogic, Throttle,
};

pub const NOTE_ADDRESS: &str = "/theralmin/note";

const SELECTION_ADDRESS: &str = "/theralmin/timbre";

/// A synth name plus effect parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timbre {
    pub synth: String,
    #[serde(default)]
    pub effects: Vec<(String, f32)>,
}

impl Timbre {
    pub fn new(synth: impl Into<String>, effects: Vec<(&str, f32)>) -> Self {
        Timbre {
            synth: synth.into(),
            effects: effects
                .into_iter()
                .map(|(n, v)| (n.to_owned(), v))
                .collect(),
        }
    }

    /// `s` synth followed by `s`/`f` pairs.
    pub fn osc_args(&self) -> Vec<OscValue> {
        let mut args = vec![OscValue::Str(self.synth.clone())];
        for (name, value) in &self.effects {
            args.push(OscValue::Str(name.clone()));
            args.push(OscValue::Float(*value));
        }
        args
    }
}

fn default_f_min() -> f64 {
    65.41
}

fn default_f_max() -> f64 {
    2093.0
}

fn default_target() -> String {
    format!("127.0.0.1:{}", crate::transport::DEFAULT_TARGET_PORT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TherAlminConfig {
    /// Lowest pitch in Hz (C2).
    #[serde(default = "default_f_min")]
    pub f_min: f64,
    /// Highest pitch in Hz (C7).
    #[serde(default = "default_f_max")]
    pub f_max: f64,
    pub timbre_table: BTreeMap<String, Timbre>,
    /// Used for background and unknown labels, and before the first gesture.
    pub default_timbre: Timbre,
    #[serde(default = "default_target")]
    pub target: String,
}

impl Default for TherAlminConfig {
    fn default() -> Self {
        TherAlminConfig {
            f_min: default_f_min(),
            f_max: default_f_max(),
            timbre_table: [
                ("fist".to_owned(), Timbre::new("saw", vec![("cutoff", 0.3)])),
                ("open".to_owned(), Timbre::new("sine", vec![])),
                (
                    "point".to_owned(),
                    Timbre::new("square", vec![("reverb", 0.6)]),
                ),
            ]
            .into(),
            default_timbre: Timbre::new("sine", vec![]),
            target: default_target(),
        }
    }
}

impl TherAlminConfig {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |msg: String| Err(DeviceError::InvalidConfig(msg));
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max.is_finite()) {
            return bad(format!(
                "need 0 < f_min < f_max, got {} and {}",
                self.f_min, self.f_max
            ));
        }
        if self.timbre_table.is_empty() {
            return bad("timbre_table is empty".into());
        }
        for timbre in self.timbre_table.values().chain([&self.default_timbre]) {
            let names = std::iter::once(&timbre.synth).chain(timbre.effects.iter().map(|(n, _)| n));
            if names.into_iter().any(|n| n.contains('\0')) {
                return bad("timbre names must not contain NUL".into());
            }
        }
        Ok(())
    }

    fn transform(&self) -> ParamTransform {
        ParamTransform::Exponential {
            min: self.f_min,
            max: self.f_max,
        }
    }
}

/// Frequency in Hz for a normalized pitch-antenna reading.
pub fn pitch_map(p: f64, cfg: &TherAlminConfig) -> Result<f64, DeviceError> {
    Ok(cfg.transform().apply(check_unit(p)?))
}

/// Amplitude for a normalized volume-antenna reading (linear law).
pub fn amp_map(v: f64) -> Result<f64, DeviceError> {
    Ok(ParamTransform::Linear.apply(check_unit(v)?))
}

/// Timbre for a class label; background and unknown labels get the default.
pub fn timbre_select<'a>(label: &str, cfg: &'a TherAlminConfig) -> &'a Timbre {
    cfg.timbre_table.get(label).unwrap_or(&cfg.default_timbre)
}

#[derive(Debug, Clone)]
struct TimbreSelector {
    cfg: TherAlminConfig,
}

impl StageLogic for TimbreSelector {
    fn process(&mut self, input: &Payload) -> Result<Vec<Payload>, String> {
        let Payload::Class { label, .. } = input else {
            return Ok(vec![]);
        };
        let message = OscMessage::new(
            SELECTION_ADDRESS,
            timbre_select(label, &self.cfg).osc_args(),
        );
        Ok(vec![Payload::Control { message }])
    }

    fn clone_box(&self) -> Box<dyn StageLogic> {
        Box::new(self.clone())
    }
}

pub(crate) mod stage {
    pub const ANTENNAS: &str = "antennas";
    pub const CAMERA: &str = "camera";
    pub const PULSE_IO: &str = "pulse_io";
    pub const VIDEO_IO: &str = "video_io";
    pub const CLASSIFIER: &str = "gesture_classifier";
    pub const TIMBRE: &str = "timbre_select";
    pub const SYNTH: &str = "synth";
    pub const FEEDBACK: &str = "feedback";
}

/// Wire up the device:
///
/// ```text
/// antennas -> pulse_io -----------------------------------------> synth -> feedback
/// camera   -> video_io -> gesture_classifier -> timbre_select ---^
/// ```
///
/// `synth.freq` and `synth.amp` are bound to the `pitch` and `volume`
/// channels only; `synth.timbre` to the classifier's output only.
pub fn build_theralmin(
    cfg: &TherAlminConfig,
    model: &CentroidModel,
) -> Result<DeviceDescriptor, DeviceError> {
    use stage::*;
    cfg.validate()?;
    let synth = ProductionSpec {
        address: NOTE_ADDRESS.into(),
        params: vec![
            ParamSpec::new("freq", cfg.transform()),
            ParamSpec::new("amp", ParamTransform::Linear),
            ParamSpec::new("timbre", ParamTransform::Linear)
                .with_initial(cfg.default_timbre.osc_args()),
        ],
        throttle: Throttle::default(),
    };
    let mut graph = DeviceGraph::new();
    graph
        .add_stage(
            ANTENNAS,
            StageKind::StimulusCapture,
            Behavior::capture(["pitch", "volume"], false),
        )
        .add_stage(
            CAMERA,
            StageKind::StimulusCapture,
            Behavior::capture(Vec::<&str>::new(), true),
        )
        .add_stage(
            PULSE_IO,
            StageKind::StimulusAdaptation,
            Behavior::Passthrough,
        )
        .add_stage(
            VIDEO_IO,
            StageKind::StimulusAdaptation,
            Behavior::Passthrough,
        )
        .add_stage(
            CLASSIFIER,
            StageKind::Learning,
            Behavior::Classify(model.clone()),
        )
        .add_stage(
            TIMBRE,
            StageKind::MusicAdaptation,
            Behavior::Custom(Box::new(TimbreSelector { cfg: cfg.clone() })),
        )
        .add_stage(SYNTH, StageKind::Production, Behavior::Production(synth))
        .add_stage(FEEDBACK, StageKind::Feedback, Behavior::Sink)
        .connect(ANTENNAS, PULSE_IO)
        .connect(PULSE_IO, SYNTH)
        .connect(CAMERA, VIDEO_IO)
        .connect(VIDEO_IO, CLASSIFIER)
        .connect(CLASSIFIER, TIMBRE)
        .connect(TIMBRE, SYNTH)
        .connect(SYNTH, FEEDBACK)
        .bind(
            SYNTH,
            "freq",
            BindingSource::StimulusChannel("pitch".into()),
        )
        .bind(
            SYNTH,
            "amp",
            BindingSource::StimulusChannel("volume".into()),
        )
        .bind(
            SYNTH,
            "timbre",
            BindingSource::LearningOutput(CLASSIFIER.into()),
        );
    Ok(DeviceDescriptor {
        name: "theralmin".into(),
        codes: BTreeSet::from([TaxonomyCode::AUGMENTED_INSTRUMENT]),
        graph,
    })
}

/// Check that pitch and amplitude can only be driven by antenna channels
/// and timbre only by a learning stage. Returns one message per breach.
pub fn audit_independence(graph: &DeviceGraph) -> Result<(), Vec<String>> {
    let synth = StageId::from(stage::SYNTH);
    let mut problems = Vec::new();
    for (param, want_stimulus) in [("freq", true), ("amp", true), ("timbre", false)] {
        let sources = graph.sources_of(&synth, param);
        if sources.len() != 1 {
            problems.push(format!("{param} has {} sources, expected 1", sources.len()));
        }
        for source in sources {
            let ok = match source {
                BindingSource::StimulusChannel(_) => want_stimulus,
                BindingSource::LearningOutput(s) => {
                    !want_stimulus && graph.kind(s) == Some(StageKind::Learning)
                }
            };
            if !ok {
                problems.push(format!("{param} is driven by {source}"));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
