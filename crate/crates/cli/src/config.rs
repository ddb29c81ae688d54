use std::path::{Path, PathBuf};

use faime_core::devices::{
    build_emotiwatch, build_theralmin, validate_taxonomy, DeviceDescriptor, EmotiWatchConfig,
    TherAlminConfig, Track,
};
use faime_core::learning::CentroidModel;
use faime_core::pipeline::{Behavior, Throttle};
use faime_core::transport::DEFAULT_TARGET_PORT;
use serde::{Deserialize, Serialize};

pub const DEFAULT_WS_PORT: u16 = 8765;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Theralmin,
    Emotiwatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotiWatchSection {
    pub catalog: Vec<Track>,
}

/// On-disk device configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfigFile {
    pub device: DeviceKind,
    /// Model file, relative to the config file's directory.
    pub model: PathBuf,
    #[serde(default)]
    pub theralmin: Option<TherAlminConfig>,
    #[serde(default)]
    pub emotiwatch: Option<EmotiWatchSection>,
    /// `host:port` for OSC output; overrides the device section.
    #[serde(default)]
    pub target: Option<String>,
    /// Max messages per second per production stage.
    #[serde(default)]
    pub throttle: Option<f64>,
    #[serde(default)]
    pub ws_port: Option<u16>,
    /// Extra taxonomy codes on top of the device's own.
    #[serde(default)]
    pub codes: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Invalid(_) => crate::EXIT_INVALID,
            _ => crate::EXIT_IO,
        }
    }
}

/// A configuration that parsed, built and validated.
#[derive(Debug, Clone)]
pub struct LoadedDevice {
    pub kind: DeviceKind,
    pub descriptor: DeviceDescriptor,
    pub target: String,
    pub ws_port: u16,
}

impl LoadedDevice {
    /// Feature dimension expected by the device's classifier, if any.
    pub fn gesture_dim(&self) -> Option<usize> {
        let graph = &self.descriptor.graph;
        graph.stage_ids().find_map(|id| match graph.behavior(id) {
            Some(Behavior::Classify(m)) => Some(m.dim()),
            _ => None,
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Parse, build and validate. Every rule violation is collected into
/// [`ConfigError::Invalid`].
pub fn load(path: &Path) -> Result<LoadedDevice, ConfigError> {
    let file: DeviceConfigFile = read_json(path)?;
    let model_path = path.parent().unwrap_or(Path::new(".")).join(&file.model);
    let model: CentroidModel = read_json(&model_path)?;

    let mut problems = Vec::new();
    let built = match file.device {
        DeviceKind::Theralmin => {
            let cfg = file.theralmin.clone().unwrap_or_default();
            build_theralmin(&cfg, &model).map(|d| (d, cfg.target))
        }
        DeviceKind::Emotiwatch => match &file.emotiwatch {
            Some(section) => EmotiWatchConfig::new(model, section.catalog.clone())
                .and_then(|cfg| build_emotiwatch(&cfg))
                .map(|d| (d, format!("127.0.0.1:{DEFAULT_TARGET_PORT}"))),
            None => {
                problems.push("missing \"emotiwatch\" section".to_owned());
                return Err(ConfigError::Invalid(problems));
            }
        },
    };
    let (mut descriptor, device_target) = match built {
        Ok(b) => b,
        Err(e) => {
            problems.push(e.to_string());
            return Err(ConfigError::Invalid(problems));
        }
    };

    for code in &file.codes {
        match validate_taxonomy(code) {
            Ok(c) => {
                descriptor.codes.insert(c);
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    if let Some(rate) = file.throttle {
        match Throttle::new(rate) {
            Some(t) => descriptor.set_throttle(t),
            None => problems.push(format!("throttle must be positive, got {rate}")),
        }
    }
    if let Err(violations) = descriptor.graph.validate() {
        problems.extend(violations.0.iter().map(ToString::to_string));
    }
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems));
    }
    Ok(LoadedDevice {
        kind: file.device,
        descriptor,
        target: file.target.unwrap_or(device_target),
        ws_port: file.ws_port.unwrap_or(DEFAULT_WS_PORT),
    })
}
