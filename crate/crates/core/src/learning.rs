//! Nearest-centroid classification with a background class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const DEFAULT_BACKGROUND_LABEL: &str = "background";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearningError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature vectors must have at least one component")]
    ZeroDimension,
    #[error("tau must be positive and finite, got {0}")]
    NonPositiveTau(f64),
    #[error("non-finite feature value")]
    NonFinite,
    #[error("label {0:?} is reserved for the background class")]
    ReservedLabel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub label: String,
    pub features: Vec<f64>,
}

impl LabeledSample {
    pub fn new(label: impl Into<String>, features: Vec<f64>) -> Self {
        LabeledSample {
            label: label.into(),
            features,
        }
    }
}

/// Outcome of [`CentroidModel::classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    /// Softmax of negated distances, evaluated at the nearest centroid.
    /// Kept even when the label falls back to background.
    pub confidence: f64,
    pub distance: f64,
}

/// Trained state of the learning layer.
///
/// Centroids live in a `BTreeMap`, so iteration (and therefore tie-breaking)
/// is lexicographic by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct CentroidModel {
    dim: usize,
    tau: f64,
    background_label: String,
    centroids: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    dim: usize,
    tau: f64,
    #[serde(default = "default_background")]
    background_label: String,
    centroids: BTreeMap<String, Vec<f64>>,
}

fn default_background() -> String {
    DEFAULT_BACKGROUND_LABEL.to_owned()
}

impl TryFrom<ModelFile> for CentroidModel {
    type Error = LearningError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        CentroidModel::new(f.dim, f.tau, f.background_label, f.centroids)
    }
}

impl From<CentroidModel> for ModelFile {
    fn from(m: CentroidModel) -> Self {
        ModelFile {
            dim: m.dim,
            tau: m.tau,
            background_label: m.background_label,
            centroids: m.centroids,
        }
    }
}

fn check_tau(tau: f64) -> Result<(), LearningError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(LearningError::NonPositiveTau(tau))
    }
}

impl CentroidModel {
    pub fn new(
        dim: usize,
        tau: f64,
        background_label: impl Into<String>,
        centroids: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, LearningError> {
        let background_label = background_label.into();
        if dim == 0 {
            return Err(LearningError::ZeroDimension);
        }
        check_tau(tau)?;
        if centroids.is_empty() {
            return Err(LearningError::EmptyDataset);
        }
        if centroids.contains_key(&background_label) {
            return Err(LearningError::ReservedLabel(background_label));
        }
        for c in centroids.values() {
            if c.len() != dim {
                return Err(LearningError::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(LearningError::NonFinite);
            }
        }
        Ok(CentroidModel {
            dim,
            tau,
            background_label,
            centroids,
        })
    }

    /// Average each label's samples into one centroid.
    pub fn train(samples: &[LabeledSample], tau: f64) -> Result<Self, LearningError> {
        Self::train_with_background(samples, tau, DEFAULT_BACKGROUND_LABEL)
    }

    pub fn train_with_background(
        samples: &[LabeledSample],
        tau: f64,
        background_label: &str,
    ) -> Result<Self, LearningError> {
        check_tau(tau)?;
        let first = samples.first().ok_or(LearningError::EmptyDataset)?;
        let dim = first.features.len();
        if dim == 0 {
            return Err(LearningError::ZeroDimension);
        }
        let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
        for s in samples {
            if s.features.len() != dim {
                return Err(LearningError::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(LearningError::NonFinite);
            }
            let (sum, count) = sums.entry(&s.label).or_insert_with(|| (vec![0.0; dim], 0));
            for (acc, v) in sum.iter_mut().zip(&s.features) {
                *acc += v;
            }
            *count += 1;
        }
        let centroids = sums
            .into_iter()
            .map(|(label, (sum, count))| {
                let n = count as f64;
                (label.to_owned(), sum.into_iter().map(|v| v / n).collect())
            })
            .collect();
        Self::new(dim, tau, background_label, centroids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn background_label(&self) -> &str {
        &self.background_label
    }

    pub fn centroids(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.centroids
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.centroids.keys().map(String::as_str)
    }

    /// Same model with a different background threshold.
    pub fn with_tau(&self, tau: f64) -> Result<Self, LearningError> {
        check_tau(tau)?;
        Ok(CentroidModel {
            tau,
            ..self.clone()
        })
    }

    pub fn classify(&self, x: &[f64]) -> Result<Classification, LearningError> {
        if x.len() != self.dim {
            return Err(LearningError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let distances: Vec<(&str, f64)> = self
            .centroids
            .iter()
            .map(|(label, c)| (label.as_str(), euclidean(x, c)))
            .collect();
        // Strict `<` keeps the lexicographically first label on ties.
        let (mut label, best) =
            distances.iter().fold(
                distances[0],
                |best, &cand| {
                    if cand.1 < best.1 {
                        cand
                    } else {
                        best
                    }
                },
            );
        // Shift by the winner's distance so the winning term is exp(0) = 1.
        let partition: f64 = distances.iter().map(|&(_, d)| (best - d).exp()).sum();
        let confidence = 1.0 / partition;
        if best > self.tau || best.is_nan() {
            label = &self.background_label;
        }
        Ok(Classification {
            label: label.to_owned(),
            confidence,
            distance: best,
        })
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
