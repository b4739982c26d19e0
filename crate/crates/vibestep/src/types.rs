//! Core domain types: vibration traces, segmented footstep events,
//! frequency-band feature vectors, and grouped feature collections.
//!
//! All types here are immutable after construction and validate their
//! invariants in the constructor, so downstream code can rely on them
//! without re-checking.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Time series from one vibration sensor channel.
#[derive(Debug, Clone, PartialEq)]
pub struct VibrationTrace {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    pub sensor_id: String,
    /// Sensor position along the walkway axis, in meters.
    pub sensor_position_m: f64,
}

impl VibrationTrace {
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: f64,
        sensor_id: impl Into<String>,
        sensor_position_m: f64,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sample_rate_hz",
                reason: format!("must be positive and finite, got {sample_rate_hz}"),
            });
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "trace must contain at least one sample".into(),
            });
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: format!("non-finite sample at index {i}"),
            });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            sensor_id: sensor_id.into(),
            sensor_position_m,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: nonempty
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// One segmented footstep inside a trace, located by sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootstepEvent {
    pub start_index: usize,
    pub peak_index: usize,
    pub end_index: usize,
}

impl FootstepEvent {
    pub fn new(start_index: usize, peak_index: usize, end_index: usize, trace_len: usize) -> Result<Self> {
        if !(start_index < peak_index && peak_index < end_index && end_index <= trace_len) {
            return Err(Error::InvalidParameter {
                name: "footstep_event",
                reason: format!(
                    "need start < peak < end <= len, got {start_index} / {peak_index} / {end_index} (len {trace_len})"
                ),
            });
        }
        Ok(Self {
            start_index,
            peak_index,
            end_index,
        })
    }
}

/// Optional provenance labels attached to a feature vector.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLabels {
    pub person_id: Option<String>,
    pub location_id: Option<String>,
    pub structure_id: Option<String>,
}

/// Frequency-band amplitude features of one footstep.
///
/// `values[i]` is the square root of the signal energy falling in band
/// `[band_edges_hz[i], band_edges_hz[i+1])`, so values are nonnegative by
/// construction and scale linearly with the input signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    band_edges_hz: Vec<f64>,
    pub labels: FeatureLabels,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, band_edges_hz: Vec<f64>, labels: FeatureLabels) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("need at least 2 bands, got {}", values.len()),
            });
        }
        if band_edges_hz.len() != values.len() + 1 {
            return Err(Error::InvalidParameter {
                name: "band_edges_hz",
                reason: format!(
                    "need {} edges for {} bands, got {}",
                    values.len() + 1,
                    values.len(),
                    band_edges_hz.len()
                ),
            });
        }
        if band_edges_hz.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter {
                name: "band_edges_hz",
                reason: "edges must be strictly ascending".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "band amplitudes must be finite and nonnegative".into(),
            });
        }
        Ok(Self {
            values,
            band_edges_hz,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn band_edges_hz(&self) -> &[f64] {
        &self.band_edges_hz
    }

    /// Arithmetic band centers in rad/s, used by the attenuation map.
    pub fn band_centers_rad_s(&self) -> Vec<f64> {
        self.band_edges_hz
            .windows(2)
            .map(|w| std::f64::consts::PI * (w[0] + w[1])) // 2*pi * (lo+hi)/2
            .collect()
    }

    /// Same bands, new values. Used by transforms that preserve the band set.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.band_edges_hz.clone(), self.labels.clone())
    }
}

/// How a [`GroupedFeatures`] collection was partitioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupingMode {
    ByLocation,
    ByPerson,
}

impl GroupingMode {
    fn label_name(&self) -> &'static str {
        match self {
            GroupingMode::ByLocation => "location",
            GroupingMode::ByPerson => "person",
        }
    }
}

/// Feature vectors partitioned into nonempty groups sharing one dimension.
///
/// Groups are ordered by key so that all downstream accumulations run in a
/// fixed, reproducible order.
#[derive(Debug, Clone)]
pub struct GroupedFeatures {
    groups: Vec<(String, Vec<FeatureVector>)>,
    mode: GroupingMode,
    dim: usize,
}

impl GroupedFeatures {
    /// Partition `features` by the label selected by `mode`. Fails if any
    /// vector lacks that label or dimensions are inconsistent.
    pub fn from_labels(features: Vec<FeatureVector>, mode: GroupingMode) -> Result<Self> {
        let mut keyed: Vec<(String, FeatureVector)> = Vec::with_capacity(features.len());
        for (i, f) in features.into_iter().enumerate() {
            let key = match mode {
                GroupingMode::ByLocation => f.labels.location_id.clone(),
                GroupingMode::ByPerson => f.labels.person_id.clone(),
            };
            match key {
                Some(k) => keyed.push((k, f)),
                None => {
                    return Err(Error::MissingLabel {
                        mode: mode.label_name(),
                        index: i,
                    })
                }
            }
        }
        let mut map = std::collections::BTreeMap::<String, Vec<FeatureVector>>::new();
        for (k, f) in keyed {
            map.entry(k).or_default().push(f);
        }
        Self::from_groups(map.into_iter().collect(), mode)
    }

    /// Build from explicit groups; keys keep the given order.
    pub fn from_groups(groups: Vec<(String, Vec<FeatureVector>)>, mode: GroupingMode) -> Result<Self> {
        let dim = groups
            .iter()
            .flat_map(|(_, v)| v.iter())
            .map(|f| f.dim())
            .next()
            .ok_or_else(|| Error::DegenerateData {
                reason: "no feature vectors in any group".into(),
            })?;
        for (key, vs) in &groups {
            if vs.is_empty() {
                return Err(Error::GroupTooSmall {
                    group: key.clone(),
                    count: 0,
                    min: 1,
                });
            }
            for f in vs {
                if f.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: f.dim(),
                    });
                }
            }
        }
        Ok(Self { groups, mode, dim })
    }

    pub fn mode(&self) -> GroupingMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[(String, Vec<FeatureVector>)] {
        &self.groups
    }

    pub fn total_count(&self) -> usize {
        self.groups.iter().map(|(_, v)| v.len()).sum()
    }

    /// All vectors in group order.
    pub fn iter_all(&self) -> impl Iterator<Item = &FeatureVector> {
        self.groups.iter().flat_map(|(_, v)| v.iter())
    }

    /// Apply `f` to every vector's values, keeping group structure.
    pub fn map_values(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<(String, Vec<Vec<f64>>)> {
        self.groups
            .iter()
            .map(|(k, vs)| (k.clone(), vs.iter().map(|v| f(v.values())).collect()))
            .collect()
    }
}
