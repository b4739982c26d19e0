//! Dataset manifest: a JSON document tying trace files to structures,
//! sessions, and the feature specification used to process them.

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::io::read_trace_csv;
use crate::types::VibrationTrace;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// A structure (deployment site) descriptor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StructureInfo {
    pub id: String,
    pub material: String,
}

/// What kind of excitation a session recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpulseKind {
    FootstepWalk,
    FootstepStamp,
    BallDrop,
}

impl ImpulseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImpulseKind::FootstepWalk => "footstep_walk",
            ImpulseKind::FootstepStamp => "footstep_stamp",
            ImpulseKind::BallDrop => "ball_drop",
        }
    }
}

/// One trace file entry inside a session.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceRef {
    pub path: String,
    pub sensor_id: String,
    pub sensor_position_m: f64,
}

/// One recording session: a walk, a stamp series, or a ball-drop series,
/// on one structure, captured by one or more sensors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Session {
    pub id: String,
    pub structure_id: String,
    pub kind: ImpulseKind,
    /// Present for footstep sessions; ball drops have no person.
    pub person_id: Option<String>,
    /// Present for fixed-location excitations (stamps, ball drops).
    pub location_id: Option<String>,
    /// Ordering key for online streaming.
    pub timestamp_s: f64,
    pub traces: Vec<TraceRef>,
}

/// Root manifest document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub structures: Vec<StructureInfo>,
    pub feature_spec: FeatureSpec,
    pub sessions: Vec<Session>,
}

fn valid_id(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in &self.structures {
            if !valid_id(&s.id) {
                return Err(Error::InvalidParameter {
                    name: "structure_id",
                    reason: format!("invalid id {:?}", s.id),
                });
            }
            if !seen.insert(&s.id) {
                return Err(Error::InvalidParameter {
                    name: "structure_id",
                    reason: format!("duplicate id {:?}", s.id),
                });
            }
        }
        let mut session_ids = BTreeSet::new();
        for sess in &self.sessions {
            if !session_ids.insert(&sess.id) {
                return Err(Error::InvalidParameter {
                    name: "session_id",
                    reason: format!("duplicate id {:?}", sess.id),
                });
            }
            if !self.structures.iter().any(|st| st.id == sess.structure_id) {
                return Err(Error::InvalidParameter {
                    name: "session.structure_id",
                    reason: format!("session {:?} references unknown structure {:?}", sess.id, sess.structure_id),
                });
            }
            for id in [&sess.person_id, &sess.location_id].into_iter().flatten() {
                if !valid_id(id) {
                    return Err(Error::InvalidParameter {
                        name: "session_label",
                        reason: format!("invalid id {id:?}"),
                    });
                }
            }
        }
        self.feature_spec.validate()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::MalformedManifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// A session with its traces loaded and validated.
#[derive(Debug, Clone)]
pub struct LoadedSession {
    pub session: Session,
    pub traces: Vec<VibrationTrace>,
}

/// A fully loaded dataset: manifest plus every referenced trace.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub sessions: Vec<LoadedSession>,
    /// Directory the manifest was loaded from; trace paths resolve against it.
    pub root: PathBuf,
}

/// Load a manifest and every trace it references. Trace paths are taken
/// relative to the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut sessions = Vec::with_capacity(manifest.sessions.len());
    for sess in &manifest.sessions {
        let mut traces = Vec::with_capacity(sess.traces.len());
        for tr in &sess.traces {
            let path = root.join(&tr.path);
            traces.push(read_trace_csv(&path, &tr.sensor_id, tr.sensor_position_m)?);
        }
        sessions.push(LoadedSession {
            session: sess.clone(),
            traces,
        });
    }
    Ok(Dataset {
        manifest,
        sessions,
        root,
    })
}

impl Dataset {
    /// Distinct person ids present in the dataset, sorted.
    /// Identities the pipeline is asked to tell apart: persons who
    /// *walk*. Calibration stampers label their stamp sessions but are
    /// not identification targets.
    pub fn person_ids(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .sessions
            .iter()
            .filter(|s| s.session.kind == ImpulseKind::FootstepWalk)
            .filter_map(|s| s.session.person_id.clone())
            .collect();
        set.into_iter().collect()
    }

    pub fn structure_ids(&self) -> Vec<String> {
        self.manifest.structures.iter().map(|s| s.id.clone()).collect()
    }

    /// Sessions on one structure, ordered by timestamp then id.
    pub fn sessions_for_structure(&self, structure_id: &str) -> Vec<&LoadedSession> {
        let mut out: Vec<&LoadedSession> = self
            .sessions
            .iter()
            .filter(|s| s.session.structure_id == structure_id)
            .collect();
        out.sort_by(|a, b| {
            a.session
                .timestamp_s
                .total_cmp(&b.session.timestamp_s)
                .then_with(|| a.session.id.cmp(&b.session.id))
        });
        out
    }
}
