//! End-to-end pipeline stages shared by the command-line tool and the
//! integration tests: feature extraction over a dataset, the
//! location-variability study, offline transform evaluation, and the
//! online open-set identification run.
//!
//! The online run is the core loop: a mixture model seeded with one
//! person streams the remaining walks in time order. Whenever a new
//! cluster accumulates enough members it is "confirmed" as a newcomer;
//! each confirmation refits the discriminant transform on the cluster
//! pseudo-labels collected so far, maps the whole history into the new
//! space, and rebuilds the mixture by replaying its assignment log.
//!
//! All identification stages (transform fitting, evaluation, online
//! clustering, frozen-model scoring) work in the modeling feature
//! space selected by the extraction spec's flags — raw band amplitudes
//! by default; see [`FeatureSpec::model_values`]. The
//! location-variability decomposition always runs on raw amplitudes,
//! the quantity whose footstep/structure split the study is about.

use crate::detect::detect_events;
use crate::dpmm::{
    Assignment, AssignmentMode, DpmmConfig, DpmmModel, NewcomerEvent, StreamTrace,
};
use crate::error::{Error, Result};
use crate::exec::try_par_map;
use crate::features::{extract_all, FeatureSpec};
use crate::fisher::{within_total_trace_ratio, FisherConfig, FisherTransform};
use crate::io::fmt_f64;
use crate::manifest::{Dataset, ImpulseKind};
use crate::scenario::ScenarioConfig;
use crate::types::{FeatureLabels, FeatureVector, GroupedFeatures, GroupingMode};
use crate::variability::{decompose_variability, VariabilitySummary};
use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::Path;

/// Everything the rest of the pipeline needs to know about one session,
/// with its extracted footstep features.
#[derive(Debug, Clone)]
pub struct SessionFeatures {
    pub session_id: String,
    pub structure_id: String,
    pub kind: ImpulseKind,
    pub person_id: Option<String>,
    pub location_id: Option<String>,
    pub timestamp_s: f64,
    /// Feature vectors in (sensor, event) order.
    pub features: Vec<FeatureVector>,
    /// Sensor (trace) index of each feature, aligned with `features`.
    pub sensor_of: Vec<usize>,
}

/// Detect and featurize every session of a dataset (in parallel).
/// Sessions keep their dataset order; a session with no detected events
/// simply carries no features.
pub fn extract_dataset(dataset: &Dataset, spec: &FeatureSpec) -> Result<Vec<SessionFeatures>> {
    spec.validate()?;
    let jobs: Vec<usize> = (0..dataset.sessions.len()).collect();
    try_par_map(jobs, |i| {
        let loaded = &dataset.sessions[i];
        let sess = &loaded.session;
        let labels = FeatureLabels {
            person_id: sess.person_id.clone(),
            location_id: sess.location_id.clone(),
            structure_id: Some(sess.structure_id.clone()),
        };
        let mut features = Vec::new();
        let mut sensor_of = Vec::new();
        for (sensor, trace) in loaded.traces.iter().enumerate() {
            let events = detect_events(trace, spec)?;
            let extracted = extract_all(trace, &events, spec, &labels)?;
            sensor_of.extend(std::iter::repeat(sensor).take(extracted.len()));
            features.extend(extracted);
        }
        Ok(SessionFeatures {
            session_id: sess.id.clone(),
            structure_id: sess.structure_id.clone(),
            kind: sess.kind,
            person_id: sess.person_id.clone(),
            location_id: sess.location_id.clone(),
            timestamp_s: sess.timestamp_s,
            features,
            sensor_of,
        })
    })
}

/// Flatten extracted sessions into one feature list (dataset order).
pub fn all_features(sessions: &[SessionFeatures]) -> Vec<FeatureVector> {
    sessions
        .iter()
        .flat_map(|s| s.features.iter().cloned())
        .collect()
}

/// Convert one feature vector into the modeling space of `spec`
/// (identity with the default flags; see [`FeatureSpec::model_values`]).
pub fn model_dvec(spec: &FeatureSpec, f: &FeatureVector) -> DVector<f64> {
    DVector::from_vec(spec.model_values(f.values()))
}

/// Group features by `mode` and convert members to modeling-space
/// vectors; returns the group keys alongside.
pub fn model_vector_groups(
    spec: &FeatureSpec,
    features: Vec<FeatureVector>,
    mode: GroupingMode,
) -> Result<(Vec<String>, Vec<Vec<DVector<f64>>>)> {
    let grouped = GroupedFeatures::from_labels(features, mode)?;
    let mut keys = Vec::with_capacity(grouped.group_count());
    let mut groups = Vec::with_capacity(grouped.group_count());
    for (key, members) in grouped.groups() {
        keys.push(key.clone());
        groups.push(members.iter().map(|f| model_dvec(spec, f)).collect());
    }
    Ok((keys, groups))
}

// ---------------------------------------------------------------------
// Variability decomposition (location study)
// ---------------------------------------------------------------------

/// Per-structure variability decomposition results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureVariability {
    /// One summary per impulse kind present at fixed locations.
    pub by_kind: BTreeMap<String, VariabilitySummary>,
}

/// The cross-structure variability report (`variability.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    pub structures: BTreeMap<String, StructureVariability>,
}

/// One point of the location scatter (`scatter_decompose.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub structure_id: String,
    pub kind: String,
    pub location_id: String,
    pub pc1: f64,
    pub pc2: f64,
}

/// Decompose feature variability into footstep vs structure components
/// for every (structure, impulse kind) with located sessions, and
/// project each structure's located features onto their top two
/// principal components for plotting.
pub fn decompose_located(
    sessions: &[SessionFeatures],
) -> Result<(VariabilityReport, Vec<ScatterRow>)> {
    let mut report = VariabilityReport {
        structures: BTreeMap::new(),
    };
    let mut scatter = Vec::new();

    let structure_ids: BTreeSet<String> =
        sessions.iter().map(|s| s.structure_id.clone()).collect();
    for structure_id in structure_ids {
        // located = fixed-location excitations: ball drops and stamps
        let located: Vec<&SessionFeatures> = sessions
            .iter()
            .filter(|s| s.structure_id == structure_id && s.location_id.is_some())
            .collect();
        if located.is_empty() {
            continue;
        }
        let mut by_kind: BTreeMap<String, Vec<FeatureVector>> = BTreeMap::new();
        for s in &located {
            by_kind
                .entry(s.kind.as_str().to_string())
                .or_default()
                .extend(s.features.iter().cloned());
        }
        let mut kind_summaries = BTreeMap::new();
        for (kind, feats) in &by_kind {
            if feats.is_empty() {
                continue;
            }
            let grouped = GroupedFeatures::from_labels(feats.clone(), GroupingMode::ByLocation)?;
            let summary = if grouped.group_count() == 1 {
                // a single location has no structure axis to vary over:
                // everything observed is footstep variability
                let vectors: Vec<DVector<f64>> = grouped
                    .iter_all()
                    .map(|f| DVector::from_column_slice(f.values()))
                    .collect();
                let mu = crate::variability::mean_of(&vectors);
                VariabilitySummary {
                    group_count: 1,
                    sample_count: vectors.len(),
                    footstep_trace: crate::variability::scatter_around(&vectors, &mu).trace(),
                    structure_trace: 0.0,
                    structure_share: 0.0,
                }
            } else {
                decompose_variability(&grouped)?.summary(grouped.total_count())
            };
            kind_summaries.insert(kind.clone(), summary);
        }
        report
            .structures
            .insert(structure_id.clone(), StructureVariability {
                by_kind: kind_summaries,
            });

        // one shared 2-D principal projection per structure, all kinds
        let vectors: Vec<DVector<f64>> = located
            .iter()
            .flat_map(|s| s.features.iter().map(|f| DVector::from_column_slice(f.values())))
            .collect();
        if vectors.len() >= 2 {
            let (mean, basis) = principal_basis(&vectors, 2)?;
            let mut vi = 0usize;
            for s in &located {
                for _ in &s.features {
                    let centered = &vectors[vi] - &mean;
                    let proj = basis.tr_mul(&centered);
                    scatter.push(ScatterRow {
                        structure_id: structure_id.clone(),
                        kind: s.kind.as_str().to_string(),
                        location_id: s.location_id.clone().unwrap_or_default(),
                        pc1: proj[0],
                        pc2: if proj.len() > 1 { proj[1] } else { 0.0 },
                    });
                    vi += 1;
                }
            }
        }
    }
    if report.structures.is_empty() {
        return Err(Error::DegenerateData {
            reason: "no fixed-location sessions to decompose".into(),
        });
    }
    Ok((report, scatter))
}

/// Top-`k` principal components of a vector cloud: returns the mean and
/// a d×k orthonormal basis, components ordered by descending variance.
/// Deterministic up to nothing: each component's first significantly
/// nonzero entry is made positive.
pub fn principal_basis(
    vectors: &[DVector<f64>],
    k: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if vectors.len() < 2 {
        return Err(Error::DegenerateData {
            reason: format!("principal basis needs >= 2 vectors, got {}", vectors.len()),
        });
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: vectors.iter().map(DVector::len).find(|&l| l != d).unwrap(),
        });
    }
    let n = vectors.len() as f64;
    let mut mean = DVector::zeros(d);
    for v in vectors {
        mean += v;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for v in vectors {
        let c = v - &mean;
        cov.ger(1.0 / n, &c, &c, 1.0);
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = k.min(d);
    let mut basis = DMatrix::zeros(d, k);
    for (j, &src) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12 * norm) {
            if *lead < 0.0 {
                col = -col;
            }
        }
        basis.set_column(j, &col);
    }
    Ok((mean, basis))
}

// ---------------------------------------------------------------------
// Offline transform evaluation
// ---------------------------------------------------------------------

/// Offline per-structure transform quality (`evaluate` command).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// tr(S_W)/tr(S_T) grouped by person, in the untransformed
    /// modeling space.
    pub within_total_before: f64,
    /// The same ratio after the fitted transform.
    pub within_total_after: f64,
    /// 1 - after/before: fraction of within-person variability removed.
    pub within_person_variability_ratio: f64,
    /// Rayleigh quotient of the leading discriminant direction.
    pub fisher_objective: f64,
    pub eigenvalues: Vec<f64>,
    pub output_dim: usize,
    pub sample_count: usize,
    pub person_count: usize,
}

/// The full offline evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub structures: BTreeMap<String, EvalMetrics>,
}

/// Fit a by-person discriminant transform on one structure's walk
/// features (in the modeling space of `spec`) and measure how much
/// within-person variability it removes.
pub fn evaluate_structure(
    spec: &FeatureSpec,
    walk_features: Vec<FeatureVector>,
    fisher: &FisherConfig,
) -> Result<EvalMetrics> {
    let (_, groups) = model_vector_groups(spec, walk_features, GroupingMode::ByPerson)?;
    let transform = FisherTransform::fit(&groups, fisher)?;
    let before = within_total_trace_ratio(&groups)?;
    let transformed: Vec<Vec<DVector<f64>>> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|x| transform.transform_vector(x))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let after = within_total_trace_ratio(&transformed)?;
    Ok(EvalMetrics {
        within_total_before: before,
        within_total_after: after,
        within_person_variability_ratio: 1.0 - after / before,
        fisher_objective: transform.objective(&groups)?,
        eigenvalues: transform.eigenvalues.clone(),
        output_dim: transform.output_dim(),
        sample_count: groups.iter().map(Vec::len).sum(),
        person_count: groups.len(),
    })
}

/// Run [`evaluate_structure`] for every structure with walk features.
pub fn evaluate_dataset(
    spec: &FeatureSpec,
    sessions: &[SessionFeatures],
    fisher: &FisherConfig,
) -> Result<EvaluateReport> {
    let mut report = EvaluateReport {
        structures: BTreeMap::new(),
    };
    let structure_ids: BTreeSet<String> =
        sessions.iter().map(|s| s.structure_id.clone()).collect();
    for sid in structure_ids {
        let walks: Vec<FeatureVector> = sessions
            .iter()
            .filter(|s| s.structure_id == sid && s.kind == ImpulseKind::FootstepWalk)
            .flat_map(|s| s.features.iter().cloned())
            .collect();
        if walks.is_empty() {
            continue;
        }
        report
            .structures
            .insert(sid, evaluate_structure(spec, walks, fisher)?);
    }
    if report.structures.is_empty() {
        return Err(Error::DegenerateData {
            reason: "no walk features to evaluate".into(),
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------
// Online identification
// ---------------------------------------------------------------------

/// Knobs of the online run, beyond the mixture and transform configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineOptions {
    /// When false, the discriminant transform stays off (ablation).
    pub transform_enabled: bool,
    /// Person whose earliest walks seed the model; default: the person
    /// of the earliest walk session.
    pub seed_person: Option<String>,
    /// How many of the seed person's earliest walk sessions to absorb
    /// before streaming.
    pub seed_walks: usize,
    /// Cluster size at which a new cluster counts as a confirmed
    /// newcomer (triggering a transform refit).
    pub newcomer_confirmation: usize,
    /// Dimension of the structure-invariant calibration subspace fit
    /// before streaming; default: the complement of the between-location
    /// rank (see [`FisherTransform::fit_invariant`]).
    pub calibration_components: Option<usize>,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self {
            transform_enabled: true,
            seed_person: None,
            seed_walks: 3,
            newcomer_confirmation: 12,
            calibration_components: None,
        }
    }
}

/// A transform refit during the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitEvent {
    /// Streamed-sample index right after which the refit happened.
    pub sample_index: usize,
    pub confirmed_clusters: usize,
    pub output_dim: usize,
}

/// Within-person variability before/after the final transform, grouped
/// by true person over all absorbed samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineVariability {
    pub within_total_before: f64,
    pub within_total_after: f64,
    pub within_person_variability_ratio: f64,
}

/// Outcome of the online run on one structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureOnlineReport {
    pub structure_id: String,
    pub seed_person: String,
    pub seed_samples: usize,
    pub streamed_samples: usize,
    pub matched_samples: usize,
    pub accuracy: f64,
    /// Optimal cluster-to-person matching over streamed samples.
    pub mapping: BTreeMap<usize, Option<String>>,
    /// Output dimension of the calibration-fit invariant transform the
    /// stream started under; `None` when streaming started untransformed
    /// (ablation, or no usable calibration sessions).
    pub initial_output_dim: Option<usize>,
    pub newcomer_log: Vec<NewcomerEvent>,
    pub refit_log: Vec<RefitEvent>,
    pub cluster_sizes: Vec<(usize, usize)>,
    pub variability: OnlineVariability,
}

/// One point of a 2-D projection CSV (Figure-style scatter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub structure_id: String,
    pub person_id: String,
    pub pc1: f64,
    pub pc2: f64,
}

/// The full online report (`report.json`), plus projection data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub transform_enabled: bool,
    pub structures: Vec<StructureOnlineReport>,
    #[serde(skip)]
    pub projection_before: Vec<ProjectionRow>,
    #[serde(skip)]
    pub projection_after: Vec<ProjectionRow>,
}

struct OnlineState<'a> {
    fisher: &'a FisherConfig,
    dpmm: DpmmConfig,
    opts: &'a OnlineOptions,
    /// The structure-invariant calibration transform, kept so refits can
    /// fold it back in (it preserves room for still-unseen persons).
    invariant: Option<FisherTransform>,
    transform: Option<FisherTransform>,
    model: DpmmModel,
    /// Base (modeling-space, pre-transform) vector, true person,
    /// assigned cluster — one entry per absorbed sample, seed included,
    /// in absorption order.
    base: Vec<DVector<f64>>,
    log_person: Vec<String>,
    log_cluster: Vec<usize>,
    confirmed: BTreeSet<usize>,
    stream_pairs: Vec<(usize, String)>,
    newcomer_log: Vec<NewcomerEvent>,
    refit_log: Vec<RefitEvent>,
}

impl<'a> OnlineState<'a> {
    fn apply_transform(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.transform {
            Some(t) => t.transform_vector(x),
            None => Ok(x.clone()),
        }
    }

    fn absorb_streamed(
        &mut self,
        raw: &DVector<f64>,
        person: &str,
        trace_id: &str,
        forced: Option<usize>,
    ) -> Result<usize> {
        let x = self.apply_transform(raw)?;
        let (cluster_id, is_new) = match forced {
            Some(id) => {
                let known = self.model.cluster_sizes().iter().any(|(c, _)| *c == id);
                (self.model.observe_forced(&x, id)?, !known)
            }
            None => {
                let out = self.model.observe(&x)?;
                (out.cluster_id, out.is_new_cluster)
            }
        };
        if is_new {
            self.newcomer_log.push(NewcomerEvent {
                sample_index: self.stream_pairs.len(),
                trace_id: trace_id.to_string(),
                cluster_id,
            });
        }
        self.base.push(raw.clone());
        self.log_person.push(person.to_string());
        self.log_cluster.push(cluster_id);
        self.stream_pairs.push((cluster_id, person.to_string()));
        Ok(cluster_id)
    }

    /// Confirm any cluster that crossed the membership threshold; if a
    /// confirmation happened and at least two clusters are confirmed,
    /// refit the transform and rebuild the model in the new space.
    ///
    /// The refit transform is the union of a by-person discriminant fit
    /// on the confirmed clusters (pseudo-labels) and the fixed
    /// calibration-invariant basis: the discriminant part sharpens the
    /// separation of everyone confirmed so far, while the invariant part
    /// keeps the structure-cleaned directions where a still-unseen
    /// person can show up apart from everyone known.
    fn maybe_refit(&mut self) -> Result<()> {
        let mut newly_confirmed = false;
        for (id, n) in self.model.cluster_sizes() {
            if n >= self.opts.newcomer_confirmation && self.confirmed.insert(id) {
                newly_confirmed = true;
            }
        }
        if !newly_confirmed || !self.opts.transform_enabled || self.confirmed.len() < 2 {
            return Ok(());
        }
        // pseudo-labeled classes: the confirmed clusters' base samples
        let mut classes: BTreeMap<usize, Vec<DVector<f64>>> = BTreeMap::new();
        for (x, cluster) in self.base.iter().zip(&self.log_cluster) {
            if self.confirmed.contains(cluster) {
                classes.entry(*cluster).or_default().push(x.clone());
            }
        }
        let groups: Vec<Vec<DVector<f64>>> = classes.into_values().collect();
        let c = groups.len();
        let d = groups[0][0].len();
        // a configured component count shrinks while few classes exist
        let effective = FisherConfig {
            n_components: self
                .fisher
                .n_components
                .map(|m| m.min(c - 1).min(d).max(1)),
            regularization: self.fisher.regularization,
        };
        let discriminant = FisherTransform::fit(&groups, &effective)?;
        let transform = match &self.invariant {
            Some(inv) => union_transform(&discriminant, inv)?,
            None => discriminant,
        };
        let history: Vec<(DVector<f64>, usize)> = self
            .base
            .iter()
            .zip(&self.log_cluster)
            .map(|(x, cluster)| Ok((transform.transform_vector(x)?, *cluster)))
            .collect::<Result<_>>()?;
        // the prior is re-derived in the new space during the replay
        let mut rebuild_config = self.dpmm.clone();
        rebuild_config.prior = None;
        self.model = DpmmModel::rebuild_from_history(&history, rebuild_config)?;
        self.refit_log.push(RefitEvent {
            sample_index: self.stream_pairs.len(),
            confirmed_clusters: self.confirmed.len(),
            output_dim: transform.output_dim(),
        });
        self.transform = Some(transform);
        Ok(())
    }
}

/// Combine a person-discriminant transform with the calibration
/// invariant basis: orthonormalize their columns in order (discriminant
/// first) by modified Gram-Schmidt, dropping columns that are linearly
/// dependent on what came before. Each kept column keeps its source
/// eigenvalue and gets the usual sign convention.
fn union_transform(
    discriminant: &FisherTransform,
    invariant: &FisherTransform,
) -> Result<FisherTransform> {
    let d = discriminant.input_dim();
    if invariant.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: invariant.input_dim(),
        });
    }
    let columns = discriminant
        .weights()
        .column_iter()
        .zip(discriminant.eigenvalues.iter())
        .chain(
            invariant
                .weights()
                .column_iter()
                .zip(invariant.eigenvalues.iter()),
        );
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut eigenvalues = Vec::new();
    for (col, &lambda) in columns {
        let original = col.norm();
        if original <= 0.0 {
            continue;
        }
        let mut v = col.into_owned();
        for b in &basis {
            let p = b.dot(&v);
            v.axpy(-p, b, 1.0);
        }
        let residual = v.norm();
        if residual <= 1e-10 * original {
            continue; // dependent on directions already kept
        }
        v /= residual;
        if let Some(lead) = v.iter().find(|x| x.abs() > 1e-12) {
            if *lead < 0.0 {
                v.neg_mut();
            }
        }
        basis.push(v);
        eigenvalues.push(lambda);
    }
    let mut weights = DMatrix::zeros(d, basis.len());
    for (j, b) in basis.iter().enumerate() {
        weights.set_column(j, b);
    }
    FisherTransform::from_parts(
        weights,
        eigenvalues,
        discriminant.gamma,
        discriminant.class_count,
        discriminant.degenerate,
    )
}

/// Fit the structure-invariant calibration transform for one
/// structure from its calibration *stamp* features (modeling space),
/// grouped by **stamper**, pooling every grid location and sensor.
///
/// Each stamper is a fixed source, so the within-group scatter is the
/// variability the structure imprints on one source — excitation
/// point and sensor path gains, plus per-impact jitter — which is the
/// same variability that spreads one walker's footsteps. The
/// between-group scatter spans the stampers' gait contrasts
/// (duration and weight), the contrast family that later separates
/// walkers, at the same scale.
///
/// All `d` generalized eigendirections are kept by default, not just
/// the `stampers - 1` leading discriminants: the directions are
/// within-scatter-orthonormal, so the complete basis *whitens* the
/// structure-imprinted variability (unit variance per output
/// dimension), while its leading directions still order by stamper
/// separation. The online mixture model then sees walker clusters
/// whose spread is near-isotropic and whose person offsets stand
/// clear of it. `opts.calibration_components` truncates to the
/// leading directions when set.
///
/// Ball drops are excluded: their 5 ms pulses differ from footsteps
/// by orders of magnitude in high-band content, and that one giant
/// contrast would drown out the gait-scale directions the online
/// stage needs. Returns `None` when the dataset has no usable
/// calibration material (fewer than two stampers with at least two
/// samples each).
pub fn fit_calibration_invariant(
    spec: &FeatureSpec,
    structure_id: &str,
    sessions: &[SessionFeatures],
    opts: &OnlineOptions,
) -> Result<Option<FisherTransform>> {
    let mut by_stamper: BTreeMap<String, Vec<DVector<f64>>> = BTreeMap::new();
    for s in sessions {
        if s.structure_id != structure_id || s.kind != ImpulseKind::FootstepStamp {
            continue;
        }
        if let (Some(stamper), Some(_)) = (&s.person_id, &s.location_id) {
            for f in &s.features {
                by_stamper
                    .entry(stamper.clone())
                    .or_default()
                    .push(model_dvec(spec, f));
            }
        }
    }
    by_stamper.retain(|_, g| g.len() >= 2);
    if by_stamper.len() < 2 {
        return Ok(None);
    }
    let groups: Vec<Vec<DVector<f64>>> = by_stamper.into_values().collect();
    let dim = groups[0][0].len();
    let m = opts.calibration_components.unwrap_or(dim).min(dim).max(1);
    let (s_w, s_b, _) = crate::fisher::scatter_matrices(&groups);
    let gamma = crate::fisher::resolve_gamma(
        &FisherConfig {
            n_components: None,
            regularization: None,
        },
        s_w.trace(),
        dim,
        "within-stamper",
    )?;
    let (weights, eigenvalues) = crate::fisher::ratio_directions(&s_b, &s_w, gamma, m)?;
    let degenerate = eigenvalues[0] <= 1e-10;
    FisherTransform::from_parts(weights, eigenvalues, gamma, groups.len(), degenerate).map(Some)
}

/// [`run_online_structure`]'s result: the report plus what the caller
/// needs to build projection scatters and checkpoints.
#[derive(Debug, Clone)]
pub struct StructureOnlineOutcome {
    pub report: StructureOnlineReport,
    /// Every absorbed sample in the modeling feature space, before the
    /// linear transform (seed first).
    pub samples: Vec<DVector<f64>>,
    /// True person of each sample.
    pub persons: Vec<String>,
    /// The transform in force at stream end (`None`: identity).
    pub final_transform: Option<FisherTransform>,
    /// The mixture model at stream end.
    pub model: DpmmModel,
}

/// Run online identification on one structure's walk sessions (already
/// extracted, any order; they are re-sorted by timestamp).
pub fn run_online_structure(
    spec: &FeatureSpec,
    structure_id: &str,
    sessions: &[SessionFeatures],
    fisher: &FisherConfig,
    dpmm: &DpmmConfig,
    opts: &OnlineOptions,
) -> Result<StructureOnlineOutcome> {
    if opts.seed_walks == 0 {
        return Err(Error::InvalidParameter {
            name: "seed_walks",
            reason: "need at least one seed walk".into(),
        });
    }
    let mut walks: Vec<&SessionFeatures> = sessions
        .iter()
        .filter(|s| {
            s.structure_id == structure_id
                && s.kind == ImpulseKind::FootstepWalk
                && !s.features.is_empty()
        })
        .collect();
    walks.sort_by(|a, b| {
        a.timestamp_s
            .total_cmp(&b.timestamp_s)
            .then_with(|| a.session_id.cmp(&b.session_id))
    });
    if walks.is_empty() {
        return Err(Error::NoEvents);
    }
    for w in &walks {
        if w.person_id.is_none() {
            return Err(Error::MissingLabel {
                mode: "person",
                index: 0,
            });
        }
    }
    let seed_person = match &opts.seed_person {
        Some(p) => p.clone(),
        None => walks[0].person_id.clone().expect("checked above"),
    };
    let seed_sessions: Vec<&SessionFeatures> = walks
        .iter()
        .filter(|s| s.person_id.as_deref() == Some(seed_person.as_str()))
        .take(opts.seed_walks)
        .copied()
        .collect();
    if seed_sessions.is_empty() {
        return Err(Error::InvalidParameter {
            name: "seed_person",
            reason: format!("person {seed_person:?} has no walk sessions on {structure_id}"),
        });
    }
    let seed_ids: BTreeSet<&str> = seed_sessions.iter().map(|s| s.session_id.as_str()).collect();
    let stream: Vec<&SessionFeatures> = walks
        .iter()
        .filter(|s| !seed_ids.contains(s.session_id.as_str()))
        .copied()
        .collect();
    if stream.is_empty() {
        return Err(Error::NoEvents);
    }

    let seed_base: Vec<DVector<f64>> = seed_sessions
        .iter()
        .flat_map(|s| s.features.iter().map(|f| model_dvec(spec, f)))
        .collect();
    // physics-guided head start: before anyone but the seed person is
    // known, project onto the structure-invariant calibration subspace
    // so newcomers can separate from the seed cluster at all
    let invariant = if opts.transform_enabled {
        fit_calibration_invariant(spec, structure_id, sessions, opts)?
    } else {
        None
    };
    let initial_output_dim = invariant.as_ref().map(FisherTransform::output_dim);
    let seed_projected: Vec<DVector<f64>> = match &invariant {
        Some(t) => seed_base
            .iter()
            .map(|x| t.transform_vector(x))
            .collect::<Result<_>>()?,
        None => seed_base.clone(),
    };
    let model = DpmmModel::from_seed(&seed_projected, dpmm.clone())?;
    let mut state = OnlineState {
        fisher,
        dpmm: dpmm.clone(),
        opts,
        invariant: invariant.clone(),
        transform: invariant,
        model,
        base: seed_base.clone(),
        log_person: vec![seed_person.clone(); seed_base.len()],
        log_cluster: vec![0; seed_base.len()],
        confirmed: BTreeSet::from([0]),
        stream_pairs: Vec::new(),
        newcomer_log: Vec::new(),
        refit_log: Vec::new(),
    };

    for session in &stream {
        let person = session.person_id.clone().expect("checked above");
        match dpmm.assignment_mode {
            AssignmentMode::PerFootstep => {
                for f in &session.features {
                    let x = model_dvec(spec, f);
                    state.absorb_streamed(&x, &person, &session.session_id, None)?;
                    state.maybe_refit()?;
                }
            }
            AssignmentMode::PerTraceMajority => {
                // frozen-model vote over the whole session
                let mut votes: Vec<(Assignment, usize)> = Vec::new();
                for f in &session.features {
                    let x = state.apply_transform(&model_dvec(spec, f))?;
                    let best = state.model.predict(&x)?.best;
                    match votes.iter_mut().find(|(a, _)| *a == best) {
                        Some((_, n)) => *n += 1,
                        None => votes.push((best, 1)),
                    }
                }
                votes.sort_by_key(|(a, _)| match a {
                    Assignment::Existing(id) => *id,
                    Assignment::New => usize::MAX,
                });
                let mut winner = votes[0].0;
                let mut winner_votes = votes[0].1;
                for (a, n) in &votes[1..] {
                    if *n > winner_votes {
                        winner = *a;
                        winner_votes = *n;
                    }
                }
                let target = winner.pick_id(&state.model);
                for f in &session.features {
                    let x = model_dvec(spec, f);
                    state.absorb_streamed(&x, &person, &session.session_id, Some(target))?;
                }
                state.maybe_refit()?;
            }
        }
    }

    let accuracy = crate::matching::cluster_accuracy(&state.stream_pairs)?;

    // before/after variability over all absorbed samples, true labels
    let mut by_person: BTreeMap<String, Vec<DVector<f64>>> = BTreeMap::new();
    for (x, person) in state.base.iter().zip(&state.log_person) {
        by_person.entry(person.clone()).or_default().push(x.clone());
    }
    let groups_raw: Vec<Vec<DVector<f64>>> = by_person.values().cloned().collect();
    let before = within_total_trace_ratio(&groups_raw)?;
    let after = match &state.transform {
        Some(t) => {
            let transformed: Vec<Vec<DVector<f64>>> = groups_raw
                .iter()
                .map(|g| g.iter().map(|x| t.transform_vector(x)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            within_total_trace_ratio(&transformed)?
        }
        None => before,
    };

    let report = StructureOnlineReport {
        structure_id: structure_id.to_string(),
        seed_person,
        seed_samples: seed_base.len(),
        streamed_samples: state.stream_pairs.len(),
        matched_samples: accuracy.matched_samples,
        accuracy: accuracy.accuracy,
        mapping: accuracy.mapping,
        initial_output_dim,
        newcomer_log: state.newcomer_log,
        refit_log: state.refit_log,
        cluster_sizes: state.model.cluster_sizes(),
        variability: OnlineVariability {
            within_total_before: before,
            within_total_after: after,
            within_person_variability_ratio: 1.0 - after / before,
        },
    };
    Ok(StructureOnlineOutcome {
        report,
        samples: state.base,
        persons: state.log_person,
        final_transform: state.transform,
        model: state.model,
    })
}

/// [`run_online`]'s full result: the serializable report plus final
/// per-structure models/transforms for checkpointing.
#[derive(Debug, Clone)]
pub struct OnlineRunOutput {
    pub report: OnlineReport,
    /// (structure id, final model, final transform) per structure.
    pub models: Vec<(String, DpmmModel, Option<FisherTransform>)>,
}

/// Run the online pipeline on every structure and build the projection
/// scatters (principal components of the raw features, discriminant
/// components after).
pub fn run_online(
    spec: &FeatureSpec,
    sessions: &[SessionFeatures],
    fisher: &FisherConfig,
    dpmm: &DpmmConfig,
    opts: &OnlineOptions,
) -> Result<OnlineRunOutput> {
    let structure_ids: BTreeSet<String> = sessions
        .iter()
        .filter(|s| s.kind == ImpulseKind::FootstepWalk)
        .map(|s| s.structure_id.clone())
        .collect();
    if structure_ids.is_empty() {
        return Err(Error::NoEvents);
    }
    let mut report = OnlineReport {
        transform_enabled: opts.transform_enabled,
        structures: Vec::new(),
        projection_before: Vec::new(),
        projection_after: Vec::new(),
    };
    let mut models = Vec::new();
    for sid in structure_ids {
        let outcome = run_online_structure(spec, &sid, sessions, fisher, dpmm, opts)?;
        let StructureOnlineOutcome {
            report: structure_report,
            samples: raw,
            persons,
            final_transform: transform,
            model,
        } = outcome;
        // before: top-2 principal components of the untransformed
        // modeling-space features
        let (mean, basis) = principal_basis(&raw, 2)?;
        for (x, person) in raw.iter().zip(&persons) {
            let p = basis.tr_mul(&(x - &mean));
            report.projection_before.push(ProjectionRow {
                structure_id: sid.clone(),
                person_id: person.clone(),
                pc1: p[0],
                pc2: if p.len() > 1 { p[1] } else { 0.0 },
            });
        }
        // after: top-2 discriminant components (identity run: principal
        // components again, so the two files stay comparable)
        match &transform {
            Some(t) => {
                for (x, person) in raw.iter().zip(&persons) {
                    let y = t.transform_vector(x)?;
                    report.projection_after.push(ProjectionRow {
                        structure_id: sid.clone(),
                        person_id: person.clone(),
                        pc1: y[0],
                        pc2: if y.len() > 1 { y[1] } else { 0.0 },
                    });
                }
            }
            None => {
                for (x, person) in raw.iter().zip(&persons) {
                    let p = basis.tr_mul(&(x - &mean));
                    report.projection_after.push(ProjectionRow {
                        structure_id: sid.clone(),
                        person_id: person.clone(),
                        pc1: p[0],
                        pc2: if p.len() > 1 { p[1] } else { 0.0 },
                    });
                }
            }
        }
        report.structures.push(structure_report);
        models.push((sid, model, transform));
    }
    Ok(OnlineRunOutput { report, models })
}

// ---------------------------------------------------------------------
// Prediction without updating (identify command)
// ---------------------------------------------------------------------

/// Classification of one feature vector against a frozen model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyRow {
    pub index: usize,
    /// Existing cluster id, or `None` when "new person" wins.
    pub cluster_id: Option<usize>,
    pub is_new: bool,
    /// Normalized log posterior of the winning option.
    pub log_posterior: f64,
}

/// Score features against a frozen model (no mutation), optionally
/// through a transform. Features are mapped into the modeling space of
/// `spec` first, matching how models are trained.
pub fn identify_features(
    spec: &FeatureSpec,
    model: &DpmmModel,
    transform: Option<&FisherTransform>,
    features: &[FeatureVector],
) -> Result<Vec<IdentifyRow>> {
    features
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let mut x = model_dvec(spec, f);
            if let Some(t) = transform {
                x = t.transform_vector(&x)?;
            }
            let p = model.predict(&x)?;
            let log_posterior = p
                .log_posterior
                .iter()
                .find(|(a, _)| *a == p.best)
                .map(|(_, s)| *s)
                .unwrap_or(f64::NEG_INFINITY);
            Ok(IdentifyRow {
                index,
                cluster_id: match p.best {
                    Assignment::Existing(id) => Some(id),
                    Assignment::New => None,
                },
                is_new: matches!(p.best, Assignment::New),
                log_posterior,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------
// Config plumbing and file output
// ---------------------------------------------------------------------

/// The one configuration document every command reads.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    /// Feature extraction spec override; `None` (the default) uses the
    /// dataset manifest's spec, which `simulate` derives from the
    /// scenario sample rate.
    pub features: Option<FeatureSpec>,
    pub fisher: FisherConfig,
    pub dpmm: DpmmConfig,
    pub online: OnlineOptions,
}

/// Serialize `value` as pretty JSON (with a trailing newline).
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::MalformedModel {
        reason: e.to_string(),
    })?;
    std::fs::write(path, json + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a JSON document written by [`save_json`] (or by hand).
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}").map_err(io_err)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Write the location scatter (`scatter_decompose.csv`).
pub fn write_scatter_csv(rows: &[ScatterRow], path: &Path) -> Result<()> {
    write_csv(
        path,
        "structure_id,kind,location_id,pc1,pc2",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.structure_id,
                r.kind,
                r.location_id,
                fmt_f64(r.pc1),
                fmt_f64(r.pc2)
            )
        }),
    )
}

/// Write a 2-D projection file (`projection_before.csv` / `_after.csv`).
pub fn write_projection_csv(rows: &[ProjectionRow], path: &Path) -> Result<()> {
    write_csv(
        path,
        "structure_id,person_id,pc1,pc2",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{}",
                r.structure_id,
                r.person_id,
                fmt_f64(r.pc1),
                fmt_f64(r.pc2)
            )
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: &[f64], person: &str, location: Option<&str>, structure: &str) -> FeatureVector {
        let edges = (0..=values.len()).map(|i| 10.0 * (i + 1) as f64).collect();
        FeatureVector::new(
            values.to_vec(),
            edges,
            FeatureLabels {
                person_id: if person.is_empty() {
                    None
                } else {
                    Some(person.to_string())
                },
                location_id: location.map(str::to_string),
                structure_id: Some(structure.to_string()),
            },
        )
        .unwrap()
    }

    fn walk_session(
        id: &str,
        structure: &str,
        person: &str,
        t: f64,
        center: &[f64],
        n: usize,
    ) -> SessionFeatures {
        let features: Vec<FeatureVector> = (0..n)
            .map(|i| {
                let off = 0.2 * ((i as f64) - (n as f64 - 1.0) / 2.0) / n as f64;
                let vals: Vec<f64> = center.iter().map(|c| (c + off).max(0.0)).collect();
                fv(&vals, person, None, structure)
            })
            .collect();
        SessionFeatures {
            session_id: id.to_string(),
            structure_id: structure.to_string(),
            kind: ImpulseKind::FootstepWalk,
            person_id: Some(person.to_string()),
            location_id: None,
            timestamp_s: t,
            sensor_of: vec![0; features.len()],
            features,
        }
    }

    fn drop_session(
        id: &str,
        structure: &str,
        location: &str,
        t: f64,
        center: &[f64],
        n: usize,
    ) -> SessionFeatures {
        let features: Vec<FeatureVector> = (0..n)
            .map(|i| {
                // decorrelated per-dimension jitter so the impulse
                // scatter is full-rank
                let vals: Vec<f64> = center
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let j = (i * (k + 2) + 1) % n;
                        let off = 0.1 * ((j as f64) - (n as f64 - 1.0) / 2.0) / n as f64;
                        (c + off).max(0.0)
                    })
                    .collect();
                fv(&vals, "", Some(location), structure)
            })
            .collect();
        SessionFeatures {
            session_id: id.to_string(),
            structure_id: structure.to_string(),
            kind: ImpulseKind::BallDrop,
            person_id: None,
            location_id: Some(location.to_string()),
            timestamp_s: t,
            sensor_of: vec![0; features.len()],
            features,
        }
    }

    #[test]
    fn principal_basis_finds_dominant_axis() {
        // variance 4 along x, 0.01 along y
        let vectors: Vec<DVector<f64>> = (0..40)
            .map(|i| {
                let s = (i as f64 - 19.5) / 10.0;
                DVector::from_column_slice(&[2.0 * s, 0.05 * (i % 2) as f64])
            })
            .collect();
        let (_, basis) = principal_basis(&vectors, 2).unwrap();
        assert!(basis[(0, 0)].abs() > 0.999);
        assert!(basis[(1, 1)].abs() > 0.999);
        // sign convention: first significant entry positive
        assert!(basis[(0, 0)] > 0.0);
    }

    #[test]
    fn decompose_splits_structure_and_footstep() {
        // two far-apart locations with tight within-location scatter:
        // structure share must dominate
        let sessions = vec![
            drop_session("d1", "wood", "loc1", 0.0, &[1.0, 1.0], 6),
            drop_session("d2", "wood", "loc2", 1.0, &[6.0, 3.0], 6),
        ];
        let (report, scatter) = decompose_located(&sessions).unwrap();
        let wood = &report.structures["wood"];
        let summary = &wood.by_kind["ball_drop"];
        assert_eq!(summary.group_count, 2);
        assert_eq!(summary.sample_count, 12);
        assert!(summary.structure_share > 0.9, "share {}", summary.structure_share);
        assert_eq!(scatter.len(), 12);
        assert!(scatter.iter().all(|r| r.structure_id == "wood"));
    }

    #[test]
    fn single_location_has_zero_structure_share() {
        let sessions = vec![drop_session("d1", "wood", "loc1", 0.0, &[1.0, 1.0], 6)];
        let (report, _) = decompose_located(&sessions).unwrap();
        let summary = &report.structures["wood"].by_kind["ball_drop"];
        assert_eq!(summary.group_count, 1);
        assert_eq!(summary.structure_share, 0.0);
        assert_eq!(summary.structure_trace, 0.0);
        assert!(summary.footstep_trace > 0.0);
    }

    fn test_spec() -> FeatureSpec {
        FeatureSpec::default_for_rate(2000.0)
    }

    #[test]
    fn evaluate_reports_variability_reduction() {
        // persons separated along x, within-person noise along y: the
        // discriminant transform should strip most within-person scatter
        let mut feats = Vec::new();
        for (person, cx) in [("a", 1.0), ("b", 4.0), ("c", 8.0)] {
            for i in 0..10 {
                let noise = 0.8 * ((i as f64) - 4.5) / 5.0;
                feats.push(fv(&[cx, (2.0 + noise).max(0.0)], person, None, "wood"));
            }
        }
        let metrics = evaluate_structure(&test_spec(), feats, &FisherConfig::default()).unwrap();
        assert!(metrics.within_total_before > 0.0);
        assert!(
            metrics.within_person_variability_ratio > 0.5,
            "ratio {}",
            metrics.within_person_variability_ratio
        );
        assert_eq!(metrics.person_count, 3);
        assert_eq!(metrics.sample_count, 30);
    }

    fn online_sessions() -> Vec<SessionFeatures> {
        let mut sessions = Vec::new();
        // seed person "a" near (1, 1, 1); 5 sessions total
        for i in 0..5 {
            sessions.push(walk_session(
                &format!("a{i}"),
                "wood",
                "a",
                i as f64,
                &[1.0, 1.0, 1.0],
                6,
            ));
        }
        // person "b" near (7, 5, 2); arrives later
        for i in 0..4 {
            sessions.push(walk_session(
                &format!("b{i}"),
                "wood",
                "b",
                10.0 + i as f64,
                &[7.0, 5.0, 2.0],
                6,
            ));
        }
        sessions
    }

    #[test]
    fn online_run_identifies_both_persons() {
        let opts = OnlineOptions {
            newcomer_confirmation: 6,
            ..OnlineOptions::default()
        };
        let outcome = run_online_structure(
            &test_spec(),
            "wood",
            &online_sessions(),
            &FisherConfig::default(),
            &DpmmConfig::default(),
            &opts,
        )
        .unwrap();
        let report = &outcome.report;
        assert_eq!(report.seed_person, "a");
        assert_eq!(report.seed_samples, 18);
        assert_eq!(report.streamed_samples, 36); // 2 a-sessions + 4 b-sessions
        assert!((report.accuracy - 1.0).abs() < 1e-12, "accuracy {}", report.accuracy);
        assert_eq!(report.mapping.get(&0), Some(&Some("a".to_string())));
        assert_eq!(report.mapping.get(&1), Some(&Some("b".to_string())));
        // b confirmed -> at least one refit, to a 1-D discriminant space
        assert!(!report.refit_log.is_empty());
        assert_eq!(report.refit_log[0].output_dim, 1);
        assert!(outcome.final_transform.is_some());
        assert!(
            report.variability.within_person_variability_ratio > 0.0,
            "ratio {}",
            report.variability.within_person_variability_ratio
        );
    }

    #[test]
    fn ablation_skips_refits() {
        let opts = OnlineOptions {
            newcomer_confirmation: 6,
            transform_enabled: false,
            ..OnlineOptions::default()
        };
        let outcome = run_online_structure(
            &test_spec(),
            "wood",
            &online_sessions(),
            &FisherConfig::default(),
            &DpmmConfig::default(),
            &opts,
        )
        .unwrap();
        assert!(outcome.report.refit_log.is_empty());
        assert!(outcome.final_transform.is_none());
        assert_eq!(outcome.report.variability.within_person_variability_ratio, 0.0);
    }

    #[test]
    fn online_report_includes_projections() {
        let opts = OnlineOptions {
            newcomer_confirmation: 6,
            ..OnlineOptions::default()
        };
        let output = run_online(
            &test_spec(),
            &online_sessions(),
            &FisherConfig::default(),
            &DpmmConfig::default(),
            &opts,
        )
        .unwrap();
        let report = &output.report;
        assert_eq!(report.structures.len(), 1);
        let n = report.structures[0].seed_samples + report.structures[0].streamed_samples;
        assert_eq!(report.projection_before.len(), n);
        assert_eq!(report.projection_after.len(), n);
        assert_eq!(output.models.len(), 1);
        assert_eq!(output.models[0].0, "wood");
        assert!(output.models[0].2.is_some());
    }

    #[test]
    fn calibration_sessions_bootstrap_an_invariant_transform() {
        // located drops at two spots whose means differ along x while
        // impulses vary along y/z: the invariant prelude must have the
        // complement dimension (3 - 1 = 2) and the run still separates
        // both persons
        let mut sessions = online_sessions();
        sessions.push(drop_session("d1", "wood", "locA", -2.0, &[1.0, 2.0, 1.5], 6));
        sessions.push(drop_session("d2", "wood", "locB", -1.0, &[6.0, 2.0, 1.5], 6));
        let opts = OnlineOptions {
            newcomer_confirmation: 6,
            ..OnlineOptions::default()
        };
        let outcome = run_online_structure(
            &test_spec(),
            "wood",
            &sessions,
            &FisherConfig::default(),
            &DpmmConfig::default(),
            &opts,
        )
        .unwrap();
        let report = &outcome.report;
        assert_eq!(report.initial_output_dim, Some(2));
        assert!((report.accuracy - 1.0).abs() < 1e-12, "accuracy {}", report.accuracy);
        assert!(!report.refit_log.is_empty());
        // refit = 1-D discriminant unioned with the 2-D invariant basis
        let final_dim = outcome.final_transform.as_ref().unwrap().output_dim();
        assert!(
            final_dim >= 2 && final_dim <= 3,
            "union dimension {final_dim}"
        );
    }

    #[test]
    fn ablation_ignores_calibration_sessions() {
        let mut sessions = online_sessions();
        sessions.push(drop_session("d1", "wood", "locA", -2.0, &[1.0, 2.0, 1.5], 6));
        sessions.push(drop_session("d2", "wood", "locB", -1.0, &[6.0, 2.0, 1.5], 6));
        let opts = OnlineOptions {
            newcomer_confirmation: 6,
            transform_enabled: false,
            ..OnlineOptions::default()
        };
        let outcome = run_online_structure(
            &test_spec(),
            "wood",
            &sessions,
            &FisherConfig::default(),
            &DpmmConfig::default(),
            &opts,
        )
        .unwrap();
        assert_eq!(outcome.report.initial_output_dim, None);
        assert!(outcome.final_transform.is_none());
    }

    #[test]
    fn streaming_requires_non_seed_sessions() {
        // only the seed person's walks: nothing left to stream
        let sessions: Vec<SessionFeatures> = online_sessions()
            .into_iter()
            .filter(|s| s.person_id.as_deref() == Some("a"))
            .take(3)
            .collect();
        let err = run_online_structure(
            &test_spec(),
            "wood",
            &sessions,
            &FisherConfig::default(),
            &DpmmConfig::default(),
            &OnlineOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoEvents));
    }

    #[test]
    fn identify_scores_against_frozen_model() {
        // default modeling space is the raw amplitude space
        let seed: Vec<DVector<f64>> = (0..8)
            .map(|i| DVector::from_column_slice(&[1.0 + 0.01 * i as f64, 1.0]))
            .collect();
        let model = DpmmModel::from_seed(&seed, DpmmConfig::default()).unwrap();
        let near = fv(&[1.02, 1.0], "", None, "wood");
        let far = fv(&[40.0, 40.0], "", None, "wood");
        let rows = identify_features(&test_spec(), &model, None, &[near, far]).unwrap();
        assert_eq!(rows[0].cluster_id, Some(0));
        assert!(!rows[0].is_new);
        assert!(rows[1].is_new);
        assert_eq!(rows[1].cluster_id, None);
        assert!(rows[0].log_posterior <= 0.0);
    }

    #[test]
    fn config_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = PipelineConfig::default();
        save_json(&config, &path).unwrap();
        let loaded: PipelineConfig = load_json(&path).unwrap();
        assert_eq!(loaded, config);
    }

    #[test]
    fn partial_config_fills_defaults_and_rejects_unknown_keys() {
        let parsed: PipelineConfig =
            serde_json::from_str(r#"{"online": {"seed_walks": 5}}"#).unwrap();
        assert_eq!(parsed.online.seed_walks, 5);
        assert_eq!(parsed.online.newcomer_confirmation, 12);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"onlin": {}}"#).is_err());
    }
}

pub use stream_support::build_stream_traces;

mod stream_support {
    use super::*;

    /// Convert extracted walk sessions of one structure into labeled
    /// modeling-space stream traces (timestamp order), e.g. for
    /// [`DpmmModel::identify_stream`].
    pub fn build_stream_traces(
        spec: &FeatureSpec,
        sessions: &[SessionFeatures],
        structure_id: &str,
    ) -> Vec<StreamTrace> {
        let mut walks: Vec<&SessionFeatures> = sessions
            .iter()
            .filter(|s| {
                s.structure_id == structure_id
                    && s.kind == ImpulseKind::FootstepWalk
                    && !s.features.is_empty()
                    && s.person_id.is_some()
            })
            .collect();
        walks.sort_by(|a, b| {
            a.timestamp_s
                .total_cmp(&b.timestamp_s)
                .then_with(|| a.session_id.cmp(&b.session_id))
        });
        walks
            .into_iter()
            .map(|s| StreamTrace {
                trace_id: s.session_id.clone(),
                person_id: s.person_id.clone().expect("filtered above"),
                features: s.features.iter().map(|f| model_dvec(spec, f)).collect(),
            })
            .collect()
    }
}
