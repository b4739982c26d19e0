//! Decomposition of feature variability into footstep-induced and
//! structure-induced parts.
//!
//! Grouping repeated impacts by excitation location isolates the two
//! sources: scatter *within* a location reflects the impact process
//! itself (footstep variability), while scatter of the per-location
//! means reflects the propagation path through the structure (structure
//! variability):
//!
//! ```text
//! Sigma_footstep  = (1/K) * sum_k (1/N_k) * sum_i (x_i - mu_k)(x_i - mu_k)^T
//! Sigma_structure = (1/K) * sum_k (mu_k - mu)(mu_k - mu)^T
//! ```
//!
//! with mu the unweighted mean of the K group means. Both use population
//! normalization so the traces are directly comparable.

use crate::error::{Error, Result};
use crate::types::GroupedFeatures;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Result of the two-way scatter decomposition.
#[derive(Debug, Clone)]
pub struct ScatterDecomposition {
    /// Average within-group covariance (footstep-induced).
    pub footstep_cov: DMatrix<f64>,
    /// Covariance of group means around their grand mean
    /// (structure-induced).
    pub structure_cov: DMatrix<f64>,
    /// Unweighted mean of the group means.
    pub overall_mean: DVector<f64>,
    /// Per-group sample means, in group order.
    pub group_means: Vec<(String, DVector<f64>)>,
}

/// Trace summary of a decomposition, for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilitySummary {
    pub group_count: usize,
    pub sample_count: usize,
    pub footstep_trace: f64,
    pub structure_trace: f64,
    pub structure_share: f64,
}

impl ScatterDecomposition {
    pub fn footstep_trace(&self) -> f64 {
        self.footstep_cov.trace()
    }

    pub fn structure_trace(&self) -> f64 {
        self.structure_cov.trace()
    }

    /// Fraction of total trace variability attributable to the
    /// structure: tr(Sigma_st) / (tr(Sigma_st) + tr(Sigma_fs)).
    pub fn structure_share(&self) -> f64 {
        let st = self.structure_trace();
        let fs = self.footstep_trace();
        st / (st + fs)
    }

    pub fn summary(&self, sample_count: usize) -> VariabilitySummary {
        VariabilitySummary {
            group_count: self.group_means.len(),
            sample_count,
            footstep_trace: self.footstep_trace(),
            structure_trace: self.structure_trace(),
            structure_share: self.structure_share(),
        }
    }
}

pub(crate) fn mean_of(vectors: &[DVector<f64>]) -> DVector<f64> {
    let dim = vectors[0].len();
    let mut m = DVector::zeros(dim);
    for v in vectors {
        m += v;
    }
    m / vectors.len() as f64
}

/// Population covariance of `vectors` around `center`.
pub(crate) fn scatter_around(vectors: &[DVector<f64>], center: &DVector<f64>) -> DMatrix<f64> {
    let dim = center.len();
    let mut s = DMatrix::zeros(dim, dim);
    for v in vectors {
        let d = v - center;
        s.ger(1.0, &d, &d, 1.0);
    }
    s / vectors.len() as f64
}

/// Decompose grouped features into footstep and structure covariances.
/// Needs at least two groups; the grouping mode is up to the caller
/// (locations isolate the structure, persons isolate gait).
pub fn decompose_variability(groups: &GroupedFeatures) -> Result<ScatterDecomposition> {
    if groups.group_count() < 2 {
        return Err(Error::TooFewGroups {
            min: 2,
            got: groups.group_count(),
        });
    }
    let dim = groups.dim();
    let mut group_means = Vec::with_capacity(groups.group_count());
    let mut footstep_cov = DMatrix::zeros(dim, dim);
    for (name, members) in groups.groups() {
        let vectors: Vec<DVector<f64>> = members
            .iter()
            .map(|f| DVector::from_column_slice(f.values()))
            .collect();
        let mu_k = mean_of(&vectors);
        footstep_cov += scatter_around(&vectors, &mu_k);
        group_means.push((name.clone(), mu_k));
    }
    let k = group_means.len() as f64;
    footstep_cov /= k;

    let means_only: Vec<DVector<f64>> = group_means.iter().map(|(_, m)| m.clone()).collect();
    let overall_mean = mean_of(&means_only);
    let structure_cov = scatter_around(&means_only, &overall_mean);

    Ok(ScatterDecomposition {
        footstep_cov,
        structure_cov,
        overall_mean,
        group_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureLabels, FeatureVector, GroupingMode};

    fn fv(values: Vec<f64>) -> FeatureVector {
        let d = values.len();
        let edges = (0..=d).map(|i| 10.0 * (i + 1) as f64).collect();
        FeatureVector::new(values, edges, FeatureLabels::default()).unwrap()
    }

    fn grouped(data: Vec<(&str, Vec<Vec<f64>>)>) -> GroupedFeatures {
        GroupedFeatures::from_groups(
            data.into_iter()
                .map(|(name, rows)| {
                    (name.to_string(), rows.into_iter().map(fv).collect())
                })
                .collect(),
            GroupingMode::ByLocation,
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_two_group_case() {
        // group a: (0,0), (2,0) -> mean (1,0), pop cov [[1,0],[0,0]]
        // group b: (4,2), (4,4) -> mean (4,3), pop cov [[0,0],[0,1]]
        // footstep = [[0.5,0],[0,0.5]]
        // grand mean (2.5, 1.5); deviations (-1.5,-1.5), (1.5,1.5)
        // structure = [[2.25, 2.25],[2.25, 2.25]]
        let g = grouped(vec![
            ("a", vec![vec![0.0, 0.0], vec![2.0, 0.0]]),
            ("b", vec![vec![4.0, 2.0], vec![4.0, 4.0]]),
        ]);
        let d = decompose_variability(&g).unwrap();
        assert!((d.footstep_cov[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((d.footstep_cov[(1, 1)] - 0.5).abs() < 1e-12);
        assert!(d.footstep_cov[(0, 1)].abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert!((d.structure_cov[(i, j)] - 2.25).abs() < 1e-12);
            }
        }
        assert!((d.structure_share() - 4.5 / 5.5).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_groups_weighted_equally() {
        // group weights are 1/K regardless of N_k: replicating one
        // group's samples must not change the decomposition
        let base = grouped(vec![
            ("a", vec![vec![0.0, 1.0], vec![2.0, 3.0]]),
            ("b", vec![vec![5.0, 0.0], vec![7.0, 2.0]]),
        ]);
        let dup = grouped(vec![
            (
                "a",
                vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![0.0, 1.0], vec![2.0, 3.0]],
            ),
            ("b", vec![vec![5.0, 0.0], vec![7.0, 2.0]]),
        ]);
        let da = decompose_variability(&base).unwrap();
        let db = decompose_variability(&dup).unwrap();
        assert!((&da.footstep_cov - &db.footstep_cov).abs().max() < 1e-12);
        assert!((&da.structure_cov - &db.structure_cov).abs().max() < 1e-12);
    }

    #[test]
    fn translation_invariant() {
        let g = grouped(vec![
            ("a", vec![vec![0.0, 1.0], vec![2.0, 3.0]]),
            ("b", vec![vec![5.0, 0.0], vec![7.0, 2.0]]),
        ]);
        let shifted = grouped(vec![
            ("a", vec![vec![10.0, 21.0], vec![12.0, 23.0]]),
            ("b", vec![vec![15.0, 20.0], vec![17.0, 22.0]]),
        ]);
        let da = decompose_variability(&g).unwrap();
        let db = decompose_variability(&shifted).unwrap();
        assert!((&da.footstep_cov - &db.footstep_cov).abs().max() < 1e-12);
        assert!((&da.structure_cov - &db.structure_cov).abs().max() < 1e-12);
    }

    #[test]
    fn covariances_are_symmetric_psd() {
        let g = grouped(vec![
            ("a", vec![vec![1.0, 2.0, 0.5], vec![0.0, 1.0, 1.5], vec![2.0, 0.0, 1.0]]),
            ("b", vec![vec![4.0, 1.0, 3.0], vec![5.0, 2.0, 2.0]]),
            ("c", vec![vec![0.5, 4.0, 0.0], vec![1.5, 5.0, 1.0]]),
        ]);
        let d = decompose_variability(&g).unwrap();
        for m in [&d.footstep_cov, &d.structure_cov] {
            assert!((m - m.transpose()).abs().max() < 1e-12);
            let eig = m.clone().symmetric_eigen();
            for ev in eig.eigenvalues.iter() {
                assert!(*ev >= -1e-10, "negative eigenvalue {ev}");
            }
        }
    }

    #[test]
    fn single_group_rejected() {
        let g = grouped(vec![("a", vec![vec![0.0, 1.0], vec![2.0, 3.0]])]);
        assert!(matches!(
            decompose_variability(&g),
            Err(Error::TooFewGroups { got: 1, .. })
        ));
    }
}
