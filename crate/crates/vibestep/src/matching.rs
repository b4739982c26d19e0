//! Optimal cluster-to-person matching and identification accuracy.
//!
//! Open-set clustering invents its own cluster ids, so scoring against
//! ground-truth persons first needs the best one-to-one matching between
//! clusters and persons. We use the Hungarian algorithm (shortest
//! augmenting paths with potentials, O(n^3)) on the negated contingency
//! counts; samples in clusters left unmatched, or matched to a different
//! person than their own, count as errors.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum-cost perfect assignment of rows to columns.
///
/// `cost` must be rectangular with rows <= cols; returns for each row
/// the column it is assigned, all distinct.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = cost[0].len();
    if m < n || cost.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidParameter {
            name: "cost",
            reason: "matrix must be rectangular with rows <= cols".into(),
        });
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    // 1-based potentials formulation
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; m + 1];
    let mut matched_row = vec![0_usize; m + 1]; // column -> row (0 = free)
    let mut way = vec![0_usize; m + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0_usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0_usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for j in 1..=m {
        if matched_row[j] != 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    Ok(assignment)
}

/// Accuracy of a clustering against ground-truth person labels under
/// the optimal one-to-one cluster/person matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Fraction of samples whose cluster maps to their true person.
    pub accuracy: f64,
    /// cluster id -> matched person (None for surplus clusters).
    pub mapping: BTreeMap<usize, Option<String>>,
    pub matched_samples: usize,
    pub total_samples: usize,
}

/// Score `(cluster_id, true_person)` sample pairs.
pub fn cluster_accuracy(assignments: &[(usize, String)]) -> Result<AccuracyReport> {
    if assignments.is_empty() {
        return Err(Error::NoEvents);
    }
    // contingency counts, deterministically ordered
    let mut counts: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut persons: BTreeMap<&str, ()> = BTreeMap::new();
    for (c, p) in assignments {
        *counts.entry(*c).or_default().entry(p.as_str()).or_insert(0) += 1;
        persons.entry(p.as_str()).or_insert(());
    }
    let clusters: Vec<usize> = counts.keys().copied().collect();
    let persons: Vec<&str> = persons.keys().copied().collect();
    // square cost matrix padded with zero-count cells; maximizing the
    // matched count = minimizing negated counts
    let side = clusters.len().max(persons.len());
    let cost: Vec<Vec<f64>> = (0..side)
        .map(|i| {
            (0..side)
                .map(|j| {
                    let c = clusters
                        .get(i)
                        .and_then(|cl| counts[cl].get(persons.get(j).copied().unwrap_or("")))
                        .copied()
                        .unwrap_or(0);
                    -(c as f64)
                })
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost)?;

    let mut mapping = BTreeMap::new();
    let mut matched = 0_usize;
    for (i, &cluster) in clusters.iter().enumerate() {
        let person = persons.get(assignment[i]).copied();
        if let Some(p) = person {
            matched += counts[&cluster].get(p).copied().unwrap_or(0);
        }
        mapping.insert(cluster, person.map(str::to_string));
    }
    Ok(AccuracyReport {
        accuracy: matched as f64 / assignments.len() as f64,
        mapping,
        matched_samples: matched,
        total_samples: assignments.len(),
    })
}
