//! Fisher discriminant analysis for structure-variability reduction.
//!
//! Grouping training features by excitation location (or by person) and
//! maximizing the Fisher criterion
//!
//! ```text
//! J(w) = (w^T S_B w) / (w^T S_W w)
//! S_B  = sum_i N_i (mu_i - m)(mu_i - m)^T
//! S_W  = sum_i sum_n (x_n^i - mu_i)(x_n^i - mu_i)^T
//! ```
//!
//! yields projection directions along which the grouping factor is
//! maximally expressed relative to everything else. Fit is via the
//! Cholesky factor L of the regularized within-scatter: the generalized
//! problem reduces to a symmetric eigenproblem on L^-1 S_B L^-T, and the
//! recovered directions satisfy w^T (S_W + gamma I) w = I.
//!
//! The same machinery with the scatter roles swapped
//! ([`FisherTransform::fit_invariant`]) finds directions maximally
//! *insensitive* to the grouping factor; grouping calibration impulses
//! by excitation location yields a structure-invariant subspace without
//! needing person labels.

use crate::error::{Error, Result};
use crate::linalg::{mat_to_rows, rows_to_mat, symmetrize, vec_of};
use crate::types::GroupedFeatures;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Fit options; `None` fields take data-driven defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FisherConfig {
    /// Output dimensionality; default min(groups - 1, input dim).
    pub n_components: Option<usize>,
    /// Ridge added to S_W; default 1e-6 * tr(S_W) / d.
    pub regularization: Option<f64>,
}

/// A fitted linear discriminant projection.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherTransform {
    /// d x m projection matrix; columns are discriminant directions.
    weights: DMatrix<f64>,
    /// Generalized eigenvalues (Fisher ratios), descending.
    pub eigenvalues: Vec<f64>,
    /// Ridge actually used on S_W.
    pub gamma: f64,
    /// Number of groups the transform was fit on.
    pub class_count: usize,
    /// True when the between-group scatter was (numerically) zero, so
    /// every eigenvalue vanished and the directions carry no signal.
    pub degenerate: bool,
}

/// Serialized form with an explicit row-major weight layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredFisherTransform {
    pub weights_rows: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub gamma: f64,
    pub class_count: usize,
    pub degenerate: bool,
}

/// Convert grouped features into per-group vector lists (group order).
pub fn to_vector_groups(groups: &GroupedFeatures) -> Vec<Vec<DVector<f64>>> {
    groups
        .groups()
        .iter()
        .map(|(_, members)| members.iter().map(|f| vec_of(f.values())).collect())
        .collect()
}

/// Within- and between-group scatter matrices plus the grand mean
/// (weighted by sample count, so S_W + S_B equals total scatter).
pub fn scatter_matrices(
    groups: &[Vec<DVector<f64>>],
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let dim = groups[0][0].len();
    let total: usize = groups.iter().map(Vec::len).sum();
    let mut grand = DVector::zeros(dim);
    for g in groups {
        for x in g {
            grand += x;
        }
    }
    grand /= total as f64;

    let mut s_w = DMatrix::zeros(dim, dim);
    let mut s_b = DMatrix::zeros(dim, dim);
    for g in groups {
        let mut mu = DVector::zeros(dim);
        for x in g {
            mu += x;
        }
        mu /= g.len() as f64;
        for x in g {
            let d = x - &mu;
            s_w.ger(1.0, &d, &d, 1.0);
        }
        let d = &mu - &grand;
        s_b.ger(g.len() as f64, &d, &d, 1.0);
    }
    (s_w, s_b, grand)
}

/// tr(S_W) / tr(S_T) with S_T = S_W + S_B: the fraction of total
/// variance that lies within groups. Lower means groups are more
/// cleanly separated.
pub fn within_total_trace_ratio(groups: &[Vec<DVector<f64>>]) -> Result<f64> {
    if groups.len() < 2 {
        return Err(Error::TooFewGroups { min: 2, got: groups.len() });
    }
    let (s_w, s_b, _) = scatter_matrices(groups);
    let total = s_w.trace() + s_b.trace();
    if total <= 0.0 {
        return Err(Error::DegenerateData {
            reason: "all samples identical; scatter is zero".into(),
        });
    }
    Ok(s_w.trace() / total)
}

/// The ridge to add to the denominator scatter: the configured value,
/// or 1e-6 tr(denominator)/d.
pub(crate) fn resolve_gamma(
    config: &FisherConfig,
    den_trace: f64,
    dim: usize,
    den_name: &str,
) -> Result<f64> {
    let gamma = match config.regularization {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => {
            return Err(Error::InvalidParameter {
                name: "regularization",
                reason: format!("must be positive and finite, got {g}"),
            })
        }
        None => 1e-6 * den_trace / dim as f64,
    };
    if !(gamma > 0.0) {
        return Err(Error::DegenerateData {
            reason: format!("{den_name} scatter is zero; cannot regularize from data"),
        });
    }
    Ok(gamma)
}

/// Top-`m` directions of the regularized ratio problem
///
/// ```text
/// maximize (w^T N w) / (w^T (D + gamma I) w)
/// ```
///
/// via the Cholesky factor L of D + gamma I: the problem reduces to a
/// symmetric eigenproblem on L^-1 N L^-T, and the recovered directions
/// satisfy w^T (D + gamma I) w = I. Ratios come back descending; each
/// direction's first significantly nonzero component is made positive.
pub(crate) fn ratio_directions(
    num: &DMatrix<f64>,
    den: &DMatrix<f64>,
    gamma: f64,
    m: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let dim = den.nrows();
    let mut den_reg = symmetrize(den);
    for i in 0..dim {
        den_reg[(i, i)] += gamma;
    }
    let chol = Cholesky::new(den_reg).ok_or_else(|| Error::Numerical {
        reason: "regularized denominator scatter is not positive definite".into(),
    })?;
    let l = chol.l();
    let c = l
        .solve_lower_triangular(&symmetrize(num))
        .ok_or_else(|| Error::Numerical {
            reason: "triangular solve failed".into(),
        })?;
    let a = l
        .solve_lower_triangular(&c.transpose())
        .ok_or_else(|| Error::Numerical {
            reason: "triangular solve failed".into(),
        })?;
    let eig = symmetrize(&a).symmetric_eigen();

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let lt = l.transpose();
    let mut weights = DMatrix::zeros(dim, m);
    let mut eigenvalues = Vec::with_capacity(m);
    for (col, &idx) in order.iter().take(m).enumerate() {
        let u = eig.eigenvectors.column(idx).into_owned();
        // w = L^-T u
        let mut w = lt.solve_upper_triangular(&u).ok_or_else(|| Error::Numerical {
            reason: "triangular solve failed".into(),
        })?;
        // deterministic sign: first nonzero component positive
        let flip = w
            .iter()
            .find(|v| v.abs() > 1e-12 * w.norm())
            .is_some_and(|v| *v < 0.0);
        if flip {
            w.neg_mut();
        }
        weights.set_column(col, &w);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok((weights, eigenvalues))
}

impl FisherTransform {
    /// Fit on per-group sample vectors. Every group needs at least two
    /// members so the within-scatter reflects each group.
    pub fn fit(groups: &[Vec<DVector<f64>>], config: &FisherConfig) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups { min: 2, got: groups.len() });
        }
        for (i, g) in groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(Error::GroupTooSmall {
                    group: format!("group #{i}"),
                    count: g.len(),
                    min: 2,
                });
            }
        }
        let dim = groups[0][0].len();
        let (s_w, s_b, _) = scatter_matrices(groups);

        let gamma = resolve_gamma(config, s_w.trace(), dim, "within-group")?;

        // default C-1 components, capped at d; an explicit request must
        // respect both limits
        let c = groups.len();
        let m = config.n_components.unwrap_or((c - 1).min(dim));
        if m == 0 || m > c - 1 || m > dim {
            return Err(Error::InvalidParameter {
                name: "n_components",
                reason: format!("must be in 1..=min(groups-1, dim) = {}, got {m}", (c - 1).min(dim)),
            });
        }

        let (weights, eigenvalues) = ratio_directions(&s_b, &s_w, gamma, m)?;
        // degenerate when S_B carries no signal at all (all group means
        // coincide): eigenvalues vanish relative to the scatter scale
        let degenerate = eigenvalues[0] <= 1e-10;
        Ok(Self {
            weights,
            eigenvalues,
            gamma,
            class_count: c,
            degenerate,
        })
    }

    /// Fit directions maximally *insensitive* to the grouping factor:
    /// the same ratio problem with the scatter roles swapped,
    ///
    /// ```text
    /// maximize (w^T S_W w) / (w^T (S_B + gamma I) w)
    /// ```
    ///
    /// Grouping fixed-location calibration impulses by excitation
    /// location, the leading directions retain impulse variability while
    /// suppressing location-induced variability, so they span a
    /// structure-invariant subspace that needs no person labels at all.
    /// Defaults: `n_components` is the complement dimension
    /// d - min(groups - 1, d - 1) (at least 1, at most d);
    /// `regularization` is 1e-6 tr(S_B)/d.
    pub fn fit_invariant(groups: &[Vec<DVector<f64>>], config: &FisherConfig) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups { min: 2, got: groups.len() });
        }
        for (i, g) in groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(Error::GroupTooSmall {
                    group: format!("group #{i}"),
                    count: g.len(),
                    min: 2,
                });
            }
        }
        let dim = groups[0][0].len();
        let (s_w, s_b, _) = scatter_matrices(groups);

        let gamma = resolve_gamma(config, s_b.trace(), dim, "between-group")?;

        let c = groups.len();
        let m = config
            .n_components
            .unwrap_or_else(|| dim.saturating_sub((c - 1).min(dim - 1)).max(1));
        if m == 0 || m > dim {
            return Err(Error::InvalidParameter {
                name: "n_components",
                reason: format!("must be in 1..={dim}, got {m}"),
            });
        }

        let (weights, eigenvalues) = ratio_directions(&s_w, &s_b, gamma, m)?;
        // degenerate when nothing survives the suppression: no retained
        // variability along any direction
        let degenerate = eigenvalues[0] <= 1e-10;
        Ok(Self {
            weights,
            eigenvalues,
            gamma,
            class_count: c,
            degenerate,
        })
    }

    /// [`Self::fit_invariant`] directly from labeled grouped features.
    pub fn fit_invariant_grouped(groups: &GroupedFeatures, config: &FisherConfig) -> Result<Self> {
        Self::fit_invariant(&to_vector_groups(groups), config)
    }

    /// Fisher objective J of the leading direction on `groups`:
    /// w1^T S_B w1 / w1^T (S_W + gamma I) w1. On the fitted data this
    /// equals `eigenvalues[0]`.
    pub fn objective(&self, groups: &[Vec<DVector<f64>>]) -> Result<f64> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups { min: 2, got: groups.len() });
        }
        let dim = self.input_dim();
        if groups.iter().flatten().any(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: groups
                    .iter()
                    .flatten()
                    .map(DVector::len)
                    .find(|&l| l != dim)
                    .unwrap_or(dim),
            });
        }
        let (s_w, s_b, _) = scatter_matrices(groups);
        let w1 = self.weights.column(0).into_owned();
        let num = (&s_b * &w1).dot(&w1);
        let mut den = (&s_w * &w1).dot(&w1) + self.gamma * w1.dot(&w1);
        if den <= 0.0 {
            den = f64::MIN_POSITIVE;
        }
        Ok(num / den)
    }

    /// Fit directly from labeled grouped features.
    pub fn fit_grouped(groups: &GroupedFeatures, config: &FisherConfig) -> Result<Self> {
        Self::fit(&to_vector_groups(groups), config)
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Project one sample: y = W^T x.
    pub fn transform_vector(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.weights.tr_mul(x))
    }

    /// Project a raw feature slice.
    pub fn transform_slice(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.transform_vector(&vec_of(x))
    }

    pub fn to_stored(&self) -> StoredFisherTransform {
        StoredFisherTransform {
            weights_rows: mat_to_rows(&self.weights),
            eigenvalues: self.eigenvalues.clone(),
            gamma: self.gamma,
            class_count: self.class_count,
            degenerate: self.degenerate,
        }
    }

    /// Assemble a transform from explicit parts: a d x m weight matrix
    /// and one eigenvalue per column.
    pub fn from_parts(
        weights: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        gamma: f64,
        class_count: usize,
        degenerate: bool,
    ) -> Result<Self> {
        if eigenvalues.len() != weights.ncols() || weights.ncols() == 0 {
            return Err(Error::MalformedModel {
                reason: "eigenvalue count does not match weight columns".into(),
            });
        }
        Ok(Self {
            weights,
            eigenvalues,
            gamma,
            class_count,
            degenerate,
        })
    }

    pub fn from_stored(stored: &StoredFisherTransform) -> Result<Self> {
        let weights = rows_to_mat(&stored.weights_rows)?;
        if stored.eigenvalues.len() != weights.ncols() {
            return Err(Error::MalformedModel {
                reason: "eigenvalue count does not match weight columns".into(),
            });
        }
        Ok(Self {
            weights,
            eigenvalues: stored.eigenvalues.clone(),
            gamma: stored.gamma,
            class_count: stored.class_count,
            degenerate: stored.degenerate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    /// Two elongated groups separated along x, spread along y.
    fn separable_groups() -> Vec<Vec<DVector<f64>>> {
        let a = vec![
            dv(&[0.0, 0.0]),
            dv(&[0.1, 2.0]),
            dv(&[-0.1, -2.0]),
            dv(&[0.05, 1.0]),
        ];
        let b = vec![
            dv(&[3.0, 0.1]),
            dv(&[3.1, 2.1]),
            dv(&[2.9, -1.9]),
            dv(&[3.05, 0.9]),
        ];
        vec![a, b]
    }

    #[test]
    fn directions_normalized_in_within_metric() {
        let groups = separable_groups();
        let cfg = FisherConfig::default();
        let t = FisherTransform::fit(&groups, &cfg).unwrap();
        let (s_w, _, _) = scatter_matrices(&groups);
        let gamma = 1e-6 * s_w.trace() / 2.0;
        let mut s_w_reg = s_w;
        for i in 0..2 {
            s_w_reg[(i, i)] += gamma;
        }
        let g = t.weights().tr_mul(&(&s_w_reg * t.weights()));
        for i in 0..t.output_dim() {
            for j in 0..t.output_dim() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-8, "gram {i},{j} = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn two_class_direction_matches_closed_form() {
        // for 2 classes the discriminant is parallel to
        // (S_W + gamma I)^-1 (mu_a - mu_b)
        let groups = separable_groups();
        let t = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        assert_eq!(t.output_dim(), 1);
        let (s_w, _, _) = scatter_matrices(&groups);
        let gamma = 1e-6 * s_w.trace() / 2.0;
        let mut s_w_reg = s_w;
        for i in 0..2 {
            s_w_reg[(i, i)] += gamma;
        }
        let mu_a = dv(&[0.0125, 0.25]);
        let mu_b = dv(&[3.0125, 0.3]);
        let expected = s_w_reg.lu().solve(&(mu_a - mu_b)).unwrap();
        let w = t.weights().column(0).into_owned();
        let cos = w.dot(&expected).abs() / (w.norm() * expected.norm());
        assert!(cos > 1.0 - 1e-9, "cos angle {cos}");
    }

    #[test]
    fn projection_separates_groups() {
        let groups = separable_groups();
        let t = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        let project = |g: &Vec<DVector<f64>>| -> Vec<f64> {
            g.iter().map(|x| t.transform_vector(x).unwrap()[0]).collect()
        };
        let pa = project(&groups[0]);
        let pb = project(&groups[1]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let spread = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>().sqrt();
        let (ma, mb) = (mean(&pa), mean(&pb));
        assert!((ma - mb).abs() > 3.0 * (spread(&pa, ma) + spread(&pb, mb)));
    }

    #[test]
    fn ratio_improves_after_projection() {
        let groups = separable_groups();
        let before = within_total_trace_ratio(&groups).unwrap();
        let t = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        let projected: Vec<Vec<DVector<f64>>> = groups
            .iter()
            .map(|g| g.iter().map(|x| t.transform_vector(x).unwrap()).collect())
            .collect();
        let after = within_total_trace_ratio(&projected).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn default_components_capped() {
        // 3 groups in 2-D: min(3-1, 2) = 2 components
        let groups = vec![
            vec![dv(&[0.0, 0.0]), dv(&[0.2, 0.1])],
            vec![dv(&[3.0, 0.0]), dv(&[3.2, 0.1])],
            vec![dv(&[0.0, 3.0]), dv(&[0.2, 3.1])],
        ];
        let t = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        assert_eq!(t.output_dim(), 2);
        assert!(t.eigenvalues[0] >= t.eigenvalues[1]);
    }

    #[test]
    fn sign_convention_is_stable() {
        let groups = separable_groups();
        let t1 = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        // negate all inputs: the discriminant subspace is the same and
        // the sign rule must pick the same orientation deterministically
        let neg: Vec<Vec<DVector<f64>>> = groups
            .iter()
            .map(|g| g.iter().map(|x| -x).collect())
            .collect();
        let t2 = FisherTransform::fit(&neg, &FisherConfig::default()).unwrap();
        let w1 = t1.weights().column(0).into_owned();
        let w2 = t2.weights().column(0).into_owned();
        let first1 = w1.iter().find(|v| v.abs() > 1e-12 * w1.norm()).unwrap();
        let first2 = w2.iter().find(|v| v.abs() > 1e-12 * w2.norm()).unwrap();
        assert!(*first1 > 0.0);
        assert!(*first2 > 0.0);
    }

    #[test]
    fn small_groups_rejected() {
        let groups = vec![vec![dv(&[0.0, 0.0])], vec![dv(&[1.0, 1.0]), dv(&[1.1, 0.9])]];
        assert!(matches!(
            FisherTransform::fit(&groups, &FisherConfig::default()),
            Err(Error::GroupTooSmall { .. })
        ));
        let one = vec![vec![dv(&[0.0, 0.0]), dv(&[1.0, 1.0])]];
        assert!(matches!(
            FisherTransform::fit(&one, &FisherConfig::default()),
            Err(Error::TooFewGroups { got: 1, .. })
        ));
    }

    #[test]
    fn stored_round_trip() {
        let t = FisherTransform::fit(&separable_groups(), &FisherConfig::default()).unwrap();
        let stored = t.to_stored();
        let json = serde_json::to_string(&stored).unwrap();
        let back: StoredFisherTransform = serde_json::from_str(&json).unwrap();
        let t2 = FisherTransform::from_stored(&back).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn objective_equals_top_eigenvalue_on_fit_data() {
        let groups = separable_groups();
        let t = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        let j = t.objective(&groups).unwrap();
        assert!(
            (j - t.eigenvalues[0]).abs() <= 1e-8 * t.eigenvalues[0].max(1.0),
            "J {j} vs lambda {}",
            t.eigenvalues[0]
        );
        assert!(!t.degenerate);
        assert_eq!(t.class_count, 2);
    }

    #[test]
    fn coincident_means_fit_flagged_degenerate() {
        // identical group means: S_B = 0, eigenvalues all zero, fit
        // still succeeds but is flagged
        let groups = vec![
            vec![dv(&[1.0, 0.0]), dv(&[-1.0, 0.0])],
            vec![dv(&[0.0, 1.0]), dv(&[0.0, -1.0])],
        ];
        let t = FisherTransform::fit(&groups, &FisherConfig::default()).unwrap();
        assert!(t.degenerate);
        assert!(t.eigenvalues[0].abs() <= 1e-10);
    }

    #[test]
    fn too_many_components_rejected() {
        let groups = separable_groups(); // 2 groups: max 1 component
        let cfg = FisherConfig {
            n_components: Some(2),
            regularization: None,
        };
        assert!(matches!(
            FisherTransform::fit(&groups, &cfg),
            Err(Error::InvalidParameter { name: "n_components", .. })
        ));
    }

    /// Three groups shifted along x (a "location" gain), varying along
    /// y and z within each group (the signal to retain).
    fn gain_shifted_groups() -> Vec<Vec<DVector<f64>>> {
        let mut groups = Vec::new();
        for shift in [0.0, 5.0, 11.0] {
            let mut g = Vec::new();
            for i in 0..6 {
                let a = 0.9 * ((i as f64) - 2.5) / 2.5;
                let b = 0.6 * (((2 * i + 1) % 6) as f64 - 2.5) / 2.5;
                g.push(dv(&[shift + 0.02 * a, 1.0 + a, 2.0 + b]));
            }
            groups.push(g);
        }
        groups
    }

    #[test]
    fn invariant_directions_suppress_group_shift() {
        let groups = gain_shifted_groups();
        let t = FisherTransform::fit_invariant(&groups, &FisherConfig::default()).unwrap();
        // 3-D, 3 groups: complement dimension default is 3 - 2 = 1
        assert_eq!(t.output_dim(), 1);
        // group means must nearly coincide after projection while the
        // within-group spread survives
        let project = |g: &Vec<DVector<f64>>| -> Vec<f64> {
            g.iter().map(|x| t.transform_vector(x).unwrap()[0]).collect()
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let means: Vec<f64> = groups.iter().map(|g| mean(&project(g))).collect();
        let grand = mean(&means);
        let between: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
        let within: f64 = groups
            .iter()
            .map(|g| {
                let p = project(g);
                let m = mean(&p);
                p.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            })
            .sum();
        assert!(within > 0.0);
        assert!(
            between < 1e-3 * within,
            "between {between} not suppressed vs within {within}"
        );
    }

    #[test]
    fn invariant_direction_avoids_shift_axis() {
        let groups = gain_shifted_groups();
        let t = FisherTransform::fit_invariant(&groups, &FisherConfig::default()).unwrap();
        let w = t.weights().column(0).into_owned();
        // the shift lives on x: the retained direction must be nearly
        // orthogonal to it
        assert!(
            w[0].abs() < 1e-3 * w.norm(),
            "x component {} not suppressed (|w| = {})",
            w[0],
            w.norm()
        );
    }

    #[test]
    fn invariant_default_components_is_complement() {
        // 4-D samples, 3 groups: default m = 4 - 2 = 2
        let mut groups = Vec::new();
        for shift in [0.0, 4.0, 9.0] {
            let g = (0..5)
                .map(|i| {
                    let a = (i as f64) - 2.0;
                    dv(&[shift, a, 0.5 * a * a - 1.0, shift * 0.5 + 0.3 * a])
                })
                .collect();
            groups.push(g);
        }
        let t = FisherTransform::fit_invariant(&groups, &FisherConfig::default()).unwrap();
        assert_eq!(t.output_dim(), 2);
        assert!(t.eigenvalues[0] >= t.eigenvalues[1]);
        assert!(!t.degenerate);
    }

    #[test]
    fn invariant_components_capped_at_dim() {
        let groups = gain_shifted_groups(); // 3-D
        let cfg = FisherConfig {
            n_components: Some(4),
            regularization: None,
        };
        assert!(matches!(
            FisherTransform::fit_invariant(&groups, &cfg),
            Err(Error::InvalidParameter { name: "n_components", .. })
        ));
        let full = FisherTransform::fit_invariant(
            &groups,
            &FisherConfig {
                n_components: Some(3),
                regularization: None,
            },
        )
        .unwrap();
        assert_eq!(full.output_dim(), 3);
    }

    #[test]
    fn invariant_rejects_coincident_means() {
        // identical group means: S_B = 0, no gain to suppress and no
        // scale to derive the ridge from
        let groups = vec![
            vec![dv(&[1.0, 0.0]), dv(&[-1.0, 0.0])],
            vec![dv(&[0.0, 1.0]), dv(&[0.0, -1.0])],
        ];
        assert!(matches!(
            FisherTransform::fit_invariant(&groups, &FisherConfig::default()),
            Err(Error::DegenerateData { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let t = FisherTransform::fit(&separable_groups(), &FisherConfig::default()).unwrap();
        assert!(matches!(
            t.transform_slice(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }
}
