//! Normal-Inverse-Wishart conjugate model for Gaussian clusters.
//!
//! Each cluster's mean and covariance carry a NIW prior
//! (m0, kappa0, nu0, Psi0). Conjugacy gives closed-form posterior
//! updates from sample sufficient statistics and a multivariate
//! Student-t posterior predictive:
//!
//! ```text
//! kappa_n = kappa0 + n        nu_n = nu0 + n
//! m_n   = (kappa0 m0 + n xbar) / kappa_n
//! Psi_n = Psi0 + S + (kappa0 n / kappa_n)(xbar - m0)(xbar - m0)^T
//! x_new ~ t_df(m_n, Psi_n (kappa_n + 1) / (kappa_n df)),  df = nu_n - p + 1
//! ```
//!
//! where S is the centered scatter of the n observed samples.

use crate::error::{Error, Result};
use crate::linalg::{mat_to_rows, rows_to_mat};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// NIW parameters; doubles as prior and posterior (same family).
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams {
    pub mean: DVector<f64>,
    pub kappa: f64,
    pub dof: f64,
    pub scale: DMatrix<f64>,
}

/// Serialized form of [`NiwParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredNiw {
    pub mean: Vec<f64>,
    pub kappa: f64,
    pub dof: f64,
    pub scale_rows: Vec<Vec<f64>>,
}

/// Running sufficient statistics of a sample set: count, sum, and sum
/// of outer products.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    n: usize,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
}

impl SampleStats {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        self.sum += x;
        self.outer.ger(1.0, x, x, 1.0);
    }

    /// Reassemble stats from previously stored raw sums.
    pub fn from_raw(n: usize, sum: DVector<f64>, outer: DMatrix<f64>) -> Result<Self> {
        let dim = sum.len();
        if outer.nrows() != dim || outer.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: outer.nrows(),
            });
        }
        if sum.iter().any(|v| !v.is_finite()) || outer.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { n, sum, outer })
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Raw accumulators (count, sum, outer-product sum), for storage.
    pub fn raw(&self) -> (usize, &DVector<f64>, &DMatrix<f64>) {
        (self.n, &self.sum, &self.outer)
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        (self.n > 0).then(|| &self.sum / self.n as f64)
    }

    /// Centered scatter S = sum_i (x_i - xbar)(x_i - xbar)^T.
    pub fn scatter(&self) -> Option<DMatrix<f64>> {
        let mean = self.mean()?;
        let mut s = self.outer.clone();
        s.ger(-(self.n as f64), &mean, &mean, 1.0);
        Some(s)
    }
}

impl NiwParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim() as f64;
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("must be positive and finite, got {}", self.kappa),
            });
        }
        if !(self.dof > p - 1.0) || !self.dof.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dof",
                reason: format!("must exceed dim - 1 = {}, got {}", p - 1.0, self.dof),
            });
        }
        if self.scale.nrows() != self.dim() || self.scale.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: self.scale.nrows(),
            });
        }
        if self.mean.iter().any(|v| !v.is_finite())
            || self.scale.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteInput);
        }
        if Cholesky::new(self.scale.clone()).is_none() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: "must be symmetric positive definite".into(),
            });
        }
        Ok(())
    }

    /// Conjugate posterior after absorbing `stats`.
    pub fn posterior(&self, stats: &SampleStats) -> Result<NiwParams> {
        if stats.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: stats.dim(),
            });
        }
        let n = stats.count() as f64;
        if stats.count() == 0 {
            return Ok(self.clone());
        }
        let xbar = stats.mean().expect("nonempty stats");
        let s = stats.scatter().expect("nonempty stats");
        let kappa_n = self.kappa + n;
        let dof_n = self.dof + n;
        let mean_n = (&self.mean * self.kappa + &xbar * n) / kappa_n;
        let dev = &xbar - &self.mean;
        let mut scale_n = &self.scale + s;
        scale_n.ger(self.kappa * n / kappa_n, &dev, &dev, 1.0);
        Ok(NiwParams {
            mean: mean_n,
            kappa: kappa_n,
            dof: dof_n,
            scale: scale_n,
        })
    }

    /// Log density of the posterior-predictive multivariate Student-t
    /// at `x`.
    pub fn log_predictive(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let p = self.dim() as f64;
        let df = self.dof - p + 1.0;
        if !(df > 0.0) {
            return Err(Error::Numerical {
                reason: format!("predictive dof {df} not positive"),
            });
        }
        let scale = &self.scale * ((self.kappa + 1.0) / (self.kappa * df));
        let chol = Cholesky::new(scale).ok_or_else(|| Error::Numerical {
            reason: "predictive scale not positive definite".into(),
        })?;
        // ln|Sigma| from the Cholesky diagonal
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let dev = x - &self.mean;
        let z = chol.solve(&dev);
        let quad = dev.dot(&z);
        Ok(ln_gamma((df + p) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * p * (df * std::f64::consts::PI).ln()
            - 0.5 * log_det
            - 0.5 * (df + p) * (1.0 + quad / df).ln())
    }

    pub fn to_stored(&self) -> StoredNiw {
        StoredNiw {
            mean: self.mean.iter().copied().collect(),
            kappa: self.kappa,
            dof: self.dof,
            scale_rows: mat_to_rows(&self.scale),
        }
    }

    pub fn from_stored(stored: &StoredNiw) -> Result<Self> {
        let params = NiwParams {
            mean: DVector::from_column_slice(&stored.mean),
            kappa: stored.kappa,
            dof: stored.dof,
            scale: rows_to_mat(&stored.scale_rows)?,
        };
        params.validate()?;
        Ok(params)
    }
}
