//! Pseudo-inverse, truncated SVD and ridge as filters on one shared
//! decomposition `A = U diag(psi) V^T`.

use nalgebra::{DMatrix, DVector};

use crate::analysis::{numerical_rank, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};

const SVD_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SvdFilter {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    psi: DVector<f64>,
    rank: usize,
}

impl SvdFilter {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(a, DEFAULT_RANK_TOL)
    }

    pub fn with_tolerance(a: &DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("empty matrix"));
        }
        let mut svd = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITERS)
            .ok_or(Error::SvdNonConvergence(SVD_MAX_ITERS))?;
        svd.sort_by_singular_values();
        let psi = svd.singular_values.clone();
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("singular values".into()));
        }
        let rank = numerical_rank(psi.as_slice(), rank_tol);
        Ok(SvdFilter {
            u: svd.u.expect("requested"),
            v_t: svd.v_t.expect("requested"),
            psi,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &[f64] {
        self.psi.as_slice()
    }

    /// `V diag(f) U^T Y` over the first `f.len()` singular triplets.
    pub fn apply(&self, filter: &[f64], y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.nrows() != self.u.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, data has {}",
                self.u.nrows(),
                y.nrows()
            )));
        }
        let r = filter.len();
        let mut coeffs = self.u.columns(0, r).tr_mul(y);
        for (i, f) in filter.iter().enumerate() {
            coeffs.row_mut(i).scale_mut(*f);
        }
        Ok(self.v_t.rows(0, r).tr_mul(&coeffs))
    }

    pub fn pinv(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let f: Vec<f64> = self.psi.iter().take(self.rank).map(|p| 1.0 / p).collect();
        self.apply(&f, y)
    }

    /// Keeps `1/psi_r` for the 0-based indices `r < lambda * rank`, i.e. the
    /// leading `ceil(lambda * rank)` values.
    pub fn tsvd(&self, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        let keep = tsvd_kept(self.rank, lambda)?;
        let f: Vec<f64> = self.psi.iter().take(keep).map(|p| 1.0 / p).collect();
        self.apply(&f, y)
    }

    /// Filter `psi / (psi^2 + lambda^2)` on the retained values: the solution
    /// of `(A^T A + lambda^2 I) x = A^T y`.
    pub fn ridge(&self, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("ridge parameter must be finite and >= 0, got {lambda}")));
        }
        let l2 = lambda * lambda;
        let f: Vec<f64> = self.psi.iter().take(self.rank).map(|p| p / (p * p + l2)).collect();
        self.apply(&f, y)
    }
}

pub(crate) fn tsvd_kept(rank: usize, lambda: f64) -> Result<usize> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid(format!("TSVD fraction must lie in (0, 1], got {lambda}")));
    }
    Ok(((lambda * rank as f64).ceil() as usize).clamp(rank.min(1), rank))
}
