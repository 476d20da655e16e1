use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    Identity,
    OrthogonalDct,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "id" => Ok(PriorKind::Identity),
            "orthogonal-dct" | "dct" => Ok(PriorKind::OrthogonalDct),
            other => Err(Error::invalid(format!("unknown prior '{other}' (expected identity or dct)"))),
        }
    }
}

/// Sparsifying operator of the l1 penalty. The DCT variant is the
/// orthonormal DCT-II, `sqrt(2/K) cos(pi/K (j + 1/2) i)` with row 0 divided
/// by `sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorOperator {
    kind: PriorKind,
    dim: usize,
    matrix: Option<DMatrix<f64>>,
}

impl PriorOperator {
    pub fn new(kind: PriorKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("prior dimension must be positive"));
        }
        let matrix = match kind {
            PriorKind::Identity => None,
            PriorKind::OrthogonalDct => Some(orthogonal_dct(dim)),
        };
        Ok(PriorOperator { kind, dim, matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(PriorKind::Identity, dim)
    }

    pub fn orthogonal_dct(dim: usize) -> Result<Self> {
        Self::new(PriorKind::OrthogonalDct, dim)
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dense form; `None` for the identity.
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        self.matrix.as_ref()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.clone().unwrap_or_else(|| DMatrix::identity(self.dim, self.dim))
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.matrix {
            None => x.clone(),
            Some(m) => m * x,
        }
    }

    pub fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.matrix {
            None => u.clone(),
            Some(m) => m.tr_mul(u),
        }
    }
}

fn orthogonal_dct(k: usize) -> DMatrix<f64> {
    let kf = k as f64;
    DMatrix::from_fn(k, k, |i, j| {
        let scale = if i == 0 { (1.0 / kf).sqrt() } else { (2.0 / kf).sqrt() };
        scale * (PI / kf * (j as f64 + 0.5) * i as f64).cos()
    })
}
