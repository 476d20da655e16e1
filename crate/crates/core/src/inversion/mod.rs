//! Spectrum reconstruction: inverse DCT, pseudo-inverse, truncated SVD,
//! ridge, and the l1-regularised primal-dual solver with identity or DCT prior.

mod dct;
mod lv;
mod prior;
mod svd;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use dct::{dct2, dct2_matrix, dct3, dct3_matrix};
pub use lv::{operator_norm, prox_conj_l1, LvSolver, LvState, SolverDiagnostics, NORM_MAX_ITERS, NORM_TOL, RHO, TAU_FACTOR};
pub use prior::{PriorKind, PriorOperator};
pub use svd::SvdFilter;

use crate::analysis::{dct_grid_deviation, DCT_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::WavenumberGrid;
use crate::signal::{InterferogramSet, SpectrumSet};
use crate::transfer::TransferMatrix;

pub const DEFAULT_LV_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "idct")]
    Idct,
    #[serde(rename = "pinv")]
    Pinv,
    #[serde(rename = "tsvd")]
    Tsvd,
    #[serde(rename = "rr")]
    Ridge,
    #[serde(rename = "lv-id")]
    LvIdentity,
    #[serde(rename = "lv-dct")]
    LvDct,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Idct,
        Method::Pinv,
        Method::Tsvd,
        Method::Ridge,
        Method::LvIdentity,
        Method::LvDct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Idct => "idct",
            Method::Pinv => "pinv",
            Method::Tsvd => "tsvd",
            Method::Ridge => "rr",
            Method::LvIdentity => "lv-id",
            Method::LvDct => "lv-dct",
        }
    }

    pub fn takes_lambda(self) -> bool {
        matches!(self, Method::Tsvd | Method::Ridge | Method::LvIdentity | Method::LvDct)
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, Method::LvIdentity | Method::LvDct)
    }

    pub fn prior(self) -> Option<PriorKind> {
        match self {
            Method::LvIdentity => Some(PriorKind::Identity),
            Method::LvDct => Some(PriorKind::OrthogonalDct),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}' (expected idct, pinv, tsvd, rr, lv-id or lv-dct)")))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodParams {
    /// TSVD fraction, ridge penalty or l1 weight; required by those methods.
    pub lambda: Option<f64>,
    /// Iterations of the primal-dual solver; [`DEFAULT_LV_ITERS`] when absent.
    pub iters: Option<usize>,
}

impl MethodParams {
    pub fn lambda(lambda: f64) -> Self {
        MethodParams {
            lambda: Some(lambda),
            iters: None,
        }
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = Some(iters);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub spectra: SpectrumSet,
    pub method: Method,
    pub lambda: Option<f64>,
    /// One entry per column, iterative methods only.
    pub diagnostics: Option<Vec<SolverDiagnostics>>,
}

/// `x = dct3(y - y_0/2) / q` per column, on DCT grids with a `delta = 0` sample.
pub fn idct_reconstruct(y: &InterferogramSet, weights: &[f64], grid: &WavenumberGrid) -> Result<ReconstructionResult> {
    let schedule = y.schedule();
    if !schedule.starts_at_zero() {
        return Err(Error::Precondition(
            "inverse DCT needs a sample at zero OPD; extrapolate one first".into(),
        ));
    }
    let dev = dct_grid_deviation(schedule, grid);
    if dev.is_nan() || dev > DCT_TOLERANCE {
        return Err(Error::Precondition(
            "inverse DCT needs a regular OPD schedule and matching half-offset wavenumber grid".into(),
        ));
    }
    let k = grid.len();
    if weights.len() != k {
        return Err(Error::DimensionMismatch(format!("{} weights for {k} wavenumbers", weights.len())));
    }
    if let Some(bad) = weights.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
        return Err(Error::Precondition(format!("inverse DCT weights must be positive, found {bad}")));
    }
    let mut centred = y.values().clone();
    for mut col in centred.column_iter_mut() {
        let half_dc = 0.5 * col[0];
        col.add_scalar_mut(-half_dc);
    }
    let mut x = dct3_matrix(k) * centred;
    for (mut row, q) in x.row_iter_mut().zip(weights) {
        row /= *q;
    }
    Ok(ReconstructionResult {
        spectra: SpectrumSet::new(grid.clone(), x)?,
        method: Method::Idct,
        lambda: None,
        diagnostics: None,
    })
}

fn spectra(a: &TransferMatrix, x: DMatrix<f64>) -> Result<SpectrumSet> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstructed spectra".into()));
    }
    SpectrumSet::new(a.grid().clone(), x)
}

fn check_rows(a: &TransferMatrix, y: &InterferogramSet) -> Result<()> {
    if a.entries().nrows() != y.values().nrows() {
        return Err(Error::DimensionMismatch(format!(
            "transfer matrix has {} OPD samples, interferograms have {}",
            a.entries().nrows(),
            y.values().nrows()
        )));
    }
    Ok(())
}

pub fn pinv_reconstruct(a: &TransferMatrix, y: &InterferogramSet) -> Result<ReconstructionResult> {
    Reconstructor::new(Method::Pinv, a)?.run(y, &MethodParams::default())
}

pub fn tsvd_reconstruct(a: &TransferMatrix, y: &InterferogramSet, lambda: f64) -> Result<ReconstructionResult> {
    Reconstructor::new(Method::Tsvd, a)?.run(y, &MethodParams::lambda(lambda))
}

pub fn ridge_reconstruct(a: &TransferMatrix, y: &InterferogramSet, lambda: f64) -> Result<ReconstructionResult> {
    Reconstructor::new(Method::Ridge, a)?.run(y, &MethodParams::lambda(lambda))
}

pub fn lv_reconstruct(
    a: &TransferMatrix,
    y: &InterferogramSet,
    lambda: f64,
    prior: PriorKind,
    iters: usize,
) -> Result<ReconstructionResult> {
    let method = match prior {
        PriorKind::Identity => Method::LvIdentity,
        PriorKind::OrthogonalDct => Method::LvDct,
    };
    Reconstructor::new(method, a)?.run(y, &MethodParams::lambda(lambda).with_iters(iters))
}

/// Dispatch on `method`.
pub fn reconstruct(method: Method, a: &TransferMatrix, y: &InterferogramSet, params: &MethodParams) -> Result<ReconstructionResult> {
    Reconstructor::new(method, a)?.run(y, params)
}

enum Prepared {
    Idct(Vec<f64>),
    Svd(SvdFilter),
    Lv(LvSolver),
}

/// A method bound to one transfer matrix, with its decomposition or step
/// sizes computed once and reused across calls (e.g. over a lambda grid).
pub struct Reconstructor {
    method: Method,
    a: TransferMatrix,
    prepared: Prepared,
}

impl Reconstructor {
    /// For `idct` the weights default to half the `delta = 0` row of `a`,
    /// which is `2 T(sigma_k)` for a two-beam matrix.
    pub fn new(method: Method, a: &TransferMatrix) -> Result<Self> {
        let prepared = match method {
            Method::Idct => {
                if !a.schedule().starts_at_zero() {
                    return Err(Error::Precondition("inverse DCT needs a sample at zero OPD".into()));
                }
                Prepared::Idct(a.entries().row(0).iter().map(|v| 0.5 * v).collect())
            }
            Method::Pinv | Method::Tsvd | Method::Ridge => Prepared::Svd(SvdFilter::new(a.entries())?),
            Method::LvIdentity | Method::LvDct => {
                let prior = PriorOperator::new(method.prior().expect("iterative"), a.entries().ncols())?;
                Prepared::Lv(LvSolver::new(a.entries(), prior)?)
            }
        };
        Ok(Reconstructor {
            method,
            a: a.clone(),
            prepared,
        })
    }

    /// Replace the inverse DCT weights (e.g. with [`crate::forward::idct_weights`]).
    pub fn with_idct_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        match self.prepared {
            Prepared::Idct(_) => {
                self.prepared = Prepared::Idct(weights);
                Ok(self)
            }
            _ => Err(Error::invalid("weights only apply to the inverse DCT")),
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.a
    }

    pub fn run(&self, y: &InterferogramSet, params: &MethodParams) -> Result<ReconstructionResult> {
        let lambda = if self.method.takes_lambda() {
            Some(params.lambda.ok_or_else(|| Error::invalid(format!("method {} needs a lambda", self.method)))?)
        } else {
            None
        };
        if let Some(l) = lambda {
            if !l.is_finite() {
                return Err(Error::invalid(format!("lambda must be finite, got {l}")));
            }
        }
        match &self.prepared {
            Prepared::Idct(q) => idct_reconstruct(y, q, self.a.grid()),
            Prepared::Svd(f) => {
                check_rows(&self.a, y)?;
                let x = match self.method {
                    Method::Pinv => f.pinv(y.values())?,
                    Method::Tsvd => f.tsvd(y.values(), lambda.expect("checked"))?,
                    _ => f.ridge(y.values(), lambda.expect("checked"))?,
                };
                Ok(ReconstructionResult {
                    spectra: spectra(&self.a, x)?,
                    method: self.method,
                    lambda,
                    diagnostics: None,
                })
            }
            Prepared::Lv(solver) => {
                check_rows(&self.a, y)?;
                let iters = params.iters.unwrap_or(DEFAULT_LV_ITERS);
                let (x, diags) = solver.solve(y.values(), lambda.expect("checked"), iters)?;
                Ok(ReconstructionResult {
                    spectra: spectra(&self.a, x)?,
                    method: self.method,
                    lambda,
                    diagnostics: Some(diags),
                })
            }
        }
    }
}
