//! Well-posedness diagnostics: singular values, numerical rank, condition
//! number, harmonic decomposition of the Airy matrix and reflectivity sweeps.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{self, harmonic_coefficient, ResponseModel};
use crate::grid::{OpdSchedule, WavenumberGrid};
use crate::instrument::{InstrumentProfile, Regime};
use crate::par;
use crate::transfer::{Provenance, TransferMatrix};

/// Default numerical-rank threshold, relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerance used to decide whether a pair of axes forms DCT grids.
pub const DCT_TOLERANCE: f64 = 1e-9;

const SVD_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdAnalysis {
    /// Descending singular values, `min(L, K)` of them.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `psi_1 / psi_rank` over the retained values; infinite for a zero matrix.
    pub condition_number: f64,
    pub rank_tol: f64,
}

impl SvdAnalysis {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.singular_values.len()
    }

    /// Condition number with no rank truncation: infinite whenever some
    /// singular value is zero at machine precision.
    pub fn full_condition(&self) -> f64 {
        let (Some(&first), Some(&last)) = (self.singular_values.first(), self.singular_values.last()) else {
            return f64::INFINITY;
        };
        let n = self.singular_values.len() as f64;
        if first == 0.0 || last <= f64::EPSILON * n * first {
            f64::INFINITY
        } else {
            first / last
        }
    }
}

/// Singular values of `m` in descending order (Golub-Kahan bidiagonalisation
/// followed by implicit-shift QR, as implemented by nalgebra).
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    let svd = nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::SvdNonConvergence(SVD_MAX_ITERS))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("singular values".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub fn svd_analysis(a: &TransferMatrix, rank_tol: f64) -> Result<SvdAnalysis> {
    svd_analysis_of(a.entries(), rank_tol)
}

pub fn svd_analysis_of(m: &DMatrix<f64>, rank_tol: f64) -> Result<SvdAnalysis> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::invalid(format!("rank tolerance must lie in (0, 1), got {rank_tol}")));
    }
    let values = singular_values(m)?;
    let rank = numerical_rank(&values, rank_tol);
    let condition_number = if rank == 0 { f64::INFINITY } else { values[0] / values[rank - 1] };
    Ok(SvdAnalysis {
        singular_values: values,
        rank,
        condition_number,
        rank_tol,
    })
}

/// Count of values `>= tol * values[0]`; `values` must be descending.
pub fn numerical_rank(values: &[f64], tol: f64) -> usize {
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().take_while(|&&v| v >= tol * top).count(),
        _ => 0,
    }
}

/// Split the Airy matrix into its harmonics:
/// `A(n)_lk = C_n(sigma_k) cos(2 pi n delta_l sigma_k)` for `n = 0..count`.
pub fn harmonic_decomposition(
    profile: &InstrumentProfile,
    grid: &WavenumberGrid,
    count: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if profile.regime() != Regime::Mbi {
        return Err(Error::invalid("harmonic decomposition needs an MBI profile"));
    }
    if count == 0 {
        return Err(Error::invalid("need at least one harmonic"));
    }
    profile.validate_on(grid)?;
    let r = profile.reflectivity().expect("MBI").eval_grid(grid)?;
    let t = profile.transmittance().eval_grid(grid)?;
    let deltas = profile.opds().samples();
    let sigmas = grid.samples();
    Ok(par::map_indices(count, |n| {
        DMatrix::from_fn(deltas.len(), sigmas.len(), |l, k| {
            harmonic_coefficient(n, r[k], t[k]) * (2.0 * PI * n as f64 * deltas[l] * sigmas[k]).cos()
        })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub reflectivity: f64,
    pub condition_number: f64,
    pub rank: usize,
}

/// Condition number of the closed-form matrix for each constant reflectivity,
/// in input order. The matrix is rebuilt for every value.
pub fn reflectivity_sweep(
    base: &InstrumentProfile,
    grid: &WavenumberGrid,
    reflectivities: &[f64],
    rank_tol: f64,
) -> Result<Vec<SweepPoint>> {
    if base.regime() != Regime::Mbi {
        return Err(Error::invalid("reflectivity sweep needs an MBI profile"));
    }
    par::map(reflectivities, |&r| {
        let profile = base.with_constant_reflectivity(r)?;
        let a = forward::build_transfer_matrix(&profile, grid, ResponseModel::ClosedForm)?;
        let s = svd_analysis(&a, rank_tol)?;
        Ok(SweepPoint {
            reflectivity: r,
            condition_number: s.condition_number,
            rank: s.rank,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DctEquivalence {
    pub is_dct_compatible: bool,
    pub max_deviation: f64,
}

/// Largest departure of the axes from `delta_l = l ddelta`,
/// `sigma_k = (k + 1/2) dsigma`, `dsigma ddelta = 1/(2K)`; infinite when the
/// shapes cannot match at all.
pub fn dct_grid_deviation(schedule: &OpdSchedule, grid: &WavenumberGrid) -> f64 {
    let k = grid.len();
    let (Some(dd), Some(ds)) = (schedule.step(), grid.step()) else {
        return f64::INFINITY;
    };
    if schedule.len() != k || !schedule.starts_at_zero() {
        return f64::INFINITY;
    }
    let mut dev = (ds * dd * 2.0 * k as f64 - 1.0).abs();
    for (i, (&d, &s)) in schedule.samples().iter().zip(grid.samples()).enumerate() {
        dev = dev.max((d - i as f64 * dd).abs());
        dev = dev.max((s - (i as f64 + 0.5) * ds).abs());
    }
    dev
}

/// Whether `a` is the DCT-II special case of the two-beam matrix: axes as
/// built by [`crate::grid::make_dct_grids`] and entries
/// `2 T_k (1 + cos(pi/K (k + 1/2) l))` (or the bare kernel for
/// [`Provenance::DctII`]). `T_k` is read off the `delta = 0` row.
pub fn dct_equivalence_check(a: &TransferMatrix) -> DctEquivalence {
    let grid_dev = dct_grid_deviation(a.schedule(), a.grid());
    if grid_dev.is_nan() || grid_dev > DCT_TOLERANCE {
        return DctEquivalence {
            is_dct_compatible: false,
            max_deviation: grid_dev,
        };
    }
    let m = a.entries();
    let k = m.ncols();
    let bare = a.provenance() == Provenance::DctII;
    let scale = m.amax().max(1.0);
    let mut dev: f64 = grid_dev;
    for col in 0..k {
        let weight = if bare { 1.0 } else { m[(0, col)] / 4.0 };
        for l in 0..m.nrows() {
            let c = (PI / k as f64 * (col as f64 + 0.5) * l as f64).cos();
            let expected = if bare { c } else { 2.0 * weight * (1.0 + c) };
            dev = dev.max((m[(l, col)] - expected).abs() / scale);
        }
    }
    DctEquivalence {
        is_dct_compatible: dev <= DCT_TOLERANCE,
        max_deviation: dev,
    }
}
