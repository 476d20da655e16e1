//! Forward model: interferometer responses, transfer-matrix construction,
//! interferogram simulation and the sampling conditions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OpdSchedule, WavenumberGrid};
use crate::instrument::{InstrumentProfile, Regime};
use crate::par;
use crate::signal::{InterferogramSet, SpectrumSet};
use crate::transfer::{Provenance, TransferMatrix};

/// Largest harmonic order used when the reflectivity decays slowly.
pub const MAX_HARMONIC_ORDER: usize = 64;

/// Harmonics whose weight `R^(N-1)` falls below this are treated as negligible.
pub const HARMONIC_THRESHOLD: f64 = 1e-3;

/// Columns per work unit when simulating; fixed so results do not depend on thread count.
const SIM_CHUNK: usize = 16;

fn check_unit(what: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfUnitRange { what, value: v })
    }
}

fn check_reflectivity(r: f64) -> Result<()> {
    if r.is_finite() && (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::invalid(format!("reflectivity must lie in [0, 1), got {r}")))
    }
}

/// Two-beam response `2 T (1 + cos(2 pi delta sigma))`, in `[0, 4T]`.
pub fn tbi_response(delta: f64, sigma: f64, t: f64) -> Result<f64> {
    check_unit("transmittance", t)?;
    Ok(tbi_unchecked(delta, sigma, t))
}

#[inline]
fn tbi_unchecked(delta: f64, sigma: f64, t: f64) -> f64 {
    2.0 * t * (1.0 + (2.0 * PI * delta * sigma).cos())
}

/// Airy response of a lossless Fabry-Perot cavity:
/// `T^2 / (1 + R^2 - 2 R cos(2 pi delta sigma))`.
pub fn mbi_airy_response(delta: f64, sigma: f64, r: f64, t: f64) -> Result<f64> {
    check_reflectivity(r)?;
    check_unit("transmittance", t)?;
    Ok(airy_unchecked(delta, sigma, r, t))
}

#[inline]
fn airy_unchecked(delta: f64, sigma: f64, r: f64, t: f64) -> f64 {
    t * t / (1.0 + r * r - 2.0 * r * (2.0 * PI * delta * sigma).cos())
}

/// DC level `Q = T^2 / (1 - R^2)` of the Airy Fourier series.
pub fn series_dc(r: f64, t: f64) -> f64 {
    t * t / (1.0 - r * r)
}

/// Weight of harmonic `n`: `Q` for `n = 0`, `2 Q R^n` otherwise.
pub fn harmonic_coefficient(n: usize, r: f64, t: f64) -> f64 {
    let q = series_dc(r, t);
    if n == 0 {
        q
    } else {
        2.0 * q * r.powi(n as i32)
    }
}

/// Airy response expanded to `terms` Fourier terms (harmonics `0..terms`).
pub fn mbi_series_response(delta: f64, sigma: f64, r: f64, t: f64, terms: usize) -> Result<f64> {
    check_reflectivity(r)?;
    check_unit("transmittance", t)?;
    if terms == 0 {
        return Err(Error::invalid("series needs at least one term"));
    }
    Ok(series_unchecked(delta, sigma, r, t, terms))
}

fn series_unchecked(delta: f64, sigma: f64, r: f64, t: f64, terms: usize) -> f64 {
    let q = series_dc(r, t);
    let phase = 2.0 * PI * delta * sigma;
    let mut acc = 0.0;
    let mut rn = 1.0;
    for n in 1..terms {
        rn *= r;
        acc += rn * (n as f64 * phase).cos();
    }
    q + 2.0 * q * acc
}

/// Which form of the MBI response fills the matrix. TBI ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseModel {
    #[default]
    ClosedForm,
    /// Truncated Fourier series with this many terms.
    Series(usize),
}

/// Sample the instrument response on `profile.opds() x grid`, evaluating the
/// optical curves pointwise at each wavenumber.
pub fn build_transfer_matrix(
    profile: &InstrumentProfile,
    grid: &WavenumberGrid,
    model: ResponseModel,
) -> Result<TransferMatrix> {
    let schedule = profile.opds();
    if grid.is_empty() || schedule.is_empty() {
        return Err(Error::invalid("empty grid or schedule"));
    }
    if let ResponseModel::Series(0) = model {
        return Err(Error::invalid("series needs at least one term"));
    }
    profile.validate_on(grid)?;
    let t = profile.transmittance().eval_grid(grid)?;
    let r = match profile.regime() {
        Regime::Mbi => profile.reflectivity().expect("validated").eval_grid(grid)?,
        Regime::Tbi => vec![0.0; grid.len()],
    };
    let deltas = schedule.samples();
    let sigmas = grid.samples();
    let regime = profile.regime();

    let columns = par::map_indices(grid.len(), |k| {
        let (s, tk, rk) = (sigmas[k], t[k], r[k]);
        deltas
            .iter()
            .map(|&d| match (regime, model) {
                (Regime::Tbi, _) => tbi_unchecked(d, s, tk),
                (Regime::Mbi, ResponseModel::ClosedForm) => airy_unchecked(d, s, rk, tk),
                (Regime::Mbi, ResponseModel::Series(n)) => series_unchecked(d, s, rk, tk, n),
            })
            .collect::<Vec<f64>>()
    });
    let entries = DMatrix::from_fn(deltas.len(), sigmas.len(), |l, k| columns[k][l]);
    let provenance = match (regime, model) {
        (Regime::Tbi, _) => Provenance::TbiClosedForm,
        (Regime::Mbi, ResponseModel::ClosedForm) => Provenance::MbiAiry,
        (Regime::Mbi, ResponseModel::Series(n)) => Provenance::MbiSeries(n),
    };
    TransferMatrix::new(entries, schedule.clone(), grid.clone(), provenance)
}

/// The bare cosine kernel `cos(2 pi delta_l sigma_k)`; on DCT grids this is
/// exactly the unnormalised DCT-II matrix.
pub fn cosine_kernel(schedule: &OpdSchedule, grid: &WavenumberGrid) -> Result<TransferMatrix> {
    let entries = DMatrix::from_fn(schedule.len(), grid.len(), |l, k| {
        (2.0 * PI * schedule.samples()[l] * grid.samples()[k]).cos()
    });
    TransferMatrix::new(entries, schedule.clone(), grid.clone(), Provenance::DctII)
}

/// Noiseless acquisition `Y = A X`.
pub fn simulate_interferograms(a: &TransferMatrix, x: &SpectrumSet) -> Result<InterferogramSet> {
    if a.grid() != x.grid() {
        return Err(Error::GridMismatch);
    }
    let values = apply_by_column_chunks(a.entries(), x.values());
    InterferogramSet::new(a.schedule().clone(), values)
}

pub(crate) fn apply_by_column_chunks(m: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let ranges = par::chunk_ranges(x.ncols(), SIM_CHUNK);
    let blocks = par::map(&ranges, |r| m * x.columns(r.start, r.len()));
    let mut out = DMatrix::zeros(m.nrows(), x.ncols());
    for (r, block) in ranges.iter().zip(blocks) {
        out.columns_mut(r.start, r.len()).copy_from(&block);
    }
    out
}

/// Add white Gaussian noise column by column so that
/// `mean(y_m^2) / variance = 10^(snr_db / 10)`.
///
/// Column `m` draws from ChaCha8 seeded with `seed` on stream `m`, with
/// standard normals from the ziggurat sampler of `rand_distr`; outputs are
/// portable and independent of the thread count. `snr_db = +inf` disables
/// the noise.
pub fn add_gaussian_noise(y: &InterferogramSet, snr_db: f64, seed: u64) -> Result<InterferogramSet> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("invalid SNR {snr_db} dB")));
    }
    if y.values().is_empty() {
        return Err(Error::invalid("no interferograms to corrupt"));
    }
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    let values = y.values();
    let rows = values.nrows();
    let ratio = 10f64.powf(-snr_db / 10.0);
    let noisy: Vec<DVector<f64>> = par::map_indices(values.ncols(), |m| {
        let col = values.column(m);
        let power = col.iter().map(|v| v * v).sum::<f64>() / rows as f64;
        let std = (power * ratio).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        DVector::from_iterator(
            rows,
            col.iter().map(|&v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + std * z
            }),
        )
    });
    InterferogramSet::new(y.schedule().clone(), DMatrix::from_columns(&noisy))
}

/// Prepend a `delta = 0` sample by linear extrapolation of the first two
/// samples, for devices whose schedule starts above zero.
pub fn extrapolate_zero_opd(y: &InterferogramSet) -> Result<InterferogramSet> {
    let schedule = y.schedule();
    if schedule.starts_at_zero() {
        return Ok(y.clone());
    }
    if schedule.len() < 2 {
        return Err(Error::Precondition("extrapolation needs at least two OPD samples".into()));
    }
    let d = schedule.samples();
    let (d0, d1) = (d[0], d[1]);
    let values = y.values();
    let mut out = DMatrix::zeros(values.nrows() + 1, values.ncols());
    out.rows_mut(1, values.nrows()).copy_from(values);
    for m in 0..values.ncols() {
        let (y0, y1) = (values[(0, m)], values[(1, m)]);
        out[(0, m)] = y0 - (y1 - y0) * d0 / (d1 - d0);
    }
    let mut samples = Vec::with_capacity(d.len() + 1);
    samples.push(0.0);
    samples.extend_from_slice(d);
    let step = schedule
        .step()
        .filter(|&s| (d0 - s).abs() <= crate::grid::STEP_TOLERANCE);
    InterferogramSet::new(OpdSchedule::new(samples, step)?, out)
}

/// Per-wavenumber weights `q` of the inverse DCT: `2 T` for TBI and the
/// first-harmonic weight `2 Q R` for MBI.
pub fn idct_weights(profile: &InstrumentProfile, grid: &WavenumberGrid) -> Result<Vec<f64>> {
    profile.validate_on(grid)?;
    let t = profile.transmittance().eval_grid(grid)?;
    match profile.regime() {
        Regime::Tbi => Ok(t.iter().map(|t| 2.0 * t).collect()),
        Regime::Mbi => {
            let r = profile.reflectivity().expect("MBI has reflectivity").eval_grid(grid)?;
            Ok(r.iter().zip(&t).map(|(&r, &t)| harmonic_coefficient(1, r, t)).collect())
        }
    }
}

/// Outcome of the sampling-theorem checks for a pair of axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    /// False when the OPD schedule is irregular; the flags then use the mean step.
    pub applicable: bool,
    /// `ddelta <= 1 / (2 sigma_max)`.
    pub opd_condition_ok: bool,
    /// `ddelta <= 1 / (2 (N-1) sigma_max)`, needed to keep every harmonic replica unaliased.
    pub harmonic_opd_condition_ok: bool,
    /// `dsigma <= 1 / (2 (N-1) delta_max)`.
    pub wavenumber_condition_ok: bool,
    /// Replicas do not overlap.
    pub overlap_condition_ok: bool,
    pub sigma_nyquist: f64,
    pub max_opd_step: f64,
    pub max_wavenumber_step: f64,
    pub harmonic_order: usize,
    /// Fraction of `[0, sigma_nyq]` covered by the spectral support.
    pub alpha: f64,
}

// Relative slack so that equality cases survive rounding of 1/(2x).
const EQ_SLACK: f64 = 1e-12;

fn bound(denominator: f64) -> f64 {
    if denominator > 0.0 {
        1.0 / denominator
    } else {
        f64::INFINITY
    }
}

/// Evaluate every sampling condition for `schedule x grid` at harmonic order `n`.
pub fn sampling_report(schedule: &OpdSchedule, grid: &WavenumberGrid, n: usize) -> SamplingReport {
    let applicable = schedule.is_regular();
    let opd_step = schedule.step().unwrap_or_else(|| schedule.mean_step());
    let sigma_max = grid.sigma_max();
    let delta_max = schedule.max();
    let harm = n.saturating_sub(1) as f64;

    let max_opd_step = bound(2.0 * sigma_max);
    let harmonic_max_opd_step = bound(2.0 * harm * sigma_max);
    let max_wavenumber_step = bound(2.0 * harm * delta_max);
    let sigma_step = grid.step().unwrap_or_else(|| {
        let s = grid.samples();
        if s.len() < 2 {
            0.0
        } else {
            (s[s.len() - 1] - s[0]) / (s.len() - 1) as f64
        }
    });
    let sigma_nyquist = bound(2.0 * opd_step);
    let width = grid.sigma_max() - grid.sigma_min();
    let alpha = if sigma_nyquist.is_finite() {
        (width / sigma_nyquist).clamp(f64::MIN_POSITIVE, 1.0)
    } else {
        f64::MIN_POSITIVE
    };

    SamplingReport {
        applicable,
        opd_condition_ok: opd_step <= max_opd_step * (1.0 + EQ_SLACK),
        harmonic_opd_condition_ok: opd_step <= harmonic_max_opd_step * (1.0 + EQ_SLACK),
        wavenumber_condition_ok: sigma_step <= max_wavenumber_step * (1.0 + EQ_SLACK),
        overlap_condition_ok: check_overlap(grid, n),
        sigma_nyquist,
        max_opd_step,
        max_wavenumber_step,
        harmonic_order: n,
        alpha,
    }
}

/// OPD-domain conditions (fundamental and harmonic). Same report as [`sampling_report`].
pub fn check_opd_sampling(schedule: &OpdSchedule, grid: &WavenumberGrid, n: usize) -> SamplingReport {
    sampling_report(schedule, grid, n)
}

/// Wavenumber-domain condition. Same report as [`sampling_report`].
pub fn check_wavenumber_sampling(grid: &WavenumberGrid, schedule: &OpdSchedule, n: usize) -> SamplingReport {
    sampling_report(schedule, grid, n)
}

/// Harmonic replicas stay disjoint: `(sigma_max - sigma_min) / sigma_min <= 1 / (N - 2)`.
/// Always true for `N <= 2`.
pub fn check_overlap(grid: &WavenumberGrid, n: usize) -> bool {
    if n <= 2 {
        return true;
    }
    let (lo, hi) = grid.bounds();
    if lo <= 0.0 {
        return false;
    }
    (hi - lo) / lo <= 1.0 / (n - 2) as f64
}

/// Smallest N with `max R(sigma)^(N-1) < 1e-3` over the grid, capped at 64; 2 for TBI.
pub fn effective_harmonic_order(profile: &InstrumentProfile, grid: &WavenumberGrid) -> Result<usize> {
    match profile.regime() {
        Regime::Tbi => Ok(2),
        Regime::Mbi => {
            let r = profile.reflectivity().expect("MBI has reflectivity").max_over(grid)?;
            Ok(harmonic_order_for(r))
        }
    }
}

pub fn harmonic_order_for(r_max: f64) -> usize {
    (2..=MAX_HARMONIC_ORDER)
        .find(|&n| r_max.powi(n as i32 - 1) < HARMONIC_THRESHOLD)
        .unwrap_or(MAX_HARMONIC_ORDER)
}
