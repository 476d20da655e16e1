//! Synthetic stand-ins for measured spectra.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WavenumberGrid;
use crate::signal::SpectrumSet;

/// Cosine modes in a smooth-random spectrum.
const MODES: usize = 6;
/// Relative depth of the modulation on the envelope.
const DEPTH: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// Low-order cosine modulation with decaying weights under a `sin^2` envelope.
    SmoothRandom,
    /// Planck-like continuum with a random temperature.
    BlackbodyLike,
    /// One unit pulse per column at evenly spread distinct indices.
    DiracComb,
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth-random" => Ok(SurrogateKind::SmoothRandom),
            "blackbody-like" => Ok(SurrogateKind::BlackbodyLike),
            "dirac-comb" => Ok(SurrogateKind::DiracComb),
            other => Err(Error::invalid(format!(
                "unknown surrogate '{other}' (expected smooth-random, blackbody-like or dirac-comb)"
            ))),
        }
    }
}

/// Generator settings. `band` restricts smooth-random support; it defaults to the grid bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub count: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
}

impl SurrogateSpec {
    pub fn generate(&self, grid: &WavenumberGrid) -> Result<SpectrumSet> {
        match self.kind {
            SurrogateKind::SmoothRandom => smooth_random(grid, self.count, self.seed, self.band.unwrap_or(grid.bounds())),
            SurrogateKind::BlackbodyLike => blackbody_like(grid, self.count, self.seed),
            SurrogateKind::DiracComb => dirac_comb(grid, self.count),
        }
    }
}

pub fn make_surrogate_spectra(kind: SurrogateKind, grid: &WavenumberGrid, count: usize, seed: u64) -> Result<SpectrumSet> {
    SurrogateSpec {
        kind,
        count,
        seed,
        band: None,
    }
    .generate(grid)
}

fn column_rng(seed: u64, column: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column as u64);
    rng
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        Err(Error::invalid("need at least one spectrum"))
    } else {
        Ok(())
    }
}

/// `x = w (1 + 0.8 m)` with `w = sin^2(pi t)` on the band, `t` the position
/// within it, and `m = sum_j a_j cos(j pi t) / sum_j |a_j|`,
/// `a_j ~ N(0, 1) exp(-(j - 1) / 2)`. Since `|m| <= 1` the result is non-negative.
pub fn smooth_random(grid: &WavenumberGrid, count: usize, seed: u64, band: (f64, f64)) -> Result<SpectrumSet> {
    check_count(count)?;
    let (lo, hi) = band;
    if !(lo.is_finite() && hi > lo) {
        return Err(Error::invalid(format!("bad surrogate band [{lo}, {hi}]")));
    }
    let columns: Vec<Vec<f64>> = (0..count)
        .map(|m| {
            let mut rng = column_rng(seed, m);
            let a: Vec<f64> = (0..MODES)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * (-(j as f64) / 2.0).exp()
                })
                .collect();
            let norm: f64 = a.iter().map(|v| v.abs()).sum();
            grid.samples()
                .iter()
                .map(|&s| {
                    let t = (s - lo) / (hi - lo);
                    if !(0.0..=1.0).contains(&t) {
                        return 0.0;
                    }
                    let w = (PI * t).sin().powi(2);
                    let modulation = if norm > 0.0 {
                        a.iter()
                            .enumerate()
                            .map(|(j, aj)| aj * ((j + 1) as f64 * PI * t).cos())
                            .sum::<f64>()
                            / norm
                    } else {
                        0.0
                    };
                    w * (1.0 + DEPTH * modulation)
                })
                .collect()
        })
        .collect();
    SpectrumSet::new(grid.clone(), from_columns(grid.len(), &columns))
}

/// `sigma^3 / (exp(sigma / theta) - 1)`, peak-normalised, with
/// `theta` uniform in `[0.3, 0.8] um^-1` per column.
pub fn blackbody_like(grid: &WavenumberGrid, count: usize, seed: u64) -> Result<SpectrumSet> {
    check_count(count)?;
    let columns: Vec<Vec<f64>> = (0..count)
        .map(|m| {
            let theta = 0.3 + 0.5 * column_rng(seed, m).random::<f64>();
            let raw: Vec<f64> = grid
                .samples()
                .iter()
                .map(|&s| s.powi(3) / (s / theta).exp_m1())
                .collect();
            let peak = raw.iter().cloned().fold(0.0, f64::max);
            raw.into_iter().map(|v| v / peak).collect()
        })
        .collect();
    SpectrumSet::new(grid.clone(), from_columns(grid.len(), &columns))
}

/// Column `m` is a unit pulse at index `floor(m K / M)`; labels carry the
/// pulse wavenumbers. `M = K` gives the identity.
pub fn dirac_comb(grid: &WavenumberGrid, count: usize) -> Result<SpectrumSet> {
    check_count(count)?;
    let k = grid.len();
    if count > k {
        return Err(Error::invalid(format!("{count} pulses do not fit on {k} wavenumbers")));
    }
    let idx: Vec<usize> = (0..count).map(|m| m * k / count).collect();
    let values = DMatrix::from_fn(k, count, |i, m| f64::from(u8::from(i == idx[m])));
    let labels = idx.iter().map(|&i| grid.samples()[i]).collect();
    SpectrumSet::new(grid.clone(), values)?.with_labels(labels)
}

fn from_columns(rows: usize, columns: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, columns.len(), |i, m| columns[m][i])
}
