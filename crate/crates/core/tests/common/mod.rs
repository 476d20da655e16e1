#![allow(dead_code)]

use inverspect::forward::{self, ResponseModel};
use inverspect::grid::{make_dct_grids, OpdSchedule, WavenumberGrid};
use inverspect::surrogate;
use inverspect::{InstrumentProfile, SpectrumSet, TransferMatrix};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BASELINE_STEP: f64 = 0.175;
pub const BASELINE_OPDS: usize = 319;
pub const SOLAR_BAND: (f64, f64) = (1.0, 2.85);

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

pub fn baseline_profile(reflectivity: f64) -> InstrumentProfile {
    let opds = OpdSchedule::regular(0.0, BASELINE_STEP, BASELINE_OPDS).unwrap();
    InstrumentProfile::mbi(reflectivity, 1.0, opds).unwrap()
}

pub fn solar_grid(count: usize) -> WavenumberGrid {
    WavenumberGrid::regular(SOLAR_BAND.0, SOLAR_BAND.1, count).unwrap()
}

pub fn matrix(profile: &InstrumentProfile, grid: &WavenumberGrid) -> TransferMatrix {
    forward::build_transfer_matrix(profile, grid, ResponseModel::ClosedForm).unwrap()
}

pub fn smooth(grid: &WavenumberGrid, count: usize, seed: u64) -> SpectrumSet {
    surrogate::smooth_random(grid, count, seed, SOLAR_BAND).unwrap()
}

/// Two-beam instrument on DCT grids.
pub fn tbi_dct(k: usize, step: f64, t: f64) -> (InstrumentProfile, WavenumberGrid) {
    let (opds, grid) = make_dct_grids(k, step).unwrap();
    (InstrumentProfile::tbi(t, opds).unwrap(), grid)
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax().max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}
