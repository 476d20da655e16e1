//! Discrete models of two-beam (Michelson) and multiple-beam (Fabry-Perot)
//! interferometric spectrometers, with well-posedness diagnostics and five
//! spectrum reconstruction methods.
//!
//! Units are fixed: optical path differences in um, wavenumbers in um^-1.
//!
//! ```
//! use inverspect::{forward, grid, instrument::InstrumentProfile, inversion, signal::SpectrumSet};
//! use nalgebra::DMatrix;
//!
//! let (opds, sigma) = grid::make_dct_grids(16, 0.25).unwrap();
//! let profile = InstrumentProfile::mbi(0.2, 1.0, opds).unwrap();
//! let a = forward::build_transfer_matrix(&profile, &sigma, Default::default()).unwrap();
//! let x = SpectrumSet::new(sigma, DMatrix::from_element(16, 1, 1.0)).unwrap();
//! let y = forward::simulate_interferograms(&a, &x).unwrap();
//! let est = inversion::pinv_reconstruct(&a, &y).unwrap();
//! assert!(inverspect::metrics::rmse(&x, &est.spectra).unwrap() < 1e-12);
//! ```

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod instrument;
pub mod inversion;
pub mod io;
pub mod metrics;
pub mod par;
pub mod signal;
pub mod surrogate;
pub mod transfer;

pub use error::{Error, Result};
pub use grid::{OpdSchedule, WavenumberGrid};
pub use instrument::{InstrumentProfile, OpticalCurve, Regime};
pub use signal::{InterferogramSet, SpectrumSet};
pub use transfer::{Provenance, TransferMatrix};
