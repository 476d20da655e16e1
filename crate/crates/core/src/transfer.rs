use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OpdSchedule, WavenumberGrid};

/// How a transfer matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    TbiClosedForm,
    MbiAiry,
    /// Fourier series of the Airy response truncated to N terms.
    MbiSeries(usize),
    /// Pure cosine kernel `cos(2 pi delta sigma)`.
    DctII,
    CustomLoaded,
}

impl Provenance {
    /// Closed-form physical responses are non-negative by construction.
    fn must_be_nonnegative(self) -> bool {
        matches!(self, Provenance::TbiClosedForm | Provenance::MbiAiry)
    }
}

/// The sampled response `a_lk = A(delta_l, sigma_k)`: rows follow the OPD
/// schedule, columns the wavenumber grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransfer", into = "RawTransfer")]
pub struct TransferMatrix {
    entries: DMatrix<f64>,
    schedule: OpdSchedule,
    grid: WavenumberGrid,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct RawTransfer {
    entries: DMatrix<f64>,
    schedule: OpdSchedule,
    grid: WavenumberGrid,
    provenance: Provenance,
}

impl TryFrom<RawTransfer> for TransferMatrix {
    type Error = Error;

    fn try_from(r: RawTransfer) -> Result<Self> {
        TransferMatrix::new(r.entries, r.schedule, r.grid, r.provenance)
    }
}

impl From<TransferMatrix> for RawTransfer {
    fn from(t: TransferMatrix) -> Self {
        RawTransfer {
            entries: t.entries,
            schedule: t.schedule,
            grid: t.grid,
            provenance: t.provenance,
        }
    }
}

impl TransferMatrix {
    pub fn new(
        entries: DMatrix<f64>,
        schedule: OpdSchedule,
        grid: WavenumberGrid,
        provenance: Provenance,
    ) -> Result<Self> {
        if entries.nrows() != schedule.len() || entries.ncols() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but grids are {}x{}",
                entries.nrows(),
                entries.ncols(),
                schedule.len(),
                grid.len()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("transfer matrix entry {v}")));
        }
        if provenance.must_be_nonnegative() {
            if let Some(v) = entries.iter().find(|&&v| v < 0.0) {
                return Err(Error::invalid(format!("negative response {v} in a closed-form matrix")));
            }
        }
        Ok(Self {
            entries,
            schedule,
            grid,
            provenance,
        })
    }

    /// A user-supplied matrix over the given axes.
    pub fn custom(entries: DMatrix<f64>, schedule: OpdSchedule, grid: WavenumberGrid) -> Result<Self> {
        Self::new(entries, schedule, grid, Provenance::CustomLoaded)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn schedule(&self) -> &OpdSchedule {
        &self.schedule
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// (L, K)
    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }

    /// Same matrix multiplied by `factor`, recorded as custom.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            &self.entries * factor,
            self.schedule.clone(),
            self.grid.clone(),
            Provenance::CustomLoaded,
        )
    }
}
