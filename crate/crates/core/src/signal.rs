//! Column-stacked spectra and interferograms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OpdSchedule, WavenumberGrid};

fn check_finite(values: &DMatrix<f64>, what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains non-finite values")))
    }
}

/// K x M spectral radiance, one spectrum per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectra", into = "RawSpectra")]
pub struct SpectrumSet {
    grid: WavenumberGrid,
    values: DMatrix<f64>,
    labels: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpectra {
    grid: WavenumberGrid,
    values: DMatrix<f64>,
    labels: Option<Vec<f64>>,
}

impl TryFrom<RawSpectra> for SpectrumSet {
    type Error = Error;

    fn try_from(r: RawSpectra) -> Result<Self> {
        let s = SpectrumSet::new(r.grid, r.values)?;
        match r.labels {
            Some(l) => s.with_labels(l),
            None => Ok(s),
        }
    }
}

impl From<SpectrumSet> for RawSpectra {
    fn from(s: SpectrumSet) -> Self {
        RawSpectra {
            grid: s.grid,
            values: s.values,
            labels: s.labels,
        }
    }
}

impl SpectrumSet {
    pub fn new(grid: WavenumberGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} spectral rows for a grid of {} samples",
                values.nrows(),
                grid.len()
            )));
        }
        check_finite(&values, "spectra")?;
        Ok(Self {
            grid,
            values,
            labels: None,
        })
    }

    /// Nominal central wavenumber per column (um^-1).
    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} spectra",
                labels.len(),
                self.values.ncols()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }
}

/// L x M detected intensities, one interferogram per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterferograms", into = "RawInterferograms")]
pub struct InterferogramSet {
    schedule: OpdSchedule,
    values: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawInterferograms {
    schedule: OpdSchedule,
    values: DMatrix<f64>,
}

impl TryFrom<RawInterferograms> for InterferogramSet {
    type Error = Error;

    fn try_from(r: RawInterferograms) -> Result<Self> {
        InterferogramSet::new(r.schedule, r.values)
    }
}

impl From<InterferogramSet> for RawInterferograms {
    fn from(s: InterferogramSet) -> Self {
        RawInterferograms {
            schedule: s.schedule,
            values: s.values,
        }
    }
}

impl InterferogramSet {
    pub fn new(schedule: OpdSchedule, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != schedule.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} interferogram rows for {} OPDs",
                values.nrows(),
                schedule.len()
            )));
        }
        check_finite(&values, "interferograms")?;
        Ok(Self { schedule, values })
    }

    pub fn schedule(&self) -> &OpdSchedule {
        &self.schedule
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }

    /// Reinterpret the samples as acquired at `schedule` (same length),
    /// e.g. the nominal OPDs a device reports instead of its true ones.
    pub fn relabel(&self, schedule: OpdSchedule) -> Result<Self> {
        Self::new(schedule, self.values.clone())
    }
}
