//! Sampling axes: wavenumbers (um^-1) and optical path differences (um).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the spacing of a grid flagged as regular.
pub const STEP_TOLERANCE: f64 = 1e-12;

/// Ordered, strictly positive wavenumber samples with their spectral support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct WavenumberGrid {
    samples: Vec<f64>,
    bounds: (f64, f64),
    step: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    samples: Vec<f64>,
    bounds: (f64, f64),
    step: Option<f64>,
}

impl TryFrom<RawGrid> for WavenumberGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        WavenumberGrid::new(raw.samples, raw.bounds, raw.step)
    }
}

impl From<WavenumberGrid> for RawGrid {
    fn from(g: WavenumberGrid) -> Self {
        RawGrid {
            samples: g.samples,
            bounds: g.bounds,
            step: g.step,
        }
    }
}

fn check_increasing(samples: &[f64], what: &str) -> Result<()> {
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite sample {bad}")));
    }
    if samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{what}: samples must be strictly increasing")));
    }
    Ok(())
}

fn check_step(samples: &[f64], step: f64, what: &str) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("{what}: step must be positive, got {step}")));
    }
    for w in samples.windows(2) {
        if (w[1] - w[0] - step).abs() > STEP_TOLERANCE {
            return Err(Error::invalid(format!(
                "{what}: spacing {} deviates from step {step}",
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}

/// Returns the common spacing when `samples` is regular within [`STEP_TOLERANCE`].
pub fn detect_step(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let step = (samples[samples.len() - 1] - samples[0]) / (samples.len() - 1) as f64;
    samples
        .windows(2)
        .all(|w| (w[1] - w[0] - step).abs() <= STEP_TOLERANCE)
        .then_some(step)
}

impl WavenumberGrid {
    pub fn new(samples: Vec<f64>, bounds: (f64, f64), step: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("wavenumber grid is empty"));
        }
        check_increasing(&samples, "wavenumber grid")?;
        if samples[0] <= 0.0 {
            return Err(Error::invalid("wavenumbers must be positive"));
        }
        let (lo, hi) = bounds;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > samples[0] || hi < samples[samples.len() - 1] {
            return Err(Error::invalid(format!(
                "bounds [{lo}, {hi}] do not enclose the samples"
            )));
        }
        if let Some(step) = step {
            check_step(&samples, step, "wavenumber grid")?;
        }
        Ok(Self {
            samples,
            bounds,
            step,
        })
    }

    /// A grid over arbitrary samples, with bounds equal to the sample extent.
    /// The step is recorded when the samples turn out to be regular.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let bounds = match (samples.first(), samples.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::invalid("wavenumber grid is empty")),
        };
        let step = detect_step(&samples);
        Self::new(samples, bounds, step)
    }

    /// `count` equally spaced samples over `[min, max]`, endpoints included.
    pub fn regular(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min > 0.0 && max.is_finite()) {
            return Err(Error::invalid(format!("bounds must be positive, got [{min}, {max}]")));
        }
        if min.partial_cmp(&max) != Some(std::cmp::Ordering::Less) {
            return Err(Error::invalid(format!("reversed or empty bounds [{min}, {max}]")));
        }
        if count < 2 {
            return Err(Error::invalid(format!("a regular grid needs at least 2 samples, got {count}")));
        }
        let step = (max - min) / (count - 1) as f64;
        let mut samples: Vec<f64> = (0..count).map(|k| min + k as f64 * step).collect();
        samples[count - 1] = max;
        Self::new(samples, (min, max), Some(step))
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn sigma_min(&self) -> f64 {
        self.bounds.0
    }

    pub fn sigma_max(&self) -> f64 {
        self.bounds.1
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn is_regular(&self) -> bool {
        self.step.is_some()
    }

    /// Index of the sample nearest to `sigma`; exact midpoints go to the lower index.
    pub fn nearest_index(&self, sigma: f64) -> usize {
        let s = &self.samples;
        let upper = s.partition_point(|&v| v < sigma);
        if upper == 0 {
            return 0;
        }
        if upper == s.len() {
            return s.len() - 1;
        }
        if sigma - s[upper - 1] <= s[upper] - sigma {
            upper - 1
        } else {
            upper
        }
    }
}

/// Ordered, non-negative OPD samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct OpdSchedule {
    samples: Vec<f64>,
    step: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    samples: Vec<f64>,
    step: Option<f64>,
}

impl TryFrom<RawSchedule> for OpdSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        OpdSchedule::new(raw.samples, raw.step)
    }
}

impl From<OpdSchedule> for RawSchedule {
    fn from(s: OpdSchedule) -> Self {
        RawSchedule {
            samples: s.samples,
            step: s.step,
        }
    }
}

impl OpdSchedule {
    pub fn new(samples: Vec<f64>, step: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("OPD schedule is empty"));
        }
        check_increasing(&samples, "OPD schedule")?;
        if samples[0] < 0.0 {
            return Err(Error::invalid("OPDs must be non-negative"));
        }
        if let Some(step) = step {
            check_step(&samples, step, "OPD schedule")?;
        }
        Ok(Self { samples, step })
    }

    /// `count` OPDs `start + l * step`.
    pub fn regular(start: f64, step: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("OPD schedule is empty"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("OPD step must be positive, got {step}")));
        }
        let samples = (0..count).map(|l| start + l as f64 * step).collect();
        Self::new(samples, Some(step))
    }

    /// An explicit OPD list; treated as irregular regardless of its spacing.
    pub fn irregular(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, None)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn is_regular(&self) -> bool {
        self.step.is_some()
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    /// Average spacing; zero for a single sample.
    pub fn mean_step(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        (self.max() - self.samples[0]) / (self.samples.len() - 1) as f64
    }

    pub fn starts_at_zero(&self) -> bool {
        self.samples[0] == 0.0
    }
}

/// Regular wavenumber grid over `[sigma_min, sigma_max]` with `count` samples.
pub fn make_regular_grid(sigma_min: f64, sigma_max: f64, count: usize) -> Result<WavenumberGrid> {
    WavenumberGrid::regular(sigma_min, sigma_max, count)
}

/// OPDs `l * opd_step` and half-offset wavenumbers `(k + 1/2) * dsigma` with
/// `dsigma * opd_step = 1 / (2K)`. The cosine kernel on this pair of grids is
/// the DCT-II. The wavenumber bounds are the full Nyquist band `[0, 1/(2 opd_step)]`.
pub fn make_dct_grids(count: usize, opd_step: f64) -> Result<(OpdSchedule, WavenumberGrid)> {
    if count < 2 {
        return Err(Error::invalid(format!("DCT grids need at least 2 samples, got {count}")));
    }
    if !(opd_step > 0.0 && opd_step.is_finite()) {
        return Err(Error::invalid(format!("OPD step must be positive, got {opd_step}")));
    }
    let dsigma = 1.0 / (2.0 * count as f64 * opd_step);
    let nyquist = 1.0 / (2.0 * opd_step);
    let schedule = OpdSchedule::regular(0.0, opd_step, count)?;
    let samples = (0..count).map(|k| (k as f64 + 0.5) * dsigma).collect();
    let grid = WavenumberGrid::new(samples, (0.0, nyquist), Some(dsigma))?;
    Ok((schedule, grid))
}
