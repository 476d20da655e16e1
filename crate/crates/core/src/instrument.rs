//! Instrument descriptions: interference regime, optical curves and OPDs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OpdSchedule, WavenumberGrid};

/// Highest polynomial degree accepted for a characterised optical curve.
pub const MAX_POLY_DEGREE: usize = 5;

/// OPD / thickness consistency tolerance (um).
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Two-beam (Michelson-type) interference.
    Tbi,
    /// Multiple-beam (Fabry-Perot) interference.
    Mbi,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tbi" => Ok(Regime::Tbi),
            "mbi" => Ok(Regime::Mbi),
            other => Err(Error::invalid(format!("unknown regime '{other}' (expected tbi or mbi)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveShape {
    Constant(f64),
    /// Monomial coefficients `c0 + c1 s + ... + c5 s^5`.
    Polynomial(Vec<f64>),
    /// `(sigma, value)` nodes, linearly interpolated.
    Tabulated(Vec<(f64, f64)>),
}

/// A reflectivity or transmittance curve R(sigma) / T(sigma).
///
/// Evaluation never clamps: a value outside [0, 1] is reported as an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct OpticalCurve {
    shape: CurveShape,
    range: Option<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    shape: CurveShape,
    range: Option<(f64, f64)>,
}

impl TryFrom<RawCurve> for OpticalCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        let curve = match raw.shape {
            CurveShape::Constant(v) => OpticalCurve::constant(v)?,
            CurveShape::Polynomial(c) => {
                let (lo, hi) = raw
                    .range
                    .ok_or_else(|| Error::invalid("polynomial curve needs a valid range"))?;
                OpticalCurve::polynomial(c, (lo, hi))?
            }
            CurveShape::Tabulated(t) => OpticalCurve::tabulated(t)?,
        };
        match raw.range {
            Some(r) => curve.with_range(r),
            None => Ok(curve),
        }
    }
}

impl From<OpticalCurve> for RawCurve {
    fn from(c: OpticalCurve) -> Self {
        RawCurve {
            shape: c.shape,
            range: c.range,
        }
    }
}

fn unit_check(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfUnitRange { what, value })
    }
}

impl OpticalCurve {
    pub fn constant(value: f64) -> Result<Self> {
        unit_check("curve value", value)?;
        Ok(Self {
            shape: CurveShape::Constant(value),
            range: None,
        })
    }

    /// Monomial polynomial of degree at most [`MAX_POLY_DEGREE`], checked to
    /// stay within [0, 1] over `range`.
    pub fn polynomial(coefficients: Vec<f64>, range: (f64, f64)) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("polynomial curve has no coefficients"));
        }
        if coefficients.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::invalid(format!(
                "polynomial degree {} exceeds the maximum of {MAX_POLY_DEGREE}",
                coefficients.len() - 1
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite polynomial coefficient"));
        }
        let curve = Self {
            shape: CurveShape::Polynomial(coefficients),
            range: None,
        };
        curve.with_range(range)
    }

    pub fn tabulated(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("tabulated curve needs at least two points"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("tabulated curve has duplicate wavenumbers"));
        }
        for &(s, v) in &points {
            if !s.is_finite() {
                return Err(Error::invalid("non-finite tabulated wavenumber"));
            }
            unit_check("tabulated value", v)?;
        }
        let range = (points[0].0, points[points.len() - 1].0);
        Ok(Self {
            shape: CurveShape::Tabulated(points),
            range: Some(range),
        })
    }

    /// Restrict the valid range and verify the curve stays in [0, 1] on it.
    pub fn with_range(mut self, range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("invalid curve range [{lo}, {hi}]")));
        }
        if let CurveShape::Tabulated(points) = &self.shape {
            if lo < points[0].0 || hi > points[points.len() - 1].0 {
                return Err(Error::invalid("curve range exceeds the tabulated nodes"));
            }
        }
        self.range = Some(range);
        self.validate_over(lo, hi)?;
        Ok(self)
    }

    pub fn shape(&self) -> &CurveShape {
        &self.shape
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.shape, CurveShape::Constant(_))
    }

    fn raw_value(&self, sigma: f64) -> f64 {
        match &self.shape {
            CurveShape::Constant(v) => *v,
            CurveShape::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * sigma + ci),
            CurveShape::Tabulated(points) => {
                let upper = points.partition_point(|p| p.0 < sigma);
                if upper == 0 {
                    return points[0].1;
                }
                if upper == points.len() {
                    return points[points.len() - 1].1;
                }
                let (s0, v0) = points[upper - 1];
                let (s1, v1) = points[upper];
                v0 + (v1 - v0) * (sigma - s0) / (s1 - s0)
            }
        }
    }

    /// Value at `sigma`, which must lie in the valid range.
    pub fn eval(&self, sigma: f64) -> Result<f64> {
        if let Some((lo, hi)) = self.range {
            if sigma < lo || sigma > hi {
                return Err(Error::OutsideValidRange { sigma, lo, hi });
            }
        }
        unit_check("curve value", self.raw_value(sigma))
    }

    pub fn eval_grid(&self, grid: &WavenumberGrid) -> Result<Vec<f64>> {
        grid.samples().iter().map(|&s| self.eval(s)).collect()
    }

    /// Dense check (plus tabulated nodes) that the curve stays inside [0, 1].
    pub fn validate_over(&self, lo: f64, hi: f64) -> Result<()> {
        const PROBES: usize = 2001;
        for i in 0..PROBES {
            let s = lo + (hi - lo) * i as f64 / (PROBES - 1) as f64;
            unit_check("curve value", self.raw_value(s))?;
        }
        Ok(())
    }

    /// Largest value over the grid.
    pub fn max_over(&self, grid: &WavenumberGrid) -> Result<f64> {
        Ok(self.eval_grid(grid)?.into_iter().fold(0.0, f64::max))
    }
}

/// Physical layout generating the OPDs: `delta = 2 n d cos(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub refractive_index: f64,
    /// Incidence angle (rad).
    pub incidence_angle: f64,
    /// Per-OPD thicknesses (um).
    pub thicknesses: Vec<f64>,
    /// Present when the thicknesses are regularly spaced (um).
    pub thickness_step: Option<f64>,
}

impl Geometry {
    pub fn opd_for(&self, thickness: f64) -> f64 {
        2.0 * self.refractive_index * thickness * self.incidence_angle.cos()
    }

    pub fn opds(&self) -> Vec<f64> {
        self.thicknesses.iter().map(|&d| self.opd_for(d)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct InstrumentProfile {
    regime: Regime,
    reflectivity: Option<OpticalCurve>,
    transmittance: OpticalCurve,
    opds: OpdSchedule,
    geometry: Option<Geometry>,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    regime: Regime,
    reflectivity: Option<OpticalCurve>,
    transmittance: OpticalCurve,
    opds: OpdSchedule,
    geometry: Option<Geometry>,
}

impl TryFrom<RawProfile> for InstrumentProfile {
    type Error = Error;

    fn try_from(r: RawProfile) -> Result<Self> {
        let p = InstrumentProfile::new(r.regime, r.transmittance, r.reflectivity, r.opds)?;
        match r.geometry {
            Some(g) => p.with_geometry(g),
            None => Ok(p),
        }
    }
}

impl From<InstrumentProfile> for RawProfile {
    fn from(p: InstrumentProfile) -> Self {
        RawProfile {
            regime: p.regime,
            reflectivity: p.reflectivity,
            transmittance: p.transmittance,
            opds: p.opds,
            geometry: p.geometry,
        }
    }
}

impl InstrumentProfile {
    /// MBI requires a reflectivity curve; TBI profiles keep it but never use it.
    pub fn new(
        regime: Regime,
        transmittance: OpticalCurve,
        reflectivity: Option<OpticalCurve>,
        opds: OpdSchedule,
    ) -> Result<Self> {
        if regime == Regime::Mbi && reflectivity.is_none() {
            return Err(Error::invalid("an MBI profile needs a reflectivity curve"));
        }
        Ok(Self {
            regime,
            reflectivity,
            transmittance,
            opds,
            geometry: None,
        })
    }

    pub fn tbi(transmittance: f64, opds: OpdSchedule) -> Result<Self> {
        Self::new(Regime::Tbi, OpticalCurve::constant(transmittance)?, None, opds)
    }

    pub fn mbi(reflectivity: f64, transmittance: f64, opds: OpdSchedule) -> Result<Self> {
        Self::new(
            Regime::Mbi,
            OpticalCurve::constant(transmittance)?,
            Some(OpticalCurve::constant(reflectivity)?),
            opds,
        )
    }

    /// Build the OPD schedule from the geometry, so the consistency check holds by construction.
    pub fn from_geometry(
        regime: Regime,
        transmittance: OpticalCurve,
        reflectivity: Option<OpticalCurve>,
        geometry: Geometry,
    ) -> Result<Self> {
        let samples = geometry.opds();
        let opds = match geometry.thickness_step {
            Some(dd) => {
                let step = geometry.opd_for(dd);
                let start = samples.first().copied().unwrap_or(0.0);
                let regular: Vec<f64> = (0..samples.len()).map(|l| start + l as f64 * step).collect();
                if regular.iter().zip(&samples).all(|(a, b)| (a - b).abs() <= crate::grid::STEP_TOLERANCE) {
                    OpdSchedule::new(regular, Some(step))?
                } else {
                    OpdSchedule::irregular(samples)?
                }
            }
            None => OpdSchedule::irregular(samples)?,
        };
        Self::new(regime, transmittance, reflectivity, opds)?.with_geometry(geometry)
    }

    /// Attach a geometry after checking every OPD against `2 n d cos(theta)`.
    pub fn with_geometry(mut self, geometry: Geometry) -> Result<Self> {
        if geometry.refractive_index.is_nan() || geometry.refractive_index <= 0.0 {
            return Err(Error::invalid("refractive index must be positive"));
        }
        if geometry.thicknesses.len() != self.opds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} thicknesses for {} OPDs",
                geometry.thicknesses.len(),
                self.opds.len()
            )));
        }
        if let Some(step) = geometry.thickness_step {
            let d = &geometry.thicknesses;
            if d.windows(2).any(|w| (w[1] - w[0] - step).abs() > GEOMETRY_TOLERANCE) {
                return Err(Error::invalid("thicknesses do not follow the declared thickness step"));
            }
        }
        for (l, (&delta, &d)) in self.opds.samples().iter().zip(&geometry.thicknesses).enumerate() {
            let expected = geometry.opd_for(d);
            if (delta - expected).abs() > GEOMETRY_TOLERANCE {
                return Err(Error::invalid(format!(
                    "OPD {l} = {delta} um disagrees with 2 n d cos(theta) = {expected} um"
                )));
            }
        }
        self.geometry = Some(geometry);
        Ok(self)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn reflectivity(&self) -> Option<&OpticalCurve> {
        self.reflectivity.as_ref()
    }

    pub fn transmittance(&self) -> &OpticalCurve {
        &self.transmittance
    }

    pub fn opds(&self) -> &OpdSchedule {
        &self.opds
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    /// Same instrument with another OPD schedule; drops the geometry.
    pub fn with_opds(&self, opds: OpdSchedule) -> Self {
        Self {
            opds,
            geometry: None,
            ..self.clone()
        }
    }

    /// Same instrument with a constant reflectivity (switches to MBI).
    pub fn with_constant_reflectivity(&self, r: f64) -> Result<Self> {
        Ok(Self {
            regime: Regime::Mbi,
            reflectivity: Some(OpticalCurve::constant(r)?),
            ..self.clone()
        })
    }

    /// Check both curves over `grid`. Reflectivity must stay below 1 for MBI.
    pub fn validate_on(&self, grid: &WavenumberGrid) -> Result<()> {
        self.transmittance.eval_grid(grid)?;
        if self.regime == Regime::Mbi {
            let r = self.reflectivity.as_ref().expect("MBI has reflectivity");
            if let Some(&bad) = r.eval_grid(grid)?.iter().find(|&&v| v >= 1.0) {
                return Err(Error::invalid(format!("reflectivity {bad} must be below 1")));
            }
        }
        Ok(())
    }
}
