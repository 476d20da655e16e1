//! File formats: spectra and interferogram CSV, instrument profile TOML,
//! JSON reports.
//!
//! CSV layout: a header `wavenumber_um_inv,s0,s1,...` (spectra) or
//! `opd_um,i0,i1,...` (interferograms), then one row per axis sample. Values
//! are written with 17 significant digits so a save/load round trip is exact.
//!
//! Instrument profile (TOML, units um and um^-1):
//!
//! ```toml
//! units = "um"                 # optional; any other value is rejected
//! regime = "mbi"               # or "tbi"
//!
//! [transmittance]
//! value = 1.0                  # constant
//!
//! [reflectivity]               # required for mbi
//! coefficients = [0.1, 0.05]   # monomials c0 + c1 s + ..., degree <= 5
//! range = [1.0, 2.85]          # required for polynomials
//! # table = [[1.0, 0.2], [2.85, 0.3]]   # or linear interpolation nodes
//!
//! [opds]
//! start = 0.0
//! step = 0.175
//! count = 319
//! # samples = [1.79, 1.96, ...]          # or an explicit list
//!
//! [geometry]                   # optional
//! refractive_index = 1.0
//! incidence_angle = 0.0        # rad
//! thicknesses = [0.0, 0.0875]  # or thickness_start / thickness_step / count
//! ```
//!
//! When `[geometry]` is present and `[opds]` is not, the OPDs are generated
//! from `2 n d cos(theta)`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{detect_step, OpdSchedule, WavenumberGrid};
use crate::instrument::{CurveShape, Geometry, InstrumentProfile, OpticalCurve, Regime};
use crate::signal::{InterferogramSet, SpectrumSet};

pub const SPECTRA_AXIS: &str = "wavenumber_um_inv";
pub const INTERFEROGRAM_AXIS: &str = "opd_um";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Write `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::parse("json", e))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

fn format_table(axis_name: &str, prefix: &str, axis: &[f64], values: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str(axis_name);
    for m in 0..values.ncols() {
        out.push_str(&format!(",{prefix}{m}"));
    }
    out.push('\n');
    for (i, a) in axis.iter().enumerate() {
        out.push_str(&format!("{a:.16e}"));
        for v in values.row(i).iter() {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn parse_table(text: &str, axis_name: &str, context: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(context, e))?.clone();
    if header.get(0) != Some(axis_name) {
        return Err(Error::parse(
            context,
            format!("header must start with '{axis_name}', found '{}'", header.get(0).unwrap_or("")),
        ));
    }
    if header.iter().skip(1).any(str::is_empty) {
        return Err(Error::parse(context, "empty column name in header"));
    }
    let m = header.len() - 1;
    if m == 0 {
        return Err(Error::parse(context, "no data columns"));
    }
    let mut axis = Vec::new();
    let mut flat = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(context, e))?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(context, format!("row {}: '{field}' is not a number", row + 2)))?;
            if !v.is_finite() {
                return Err(Error::parse(context, format!("row {}: non-finite value", row + 2)));
            }
            if col == 0 {
                axis.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    if axis.is_empty() {
        return Err(Error::parse(context, "no data rows"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parse(context, "axis column must be strictly increasing"));
    }
    Ok((axis.clone(), DMatrix::from_row_slice(axis.len(), m, &flat)))
}

pub fn spectra_to_csv(x: &SpectrumSet) -> String {
    format_table(SPECTRA_AXIS, "s", x.grid().samples(), x.values())
}

pub fn spectra_from_csv(text: &str, context: &str) -> Result<SpectrumSet> {
    let (axis, values) = parse_table(text, SPECTRA_AXIS, context)?;
    let grid = WavenumberGrid::from_samples(axis).map_err(|e| Error::parse(context, e))?;
    SpectrumSet::new(grid, values)
}

pub fn save_spectra_csv(path: &Path, x: &SpectrumSet) -> Result<()> {
    write_text(path, &spectra_to_csv(x))
}

pub fn load_spectra_csv(path: &Path) -> Result<SpectrumSet> {
    spectra_from_csv(&read_text(path)?, &path.display().to_string())
}

pub fn interferograms_to_csv(y: &InterferogramSet) -> String {
    format_table(INTERFEROGRAM_AXIS, "i", y.schedule().samples(), y.values())
}

pub fn interferograms_from_csv(text: &str, context: &str) -> Result<InterferogramSet> {
    let (axis, values) = parse_table(text, INTERFEROGRAM_AXIS, context)?;
    let step = detect_step(&axis);
    let schedule = OpdSchedule::new(axis, step).map_err(|e| Error::parse(context, e))?;
    InterferogramSet::new(schedule, values)
}

pub fn save_interferograms_csv(path: &Path, y: &InterferogramSet) -> Result<()> {
    write_text(path, &interferograms_to_csv(y))
}

pub fn load_interferograms_csv(path: &Path) -> Result<InterferogramSet> {
    interferograms_from_csv(&read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    units: Option<String>,
    regime: String,
    transmittance: CurveFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    reflectivity: Option<CurveFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    opds: Option<OpdsFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    geometry: Option<GeometryFile>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    range: Option<[f64; 2]>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpdsFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    refractive_index: f64,
    #[serde(default)]
    incidence_angle: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    thicknesses: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thickness_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thickness_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
}

fn curve_from_file(c: CurveFile, what: &str) -> Result<OpticalCurve> {
    let range = c.range.map(|[a, b]| (a, b));
    let curve = match (c.value, c.coefficients, c.table) {
        (Some(v), None, None) => OpticalCurve::constant(v)?,
        (None, Some(coeffs), None) => {
            let r = range.ok_or_else(|| Error::invalid(format!("{what}: polynomial needs a range")))?;
            return OpticalCurve::polynomial(coeffs, r);
        }
        (None, None, Some(t)) => OpticalCurve::tabulated(t.into_iter().map(|[s, v]| (s, v)).collect())?,
        _ => {
            return Err(Error::invalid(format!(
                "{what}: give exactly one of value, coefficients or table"
            )))
        }
    };
    match range {
        Some(r) => curve.with_range(r),
        None => Ok(curve),
    }
}

fn curve_to_file(c: &OpticalCurve) -> CurveFile {
    let mut f = CurveFile {
        range: c.range().map(|(a, b)| [a, b]),
        ..Default::default()
    };
    match c.shape() {
        CurveShape::Constant(v) => f.value = Some(*v),
        CurveShape::Polynomial(p) => f.coefficients = Some(p.clone()),
        CurveShape::Tabulated(t) => f.table = Some(t.iter().map(|&(s, v)| [s, v]).collect()),
    }
    f
}

fn opds_from_file(o: OpdsFile) -> Result<OpdSchedule> {
    match (o.start, o.step, o.count, o.samples) {
        (start, Some(step), Some(count), None) => OpdSchedule::regular(start.unwrap_or(0.0), step, count),
        (None, None, None, Some(samples)) => {
            let step = detect_step(&samples);
            OpdSchedule::new(samples, step)
        }
        _ => Err(Error::invalid("opds: give either start/step/count or samples")),
    }
}

fn geometry_from_file(g: GeometryFile) -> Result<Geometry> {
    let (thicknesses, step) = match (g.thicknesses, g.thickness_start, g.thickness_step, g.count) {
        (Some(t), None, step, None) => {
            let step = step.or_else(|| detect_step(&t));
            (t, step)
        }
        (None, start, Some(step), Some(count)) => {
            let start = start.unwrap_or(0.0);
            ((0..count).map(|i| start + i as f64 * step).collect(), Some(step))
        }
        _ => {
            return Err(Error::invalid(
                "geometry: give thicknesses or thickness_start/thickness_step/count",
            ))
        }
    };
    Ok(Geometry {
        refractive_index: g.refractive_index,
        incidence_angle: g.incidence_angle,
        thicknesses,
        thickness_step: step,
    })
}

pub fn profile_from_toml(text: &str, context: &str) -> Result<InstrumentProfile> {
    let file: ProfileFile = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
    if let Some(u) = &file.units {
        if u != "um" {
            return Err(Error::parse(context, format!("units must be \"um\", got \"{u}\"")));
        }
    }
    let regime: Regime = file.regime.parse()?;
    let transmittance = curve_from_file(file.transmittance, "transmittance")?;
    let reflectivity = file
        .reflectivity
        .map(|c| curve_from_file(c, "reflectivity"))
        .transpose()?;
    let geometry = file.geometry.map(geometry_from_file).transpose()?;
    match (file.opds, geometry) {
        (Some(o), g) => {
            let p = InstrumentProfile::new(regime, transmittance, reflectivity, opds_from_file(o)?)?;
            match g {
                Some(g) => p.with_geometry(g),
                None => Ok(p),
            }
        }
        (None, Some(g)) => InstrumentProfile::from_geometry(regime, transmittance, reflectivity, g),
        (None, None) => Err(Error::parse(context, "missing [opds] (or [geometry])")),
    }
}

pub fn profile_to_toml(p: &InstrumentProfile) -> Result<String> {
    let opds = p.opds();
    let opds_file = match opds.step() {
        Some(step) => OpdsFile {
            start: Some(opds.samples()[0]),
            step: Some(step),
            count: Some(opds.len()),
            samples: None,
        },
        None => OpdsFile {
            samples: Some(opds.samples().to_vec()),
            ..Default::default()
        },
    };
    let file = ProfileFile {
        units: Some("um".into()),
        regime: match p.regime() {
            Regime::Tbi => "tbi".into(),
            Regime::Mbi => "mbi".into(),
        },
        transmittance: curve_to_file(p.transmittance()),
        reflectivity: p.reflectivity().map(curve_to_file),
        // A regular schedule written as start/step/count is regenerated on
        // load; explicit samples keep the exact values.
        opds: Some(if p.geometry().is_some() {
            OpdsFile {
                samples: Some(opds.samples().to_vec()),
                ..Default::default()
            }
        } else {
            opds_file
        }),
        geometry: p.geometry().map(|g| GeometryFile {
            refractive_index: g.refractive_index,
            incidence_angle: g.incidence_angle,
            thicknesses: Some(g.thicknesses.clone()),
            thickness_step: g.thickness_step,
            ..Default::default()
        }),
    };
    toml::to_string(&file).map_err(|e| Error::parse("instrument profile", e))
}

pub fn load_instrument_profile(path: &Path) -> Result<InstrumentProfile> {
    profile_from_toml(&read_text(path)?, &path.display().to_string())
}

pub fn save_instrument_profile(path: &Path, p: &InstrumentProfile) -> Result<()> {
    write_text(path, &profile_to_toml(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"
units = "um"
regime = "mbi"
[transmittance]
value = 1.0
[reflectivity]
value = 0.2
[opds]
start = 0.0
step = 0.175
count = 319
"#;

    #[test]
    fn baseline_profile_loads() {
        let p = profile_from_toml(BASELINE, "baseline").unwrap();
        assert_eq!(p.regime(), Regime::Mbi);
        assert_eq!(p.opds().len(), 319);
        assert_eq!(p.opds().step(), Some(0.175));
        let again = profile_from_toml(&profile_to_toml(&p).unwrap(), "again").unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn profile_errors() {
        let nm = BASELINE.replace("units = \"um\"", "units = \"nm\"");
        assert!(profile_from_toml(&nm, "x").is_err());
        let deg6 = BASELINE.replace(
            "value = 0.2",
            "coefficients = [0.2, 0, 0, 0, 0, 0, 0]\nrange = [1.0, 2.85]",
        );
        assert!(profile_from_toml(&deg6, "x").is_err());
        let bad_t = BASELINE.replace("value = 1.0", "value = 1.5");
        assert!(profile_from_toml(&bad_t, "x").is_err());
        let no_r = "regime = \"mbi\"\n[transmittance]\nvalue = 1.0\n[opds]\nsamples = [0.0, 1.0]\n";
        assert!(profile_from_toml(no_r, "x").is_err());
        let no_opds = "regime = \"tbi\"\n[transmittance]\nvalue = 1.0\n";
        assert!(profile_from_toml(no_opds, "x").is_err());
        let both = BASELINE.replace("count = 319", "count = 319\nsamples = [1.0]");
        assert!(profile_from_toml(&both, "x").is_err());
    }

    #[test]
    fn irregular_explicit_list() {
        let samples: Vec<String> = (0..319).map(|l| format!("{}", 1.79 + 0.1699 * l as f64 + 0.001 * ((l * 7) % 3) as f64)).collect();
        let text = format!(
            "regime = \"mbi\"\n[transmittance]\nvalue = 0.9\n[reflectivity]\ncoefficients = [0.1, 0.02]\nrange = [1.0, 2.85]\n[opds]\nsamples = [{}]\n",
            samples.join(", ")
        );
        let p = profile_from_toml(&text, "irregular").unwrap();
        assert!(!p.opds().is_regular());
        assert!((p.opds().samples()[0] - 1.79).abs() < 1e-12);
        let again = profile_from_toml(&profile_to_toml(&p).unwrap(), "again").unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn geometry_generates_opds() {
        let text = "regime = \"tbi\"\n[transmittance]\nvalue = 1.0\n[geometry]\nrefractive_index = 1.5\nincidence_angle = 0.1\nthickness_step = 0.05\ncount = 10\n";
        let p = profile_from_toml(text, "geo").unwrap();
        let g = p.geometry().unwrap();
        for (d, t) in p.opds().samples().iter().zip(&g.thicknesses) {
            assert!((d - 2.0 * 1.5 * t * 0.1f64.cos()).abs() < 1e-12);
        }
        let again = profile_from_toml(&profile_to_toml(&p).unwrap(), "again").unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let grid = WavenumberGrid::regular(1.0, 2.0, 5).unwrap();
        let x = SpectrumSet::new(grid, DMatrix::from_fn(5, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0))).unwrap();
        let back = spectra_from_csv(&spectra_to_csv(&x), "x").unwrap();
        assert_eq!(back.values(), x.values());
        assert_eq!(back.grid().samples(), x.grid().samples());

        assert!(spectra_from_csv("wavenumber_um_inv\n1.0\n2.0\n", "x").is_err());
        assert!(spectra_from_csv("wavenumber_um_inv,s0\n2.0,1\n1.0,1\n", "x").is_err());
        assert!(spectra_from_csv("wavenumber_um_inv,s0\n1.0,1\n2.0\n", "x").is_err());
        assert!(spectra_from_csv("sigma,s0\n1.0,1\n", "x").is_err());
        assert!(spectra_from_csv("wavenumber_um_inv, s0\n1.0, 1\n2.0, nan\n", "x").is_err());
        let spaced = spectra_from_csv("wavenumber_um_inv, s0, s1\n1.0, 1, 2\n2.0, 3, 4\n", "x").unwrap();
        assert_eq!(spaced.count(), 2);
        assert!(interferograms_from_csv("opd_um,i0\n0.0,1\n0.5,2\n", "y").unwrap().schedule().is_regular());
    }
}
