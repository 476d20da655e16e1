//! Reconstruction quality metrics and the lambda grid search.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WavenumberGrid;
use crate::inversion::{Method, MethodParams, Reconstructor};
use crate::par;
use crate::signal::{InterferogramSet, SpectrumSet};
use crate::transfer::TransferMatrix;

/// Points per decade of a default log-spaced lambda grid.
pub const POINTS_PER_DECADE: usize = 25;

/// Error ratio `||X - Xhat||_F^2 / ||X||_F^2`.
///
/// Despite the name this is a ratio of squared norms; see [`rrmse_sqrt`] for
/// its square root.
pub fn rmse(x: &SpectrumSet, estimate: &SpectrumSet) -> Result<f64> {
    rmse_values(x.values(), estimate.values())
}

pub fn rmse_values(x: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != estimate.shape() {
        return Err(Error::DimensionMismatch(format!(
            "reference is {:?}, estimate is {:?}",
            x.shape(),
            estimate.shape()
        )));
    }
    let denom = x.norm_squared();
    if denom == 0.0 {
        return Err(Error::invalid("reference spectra are identically zero"));
    }
    Ok((x - estimate).norm_squared() / denom)
}

/// `||X - Xhat||_F / ||X||_F`.
pub fn rrmse_sqrt(x: &SpectrumSet, estimate: &SpectrumSet) -> Result<f64> {
    rmse(x, estimate).map(f64::sqrt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    #[default]
    Rmse,
    RrmseSqrt,
}

impl ErrorMetric {
    pub fn eval(self, x: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
        let v = rmse_values(x, estimate)?;
        Ok(match self {
            ErrorMetric::Rmse => v,
            ErrorMetric::RrmseSqrt => v.sqrt(),
        })
    }
}

impl FromStr for ErrorMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(ErrorMetric::Rmse),
            "rrmse-sqrt" => Ok(ErrorMetric::RrmseSqrt),
            other => Err(Error::invalid(format!("unknown metric '{other}' (expected rmse or rrmse-sqrt)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McwCount {
    /// Columns whose maximum sits at the nominal index.
    pub count: usize,
    /// Columns whose maximum is attained more than once (resolved to the lowest index).
    pub ties: usize,
    pub total: usize,
}

/// Index of the largest entry; ties go to the lowest index. Returns whether a tie occurred.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> Option<(usize, bool)> {
    let mut best: Option<(usize, f64, bool)> = None;
    for (i, v) in values.into_iter().enumerate() {
        best = match best {
            None => Some((i, v, false)),
            Some((_, bv, _)) if v > bv => Some((i, v, false)),
            Some((bi, bv, _)) if v == bv => Some((bi, bv, true)),
            keep => keep,
        };
    }
    best.map(|(i, _, tie)| (i, tie))
}

/// Matched central wavenumbers: how many columns peak at their nominal index.
pub fn mcw(estimate: &DMatrix<f64>, nominal: &[usize]) -> Result<McwCount> {
    if nominal.len() != estimate.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} nominal indices for {} spectra",
            nominal.len(),
            estimate.ncols()
        )));
    }
    let k = estimate.nrows();
    if let Some(bad) = nominal.iter().find(|&&i| i >= k) {
        return Err(Error::invalid(format!("nominal index {bad} outside 0..{k}")));
    }
    let mut out = McwCount {
        count: 0,
        ties: 0,
        total: nominal.len(),
    };
    for (col, &target) in estimate.column_iter().zip(nominal) {
        if let Some((i, tie)) = argmax(col.iter().copied()) {
            out.count += usize::from(i == target);
            out.ties += usize::from(tie);
        }
    }
    Ok(out)
}

/// Nominal indices from column labels (central wavenumbers), snapped to the
/// nearest grid sample with midpoints rounding down.
pub fn nominal_indices(grid: &WavenumberGrid, labels: &[f64]) -> Vec<usize> {
    labels.iter().map(|&s| grid.nearest_index(s)).collect()
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(Error::invalid(format!("bad log grid {lo}:{hi}:{count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let mut v: Vec<f64> = (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect();
    v[0] = lo;
    v[count - 1] = hi;
    Ok(v)
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) || count == 0 {
        return Err(Error::invalid(format!("bad grid {lo}:{hi}:{count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let mut v: Vec<f64> = (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect();
    v[count - 1] = hi;
    Ok(v)
}

/// Log grid over `[lo, hi]` at [`POINTS_PER_DECADE`] points per decade.
pub fn decade_grid(lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::invalid(format!("bad log grid bounds {lo}:{hi}")));
    }
    let decades = (hi / lo).log10();
    let count = (decades * POINTS_PER_DECADE as f64).round() as usize + 1;
    log_grid(lo, hi, count)
}

/// `lo:hi:count` (linear), `lo:hi:count:log`, or `lo:hi` (log, 25 per decade).
pub fn parse_grid_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::parse(format!("grid spec '{spec}'"), e))
    };
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::parse(format!("grid spec '{spec}'"), e))
    };
    match parts.as_slice() {
        [lo, hi] => decade_grid(num(lo)?, num(hi)?),
        [lo, hi, n] => linear_grid(num(lo)?, num(hi)?, count(n)?),
        [lo, hi, n, "log"] => log_grid(num(lo)?, num(hi)?, count(n)?),
        _ => Err(Error::parse(
            format!("grid spec '{spec}'"),
            "expected lo:hi, lo:hi:count or lo:hi:count:log",
        )),
    }
}

/// `lo:hi:step`: values `lo, lo + step, ...` up to `hi` inclusive, rounded to
/// 12 decimals so that e.g. `0.05:0.95:0.05` yields exactly `0.7`.
pub fn parse_step_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(Error::parse(format!("sweep spec '{spec}'"), "expected lo:hi:step"));
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::parse(format!("sweep spec '{spec}'"), e))
    };
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if !(lo.is_finite() && hi.is_finite() && hi >= lo && step > 0.0 && step.is_finite()) {
        return Err(Error::parse(format!("sweep spec '{spec}'"), "need lo <= hi and step > 0"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub lambda: Option<f64>,
    pub rmse: Option<f64>,
    pub mcw: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub method: Method,
    pub lambda_opt: Option<f64>,
    pub rmse_opt: f64,
    pub mcw_opt: Option<McwCount>,
    pub table: Vec<GridEntry>,
}

#[derive(Debug, Clone, Default)]
pub struct SearchOptions<'a> {
    pub iters: Option<usize>,
    pub metric: ErrorMetric,
    /// When given, MCW is tabulated alongside the error.
    pub nominal: Option<&'a [usize]>,
}

/// Reconstruct once per lambda and keep the one with the lowest error
/// (smallest lambda on ties). Failures are recorded per entry and only fatal
/// when every entry fails. Methods without a lambda are evaluated once.
pub fn grid_search_lambda(
    method: Method,
    a: &TransferMatrix,
    y: &InterferogramSet,
    reference: &SpectrumSet,
    lambdas: &[f64],
    iters: Option<usize>,
) -> Result<GridSearch> {
    let r = Reconstructor::new(method, a)?;
    grid_search_with(
        &r,
        y,
        reference,
        lambdas,
        &SearchOptions {
            iters,
            ..Default::default()
        },
    )
}

pub fn grid_search_with(
    r: &Reconstructor,
    y: &InterferogramSet,
    reference: &SpectrumSet,
    lambdas: &[f64],
    options: &SearchOptions,
) -> Result<GridSearch> {
    let method = r.method();
    let points: Vec<Option<f64>> = if method.takes_lambda() {
        if lambdas.is_empty() {
            return Err(Error::invalid(format!("empty lambda grid for {method}")));
        }
        lambdas.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let evaluated: Vec<Result<(f64, Option<McwCount>)>> = par::map(&points, |&lambda| {
        let params = MethodParams {
            lambda,
            iters: options.iters,
        };
        let est = r.run(y, &params)?;
        let err = options.metric.eval(reference.values(), est.spectra.values())?;
        if !err.is_finite() {
            return Err(Error::NonFinite(format!("error metric at lambda {lambda:?}")));
        }
        let m = options
            .nominal
            .map(|n| mcw(est.spectra.values(), n))
            .transpose()?;
        Ok((err, m))
    });

    let mut table = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    let mut first_error = None;
    for (i, (lambda, res)) in points.iter().zip(evaluated).enumerate() {
        match res {
            Ok((err, m)) => {
                let better = match best {
                    None => true,
                    Some((bi, be)) => err < be || (err == be && lambda < &points[bi]),
                };
                if better {
                    best = Some((i, err));
                }
                table.push(GridEntry {
                    lambda: *lambda,
                    rmse: Some(err),
                    mcw: m.map(|m| m.count),
                    error: None,
                });
            }
            Err(e) => {
                table.push(GridEntry {
                    lambda: *lambda,
                    rmse: None,
                    mcw: None,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let Some((bi, rmse_opt)) = best else {
        return Err(first_error.expect("at least one point"));
    };
    let mcw_opt = match options.nominal {
        Some(n) => Some(mcw(r.run(y, &MethodParams { lambda: points[bi], iters: options.iters })?.spectra.values(), n)?),
        None => None,
    };
    Ok(GridSearch {
        method,
        lambda_opt: points[bi],
        rmse_opt,
        mcw_opt,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: DMatrix<f64>) -> SpectrumSet {
        let grid = WavenumberGrid::regular(1.0, 2.0, v.nrows()).unwrap();
        SpectrumSet::new(grid, v).unwrap()
    }

    #[test]
    fn rmse_examples() {
        let x = set(DMatrix::from_fn(4, 2, |i, j| (i + j) as f64 + 1.0));
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert_eq!(rmse(&x, &set(DMatrix::zeros(4, 2))).unwrap(), 1.0);
        assert_eq!(rmse(&x, &set(x.values() * 2.0)).unwrap(), 1.0);
        assert!(rmse(&set(DMatrix::zeros(4, 2)), &x).is_err());
        assert_eq!(rrmse_sqrt(&x, &set(x.values() * 3.0)).unwrap(), 2.0);
    }

    #[test]
    fn mcw_examples() {
        let k = 5;
        let id = DMatrix::<f64>::identity(k, k);
        let diag: Vec<usize> = (0..k).collect();
        assert_eq!(mcw(&id, &diag).unwrap().count, k);
        let rev = DMatrix::from_fn(k, k, |i, j| f64::from(u8::from(i + j == k - 1)));
        assert_eq!(mcw(&rev, &diag).unwrap().count, 1);
        let zero = DMatrix::zeros(3, 2);
        let out = mcw(&zero, &[0, 1]).unwrap();
        assert_eq!((out.count, out.ties), (1, 2));
        assert!(mcw(&zero, &[0, 3]).is_err());
    }

    #[test]
    fn grid_specs() {
        assert_eq!(parse_grid_spec("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_grid_spec("0.1:10:3:log").unwrap();
        assert_eq!(g[0], 0.1);
        assert!((g[1] - 1.0).abs() < 1e-14);
        assert_eq!(g[2], 10.0);
        assert_eq!(parse_grid_spec("1:100").unwrap().len(), 51);
        assert!(parse_grid_spec("1:x:3").is_err());
        assert!(parse_grid_spec("1").is_err());
        let s = parse_step_spec("0.05:0.95:0.05").unwrap();
        assert_eq!(s.len(), 19);
        assert_eq!(s[13], 0.7);
        assert_eq!(s[18], 0.95);
        assert!(parse_step_spec("0.05:0.95").is_err());
        assert!(parse_step_spec("0.5:0.1:0.1").is_err());
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(argmax([1.0, 3.0, 3.0]), Some((1, true)));
        assert_eq!(argmax([4.0, 3.0]), Some((0, false)));
        assert_eq!(argmax(Vec::<f64>::new()), None);
    }
}
