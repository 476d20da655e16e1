//! Config-driven simulated experiments: simulate, corrupt, reconstruct over a
//! lambda grid per method, and tabulate the error metrics.
//!
//! ```toml
//! instrument = "baseline.toml"     # relative to this file
//! reflectivities = [0.2, 0.4, 0.7] # optional: one scenario per constant R
//! metric = "rmse"                  # or "rrmse-sqrt"
//!
//! [spectra]
//! surrogate = "smooth-random"      # or path = "spectra.csv"
//! count = 16
//! seed = 1
//! band = [1.0, 2.85]               # optional support of smooth-random spectra
//!
//! [grid]                           # optional
//! kind = "dct"                     # or kind = "regular", min, max, count
//!
//! [noise]                          # optional; absent means noiseless
//! snr_db = [20.0, 15.0]
//! seed = 7
//!
//! [jitter]                         # optional OPD jitter (um), first sample kept at 0
//! sigma = 0.05
//! seed = 3
//!
//! [[methods]]
//! name = "rr"
//! lambda = "0.1:100"               # grid spec or explicit list
//! [[methods]]
//! name = "lv-dct"
//! lambda = [1.0, 3.0, 10.0]
//! iters = 2000
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::{self, ResponseModel};
use crate::grid::{make_dct_grids, OpdSchedule, WavenumberGrid};
use crate::instrument::{InstrumentProfile, Regime};
use crate::inversion::{Method, Reconstructor};
use crate::io;
use crate::metrics::{self, ErrorMetric, GridEntry, McwCount, SearchOptions};
use crate::signal::SpectrumSet;
use crate::surrogate::{SurrogateKind, SurrogateSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectraSource {
    Loaded(SpectrumSet),
    Surrogate(SurrogateSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridChoice {
    /// Half-offset grid matching a regular schedule that starts at zero.
    Dct,
    Regular { min: f64, max: f64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Standard deviation of the OPD perturbation (um).
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub snr_db: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub lambdas: Vec<f64>,
    pub iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instrument: InstrumentProfile,
    pub spectra: SpectraSource,
    pub grid: Option<GridChoice>,
    pub reflectivities: Option<Vec<f64>>,
    pub noise: Option<NoiseConfig>,
    pub jitter: Option<Jitter>,
    pub methods: Vec<MethodConfig>,
    pub metric: ErrorMetric,
    pub output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    instrument: PathBuf,
    spectra: SpectraFile,
    grid: Option<GridChoice>,
    reflectivities: Option<Vec<f64>>,
    noise: Option<NoiseConfig>,
    jitter: Option<Jitter>,
    #[serde(default)]
    methods: Vec<MethodFile>,
    metric: Option<String>,
    output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectraFile {
    path: Option<PathBuf>,
    surrogate: Option<String>,
    count: Option<usize>,
    seed: Option<u64>,
    band: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LambdaFile {
    Spec(String),
    List(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MethodFile {
    name: String,
    lambda: Option<LambdaFile>,
    iters: Option<usize>,
}

impl ExperimentConfig {
    /// Parse a config, resolving referenced files against `base_dir` and
    /// loading them immediately.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::parse("experiment config", e))?;
        let instrument = io::load_instrument_profile(&base_dir.join(&file.instrument))?;
        let spectra = match (file.spectra.path, file.spectra.surrogate) {
            (Some(p), None) => SpectraSource::Loaded(io::load_spectra_csv(&base_dir.join(p))?),
            (None, Some(kind)) => SpectraSource::Surrogate(SurrogateSpec {
                kind: kind.parse::<SurrogateKind>()?,
                count: file
                    .spectra
                    .count
                    .ok_or_else(|| Error::invalid("spectra: surrogate needs a count"))?,
                seed: file.spectra.seed.unwrap_or(0),
                band: file.spectra.band.map(|[a, b]| (a, b)),
            }),
            _ => return Err(Error::invalid("spectra: give exactly one of path or surrogate")),
        };
        let methods = file
            .methods
            .into_iter()
            .map(|m| {
                let method: Method = m.name.parse()?;
                let lambdas = match m.lambda {
                    None => Vec::new(),
                    Some(LambdaFile::List(v)) => v,
                    Some(LambdaFile::Spec(s)) => metrics::parse_grid_spec(&s)?,
                };
                Ok(MethodConfig {
                    method,
                    lambdas,
                    iters: m.iters,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let config = ExperimentConfig {
            instrument,
            spectra,
            grid: file.grid,
            reflectivities: file.reflectivities,
            noise: file.noise,
            jitter: file.jitter,
            methods,
            metric: file.metric.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
            output_dir: file.output_dir.map(|d| base_dir.join(d)),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured"));
        }
        for m in &self.methods {
            if m.method.takes_lambda() && m.lambdas.is_empty() {
                return Err(Error::invalid(format!("method {} needs a non-empty lambda grid", m.method)));
            }
            if m.lambdas.iter().any(|l| !l.is_finite()) {
                return Err(Error::invalid(format!("method {}: non-finite lambda", m.method)));
            }
        }
        if let Some(n) = &self.noise {
            if n.snr_db.iter().any(|s| s.is_nan()) {
                return Err(Error::invalid("noise: SNR must be a number"));
            }
        }
        if let Some(j) = &self.jitter {
            if !(j.sigma >= 0.0 && j.sigma.is_finite()) {
                return Err(Error::invalid("jitter: sigma must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self).map_err(|e| Error::parse("experiment config", e))?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub config_sha256: String,
    pub spectra_seed: Option<u64>,
    pub noise_seed: Option<u64>,
    pub jitter_seed: Option<u64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub lambda_opt: Option<f64>,
    pub rmse: f64,
    pub mcw: Option<McwCount>,
    pub iters: Option<usize>,
    pub table: Vec<GridEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub regime: Regime,
    /// Constant reflectivity override, when sweeping.
    pub reflectivity: Option<f64>,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub opd_samples: usize,
    pub wavenumbers: usize,
    pub spectra: usize,
    pub jittered: bool,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: ReportProvenance,
    pub metric: ErrorMetric,
    pub scenarios: Vec<Scenario>,
}

impl ExperimentReport {
    /// The best method of a scenario by stored error.
    pub fn best_method(&self, scenario: usize) -> Option<Method> {
        self.scenarios.get(scenario)?.methods.iter().min_by(|a, b| a.rmse.total_cmp(&b.rmse)).map(|m| m.method)
    }
}

/// Perturb every OPD after the first by `N(0, sigma^2)` and re-sort.
pub fn jitter_schedule(schedule: &OpdSchedule, jitter: &Jitter) -> Result<OpdSchedule> {
    if jitter.sigma == 0.0 {
        return Ok(schedule.clone());
    }
    let normal = Normal::new(0.0, jitter.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(jitter.seed);
    let mut samples: Vec<f64> = schedule
        .samples()
        .iter()
        .enumerate()
        .map(|(l, &d)| if l == 0 { d } else { (d + normal.sample(&mut rng)).max(0.0) })
        .collect();
    samples.sort_by(f64::total_cmp);
    OpdSchedule::irregular(samples).map_err(|e| e.at_stage("jittered schedule collapsed"))
}

fn resolve_grid(config: &ExperimentConfig) -> Result<WavenumberGrid> {
    let opds = config.instrument.opds();
    let dct = || match opds.step() {
        Some(step) if opds.starts_at_zero() => Ok(make_dct_grids(opds.len(), step)?.1),
        _ => Err(Error::invalid(
            "DCT grid needs a regular OPD schedule starting at zero; configure [grid]",
        )),
    };
    match (&config.grid, &config.spectra) {
        (Some(GridChoice::Dct), _) => dct(),
        (Some(GridChoice::Regular { min, max, count }), _) => WavenumberGrid::regular(*min, *max, *count),
        (None, SpectraSource::Loaded(x)) => Ok(x.grid().clone()),
        (None, SpectraSource::Surrogate(_)) => dct(),
    }
}

fn resolve_spectra(config: &ExperimentConfig, grid: &WavenumberGrid) -> Result<SpectrumSet> {
    match &config.spectra {
        SpectraSource::Loaded(x) if x.grid() == grid => Ok(x.clone()),
        SpectraSource::Loaded(_) => Err(Error::GridMismatch),
        SpectraSource::Surrogate(spec) => spec.generate(grid),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate().map_err(|e| e.at_stage("config"))?;
    let grid = resolve_grid(config).map_err(|e| e.at_stage("grid"))?;
    let x = resolve_spectra(config, &grid).map_err(|e| e.at_stage("spectra"))?;
    let nominal = x.labels().map(|l| metrics::nominal_indices(&grid, l));

    let profiles: Vec<(Option<f64>, InstrumentProfile)> = match &config.reflectivities {
        None => vec![(None, config.instrument.clone())],
        Some(rs) => rs
            .iter()
            .map(|&r| Ok((Some(r), config.instrument.with_constant_reflectivity(r)?)))
            .collect::<Result<_>>()
            .map_err(|e| e.at_stage("reflectivity"))?,
    };
    let snrs: Vec<Option<f64>> = match &config.noise {
        None => vec![None],
        Some(n) if n.snr_db.is_empty() => vec![None],
        Some(n) => n.snr_db.iter().map(|&s| (s != f64::INFINITY).then_some(s)).collect(),
    };

    let mut scenarios = Vec::new();
    for (reflectivity, profile) in &profiles {
        let nominal_schedule = profile.opds().clone();
        let actual = match &config.jitter {
            Some(j) => profile.with_opds(jitter_schedule(&nominal_schedule, j).map_err(|e| e.at_stage("jitter"))?),
            None => profile.clone(),
        };
        let a = forward::build_transfer_matrix(&actual, &grid, ResponseModel::ClosedForm)
            .map_err(|e| e.at_stage("transfer matrix"))?;
        let clean = forward::simulate_interferograms(&a, &x).map_err(|e| e.at_stage("simulate"))?;

        // Every method is prepared once per instrument and reused across SNRs.
        let mut prepared: Vec<Reconstructor> = Vec::new();
        for m in &config.methods {
            let r = if m.method == Method::Idct {
                idct_reconstructor(profile, &nominal_schedule, &grid)
            } else {
                Reconstructor::new(m.method, &a)
            };
            prepared.push(r.map_err(|e| e.at_stage(format!("prepare {}", m.method)))?);
        }

        for &snr in &snrs {
            let y = match (snr, &config.noise) {
                (Some(s), Some(n)) => forward::add_gaussian_noise(&clean, s, n.seed).map_err(|e| e.at_stage("noise"))?,
                _ => clean.clone(),
            };
            let mut methods = Vec::new();
            for (m, r) in config.methods.iter().zip(&prepared) {
                let data = if m.method == Method::Idct {
                    // The inverse DCT assumes the nominal schedule.
                    y.relabel(nominal_schedule.clone()).map_err(|e| e.at_stage("idct"))?
                } else {
                    y.clone()
                };
                let options = SearchOptions {
                    iters: m.iters,
                    metric: config.metric,
                    nominal: nominal.as_deref(),
                };
                let search = metrics::grid_search_with(r, &data, &x, &m.lambdas, &options)
                    .map_err(|e| e.at_stage(format!("reconstruct {}", m.method)))?;
                methods.push(MethodReport {
                    method: m.method,
                    lambda_opt: search.lambda_opt,
                    rmse: search.rmse_opt,
                    mcw: search.mcw_opt,
                    iters: m.method.is_iterative().then(|| m.iters.unwrap_or(crate::inversion::DEFAULT_LV_ITERS)),
                    table: search.table,
                });
            }
            scenarios.push(Scenario {
                regime: profile.regime(),
                reflectivity: *reflectivity,
                snr_db: snr,
                opd_samples: a.shape().0,
                wavenumbers: a.shape().1,
                spectra: x.count(),
                jittered: config.jitter.is_some(),
                methods,
            });
        }
    }

    let spectra_seed = match &config.spectra {
        SpectraSource::Surrogate(s) => Some(s.seed),
        SpectraSource::Loaded(_) => None,
    };
    Ok(ExperimentReport {
        provenance: ReportProvenance {
            config_sha256: config.hash()?,
            spectra_seed,
            noise_seed: config.noise.as_ref().map(|n| n.seed),
            jitter_seed: config.jitter.map(|j| j.seed),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        metric: config.metric,
        scenarios,
    })
}

/// Inverse DCT bound to the nominal grids with weights from the instrument curves.
fn idct_reconstructor(
    profile: &InstrumentProfile,
    nominal: &OpdSchedule,
    grid: &WavenumberGrid,
) -> Result<Reconstructor> {
    let nominal_profile = profile.with_opds(nominal.clone());
    let a = forward::build_transfer_matrix(&nominal_profile, grid, ResponseModel::ClosedForm)?;
    Reconstructor::new(Method::Idct, &a)?.with_idct_weights(forward::idct_weights(profile, grid)?)
}

/// Long-format rows `method,lambda,rmse,mcw` of one scenario.
pub fn scenario_csv(s: &Scenario) -> String {
    let mut out = String::from("method,lambda,rmse,mcw\n");
    for m in &s.methods {
        for e in &m.table {
            let fmt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let mcw = e.mcw.map(|c| c.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", m.method, fmt(e.lambda), fmt(e.rmse), mcw));
        }
    }
    out
}

/// Write `report.json` and `scenario_NN.csv` files into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![dir.join("report.json")];
    io::write_json(&written[0], report)?;
    for (i, s) in report.scenarios.iter().enumerate() {
        let path = dir.join(format!("scenario_{i:02}.csv"));
        io::write_text(&path, &scenario_csv(s))?;
        written.push(path);
    }
    Ok(written)
}
