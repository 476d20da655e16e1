//! `inverspect`: simulate, analyse and invert interferometric spectrometers.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! numerical failures. Artifacts go to files; stdout carries one-line summaries.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inverspect::analysis::{self, DEFAULT_RANK_TOL};
use inverspect::experiment::{self, ExperimentConfig};
use inverspect::forward::{self, ResponseModel};
use inverspect::grid::{make_dct_grids, WavenumberGrid};
use inverspect::inversion::{Method, MethodParams, PriorKind, Reconstructor};
use inverspect::surrogate::{SurrogateKind, SurrogateSpec};
use inverspect::{io, metrics, par, Error, InstrumentProfile, Regime};
use serde_json::json;

const GRID_HELP: &str = "Wavenumber grid: `dct` (half-offset grid matching a regular OPD schedule \
starting at zero, the default when possible) or `lo:hi:count` (um^-1, endpoints included)";

#[derive(Parser)]
#[command(name = "inverspect", version, about = "Interferometric spectrometer modelling and spectrum reconstruction")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, env = "INVERSPECT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate interferograms from spectra through an instrument.
    Simulate(SimulateArgs),
    /// Singular values, rank and condition number of the transfer matrix.
    Analyze(AnalyzeArgs),
    /// Reconstruct spectra from interferograms.
    Invert(InvertArgs),
    /// Run a configured experiment and write its report.
    Experiment(ExperimentArgs),
    /// Generate surrogate spectra.
    Spectra(SpectraArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Instrument profile (TOML).
    #[arg(long)]
    instrument: PathBuf,
    /// Spectra CSV.
    #[arg(long)]
    spectra: PathBuf,
    /// Output interferogram CSV.
    #[arg(long)]
    out: PathBuf,
    /// Signal-to-noise ratio in dB; omit for noiseless data.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    instrument: PathBuf,
    #[arg(long, help = GRID_HELP)]
    grid: Option<String>,
    /// Constant-reflectivity sweep `lo:hi:step`, e.g. `0.05:0.95:0.05`.
    #[arg(long)]
    sweep_reflectivity: Option<String>,
    /// Numerical-rank threshold relative to the largest singular value.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Output report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long)]
    instrument: PathBuf,
    /// Interferogram CSV.
    #[arg(long)]
    interferograms: PathBuf,
    /// idct, pinv, tsvd, rr, lv-id or lv-dct.
    #[arg(long)]
    method: String,
    /// TSVD fraction, ridge penalty or l1 weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Iterations of the primal-dual solver.
    #[arg(long)]
    iters: Option<usize>,
    /// Prior of the primal-dual solver (identity or dct); overrides the method suffix.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, help = GRID_HELP)]
    grid: Option<String>,
    /// Reference spectra CSV; prints the reconstruction error when given.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Output spectra CSV; diagnostics go to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SpectraArgs {
    /// smooth-random, blackbody-like or dirac-comb.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instrument whose DCT grid is used when --grid is `dct` or absent.
    #[arg(long)]
    instrument: Option<PathBuf>,
    #[arg(long, help = GRID_HELP)]
    grid: Option<String>,
    /// Support `lo:hi` of smooth-random spectra (um^-1).
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    stage: &'static str,
    error: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for inverspect::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

fn usage(stage: &'static str, msg: impl Into<String>) -> Failure {
    Failure {
        stage,
        error: Error::invalid(msg),
    }
}

fn resolve_grid(spec: Option<&str>, profile: &InstrumentProfile) -> inverspect::Result<WavenumberGrid> {
    match spec {
        None | Some("dct") => {
            let opds = profile.opds();
            match opds.step() {
                Some(step) if opds.starts_at_zero() => Ok(make_dct_grids(opds.len(), step)?.1),
                _ => Err(Error::invalid(
                    "the OPD schedule is not regular from zero, so no DCT grid exists; pass --grid lo:hi:count",
                )),
            }
        }
        Some(s) => {
            let parts: Vec<&str> = s.split(':').collect();
            let [lo, hi, n] = parts.as_slice() else {
                return Err(Error::invalid(format!("grid '{s}': expected dct or lo:hi:count")));
            };
            let bad = |e: &dyn std::fmt::Display| Error::invalid(format!("grid '{s}': {e}"));
            WavenumberGrid::regular(
                lo.trim().parse().map_err(|e| bad(&e))?,
                hi.trim().parse().map_err(|e| bad(&e))?,
                n.trim().parse().map_err(|e| bad(&e))?,
            )
        }
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let profile = io::load_instrument_profile(&args.instrument).stage("load instrument")?;
    let x = io::load_spectra_csv(&args.spectra).stage("load spectra")?;
    let a = forward::build_transfer_matrix(&profile, x.grid(), ResponseModel::ClosedForm).stage("transfer matrix")?;
    let mut y = forward::simulate_interferograms(&a, &x).stage("simulate")?;
    if let Some(snr) = args.snr_db {
        y = forward::add_gaussian_noise(&y, snr, args.seed).stage("noise")?;
    }
    io::save_interferograms_csv(&args.out, &y).stage("write interferograms")?;
    let (l, k) = a.shape();
    let snr = args.snr_db.map_or("none".to_string(), |s| format!("{s} dB"));
    println!("simulated L={l} K={k} M={} SNR={snr} -> {}", x.count(), args.out.display());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let profile = io::load_instrument_profile(&args.instrument).stage("load instrument")?;
    let sweep_values = args
        .sweep_reflectivity
        .as_deref()
        .map(metrics::parse_step_spec)
        .transpose()
        .stage("sweep spec")?;
    let grid = resolve_grid(args.grid.as_deref(), &profile).stage("grid")?;
    let a = forward::build_transfer_matrix(&profile, &grid, ResponseModel::ClosedForm).stage("transfer matrix")?;
    let svd = analysis::svd_analysis(&a, args.rank_tol).stage("svd")?;
    let order = forward::effective_harmonic_order(&profile, &grid).stage("harmonic order")?;
    let sampling = forward::sampling_report(profile.opds(), &grid, order);
    let dct = analysis::dct_equivalence_check(&a);
    let sweep = match &sweep_values {
        Some(rs) => {
            let base = match profile.regime() {
                Regime::Mbi => profile.clone(),
                Regime::Tbi => profile.with_constant_reflectivity(0.0).stage("sweep")?,
            };
            let points = analysis::reflectivity_sweep(&base, &grid, rs, args.rank_tol).stage("sweep")?;
            Some(points)
        }
        None => None,
    };
    let (l, k) = a.shape();
    let report = json!({
        "regime": profile.regime(),
        "opd_samples": l,
        "wavenumbers": k,
        "rank_tol": svd.rank_tol,
        "rank": svd.rank,
        "condition_number": finite_or_null(svd.condition_number),
        "full_condition_number": finite_or_null(svd.full_condition()),
        "rank_deficient": svd.is_rank_deficient(),
        "alpha_times_opd_samples": sampling.alpha * l as f64,
        "sampling": {
            "applicable": sampling.applicable,
            "opd_condition_ok": sampling.opd_condition_ok,
            "harmonic_opd_condition_ok": sampling.harmonic_opd_condition_ok,
            "wavenumber_condition_ok": sampling.wavenumber_condition_ok,
            "overlap_condition_ok": sampling.overlap_condition_ok,
            "sigma_nyquist": finite_or_null(sampling.sigma_nyquist),
            "max_opd_step": finite_or_null(sampling.max_opd_step),
            "max_wavenumber_step": finite_or_null(sampling.max_wavenumber_step),
            "harmonic_order": sampling.harmonic_order,
            "alpha": sampling.alpha,
        },
        "dct_compatible": dct.is_dct_compatible,
        "dct_max_deviation": finite_or_null(dct.max_deviation),
        "singular_values": svd.singular_values,
        "sweep": sweep.as_ref().map(|pts| pts.iter().map(|p| json!({
            "reflectivity": p.reflectivity,
            "condition_number": finite_or_null(p.condition_number),
            "rank": p.rank,
        })).collect::<Vec<_>>()),
    });
    io::write_json(&args.out, &report).stage("write report")?;
    let cond = if svd.condition_number.is_finite() {
        format!("{:.6e}", svd.condition_number)
    } else {
        "inf".into()
    };
    print!("analyzed L={l} K={k} rank={} cond={cond}", svd.rank);
    if let Some(best) = sweep
        .as_ref()
        .and_then(|pts| pts.iter().min_by(|a, b| a.condition_number.total_cmp(&b.condition_number)))
    {
        print!(" sweep-min R={} cond={:.6e}", best.reflectivity, best.condition_number);
    }
    println!(" -> {}", args.out.display());
    Ok(())
}

fn invert(args: InvertArgs) -> Result<(), Failure> {
    let mut method: Method = args.method.parse().stage("arguments")?;
    if let Some(p) = &args.prior {
        let prior: PriorKind = p.parse().stage("arguments")?;
        if !method.is_iterative() {
            return Err(usage("arguments", format!("--prior only applies to lv-id / lv-dct, not {method}")));
        }
        method = match prior {
            PriorKind::Identity => Method::LvIdentity,
            PriorKind::OrthogonalDct => Method::LvDct,
        };
    }
    let profile = io::load_instrument_profile(&args.instrument).stage("load instrument")?;
    let y = io::load_interferograms_csv(&args.interferograms).stage("load interferograms")?;
    if method == Method::Idct && !profile.opds().is_regular() {
        return Err(usage(
            "idct",
            "the inverse DCT needs a regular OPD schedule; use pinv, tsvd, rr or lv-* for irregular sampling",
        ));
    }
    let grid = resolve_grid(args.grid.as_deref(), &profile).stage("grid")?;
    let reference = args
        .reference
        .as_deref()
        .map(io::load_spectra_csv)
        .transpose()
        .stage("load reference")?;
    let a = forward::build_transfer_matrix(&profile, &grid, ResponseModel::ClosedForm).stage("transfer matrix")?;
    if a.schedule().len() != y.schedule().len() {
        return Err(usage(
            "load interferograms",
            format!("instrument has {} OPDs, file has {} rows", a.schedule().len(), y.schedule().len()),
        ));
    }
    let mut r = Reconstructor::new(method, &a).stage("prepare")?;
    if method == Method::Idct {
        let q = forward::idct_weights(&profile, &grid).stage("idct weights")?;
        r = r.with_idct_weights(q).stage("idct weights")?;
    }
    let params = MethodParams {
        lambda: args.lambda,
        iters: args.iters,
    };
    let est = r.run(&y, &params).stage("reconstruct")?;
    io::save_spectra_csv(&args.out, &est.spectra).stage("write spectra")?;

    let error = match &reference {
        Some(x) => Some(metrics::rmse(x, &est.spectra).stage("rmse")?),
        None => None,
    };
    let diag_path = PathBuf::from(format!("{}.json", args.out.display()));
    let diagnostics = json!({
        "method": est.method,
        "lambda": est.lambda,
        "rmse": error,
        "diagnostics": est.diagnostics,
    });
    io::write_json(&diag_path, &diagnostics).stage("write diagnostics")?;
    print!("inverted method={method} M={}", est.spectra.count());
    if let Some(l) = est.lambda {
        print!(" lambda={l}");
    }
    if let Some(e) = error {
        print!(" rmse={e:.6e}");
    }
    println!(" -> {}", args.out.display());
    Ok(())
}

fn run_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let config = ExperimentConfig::load(&args.config).stage("load config")?;
    let dir = args
        .out_dir
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| usage("arguments", "no output directory: pass --out-dir or set output_dir"))?;
    let report = experiment::run_experiment(&config).stage("experiment")?;
    let written = experiment::write_report(&report, &dir).stage("write report")?;
    for (i, s) in report.scenarios.iter().enumerate() {
        let best = report.best_method(i).map_or("-".to_string(), |m| m.to_string());
        let snr = s.snr_db.map_or("none".to_string(), |v| format!("{v} dB"));
        let r = s.reflectivity.map_or(String::new(), |r| format!(" R={r}"));
        println!("scenario {i}:{r} SNR={snr} best={best}");
    }
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

fn spectra(args: SpectraArgs) -> Result<(), Failure> {
    let kind: SurrogateKind = args.kind.parse().stage("arguments")?;
    let band = match &args.band {
        None => None,
        Some(b) => {
            let parts: Vec<f64> = b
                .split(':')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| usage("arguments", format!("band '{b}': {e}")))?;
            match parts.as_slice() {
                [lo, hi] => Some((*lo, *hi)),
                _ => return Err(usage("arguments", format!("band '{b}': expected lo:hi"))),
            }
        }
    };
    let grid = match (&args.instrument, args.grid.as_deref()) {
        (Some(p), spec) => {
            let profile = io::load_instrument_profile(p).stage("load instrument")?;
            resolve_grid(spec, &profile).stage("grid")?
        }
        (None, Some(spec)) if spec != "dct" => {
            let dummy = InstrumentProfile::tbi(1.0, inverspect::OpdSchedule::regular(0.0, 1.0, 2).stage("grid")?).stage("grid")?;
            resolve_grid(Some(spec), &dummy).stage("grid")?
        }
        _ => return Err(usage("arguments", "pass --grid lo:hi:count or --instrument")),
    };
    let x = SurrogateSpec {
        kind,
        count: args.count,
        seed: args.seed,
        band,
    }
    .generate(&grid)
    .stage("generate")?;
    io::save_spectra_csv(&args.out, &x).stage("write spectra")?;
    println!("generated {} {kind:?} spectra on K={} -> {}", x.count(), grid.len(), args.out.display());
    Ok(())
}

fn exit_code(f: &Failure) -> u8 {
    if f.error.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        par::configure_threads(n);
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Invert(a) => invert(a),
        Command::Experiment(a) => run_experiment(a),
        Command::Spectra(a) => spectra(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}]: {}", f.stage, f.error);
            ExitCode::from(exit_code(&f))
        }
    }
}
