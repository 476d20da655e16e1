use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inverspect::analysis::{svd_analysis, DEFAULT_RANK_TOL};
use inverspect::forward::{self, ResponseModel};
use inverspect::io;

const BASELINE: &str = "regime = \"mbi\"\n\n[transmittance]\nvalue = 1.0\n\n[reflectivity]\nvalue = 0.2\n\n[opds]\nstart = 0.0\nstep = 0.175\ncount = 319\n";
const SMALL_DCT: &str = "regime = \"mbi\"\n\n[transmittance]\nvalue = 1.0\n\n[reflectivity]\nvalue = 0.2\n\n[opds]\nstart = 0.0\nstep = 0.175\ncount = 32\n";
const IRREGULAR: &str = "regime = \"tbi\"\n\n[transmittance]\nvalue = 1.0\n\n[opds]\nsamples = [0.0, 0.2, 0.35, 0.61, 0.8]\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inverspect"))
        .args(args)
        .env_remove("INVERSPECT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(w.path("baseline.toml"), BASELINE).unwrap();
        fs::write(w.path("small.toml"), SMALL_DCT).unwrap();
        fs::write(w.path("irregular.toml"), IRREGULAR).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn baseline_spectra(&self) -> PathBuf {
        let out = self.path("x.csv");
        ok(&["spectra", "--kind", "smooth-random", "--count", "4", "--seed", "3", "--grid", "1:2.85:100", "--band", "1:2.85", "--out", p(&out)]);
        out
    }
}

#[test]
fn simulate_writes_one_row_per_opd() {
    let w = Workspace::new();
    let x = w.baseline_spectra();
    let y = w.path("y.csv");
    ok(&["simulate", "--instrument", p(&w.path("baseline.toml")), "--spectra", p(&x), "--out", p(&y)]);
    let text = fs::read_to_string(&y).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 320);
    assert!(lines[0].starts_with("opd_um,"));
}

#[test]
fn missing_input_is_a_usage_error() {
    let w = Workspace::new();
    let out = run(&["simulate", "--instrument", p(&w.path("baseline.toml")), "--spectra", p(&w.path("nope.csv")), "--out", p(&w.path("y.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert_eq!(code(&run(&["simulate"])), 2);
    assert_eq!(code(&run(&["--threads", "0", "spectra", "--kind", "dirac-comb", "--count", "2", "--grid", "1:2:10", "--out", p(&w.path("z.csv"))])), 2);
}

#[test]
fn noisy_simulation_is_reproducible() {
    let w = Workspace::new();
    let x = w.baseline_spectra();
    let inst = w.path("baseline.toml");
    let (a, b, c) = (w.path("a.csv"), w.path("b.csv"), w.path("c.csv"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        ok(&["simulate", "--instrument", p(&inst), "--spectra", p(&x), "--snr-db", "20", "--seed", seed, "--out", p(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn analyze_reports_the_library_rank() {
    let w = Workspace::new();
    let inst = w.path("coarse.toml");
    fs::write(&inst, "regime = \"tbi\"\n[transmittance]\nvalue = 1.0\n[opds]\nstart = 0.0\nstep = 0.2\ncount = 51\n").unwrap();
    let out = w.path("analysis.json");
    ok(&["analyze", "--instrument", p(&inst), "--grid", "1:2.5:101", "--out", p(&out)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();

    let profile = io::load_instrument_profile(&inst).unwrap();
    let grid = inverspect::WavenumberGrid::regular(1.0, 2.5, 101).unwrap();
    let a = forward::build_transfer_matrix(&profile, &grid, ResponseModel::ClosedForm).unwrap();
    let svd = svd_analysis(&a, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(report["rank"].as_u64().unwrap() as usize, svd.rank);
    assert_eq!(report["singular_values"].as_array().unwrap().len(), 51);
    assert_eq!(report["opd_samples"], 51);
}

#[test]
fn analyze_sweeps_reflectivity() {
    let w = Workspace::new();
    let out = w.path("sweep.json");
    let stdout = ok(&["analyze", "--instrument", p(&w.path("small.toml")), "--sweep-reflectivity", "0.1:0.5:0.2", "--out", p(&out)]);
    assert!(stdout.contains("sweep-min"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rs: Vec<f64> = report["sweep"].as_array().unwrap().iter().map(|p| p["reflectivity"].as_f64().unwrap()).collect();
    assert_eq!(rs, vec![0.1, 0.3, 0.5]);
    assert_eq!(report["dct_compatible"], false);
}

#[test]
fn malformed_sweep_is_a_usage_error() {
    let w = Workspace::new();
    for spec in ["0.1:0.5", "a:b:c", "0.5:0.1:0.1", "0.1:0.5:0"] {
        let out = run(&["analyze", "--instrument", p(&w.path("small.toml")), "--sweep-reflectivity", spec, "--out", p(&w.path("s.json"))]);
        assert_eq!(code(&out), 2, "{spec}");
    }
}

#[test]
fn pinv_inversion_recovers_the_reference() {
    let w = Workspace::new();
    let x = w.baseline_spectra();
    let inst = w.path("baseline.toml");
    let y = w.path("y.csv");
    ok(&["simulate", "--instrument", p(&inst), "--spectra", p(&x), "--out", p(&y)]);
    let est = w.path("est.csv");
    ok(&["invert", "--instrument", p(&inst), "--interferograms", p(&y), "--method", "pinv", "--grid", "1:2.85:100", "--reference", p(&x), "--out", p(&est)]);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("est.csv.json")).unwrap()).unwrap();
    assert!(diag["rmse"].as_f64().unwrap() < 1e-6);
    assert_eq!(diag["method"], "pinv");
    let est = io::load_spectra_csv(&est).unwrap();
    assert_eq!(est.count(), 4);
}

#[test]
fn lv_inversion_writes_a_trace() {
    let w = Workspace::new();
    let inst = w.path("small.toml");
    let x = w.path("x.csv");
    ok(&["spectra", "--kind", "smooth-random", "--count", "2", "--instrument", p(&inst), "--out", p(&x)]);
    let y = w.path("y.csv");
    ok(&["simulate", "--instrument", p(&inst), "--spectra", p(&x), "--snr-db", "25", "--out", p(&y)]);
    let est = w.path("lv.csv");
    let stdout = ok(&["invert", "--instrument", p(&inst), "--interferograms", p(&y), "--method", "lv-id", "--lambda", "0.3", "--iters", "1000", "--prior", "dct", "--out", p(&est)]);
    assert!(stdout.contains("method=lv-dct"));
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("lv.csv.json")).unwrap()).unwrap();
    let runs = diag["diagnostics"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    let trace = runs[0]["objective_trace"].as_array().unwrap();
    assert!(!trace.is_empty() && trace.len() <= 1000);
    assert_eq!(runs[0]["iterations"], 1000);

    let missing = run(&["invert", "--instrument", p(&inst), "--interferograms", p(&y), "--method", "rr", "--out", p(&est)]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn idct_refuses_irregular_sampling() {
    let w = Workspace::new();
    let y = w.path("y.csv");
    fs::write(&y, "opd_um,i0\n0.0,1.0\n0.2,0.5\n0.35,0.2\n0.61,0.1\n0.8,0.3\n").unwrap();
    let out = run(&["invert", "--instrument", p(&w.path("irregular.toml")), "--interferograms", p(&y), "--method", "idct", "--grid", "1:2:5", "--out", p(&w.path("e.csv"))]);
    assert_eq!(code(&out), 2);
    ok(&["invert", "--instrument", p(&w.path("irregular.toml")), "--interferograms", p(&y), "--method", "pinv", "--grid", "1:2:5", "--out", p(&w.path("e.csv"))]);
}

fn experiment_config(w: &Workspace, methods: &str) -> PathBuf {
    let path = w.path("exp.toml");
    let text = format!(
        "instrument = \"small.toml\"\n\n[spectra]\nsurrogate = \"smooth-random\"\ncount = 3\nseed = 2\nband = [1.0, 2.85]\n\n[noise]\nsnr_db = [20.0]\nseed = 4\n{methods}"
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn experiment_without_methods_is_a_usage_error() {
    let w = Workspace::new();
    let cfg = experiment_config(&w, "");
    let out = run(&["experiment", "--config", p(&cfg), "--out-dir", p(&w.path("out"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let w = Workspace::new();
    let cfg = experiment_config(
        &w,
        "\n[[methods]]\nname = \"idct\"\n[[methods]]\nname = \"rr\"\nlambda = \"0.1:10\"\n[[methods]]\nname = \"lv-dct\"\nlambda = [1.0, 3.0]\niters = 300\n",
    );
    let (a, b) = (w.path("a"), w.path("b"));
    let stdout = ok(&["experiment", "--config", p(&cfg), "--out-dir", p(&a)]);
    assert!(stdout.contains("SNR=20 dB"));
    ok(&["--threads", "1", "experiment", "--config", p(&cfg), "--out-dir", p(&b)]);
    for name in ["report.json", "scenario_00.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let methods = report["scenarios"][0]["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    let idct = methods[0]["rmse"].as_f64().unwrap();
    let rr = methods[1]["rmse"].as_f64().unwrap();
    assert!(rr < idct);
}
