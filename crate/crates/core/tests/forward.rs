mod common;

use std::f64::consts::PI;

use common::*;
use inverspect::forward::{self, ResponseModel};
use inverspect::grid::{make_dct_grids, OpdSchedule, WavenumberGrid};
use inverspect::{Error, InstrumentProfile, InterferogramSet, Provenance, SpectrumSet};
use nalgebra::DMatrix;

#[test]
fn tbi_rows_follow_the_cosine_law() {
    let (profile, grid) = tbi_dct(32, 0.2, 0.8);
    let a = matrix(&profile, &grid);
    assert_eq!(a.provenance(), Provenance::TbiClosedForm);
    for (l, &d) in profile.opds().samples().iter().enumerate() {
        for (k, &s) in grid.samples().iter().enumerate() {
            let expected = 1.6 * (1.0 + (2.0 * PI * d * s).cos());
            assert!((a.entries()[(l, k)] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn mbi_without_reflection_is_constant() {
    let opds = OpdSchedule::regular(0.0, 0.3, 12).unwrap();
    let grid = WavenumberGrid::regular(1.0, 2.0, 9).unwrap();
    let a = matrix(&InstrumentProfile::mbi(0.0, 0.7, opds).unwrap(), &grid);
    for v in a.entries().iter() {
        assert!((v - 0.49).abs() < 1e-14);
    }
}

#[test]
fn closed_form_and_long_series_agree_on_matrices() {
    let profile = baseline_profile(0.35);
    let grid = solar_grid(60);
    let closed = matrix(&profile, &grid);
    let series = forward::build_transfer_matrix(&profile, &grid, ResponseModel::Series(64)).unwrap();
    assert_eq!(series.provenance(), Provenance::MbiSeries(64));
    assert!(max_rel_diff(series.entries(), closed.entries()) < 1e-10);
}

#[test]
fn zero_spectra_give_zero_interferograms() {
    let profile = baseline_profile(0.2);
    let grid = solar_grid(40);
    let a = matrix(&profile, &grid);
    let x = SpectrumSet::new(grid, DMatrix::zeros(40, 3)).unwrap();
    let y = forward::simulate_interferograms(&a, &x).unwrap();
    assert!(y.values().iter().all(|&v| v == 0.0));
}

#[test]
fn dirac_column_picks_out_a_matrix_column() {
    let profile = baseline_profile(0.5);
    let grid = solar_grid(30);
    let a = matrix(&profile, &grid);
    let mut values = DMatrix::zeros(30, 1);
    values[(17, 0)] = 1.0;
    let y = forward::simulate_interferograms(&a, &SpectrumSet::new(grid, values).unwrap()).unwrap();
    assert_eq!(y.values().column(0), a.entries().column(17));
}

#[test]
fn mismatched_grid_is_rejected() {
    let profile = baseline_profile(0.2);
    let a = matrix(&profile, &solar_grid(30));
    let x = smooth(&solar_grid(31), 2, 1);
    assert!(matches!(forward::simulate_interferograms(&a, &x), Err(Error::GridMismatch)));
}

#[test]
fn noise_is_deterministic_and_seed_dependent() {
    let profile = baseline_profile(0.2);
    let grid = solar_grid(50);
    let a = matrix(&profile, &grid);
    let y = forward::simulate_interferograms(&a, &smooth(&grid, 4, 2)).unwrap();
    let n1 = forward::add_gaussian_noise(&y, 20.0, 9).unwrap();
    let n2 = forward::add_gaussian_noise(&y, 20.0, 9).unwrap();
    let n3 = forward::add_gaussian_noise(&y, 20.0, 10).unwrap();
    assert_eq!(n1, n2);
    assert_ne!(n1.values(), n3.values());
    let clean = forward::add_gaussian_noise(&y, f64::INFINITY, 9).unwrap();
    assert_eq!(clean, y);
    assert!(forward::add_gaussian_noise(&y, f64::NAN, 9).is_err());
}

#[test]
fn empirical_snr_matches_the_request() {
    let opds = OpdSchedule::regular(0.0, 1.0, 100_000).unwrap();
    let mut values = DMatrix::zeros(100_000, 2);
    for (i, mut c) in values.column_iter_mut().enumerate() {
        for (l, v) in c.iter_mut().enumerate() {
            *v = 1.0 + (l as f64 * 0.01 * (i + 1) as f64).sin();
        }
    }
    let y = InterferogramSet::new(opds, values).unwrap();
    for snr in [5.0, 20.0, 35.0] {
        let noisy = forward::add_gaussian_noise(&y, snr, 3).unwrap();
        for m in 0..2 {
            let signal = y.values().column(m).norm_squared();
            let noise = (noisy.values().column(m) - y.values().column(m)).norm_squared();
            let measured = 10.0 * (signal / noise).log10();
            assert!((measured - snr).abs() < 0.2, "snr {snr}: measured {measured}");
        }
    }
}

#[test]
fn rows_average_to_twice_the_transmittance_on_dct_grids() {
    let (profile, grid) = tbi_dct(48, 0.175, 0.6);
    let a = matrix(&profile, &grid);
    for l in 1..a.shape().0 {
        let mean = a.entries().row(l).mean();
        assert!((mean - 1.2).abs() < 1e-12, "row {l}: {mean}");
    }
}

#[test]
fn mbi_rows_are_periodic_in_opd() {
    let grid = WavenumberGrid::regular(1.0, 2.0, 2).unwrap();
    let opds = OpdSchedule::regular(0.0, 0.25, 9).unwrap();
    let a = matrix(&InstrumentProfile::mbi(0.6, 1.0, opds).unwrap(), &grid);
    for l in 0..5 {
        for k in 0..2 {
            assert!((a.entries()[(l, k)] - a.entries()[(l + 4, k)]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_opd_extrapolation_restores_the_first_sample() {
    let (profile, grid) = tbi_dct(64, 0.175, 1.0);
    let a = matrix(&profile, &grid);
    let y = forward::simulate_interferograms(&a, &smooth(&grid, 2, 4)).unwrap();
    let tail: Vec<f64> = profile.opds().samples()[1..].to_vec();
    let cut = InterferogramSet::new(
        OpdSchedule::regular(tail[0], 0.175, tail.len()).unwrap(),
        y.values().rows(1, tail.len()).into_owned(),
    )
    .unwrap();
    let full = forward::extrapolate_zero_opd(&cut).unwrap();
    assert_eq!(full.schedule().len(), 64);
    assert_eq!(full.schedule().samples()[0], 0.0);
    assert_eq!(full.values().rows(1, 63), y.values().rows(1, 63));
}

#[test]
fn baseline_sampling_report() {
    let profile = baseline_profile(0.2);
    let grid = solar_grid(100);
    let n = forward::effective_harmonic_order(&profile, &grid).unwrap();
    assert_eq!(n, 6);
    let report = forward::sampling_report(profile.opds(), &grid, n);
    assert!(report.opd_condition_ok);
    assert!(report.applicable);
    let (_, dct) = make_dct_grids(319, 0.175).unwrap();
    assert_eq!(forward::effective_harmonic_order(&InstrumentProfile::tbi(1.0, profile.opds().clone()).unwrap(), &dct).unwrap(), 2);
}
