mod common;

use common::*;
use inverspect::analysis;
use inverspect::forward;
use inverspect::grid::{make_dct_grids, OpdSchedule, WavenumberGrid};
use inverspect::inversion::{
    self, operator_norm, LvSolver, Method, MethodParams, PriorKind, PriorOperator, Reconstructor,
    SvdFilter,
};
use inverspect::{Error, InstrumentProfile, InterferogramSet, TransferMatrix};
use nalgebra::DMatrix;

fn random_transfer(rows: usize, cols: usize, seed: u64) -> TransferMatrix {
    TransferMatrix::custom(
        gaussian_matrix(rows, cols, seed),
        OpdSchedule::regular(0.0, 0.1, rows).unwrap(),
        WavenumberGrid::regular(1.0, 2.0, cols).unwrap(),
    )
    .unwrap()
}

fn data_for(a: &TransferMatrix, seed: u64, count: usize) -> InterferogramSet {
    InterferogramSet::new(a.schedule().clone(), gaussian_matrix(a.shape().0, count, seed)).unwrap()
}

#[test]
fn pinv_of_the_orthonormal_dct_is_its_transpose() {
    let c = PriorOperator::orthogonal_dct(24).unwrap().to_dense();
    let a = TransferMatrix::custom(
        c.clone(),
        OpdSchedule::regular(0.0, 0.1, 24).unwrap(),
        WavenumberGrid::regular(1.0, 2.0, 24).unwrap(),
    )
    .unwrap();
    let y = data_for(&a, 5, 3);
    let est = inversion::pinv_reconstruct(&a, &y).unwrap();
    assert!((est.spectra.values() - c.tr_mul(y.values())).amax() < 1e-12);
}

#[test]
fn noiseless_mbi_is_recovered_exactly() {
    for r in [0.05, 0.2, 0.5, 0.8] {
        let profile = baseline_profile(r);
        let grid = solar_grid(80);
        let a = matrix(&profile, &grid);
        let x = smooth(&grid, 4, 8);
        let y = forward::simulate_interferograms(&a, &x).unwrap();
        let est = inversion::pinv_reconstruct(&a, &y).unwrap();
        assert!(inverspect::metrics::rmse(&x, &est.spectra).unwrap() < 1e-10, "R = {r}");
    }
}

#[test]
fn irregular_schedule_is_handled_by_pinv_only() {
    let samples: Vec<f64> = (0..150).map(|l| 0.175 * l as f64 + 0.03 * ((l * 7) % 5) as f64 * (l > 0) as u8 as f64).collect();
    let opds = OpdSchedule::irregular(samples).unwrap();
    let grid = solar_grid(60);
    let profile = InstrumentProfile::mbi(0.3, 1.0, opds).unwrap();
    let a = matrix(&profile, &grid);
    let x = smooth(&grid, 3, 2);
    let y = forward::simulate_interferograms(&a, &x).unwrap();
    let est = inversion::pinv_reconstruct(&a, &y).unwrap();
    assert!(inverspect::metrics::rmse(&x, &est.spectra).unwrap() < 1e-10);
    let q = vec![2.0; 60];
    assert!(matches!(inversion::idct_reconstruct(&y, &q, &grid), Err(Error::Precondition(_))));
}

#[test]
fn tsvd_at_one_equals_pinv_and_is_monotone_in_kept_values() {
    let a = random_transfer(30, 20, 1);
    let y = data_for(&a, 2, 2);
    let pinv = inversion::pinv_reconstruct(&a, &y).unwrap();
    let full = inversion::tsvd_reconstruct(&a, &y, 1.0).unwrap();
    assert!((full.spectra.values() - pinv.spectra.values()).amax() < 1e-12);
    let norms: Vec<f64> = [0.05, 0.3, 0.6, 1.0]
        .iter()
        .map(|&l| inversion::tsvd_reconstruct(&a, &y, l).unwrap().spectra.values().norm())
        .collect();
    assert!(norms.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    assert!(inversion::tsvd_reconstruct(&a, &y, 0.0).is_err());
    assert!(inversion::tsvd_reconstruct(&a, &y, 1.5).is_err());
}

#[test]
fn ridge_satisfies_the_normal_equations() {
    let a = random_transfer(25, 18, 3);
    let y = data_for(&a, 4, 2);
    for lambda in [0.01, 0.5, 3.0] {
        let x = inversion::ridge_reconstruct(&a, &y, lambda).unwrap().spectra.into_values();
        let lhs = (a.entries().tr_mul(a.entries()) + DMatrix::identity(18, 18) * lambda * lambda) * &x;
        let rhs = a.entries().tr_mul(y.values());
        assert!((lhs - &rhs).amax() / rhs.amax() < 1e-10, "lambda {lambda}");
    }
}

#[test]
fn power_iteration_matches_the_svd() {
    let m = gaussian_matrix(50, 30, 12);
    let psi = analysis::singular_values(&m).unwrap()[0];
    let norm = operator_norm(&m, 1e-12, 1_000_000).unwrap();
    assert!((norm - psi).abs() / psi < 1e-5);
}

#[test]
fn lv_without_regularisation_converges_to_pinv() {
    let a = gaussian_matrix(50, 30, 13);
    let y = gaussian_matrix(50, 2, 14);
    for kind in [PriorKind::Identity, PriorKind::OrthogonalDct] {
        let solver = LvSolver::new(&a, PriorOperator::new(kind, 30).unwrap()).unwrap();
        let (x, diag) = solver.solve(&y, 0.0, 20_000).unwrap();
        let pinv = SvdFilter::new(&a).unwrap().pinv(&y).unwrap();
        assert!((&x - &pinv).norm() / pinv.norm() < 1e-4, "{kind:?}");
        assert_eq!(diag.len(), 2);
    }
}

#[test]
fn lv_dual_stays_feasible() {
    let a = gaussian_matrix(40, 24, 15);
    let y = gaussian_matrix(40, 3, 16);
    let solver = LvSolver::new(&a, PriorOperator::orthogonal_dct(24).unwrap()).unwrap();
    let lambda = 0.7;
    let mut state = solver.start(&y).unwrap();
    for _ in 0..300 {
        state.step(&solver, lambda);
        assert!(state.u_half().amax() <= lambda + 1e-15);
    }
    assert_eq!(state.iterations(), 300);
}

#[test]
fn lv_step_sizes_follow_the_operator_norms() {
    let a = gaussian_matrix(30, 20, 17);
    let solver = LvSolver::new(&a, PriorOperator::identity(20).unwrap()).unwrap();
    let psi = analysis::singular_values(&a).unwrap()[0];
    assert!((solver.tau() * psi * psi / 0.99 - 1.0).abs() < 1e-5);
    assert!((solver.eta() * solver.tau() - 1.0).abs() < 1e-5);
    assert_eq!(solver.rho(), 1.9);
}

#[test]
fn lv_trace_is_strided_and_keeps_the_endpoints() {
    let a = gaussian_matrix(20, 12, 18);
    let y = gaussian_matrix(20, 1, 19);
    let solver = LvSolver::new(&a, PriorOperator::identity(12).unwrap()).unwrap();
    for iters in [10, 999, 1000, 5003] {
        let (_, diag) = solver.solve(&y, 0.2, iters).unwrap();
        let trace = &diag[0].objective_trace;
        assert!(trace.len() <= 1000);
        assert_eq!(trace.first().unwrap().0, 0);
        assert_eq!(trace.last().unwrap().0, iters);
        assert!(trace.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(diag[0].iterations, iters);
    }
}

#[test]
fn lv_large_lambda_shrinks_to_zero() {
    let a = gaussian_matrix(20, 12, 20);
    let y = gaussian_matrix(20, 1, 21);
    let solver = LvSolver::new(&a, PriorOperator::identity(12).unwrap()).unwrap();
    let lambda = 2.0 * a.tr_mul(&y).amax();
    let (x, _) = solver.solve(&y, lambda, 5000).unwrap();
    assert!(x.amax() < 1e-6);
}

#[test]
fn lv_results_do_not_depend_on_batching() {
    let a = gaussian_matrix(30, 16, 22);
    let y = gaussian_matrix(30, 11, 23);
    let solver = LvSolver::new(&a, PriorOperator::orthogonal_dct(16).unwrap()).unwrap();
    let (all, _) = solver.solve(&y, 0.4, 500).unwrap();
    for m in [0, 7, 10] {
        let (one, _) = solver.solve(&y.columns(m, 1).into_owned(), 0.4, 500).unwrap();
        assert!((one.column(0) - all.column(m)).amax() < 1e-12);
    }
}

#[test]
fn idct_inverts_tbi_and_loses_to_pinv_on_strong_mbi() {
    let (opds, grid) = make_dct_grids(64, 0.175).unwrap();
    let x = inverspect::surrogate::smooth_random(&grid, 4, 6, grid.bounds()).unwrap();

    let tbi = InstrumentProfile::tbi(1.0, opds.clone()).unwrap();
    let y = forward::simulate_interferograms(&matrix(&tbi, &grid), &x).unwrap();
    let q = forward::idct_weights(&tbi, &grid).unwrap();
    let est = inversion::idct_reconstruct(&y, &q, &grid).unwrap();
    assert!((est.spectra.values() - x.values()).amax() < 1e-10);

    let mbi = InstrumentProfile::mbi(0.7, 1.0, opds).unwrap();
    let a = matrix(&mbi, &grid);
    let y = forward::simulate_interferograms(&a, &x).unwrap();
    let q = forward::idct_weights(&mbi, &grid).unwrap();
    let idct = inverspect::metrics::rmse(&x, &inversion::idct_reconstruct(&y, &q, &grid).unwrap().spectra).unwrap();
    let pinv = inverspect::metrics::rmse(&x, &inversion::pinv_reconstruct(&a, &y).unwrap().spectra).unwrap();
    assert!(idct > 1e3 * pinv.max(1e-16));
}

#[test]
fn reconstructor_dispatches_every_method() {
    let (profile, grid) = tbi_dct(32, 0.175, 1.0);
    let a = matrix(&profile, &grid);
    let x = smooth(&grid, 2, 1);
    let y = forward::simulate_interferograms(&a, &x).unwrap();
    for method in Method::ALL {
        let r = Reconstructor::new(method, &a).unwrap();
        let params = if method.takes_lambda() {
            MethodParams::lambda(if method == Method::Tsvd { 1.0 } else { 1e-6 }).with_iters(50)
        } else {
            MethodParams::default()
        };
        let est = r.run(&y, &params).unwrap();
        assert_eq!(est.method, method);
        assert_eq!(est.diagnostics.is_some(), method.is_iterative());
        if method.takes_lambda() {
            assert!(r.run(&y, &MethodParams::default()).is_err(), "{method} without lambda");
        }
    }
}

#[test]
fn wrong_data_length_is_a_dimension_error() {
    let a = random_transfer(20, 10, 30);
    let y = InterferogramSet::new(OpdSchedule::regular(0.0, 0.1, 19).unwrap(), DMatrix::zeros(19, 1)).unwrap();
    assert!(inversion::pinv_reconstruct(&a, &y).is_err());
    assert!(inversion::lv_reconstruct(&a, &y, 0.1, PriorKind::Identity, 10).is_err());
}
