//! Unnormalised DCT-II / DCT-III pair.
//!
//! `dct2(v)_l = sum_k v_k cos(pi/K (k + 1/2) l)`
//!
//! `dct3(w)_k = w_0 / K + (2/K) sum_{l>=1} w_l cos(pi/K (k + 1/2) l)`
//!
//! so that `dct3(dct2(v)) = v`. Both are direct O(K^2) sums over a cached
//! cosine table; the sizes involved never justify an FFT.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// `K x K` kernel `cos(pi/K (k + 1/2) l)`, rows indexed by `l`.
pub fn dct2_matrix(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |l, j| (PI / k as f64 * (j as f64 + 0.5) * l as f64).cos())
}

/// Inverse of [`dct2_matrix`]: `(2/K) C^T` with the first column halved.
pub fn dct3_matrix(k: usize) -> DMatrix<f64> {
    let c = dct2_matrix(k);
    DMatrix::from_fn(k, k, |j, l| {
        let w = if l == 0 { 1.0 } else { 2.0 };
        w / k as f64 * c[(l, j)]
    })
}

pub fn dct2(v: &[f64]) -> Vec<f64> {
    apply(&dct2_matrix(v.len()), v)
}

pub fn dct3(v: &[f64]) -> Vec<f64> {
    apply(&dct3_matrix(v.len()), v)
}

fn apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}
