#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use swlyap::critical::{calibrate_critical, CriticalPair, DEFAULT_ALPHA};

/// Critical `k` for `α = 0.1`, frozen from the bisection.
pub const K_CRIT: f64 = 1.169_184_289_6;
pub const T1: f64 = 1.555_368_0;

pub fn pair() -> &'static CriticalPair {
    static PAIR: OnceLock<CriticalPair> = OnceLock::new();
    PAIR.get_or_init(|| calibrate_critical(DEFAULT_ALPHA, None, 1e-8).expect("calibration"))
}

pub fn mat(n: usize, flat: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, flat)
}

pub fn vec(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}
