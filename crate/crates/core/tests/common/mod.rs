//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use growth_centers::spatial::{DistanceBands, SpatialLayout};
use growth_centers::GrowthSystem;
use nalgebra::DMatrix;

/// Dense `M` assembled straight from the model definition.
pub fn dense_system_matrix(system: &GrowthSystem) -> DMatrix<f64> {
    let n = system.n();
    let c = system.coupling();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let out: f64 = (0..n).map(|k| c.get(k, i)).sum();
            system.rates()[i] - out
        } else {
            c.get(i, j)
        }
    })
}

/// Eigenvalue with the largest real part and the null vector of `M - λI`,
/// scaled to mean 1. Returns `None` when that vector is not strictly positive.
pub fn dense_perron_pair(system: &GrowthSystem) -> Option<(f64, Vec<f64>)> {
    let m = dense_system_matrix(system);
    let n = m.nrows();
    let eig = m.clone().complex_eigenvalues();
    let top = eig.iter().max_by(|a, b| a.re.total_cmp(&b.re))?;
    if top.im.abs() > 1e-9 {
        return None;
    }
    let lambda = top.re;
    let shifted = &m - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t?;
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?
        .0;
    let v: Vec<f64> = v_t.row(k).iter().copied().collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = v.iter().map(|e| e / mean).collect();
    x.iter().all(|&e| e > 0.0).then_some((lambda, x))
}

/// The textbook double loop over all ordered pairs `(i, j)`, `i != j`.
pub fn brute_force_moran(values: &[f64], layout: &SpatialLayout, bands: &DistanceBands, band: usize) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (lo, hi) = bands.bounds(band);
    let in_band = |d: f64| if band == 0 { d <= hi } else { d > lo && d <= hi };
    let (mut num, mut wsum, mut count) = (0.0, 0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i == j || !in_band(layout.distance(i, j)) {
                continue;
            }
            let w = layout.areas()[i];
            num += w * (values[i] - mean) * (values[j] - mean);
            wsum += w;
            count += 1;
        }
    }
    let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    count as f64 * num / (wsum * var)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
