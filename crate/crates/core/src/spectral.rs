//! Steady shares and the common asymptotic growth rate.
//!
//! At a steady state of the share dynamics the shares `x` solve
//! `M x = Λ x` with
//!
//! ```text
//! M_ij = δ_ij (a_i - Σ_k a_ki) + a_ij
//! ```
//!
//! `M` is Metzler (non-negative off the diagonal). For an irreducible
//! coupling graph, `M + σI` with `σ = 1 + max_i |M_ii|` is non-negative and
//! irreducible, so its Perron root is simple and is the only eigenvalue with
//! an all-positive eigenvector. Power iteration on the shifted matrix finds
//! that pair.
//!
//! The environment term is a uniform diagonal shift of `M`: it moves every
//! eigenvalue by `-b` and leaves the eigenvectors alone, so it is left out
//! of `M` and applied in [`asymptotic_rate`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{EnvironmentTerm, GrowthSystem};

/// Dense row-major `M` without the environment term.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    n: usize,
    m: Vec<f64>,
    irreducible: bool,
}

impl SystemMatrix {
    /// Wraps an arbitrary square matrix. Off-diagonal entries must be non-negative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension {
                    what: "system matrix row",
                    expected: n,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || (i != j && v < 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "M[{i}][{j}] = {v}: off-diagonal entries must be finite and non-negative"
                    )));
                }
            }
            m.extend_from_slice(row);
        }
        let irreducible = strongly_connected(n, &m);
        Ok(SystemMatrix { n, m, irreducible })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.m.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.m
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(m, x)| m * x).sum())
            .collect()
    }
}

fn strongly_connected(n: usize, m: &[f64]) -> bool {
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..n {
                let edge = if forward { m[u * n + v] } else { m[v * n + u] };
                if u != v && edge > 0.0 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Assembles `M` from the system's rates and coupling.
pub fn build_matrix(system: &GrowthSystem) -> SystemMatrix {
    let n = system.n();
    let coupling = system.coupling();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = coupling.get(i, j);
        }
        m[i * n + i] = system.rates()[i] - coupling.outflow(i);
    }
    SystemMatrix {
        n,
        m,
        irreducible: system.is_irreducible(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

/// The Perron pair of `M`: steady shares and their eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub lambda: f64,
    /// Strictly positive, `mean(x) = 1`.
    pub x: Vec<f64>,
    /// `a_i - Σ_j a_ji`, the diagonal of `M`.
    pub a_tilde: Vec<f64>,
    /// `‖M x - Λ x‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

impl SteadyState {
    pub fn a_tilde_max(&self) -> f64 {
        self.a_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Power iteration on `M + σI`.
///
/// Stops once successive mean-normalized iterates differ by less than `tol`
/// in max-norm and the eigen-residual is below `tol`.
pub fn dominant_eigenpair(m: &SystemMatrix, opts: PowerIteration) -> Result<SteadyState> {
    if !m.is_irreducible() {
        return Err(Error::InvalidArgument(
            "dominant eigenpair requires an irreducible matrix".into(),
        ));
    }
    let n = m.n();
    let a_tilde = m.diagonal();
    let sigma = 1.0 + a_tilde.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));

    let mut x = vec![1.0; n];
    let mut delta = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let mx = m.mul_vec(&x);
        // mean(x) = 1, so the mean of (M + σI) x is the Rayleigh-type estimate.
        let shifted_mean = mx.iter().zip(&x).map(|(a, b)| a + sigma * b).sum::<f64>() / n as f64;
        let next: Vec<f64> = mx
            .iter()
            .zip(&x)
            .map(|(a, b)| (a + sigma * b) / shifted_mean)
            .collect();
        delta = max_abs_diff(&next, &x);
        x = next;
        if delta < opts.tol {
            let mx = m.mul_vec(&x);
            let lambda = mx.iter().sum::<f64>() / n as f64;
            residual = eigen_residual(&mx, &x, lambda);
            if residual < opts.tol {
                return Ok(SteadyState {
                    lambda,
                    x,
                    a_tilde,
                    residual,
                    iterations: iter,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        delta,
        residual,
    })
}

/// Builds `M` for `system` and runs [`dominant_eigenpair`].
pub fn steady_state(system: &GrowthSystem, opts: PowerIteration) -> Result<SteadyState> {
    if !system.is_irreducible() {
        return Err(Error::InvalidArgument(
            "steady state requires an irreducible coupling graph".into(),
        ));
    }
    dominant_eigenpair(&build_matrix(system), opts)
}

fn eigen_residual(mx: &[f64], x: &[f64], lambda: f64) -> f64 {
    mx.iter()
        .zip(x)
        .map(|(a, b)| (a - lambda * b).abs())
        .fold(0.0, f64::max)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `|mean_j(a_j x_j) - Λ|`.
///
/// Column sums of `M` equal `a_j` because each transfer leaves one unit and
/// enters another, so averaging the eigen-equation yields `Λ`.
pub fn lambda_consistency(steady: &SteadyState, system: &GrowthSystem) -> f64 {
    let n = system.n() as f64;
    let weighted = system
        .rates()
        .iter()
        .zip(&steady.x)
        .map(|(a, x)| a * x)
        .sum::<f64>()
        / n;
    (weighted - steady.lambda).abs()
}

/// `max_i |x_i - Σ_j a_ij x_j / (Λ - ã_i)|`.
pub fn fixed_point_residual(steady: &SteadyState, system: &GrowthSystem) -> Result<f64> {
    let coupling = system.coupling();
    let a_tilde = system.effective_rates();
    let mut worst = 0.0f64;
    for (i, at) in a_tilde.iter().enumerate() {
        let denom = steady.lambda - at;
        if denom.abs() < 1e-14 {
            return Err(Error::SingularDenominator { index: i, value: denom });
        }
        let inflow: f64 = coupling.inflow(i).iter().map(|&(j, aij)| aij * steady.x[j]).sum();
        worst = worst.max((steady.x[i] - inflow / denom).abs());
    }
    Ok(worst)
}

/// The common growth rate every unit approaches: `Λ - b(W, t)`.
///
/// The environment term enters with the same minus sign as in the dynamics.
pub fn asymptotic_rate(steady: &SteadyState, env: &EnvironmentTerm, w: &[f64], t: f64) -> f64 {
    steady.lambda - env.eval(w, t)
}
