//! The coupled growth model: per-unit endogenous rates, a non-negative
//! transfer matrix, and a global environment term.
//!
//! ```text
//! dW_i/dt = a_i W_i + sum_j a_ij W_j - sum_j a_ji W_i - b(W, t) W_i
//! ```
//!
//! `a_ij` is the rate at which activity flows from unit `j` into unit `i`.
//! Rates carry a "per month" label throughout; nothing converts units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square non-negative transfer matrix with a zero diagonal.
///
/// Stored dense (row-major) for exact element access and as per-row
/// non-zero lists for the right-hand side, which is O(nnz) per call.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    dense: Vec<f64>,
    inflow: Vec<Vec<(usize, f64)>>,
    outflow: Vec<f64>,
}

impl CouplingMatrix {
    /// Builds from nested rows, `rows[i][j] = a_ij`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut dense = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "coupling row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dense.extend_from_slice(row);
        }
        Self::from_dense(n, dense)
    }

    /// Builds from a row-major buffer of length `n * n`.
    pub fn from_dense(n: usize, dense: Vec<f64>) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::Dimension {
                what: "coupling buffer",
                expected: n * n,
                actual: dense.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if !v.is_finite() {
                    return Err(Error::InvalidSystem(format!("coupling[{i}][{j}] is not finite")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidSystem(format!(
                        "coupling diagonal [{i}][{i}] = {v}, must be 0"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::InvalidSystem(format!(
                        "coupling[{i}][{j}] = {v} is negative"
                    )));
                }
            }
        }
        let inflow = (0..n)
            .map(|i| {
                (0..n)
                    .filter_map(|j| {
                        let v = dense[i * n + j];
                        (v > 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        // Column sums: total outflow sum_j a_ji of unit i.
        let outflow = (0..n)
            .map(|i| (0..n).map(|j| dense[j * n + i]).sum())
            .collect();
        Ok(CouplingMatrix {
            n,
            dense,
            inflow,
            outflow,
        })
    }

    /// Builds from a sparse list of `(i, j, a_ij)` entries; duplicates add.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut dense = vec![0.0; n * n];
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::InvalidSystem(format!(
                    "coupling entry ({i}, {j}) out of range for n = {n}"
                )));
            }
            dense[i * n + j] += v;
        }
        Self::from_dense(n, dense)
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_dense(n, vec![0.0; n * n]).expect("zero matrix is valid")
    }

    /// Every off-diagonal entry equal to `rate`.
    pub fn all_to_all(n: usize, rate: f64) -> Result<Self> {
        let mut dense = vec![rate; n * n];
        for i in 0..n {
            dense[i * n + i] = 0.0;
        }
        Self::from_dense(n, dense)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `a_ij`: flow rate from `j` into `i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dense[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.dense.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Non-zero `(j, a_ij)` of row `i`.
    pub fn inflow(&self, i: usize) -> &[(usize, f64)] {
        &self.inflow[i]
    }

    /// `sum_j a_ji`, the total rate at which unit `i` loses activity.
    pub fn outflow(&self, i: usize) -> f64 {
        self.outflow[i]
    }

    pub fn outflows(&self) -> &[f64] {
        &self.outflow
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Strong connectivity of the transfer graph (edge `j -> i` when `a_ij > 0`).
    ///
    /// Returns the first unit not mutually reachable from unit 0, if any.
    pub fn first_unreachable(&self) -> Option<usize> {
        if self.n <= 1 {
            return None;
        }
        let forward = reachable_from_zero(self.n, |i| self.outgoing(i));
        if let Some(i) = forward.iter().position(|r| !r) {
            return Some(i);
        }
        let backward = reachable_from_zero(self.n, |i| self.inflow[i].iter().map(|&(j, _)| j).collect());
        backward.iter().position(|r| !r)
    }

    pub fn is_irreducible(&self) -> bool {
        self.first_unreachable().is_none()
    }

    fn outgoing(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.get(i, j) > 0.0).collect()
    }
}

fn reachable_from_zero(n: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for u in next(v) {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

/// Piecewise-linear `b(t)` table, held constant outside its time range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTable {
    t: Vec<f64>,
    b: Vec<f64>,
}

impl TimeTable {
    pub fn new(t: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != b.len() {
            return Err(Error::InvalidSystem(format!(
                "time table needs matching non-empty columns (got {} times, {} values)",
                t.len(),
                b.len()
            )));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSystem("time table times must be strictly increasing".into()));
        }
        if t.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem("time table contains non-finite values".into()));
        }
        Ok(TimeTable { t, b })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.b
    }

    pub fn eval(&self, t: f64) -> f64 {
        let last = self.t.len() - 1;
        if t <= self.t[0] {
            return self.b[0];
        }
        if t >= self.t[last] {
            return self.b[last];
        }
        // First knot strictly greater than t; guaranteed in 1..=last here.
        let k = self.t.partition_point(|&tk| tk <= t);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let (b0, b1) = (self.b[k - 1], self.b[k]);
        b0 + (b1 - b0) * (t - t0) / (t1 - t0)
    }
}

/// The scalar environment term `b(W, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentTerm {
    Zero,
    Constant(f64),
    /// `beta * mean(W)`: global Verhulst-like competition.
    MeanProportional(f64),
    TimeTable(TimeTable),
}

impl EnvironmentTerm {
    pub fn eval(&self, w: &[f64], t: f64) -> f64 {
        match self {
            EnvironmentTerm::Zero => 0.0,
            EnvironmentTerm::Constant(c) => *c,
            EnvironmentTerm::MeanProportional(beta) => {
                if w.is_empty() {
                    0.0
                } else {
                    beta * w.iter().sum::<f64>() / w.len() as f64
                }
            }
            EnvironmentTerm::TimeTable(table) => table.eval(t),
        }
    }

    /// True when `b` does not depend on the state, so the dynamics are linear in `W`.
    pub fn is_state_independent(&self) -> bool {
        !matches!(self, EnvironmentTerm::MeanProportional(_))
    }

    fn validate(&self) -> Result<()> {
        match self {
            EnvironmentTerm::Constant(v) | EnvironmentTerm::MeanProportional(v) if !v.is_finite() => {
                Err(Error::InvalidSystem("environment parameter is not finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A validated model instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSystem {
    a: Vec<f64>,
    coupling: CouplingMatrix,
    env: EnvironmentTerm,
    irreducible: bool,
}

impl GrowthSystem {
    /// Validates the inputs and requires a strongly connected transfer graph.
    pub fn new(a: Vec<f64>, coupling: CouplingMatrix, env: EnvironmentTerm) -> Result<Self> {
        let system = Self::allow_reducible(a, coupling, env)?;
        if let Some(unreachable) = system.coupling.first_unreachable() {
            return Err(Error::Reducible { unreachable });
        }
        Ok(system)
    }

    /// Same validation as [`GrowthSystem::new`] without the connectivity requirement.
    pub fn allow_reducible(a: Vec<f64>, coupling: CouplingMatrix, env: EnvironmentTerm) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidSystem("system needs at least one unit".into()));
        }
        if a.len() != coupling.n() {
            return Err(Error::Dimension {
                what: "coupling matrix vs rate vector",
                expected: a.len(),
                actual: coupling.n(),
            });
        }
        if let Some(i) = a.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem(format!("a[{i}] is not finite")));
        }
        env.validate()?;
        let irreducible = coupling.is_irreducible();
        Ok(GrowthSystem {
            a,
            coupling,
            env,
            irreducible,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.a
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    pub fn env(&self) -> &EnvironmentTerm {
        &self.env
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    /// `a_i - sum_j a_ji` for every unit.
    pub fn effective_rates(&self) -> Vec<f64> {
        self.a
            .iter()
            .zip(self.coupling.outflows())
            .map(|(a, out)| a - out)
            .collect()
    }

    /// Copy with a different environment term.
    pub fn with_env(&self, env: EnvironmentTerm) -> Result<Self> {
        env.validate()?;
        Ok(GrowthSystem { env, ..self.clone() })
    }

    /// Copy with every endogenous rate shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        GrowthSystem {
            a: self.a.iter().map(|a| a + c).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn check_dim(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::Dimension {
                what,
                expected: self.n(),
                actual: len,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonzero_diagonal_and_negative_entries() {
        assert!(CouplingMatrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(CouplingMatrix::from_rows(&[vec![0.0, -0.1], vec![0.1, 0.0]]).is_err());
        assert!(CouplingMatrix::from_rows(&[vec![0.0, 0.1]]).is_err());
    }

    #[test]
    fn outflow_is_column_sum() {
        let c = CouplingMatrix::from_rows(&[
            vec![0.0, 0.1, 0.2],
            vec![0.3, 0.0, 0.0],
            vec![0.0, 0.5, 0.0],
        ])
        .unwrap();
        assert_eq!(c.outflows(), &[0.3, 0.6, 0.2]);
        assert_eq!(c.inflow(0), &[(1, 0.1), (2, 0.2)]);
    }

    #[test]
    fn strong_connectivity() {
        // 0 -> 1 -> 2 -> 0 cycle: a_10, a_21, a_02 > 0
        let cycle = CouplingMatrix::from_entries(3, [(1, 0, 1.0), (2, 1, 1.0), (0, 2, 1.0)]).unwrap();
        assert!(cycle.is_irreducible());
        // 0 -> 1 -> 2 with no way back
        let chain = CouplingMatrix::from_entries(3, [(1, 0, 1.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(chain.first_unreachable(), Some(1));
        assert!(!chain.is_irreducible());
        assert!(CouplingMatrix::zeros(1).is_irreducible());
        assert!(!CouplingMatrix::zeros(2).is_irreducible());
    }

    #[test]
    fn reducible_system_needs_opt_in() {
        let c = CouplingMatrix::zeros(2);
        let err = GrowthSystem::new(vec![0.1, 0.2], c.clone(), EnvironmentTerm::Zero).unwrap_err();
        assert!(matches!(err, Error::Reducible { unreachable: 1 }));
        let sys = GrowthSystem::allow_reducible(vec![0.1, 0.2], c, EnvironmentTerm::Zero).unwrap();
        assert!(!sys.is_irreducible());
    }

    #[test]
    fn environment_evaluation() {
        let w = [1.0, 3.0];
        assert_eq!(EnvironmentTerm::Zero.eval(&w, 5.0), 0.0);
        assert_eq!(EnvironmentTerm::Constant(0.3).eval(&w, 5.0), 0.3);
        assert_eq!(EnvironmentTerm::MeanProportional(0.5).eval(&w, 5.0), 1.0);
        let table = TimeTable::new(vec![0.0, 10.0, 20.0], vec![0.0, 1.0, -1.0]).unwrap();
        let env = EnvironmentTerm::TimeTable(table);
        assert_eq!(env.eval(&w, -1.0), 0.0);
        assert_eq!(env.eval(&w, 5.0), 0.5);
        assert_eq!(env.eval(&w, 10.0), 1.0);
        assert_eq!(env.eval(&w, 15.0), 0.0);
        assert_eq!(env.eval(&w, 25.0), -1.0);
    }

    #[test]
    fn time_table_requires_increasing_times() {
        assert!(TimeTable::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeTable::new(vec![], vec![]).is_err());
    }
}
