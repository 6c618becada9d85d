//! Right-hand sides of the activity and share dynamics, and a fixed-step
//! classical Runge–Kutta integrator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::GrowthSystem;

/// Allowed deviation of `mean(x)` from 1 in [`share_rhs`].
pub const SHARE_NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub t: f64,
    pub w: Vec<f64>,
}

impl StateVector {
    pub fn new(t: f64, w: Vec<f64>) -> Self {
        StateVector { t, w }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.w)
    }
}

/// A scalar time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Series {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(Error::Dimension {
                what: "series values vs times",
                expected: t.len(),
                actual: v.len(),
            });
        }
        Ok(Series { t, v })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Samples of `W(t)` at a fixed output interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<StateVector>,
    step: f64,
}

impl Trajectory {
    /// Checks that sample times increase strictly and all samples share one dimension.
    pub fn new(samples: Vec<StateVector>, step: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("trajectory has no samples".into()));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling step {step} must be positive")));
        }
        let n = samples[0].w.len();
        for s in &samples {
            if s.w.len() != n {
                return Err(Error::Dimension {
                    what: "trajectory sample",
                    expected: n,
                    actual: s.w.len(),
                });
            }
        }
        if samples.windows(2).any(|p| p[1].t <= p[0].t) {
            return Err(Error::InvalidArgument("trajectory times must be strictly increasing".into()));
        }
        Ok(Trajectory { samples, step })
    }

    pub fn samples(&self) -> &[StateVector] {
        &self.samples
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n(&self) -> usize {
        self.samples[0].w.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn first(&self) -> &StateVector {
        &self.samples[0]
    }

    pub fn last(&self) -> &StateVector {
        self.samples.last().expect("non-empty by construction")
    }

    /// `W_i(t)` for a single unit.
    pub fn unit(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.w[i]).collect()
    }

    /// The sample closest to time `t`.
    pub fn nearest(&self, t: f64) -> &StateVector {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("non-empty by construction")
    }

    /// Shares `X_i = W_i / mean(W)` at every sample.
    pub fn shares(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| shares_of(&s.w)).collect()
    }
}

pub fn shares_of(w: &[f64]) -> Vec<f64> {
    let m = mean(w);
    w.iter().map(|v| v / m).collect()
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `dW/dt`, summing the four terms of the model separately.
pub fn rhs(system: &GrowthSystem, state: &StateVector) -> Result<Vec<f64>> {
    system.check_dim("state", state.w.len())?;
    let mut out = vec![0.0; system.n()];
    rhs_into(system, state.t, &state.w, &mut out);
    Ok(out)
}

fn rhs_into(system: &GrowthSystem, t: f64, w: &[f64], out: &mut [f64]) {
    let b = system.env().eval(w, t);
    let coupling = system.coupling();
    for (i, (o, (&a, &wi))) in out.iter_mut().zip(system.rates().iter().zip(w)).enumerate() {
        let inflow: f64 = coupling.inflow(i).iter().map(|&(j, aij)| aij * w[j]).sum();
        *o = a * wi + inflow - coupling.outflow(i) * wi - b * wi;
    }
}

/// `dW/dt` with the diagonal terms collected into one factor:
/// `(a_i - sum_j a_ji + b') W_i + sum_j a_ij W_j`.
///
/// `b'` is the signed environment contribution. Read consistently with
/// [`rhs`], `b' = -b(W, t)`.
pub fn rhs_regrouped(system: &GrowthSystem, state: &StateVector) -> Result<Vec<f64>> {
    system.check_dim("state", state.w.len())?;
    let signed_env = -system.env().eval(&state.w, state.t);
    let coupling = system.coupling();
    Ok((0..system.n())
        .map(|i| {
            let diag = system.rates()[i] - coupling.outflow(i) + signed_env;
            let inflow: f64 = coupling.inflow(i).iter().map(|&(j, aij)| aij * state.w[j]).sum();
            diag * state.w[i] + inflow
        })
        .collect())
}

/// `dX/dt` for the shares `X_i = W_i / mean(W)`.
///
/// `(a_i - mean_j(a_j X_j) - sum_j a_ji) X_i + sum_j a_ij X_j`; the
/// environment term drops out, so it is not an input.
pub fn share_rhs(system: &GrowthSystem, x: &[f64]) -> Result<Vec<f64>> {
    system.check_dim("shares", x.len())?;
    if let Some(i) = x.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!("share x[{i}] = {} is not positive", x[i])));
    }
    let m = mean(x);
    if (m - 1.0).abs() > SHARE_NORMALIZATION_TOL {
        return Err(Error::Normalization { mean: m });
    }
    let a = system.rates();
    let weighted_mean = a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() / x.len() as f64;
    let coupling = system.coupling();
    Ok((0..system.n())
        .map(|i| {
            let inflow: f64 = coupling.inflow(i).iter().map(|&(j, aij)| aij * x[j]).sum();
            (a[i] - weighted_mean - coupling.outflow(i)) * x[i] + inflow
        })
        .collect())
}

/// Per-sample national average `mean_i W_i(t)`.
pub fn aggregate(trajectory: &Trajectory) -> Series {
    Series {
        t: trajectory.times(),
        v: trajectory.samples().iter().map(StateVector::mean).collect(),
    }
}

/// Integrates from `w0` at `t = 0` to `t_end` with classical RK4 steps of
/// size `dt`, recording every step.
///
/// When `t_end` is not a multiple of `dt` the last step is shortened to land
/// on `t_end`. A step that yields any `W_i <= 0` aborts the run.
pub fn integrate(system: &GrowthSystem, w0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    system.check_dim("initial state", w0.len())?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must be positive")));
    }
    if let Some(i) = w0.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("w0[{i}] = {} must be positive", w0[i])));
    }

    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let n = system.n();
    let mut rk = Rk4::new(n);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut w = w0.to_vec();
    let mut t = 0.0;
    samples.push(StateVector::new(t, w.clone()));
    for k in 1..=steps {
        let t_next = if k == steps { t_end } else { k as f64 * dt };
        rk.step(|t, y, dy| rhs_into(system, t, y, dy), t, &mut w, t_next - t);
        if let Some(index) = w.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Positivity {
                t: t_next,
                index,
                value: w[index],
            });
        }
        t = t_next;
        samples.push(StateVector::new(t, w.clone()));
    }
    Trajectory::new(samples, dt)
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, f: impl Fn(f64, &[f64], &mut [f64]), t: f64, y: &mut [f64], h: f64) {
        let half = 0.5 * h;
        f(t, y, &mut self.k1);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *tmp = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k2);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k3);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = y + h * k;
        }
        f(t + h, &self.tmp, &mut self.k4);
        for (i, y) in y.iter_mut().enumerate() {
            *y += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// How the initial state is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Values(Vec<f64>),
    Random { random_uniform: UniformSpec },
}

/// i.i.d. uniform draws on `[lo, hi]` from a seeded ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformSpec {
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_lo() -> f64 {
    0.5
}

fn default_hi() -> f64 {
    1.5
}

impl InitialCondition {
    pub fn uniform(value: f64, n: usize) -> Self {
        InitialCondition::Values(vec![value; n])
    }

    pub fn random_uniform(lo: f64, hi: f64, seed: u64) -> Self {
        InitialCondition::Random {
            random_uniform: UniformSpec { lo, hi, seed },
        }
    }

    pub fn realize(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Values(v) => {
                if v.len() != n {
                    return Err(Error::Dimension {
                        what: "w0",
                        expected: n,
                        actual: v.len(),
                    });
                }
                Ok(v.clone())
            }
            InitialCondition::Random {
                random_uniform: UniformSpec { lo, hi, seed },
            } => {
                if !(*lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "random_uniform needs 0 < lo <= hi (got lo = {lo}, hi = {hi})"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..n)
                    .map(|_| if lo == hi { *lo } else { rng.random_range(*lo..=*hi) })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{CouplingMatrix, EnvironmentTerm};

    fn single(a: f64, env: EnvironmentTerm) -> GrowthSystem {
        GrowthSystem::new(vec![a], CouplingMatrix::zeros(1), env).unwrap()
    }

    fn symmetric_pair(a: f64, d: f64) -> GrowthSystem {
        GrowthSystem::new(
            vec![a, a],
            CouplingMatrix::all_to_all(2, d).unwrap(),
            EnvironmentTerm::Zero,
        )
        .unwrap()
    }

    #[test]
    fn malthusian_unit_rhs() {
        let sys = single(0.1, EnvironmentTerm::Zero);
        assert_eq!(rhs(&sys, &StateVector::new(0.0, vec![2.0])).unwrap(), vec![0.2]);
    }

    #[test]
    fn symmetric_diffusion_cancels() {
        let sys = symmetric_pair(0.07, 0.4);
        let d = rhs(&sys, &StateVector::new(0.0, vec![3.0, 3.0])).unwrap();
        assert!(d.iter().all(|v| (v - 0.21).abs() < 1e-15), "{d:?}");
        let r = rhs_regrouped(&sys, &StateVector::new(0.0, vec![3.0, 3.0])).unwrap();
        assert!((r[0] - 0.21).abs() < 1e-15 && (r[1] - 0.21).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = symmetric_pair(0.0, 0.1);
        assert!(matches!(
            rhs(&sys, &StateVector::new(0.0, vec![1.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(integrate(&sys, &[1.0, 1.0, 1.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn exponential_growth_is_reproduced() {
        let sys = single(0.05, EnvironmentTerm::Zero);
        let traj = integrate(&sys, &[1.0], 12.0, 0.25).unwrap();
        assert_eq!(traj.len(), 49);
        assert_eq!(traj.last().t, 12.0);
        assert!((traj.last().w[0] - 0.6f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn logistic_limit() {
        let sys = single(1.0, EnvironmentTerm::MeanProportional(1.0));
        let traj = integrate(&sys, &[0.5], 40.0, 0.05).unwrap();
        assert!((traj.last().w[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partial_last_step_lands_on_t_end() {
        let sys = single(0.05, EnvironmentTerm::Zero);
        let traj = integrate(&sys, &[1.0], 1.0, 0.3).unwrap();
        let t = traj.times();
        assert_eq!(t, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!((traj.last().w[0] - 0.05f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn positivity_violation_names_step() {
        // Fast exchange with a 1-month step overshoots and drains the small unit.
        let sys = symmetric_pair(0.0, 5.0);
        match integrate(&sys, &[1.0, 0.01], 5.0, 1.0) {
            Err(Error::Positivity { t, index, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(t, 1.0);
            }
            other => panic!("expected positivity error, got {other:?}"),
        }
        assert!(integrate(&sys, &[1.0, 0.01], 5.0, 0.01).is_ok());
    }

    #[test]
    fn invalid_arguments() {
        let sys = single(0.0, EnvironmentTerm::Zero);
        assert!(integrate(&sys, &[0.0], 1.0, 0.1).is_err());
        assert!(integrate(&sys, &[1.0], 1.0, 0.0).is_err());
        assert!(integrate(&sys, &[1.0], -1.0, 0.1).is_err());
    }

    #[test]
    fn share_rhs_symmetric_steady_state() {
        let sys = symmetric_pair(0.03, 0.2);
        assert_eq!(share_rhs(&sys, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(share_rhs(&sys, &[1.0, 2.0]), Err(Error::Normalization { .. })));
        assert!(share_rhs(&sys, &[2.0, 0.0]).is_err());
    }

    #[test]
    fn aggregate_is_mean() {
        let traj = Trajectory::new(
            vec![
                StateVector::new(0.0, vec![1.0, 3.0]),
                StateVector::new(1.0, vec![2.0, 2.0]),
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(aggregate(&traj).v, vec![2.0, 2.0]);
    }

    #[test]
    fn trajectory_rejects_unordered_times() {
        let s = vec![StateVector::new(1.0, vec![1.0]), StateVector::new(1.0, vec![1.0])];
        assert!(Trajectory::new(s, 1.0).is_err());
    }

    #[test]
    fn random_uniform_is_seeded_and_bounded() {
        let ic = InitialCondition::random_uniform(0.5, 1.5, 42);
        let a = ic.realize(100).unwrap();
        assert_eq!(a, ic.realize(100).unwrap());
        assert!(a.iter().all(|v| (0.5..=1.5).contains(v)));
        assert_ne!(a, InitialCondition::random_uniform(0.5, 1.5, 43).realize(100).unwrap());
        assert!(InitialCondition::random_uniform(0.0, 1.0, 1).realize(3).is_err());
    }
}
