//! Reproducible configurations and seeded system generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{integrate, InitialCondition, Trajectory};
use crate::error::{Error, Result};
use crate::spatial::{build_lattice, Lattice};
use crate::system::{CouplingMatrix, EnvironmentTerm, GrowthSystem};

/// Monthly endogenous rates of the six education groups.
pub const SIX_GROUP_RATES: [f64; 6] = [-0.15, -0.1, -0.05, 0.0, 0.025, 0.05];
/// Uniform transfer rate between the six groups.
pub const SIX_GROUP_COUPLING: f64 = 0.4;
/// Weak transfer rate of the six-group variant whose aggregate turns upward.
pub const SIX_GROUP_WEAK_COUPLING: f64 = 0.004;

/// Lattice spacing used by [`lattice_growth_center`], in km.
pub const LATTICE_SPACING_KM: f64 = 10.0;

pub const SCENARIO_NAMES: [&str; 3] = ["paper-six-group", "six-group-weak-coupling", "lattice-growth-center"];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: GrowthSystem,
    pub lattice: Option<Lattice>,
    /// Indices of the growth centres, when the scenario has any.
    pub centers: Vec<usize>,
    pub initial: InitialCondition,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    /// Non-fatal remarks about the configuration.
    pub notes: Vec<String>,
}

impl Scenario {
    pub fn initial_state(&self) -> Result<Vec<f64>> {
        self.initial.realize(self.system.n())
    }

    pub fn run(&self) -> Result<Trajectory> {
        integrate(&self.system, &self.initial_state()?, self.t_end, self.dt)
    }

    pub fn layout(&self) -> Option<&crate::spatial::SpatialLayout> {
        self.lattice.as_ref().map(|l| &l.layout)
    }
}

fn six_group(name: &str, coupling: f64, t_end: f64) -> Scenario {
    let system = GrowthSystem::new(
        SIX_GROUP_RATES.to_vec(),
        CouplingMatrix::all_to_all(6, coupling).expect("positive constant coupling"),
        EnvironmentTerm::Zero,
    )
    .expect("six-group system is valid");
    Scenario {
        name: name.to_string(),
        system,
        lattice: None,
        centers: vec![5],
        initial: InitialCondition::uniform(1.0, 6),
        t_end,
        dt: 1.0,
        seed: 0,
        notes: Vec::new(),
    }
}

/// Six all-to-all groups with rates [`SIX_GROUP_RATES`] and every transfer
/// rate 0.4/month; uniform `W(0) = 1`, one-month steps, 72 months.
pub fn paper_six_group() -> Scenario {
    six_group("paper-six-group", SIX_GROUP_COUPLING, 72.0)
}

/// The six groups with transfers a hundred times weaker. The steady growth
/// rate turns positive, so the average declines and then recovers.
pub fn six_group_weak_coupling() -> Scenario {
    six_group("six-group-weak-coupling", SIX_GROUP_WEAK_COUPLING, 480.0)
}

/// Grid with `n_centers` seeded growth centres.
///
/// Centres get `a_center`, every other cell `a_background`. Initial activity
/// is uniform on `[0.0025, 0.0075]`, below the default 0.01 crossing
/// threshold, and the run covers 2400 months in 1-month steps.
pub fn lattice_growth_center(
    rows: usize,
    cols: usize,
    n_centers: usize,
    a_center: f64,
    a_background: f64,
    coupling: f64,
    seed: u64,
) -> Result<Scenario> {
    let n = rows * cols;
    if n_centers == 0 || n_centers > n {
        return Err(Error::InvalidArgument(format!(
            "need 1..={n} centres on a {rows}x{cols} grid, got {n_centers}"
        )));
    }
    let lattice = build_lattice(rows, cols, LATTICE_SPACING_KM, coupling)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<usize> = (0..n).collect();
    cells.shuffle(&mut rng);
    let mut centers = cells[..n_centers].to_vec();
    centers.sort_unstable();

    let mut a = vec![a_background; n];
    for &c in &centers {
        a[c] = a_center;
    }
    let mut notes = Vec::new();
    if !(a_center > 0.0 && a_background < 0.0) {
        notes.push(format!(
            "expected a_center > 0 > a_background, got a_center = {a_center}, a_background = {a_background}"
        ));
    }
    let system = GrowthSystem::new(a, lattice.coupling.clone(), EnvironmentTerm::Zero)?;
    Ok(Scenario {
        name: "lattice-growth-center".into(),
        system,
        lattice: Some(lattice),
        centers,
        initial: InitialCondition::random_uniform(0.0025, 0.0075, rng.random()),
        t_end: 2400.0,
        dt: 1.0,
        seed,
        notes,
    })
}

/// Looks up a named scenario. `seed` only affects seeded scenarios.
pub fn by_name(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "paper-six-group" => Ok(paper_six_group()),
        "six-group-weak-coupling" => Ok(six_group_weak_coupling()),
        "lattice-growth-center" => lattice_growth_center(20, 20, 3, 0.05, -0.05, 0.01, seed),
        other => Err(Error::InvalidArgument(format!(
            "unknown scenario `{other}`; known: {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

/// Parameter ranges for [`random_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomRanges {
    pub a: (f64, f64),
    pub coupling: (f64, f64),
    /// Probability that a given off-diagonal entry is non-zero.
    pub density: f64,
    /// Draw `a_ij = a_ji`.
    pub symmetric: bool,
    pub env: EnvironmentTerm,
}

impl Default for RandomRanges {
    fn default() -> Self {
        RandomRanges {
            a: (-0.2, 0.2),
            coupling: (0.01, 0.5),
            density: 0.5,
            symmetric: false,
            env: EnvironmentTerm::Zero,
        }
    }
}

const MAX_ATTEMPTS: usize = 1000;

/// Seeded irreducible system; redraws the coupling until the graph is strongly connected.
pub fn random_system(n: usize, seed: u64, ranges: &RandomRanges) -> Result<GrowthSystem> {
    if n == 0 {
        return Err(Error::InvalidArgument("random system needs n >= 1".into()));
    }
    let (alo, ahi) = ranges.a;
    let (clo, chi) = ranges.coupling;
    if !(alo <= ahi) || !(0.0 <= clo && clo <= chi) || !(0.0..=1.0).contains(&ranges.density) {
        return Err(Error::InvalidArgument(format!("invalid random ranges {ranges:?}")));
    }
    let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if lo == hi { lo } else { rng.random_range(lo..hi) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| draw(&mut rng, alo, ahi)).collect();
    for _ in 0..MAX_ATTEMPTS {
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            let js = if ranges.symmetric { 0..i } else { 0..n };
            for j in js {
                if i == j || !rng.random_bool(ranges.density) {
                    continue;
                }
                let v = draw(&mut rng, clo, chi);
                dense[i * n + j] = v;
                if ranges.symmetric {
                    dense[j * n + i] = v;
                }
            }
        }
        let coupling = CouplingMatrix::from_dense(n, dense)?;
        if coupling.is_irreducible() {
            return GrowthSystem::new(a, coupling, ranges.env.clone());
        }
    }
    Err(Error::InvalidArgument(format!(
        "no irreducible coupling found in {MAX_ATTEMPTS} draws (n = {n}, density = {})",
        ranges.density
    )))
}
