//! Coupled autocatalytic growth on networks.
//!
//! Each unit `i` carries an activity level `W_i(t)` that grows at its own
//! endogenous rate, exchanges activity with other units through a
//! non-negative transfer matrix, and feels a global environment term:
//!
//! ```text
//! dW_i/dt = a_i W_i + Σ_j a_ij W_j - Σ_j a_ji W_i - b(W, t) W_i
//! ```
//!
//! The crate integrates these dynamics ([`dynamics`]), solves for the steady
//! shares and the common asymptotic growth rate ([`spectral`]), and provides
//! the diagnostics used to read trajectories: J-curve detection, growth-rate
//! uniformisation, dispersion ([`stats`]) and distance-banded Moran's index
//! and threshold-crossing maps ([`spatial`]).
//!
//! ```
//! use growth_centers::prelude::*;
//!
//! let scenario = scenarios::paper_six_group();
//! let trajectory = scenario.run()?;
//! let steady = spectral::steady_state(&scenario.system, PowerIteration::default())?;
//!
//! // Every unit ends up growing at the Perron rate.
//! let rates = stats::growth_rates(&trajectory, 1.0)?;
//! let last = rates.rates.last().unwrap();
//! assert!(last.iter().all(|g| (g - steady.lambda).abs() < 1e-3));
//! # Ok::<(), growth_centers::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod ingest;
pub mod io;
pub mod scenarios;
pub mod spatial;
pub mod spectral;
pub mod stats;
pub mod system;

pub use dynamics::{InitialCondition, Series, StateVector, Trajectory};
pub use error::{Error, Result};
pub use spatial::{DistanceBands, MoranWeights, SpatialLayout};
pub use spectral::{PowerIteration, SteadyState, SystemMatrix};
pub use system::{CouplingMatrix, EnvironmentTerm, GrowthSystem, TimeTable};

pub mod prelude {
    pub use crate::dynamics::{self, InitialCondition, Series, StateVector, Trajectory};
    pub use crate::scenarios;
    pub use crate::spatial::{self, DistanceBands, MoranWeights, SpatialLayout};
    pub use crate::spectral::{self, PowerIteration, SteadyState};
    pub use crate::stats;
    pub use crate::system::{CouplingMatrix, EnvironmentTerm, GrowthSystem};
}

// The guide under book/ is compiled here so its code listings run with `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/steady-state.md")]
    mod steady_state {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/spatial.md")]
    mod spatial {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/panel-data.md")]
    mod panel_data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
