//! Numerical laboratory for heat semigroups on discrete metric measure
//! spaces: spectral heat kernels, viscous and Hopf-Lax Hamilton-Jacobi
//! evolutions, small-time large-deviations fits, slowed Brownian tube
//! probabilities and entropic optimal transport.

pub mod brownian;
pub mod error;
pub mod fit;
pub mod heat;
pub mod hj;
pub mod ldp;
pub mod numeric;
pub mod schrodinger;
pub mod simplex;
pub mod space;
pub mod threads;

pub use error::{HeatLabError, Result};
pub use space::{Density, DiscreteSpace, ScalarField, SetDistance, SpaceId, Topology};
