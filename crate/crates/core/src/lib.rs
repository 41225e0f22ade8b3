//! Invariant manifolds and small-amplitude shock profiles of finite-dimensional
//! kinetic relaxation models `A u' = Q(u)`.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod bilinear;
pub mod canonical;
pub mod chapman_enskog;
pub mod error;
pub mod fit;
pub mod grid;
pub mod linalg;
pub mod manifolds;
pub mod model;
pub mod ode;
pub mod output;
pub mod poly;
pub mod presets;
pub mod profiles;
pub mod resolvent;
pub mod scalar;
mod textio;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Model = model::KineticModel<f64>;
pub type Bilinear = bilinear::BilinearMap<f64>;
pub type CeData = chapman_enskog::ChapmanEnskogData<f64>;
pub type Canonical = canonical::CanonicalSystem<f64>;
pub type Grid = grid::GridFunction<f64>;
pub type Spectrum = resolvent::SpectralDecomposition<f64>;
pub type Taylor = manifolds::CenterGraphTaylor<f64>;
pub type NormalForm = profiles::BurgersNormalForm<f64>;
pub type Rh = profiles::RhSolution<f64>;
