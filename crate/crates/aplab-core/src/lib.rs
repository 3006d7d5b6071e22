//! Numerical laboratory for obstacle-type free-boundary problems with a
//! spatially varying reaction exponent.
//!
//! The library minimizes, on uniform 1D/2D grids, energies of the form
//!
//! ```text
//! J(v) = ∫ ½|Dv|² + δ(x) (v⁺(x))^{γ(x)} dx
//! ```
//!
//! with `0 < γ(x) ≤ 1` and `δ(x) ≥ δ₀ > 0`, and then measures the geometry
//! of the resulting positivity sets: growth and non-degeneracy exponents at
//! free-boundary points, monotonicity of an adjusted boundary-energy
//! quantity, blow-up profiles, and density/porosity of the contact set.
//!
//! Modules build on each other roughly in the order: [`grid`] →
//! [`energy`] → [`minimize`] → ([`oracle1d`], [`fbanalysis`], [`weiss`],
//! [`blowup`]) → [`suite`].

pub mod blowup;
pub mod energy;
pub mod error;
pub mod fbanalysis;
pub mod fieldio;
pub mod grid;
pub mod minimize;
pub mod oracle1d;
pub mod suite;
pub mod weiss;

pub use error::{ApError, Result};
pub use grid::{BallRegion, CoefficientPair, GridSpec, ScalarField};
