//! Shared fixtures for the kernel benchmarks.

use aplab_core::grid::{CoefficientPair, GridSpec, ScalarField};
use aplab_core::suite::profile_datum;

pub fn square_grid(cells: usize) -> GridSpec {
    GridSpec::square([cells, cells], [-1.0, -1.0], [1.0, 1.0]).expect("valid grid")
}

/// Constant fractional coefficients on an n×n grid.
pub fn fractional_coeffs(cells: usize) -> CoefficientPair {
    CoefficientPair::constant(&square_grid(cells), 2.0 / 3.0, 1.0).expect("valid pair")
}

/// The half-plane profile with the front through {x₁ = 0.2}.
pub fn profile(cells: usize) -> ScalarField {
    profile_datum(&square_grid(cells), 2.0 / 3.0, 1.0, [1.0, 0.0], 0.2).expect("valid profile")
}
