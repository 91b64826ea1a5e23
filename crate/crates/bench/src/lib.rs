//! Fixtures shared by the benchmarks.

use helmdamp::fd::{assemble, BandedSystem, Grid2D, Patch, Sides};
use helmdamp::{compute_eta, Decomposition, PhysicalParams, Side};

/// Waveguide at `ω = 100`, `r = 1` split into `n` strips with `L = 1/300`.
pub fn waveguide(n: usize) -> (PhysicalParams, Decomposition) {
    (
        PhysicalParams::new(100.0, 1.0, 0.0).expect("valid parameters"),
        Decomposition::new(n, 1.0 / 300.0).expect("valid decomposition"),
    )
}

/// Damped all-Dirichlet system on an `n × n` interior grid.
pub fn cavity_system(n: usize) -> BandedSystem {
    let grid = Grid2D::new(n).expect("valid grid");
    let params = PhysicalParams::new(50.0, 1.0, 0.0).expect("valid parameters");
    assemble(&Patch::full(grid, Sides::uniform(Side::Dirichlet)), &compute_eta(&params)).expect("assembles")
}
