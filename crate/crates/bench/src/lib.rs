//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use choquard_core::fibering::gaussian;
use choquard_core::functionals::Problem;
use choquard_core::{
    Field, GridSpec, NonlinSpec, NonlinVariant, PotentialSpec, PotentialVariant, RieszPlan,
};

/// Three-dimensional grid with `L = 16` and `n` points per axis.
pub fn grid(n: usize) -> GridSpec {
    GridSpec::new(3, 16.0, n).expect("valid benchmark grid")
}

/// The quadratic Choquard problem with the potential `3 - 1/(1 + |x|²)`.
pub fn problem(n: usize) -> Problem {
    let g = grid(n);
    let plan = Arc::new(RieszPlan::new(g, 2.0).expect("plan"));
    let pot = PotentialSpec::new(
        PotentialVariant::InverseQuadratic { a: 3.0, b: 1.0 },
        3,
        2.0,
    )
    .expect("potential");
    let nl = NonlinSpec::new(NonlinVariant::Pekar, 3, 2.0).expect("nonlinearity");
    Problem::new(plan, pot, nl, 1.0, 1.0).expect("problem")
}

/// A centered Gaussian of amplitude 2 and width 1.5.
pub fn bump(g: &GridSpec) -> Field {
    gaussian(g, 2.0, 1.5, &[0.0; 3])
}
