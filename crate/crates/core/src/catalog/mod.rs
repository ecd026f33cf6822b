//! Closed-form potentials and nonlinearities, with sampled checks of their
//! structural hypotheses and derived coercivity constants.

pub mod assumptions;
pub mod diagnostics;
pub mod nonlinearity;
pub mod potential;

pub use assumptions::{
    check_assumptions, AssumptionCheck, AssumptionReport, Sampling, Verdict, Witness,
};
pub use diagnostics::{diagnostic_constants, DiagnosticConstants};
pub use nonlinearity::{NonlinSpec, NonlinVariant};
pub use potential::{PotentialSpec, PotentialValue, PotentialVariant, ThetaConstants};
