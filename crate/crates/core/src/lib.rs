//! Semi-Lagrangian solver for the polyatomic ellipsoidal BGK equation on a
//! periodic one-dimensional domain with a truncated three-dimensional
//! velocity lattice and a half-line internal-energy grid.
//!
//! One step advects the distribution along the backward characteristics with
//! periodic linear interpolation, then relaxes it implicitly towards the
//! discrete ellipsoidal Gaussian built from the advected moments.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod grid;
pub mod moments;
pub mod params;
pub mod stepper;
mod sum;
pub mod transport;

pub use diagnostics::{
    conserved_quantities, entropy, equilibrium_distance, observed_order, Conserved,
    ConvergenceTable, EnvelopeMonitor, EnvelopeReport, StabilityEnvelope,
};
pub use error::{Error, Result};
pub use field::{error_sup_norm, weighted_sup_norm, DistField, LqWeights};
pub use gaussian::{eval_gaussian, CellGaussian};
pub use grid::{GridConfig, PhaseGrid};
pub use moments::{compute_moments, MacroCell, MacroFields};
pub use params::{normalizer_continuous, normalizer_discrete, SchemeParams};
pub use stepper::{relax, step, Simulation, StepEvent, StepObserver, StepReport, Stepper};
pub use sum::pairwise_sum;
pub use transport::{advect, AdvectionPlan};
