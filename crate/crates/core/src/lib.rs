//! Exact sparse Markov kernels on finite truncations of bounded-geometry
//! metric spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`space`] builds finite metric spaces (paths, grids, free-group balls)
//!   together with a *core region* far from the truncation boundary.
//! * [`measure`] holds sparse probability measures and row-stochastic
//!   kernels with deterministic convolution, composition and powering.
//! * [`witness`] builds Property A witnesses in set form and measure form
//!   and evaluates their variation over metrically close core pairs.
//! * [`mixture`] assembles `P = Σ tᵢ φᵢ` from a witness sequence and checks
//!   the tail and uniform-mixing inequalities the construction guarantees.
//! * [`diagnostics`] computes the uniform and Cesàro L1 criteria and the
//!   closed-form collapse kernel.
//!
//! Every sum runs in ascending point order, so results are bit-identical
//! regardless of how many rayon workers execute them.

pub mod check;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod measure;
pub mod mixture;
pub mod properties;
pub mod space;
pub mod witness;

pub use check::{Inequality, Relation};
pub use diagnostics::{
    cesaro_profile, collapse_kernel, collapse_power_oracle, collapse_sweep,
    pairwise_l1_bound_check, uniform_profile, Criterion, DiagnosticsReport,
};
pub use error::{Error, Result};
pub use measure::{
    compose, convolve, l1_distance, power, tail_mass, Kernel, Measure, SupportRadius,
};
pub use mixture::{
    assemble, select_step_count, select_subsequence, verify_nstep_tail, verify_tail,
    verify_uniform_bound, MixtureKernel, MixtureRecipe, Schedule,
};
pub use space::{GeometryProfile, MetricSpace};
pub use witness::{
    build_ball_witness, set_ratio_profile, set_witness_to_kernel, truncate_renormalize,
    variation_profile, SetWitness, WitnessSequence,
};

/// Slack on row sums before a row is renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
