//! Shared fixtures for the criterion benchmarks in `benches/`.

use propa::{
    assemble, build_ball_witness, Kernel, MetricSpace, MixtureKernel, Schedule, WitnessSequence,
};

/// Path with a core margin wide enough for the two-term dyadic mixture.
pub fn path_space(length: usize) -> MetricSpace {
    MetricSpace::path(length)
        .expect("path length within the point cap")
        .with_margin(60)
}

pub fn ball_kernel(space: &MetricSpace, radius: u32) -> Kernel {
    build_ball_witness(space, radius)
}

/// Two-term dyadic mixture on ball witnesses of radius 1 to 40.
pub fn dyadic_mixture(space: &MetricSpace) -> MixtureKernel {
    let radii: Vec<u32> = (1..=40).collect();
    let ws = WitnessSequence::balls(space, &radii);
    assemble(&ws, space, &Schedule::DYADIC, &Schedule::DYADIC, 2).expect("selection succeeds")
}
