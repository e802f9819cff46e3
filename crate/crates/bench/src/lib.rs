//! Benchmark fixtures shared by the `solver` bench.

use mmc_core::{init_cosine, init_random, GridSpec, PhaseState};

/// Smooth data on an `n x n` grid of side 64.
pub fn smooth_state(n: usize) -> PhaseState {
    init_cosine(GridSpec::new(n, 64.0).expect("valid grid"), 0.1, 0.5, 0.01).expect("admissible data")
}

/// Seeded rough data on an `n x n` grid of side 64.
pub fn rough_state(n: usize) -> PhaseState {
    init_random(GridSpec::new(n, 64.0).expect("valid grid"), 0.1, 0.5, 0.01, 1, false).expect("admissible data")
}
