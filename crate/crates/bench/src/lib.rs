//! Fixtures shared by the benchmarks.

use pairjensen_core::measure::random_instance;
use pairjensen_core::{Instance, PhiSpec};

/// Dense random instance with `n` atoms on each side.
pub fn square_instance(n: usize) -> Instance {
    random_instance(n, n, 2.0, n as u64, (0.2, 2.0)).expect("valid fixture")
}

pub fn bench_phis() -> Vec<PhiSpec> {
    vec![PhiSpec::identity(), PhiSpec::log(), PhiSpec::power(2.0)]
}
