//! Fixtures shared by the benchmarks.

use taylor_core::{DistributionSpec, FunctionSpec, LabeledDataset};

/// `count` distinct nodes in `[−1, 1]`, deterministic in `seed`.
pub fn scattered_nodes(count: usize, seed: u64) -> Vec<f64> {
    let d = DistributionSpec::Uniform { a: -1.0, b: 1.0 };
    let mut xs = d.sample(seed, count).expect("valid distribution");
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Labeled `sin` data under a standard gaussian.
pub fn sine_data(count: usize, seed: u64) -> LabeledDataset {
    LabeledDataset::generate(
        &FunctionSpec::Sin,
        &DistributionSpec::Gaussian { sigma: 1.0 },
        seed,
        0,
        count,
    )
    .expect("valid distribution")
}
