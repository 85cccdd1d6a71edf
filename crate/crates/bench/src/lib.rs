//! Fixtures shared by the criterion benches.

use mixtest_core::simulation::{builtin_model, sample_mixture};
use mixtest_core::{DualBasis, PairedSample, Result};

/// A `model2_h1` sample of size `n` with its dual bases.
pub fn model2_fixture(n: usize, seed: u64) -> Result<(PairedSample, DualBasis, DualBasis)> {
    let spec = builtin_model("model2_h1").expect("built-in model");
    let sample = sample_mixture(&spec, n, seed)?;
    let (a, b) = sample.dual_bases()?;
    Ok((sample, a, b))
}
