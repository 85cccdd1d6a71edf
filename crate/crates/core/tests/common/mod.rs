//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use mixtest_core::simulation::{builtin_model, expand_weights, MixtureSpec};
use mixtest_core::wavelet::{LevelIndex, ScalingBasis};
use mixtest_core::{DualBasis, PairedSample, WeightMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Flat-Dirichlet probability vector of length `m`.
pub fn dirichlet<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let mut w: Vec<f64> = e.iter().map(|x| x / total).collect();
    // push the rounding residue into the largest entry so columns sum to 1 within 1e-12
    let resid = 1.0 - w.iter().sum::<f64>();
    let big = (0..m).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    w[big] += resid;
    w
}

pub fn dirichlet_matrix<R: Rng>(m: usize, n: usize, rng: &mut R) -> WeightMatrix {
    let cols: Vec<Vec<f64>> = (0..n).map(|_| dirichlet(m, rng)).collect();
    WeightMatrix::from_columns(&cols).unwrap()
}

/// Random paired sample with Dirichlet weights and observations in `[-0.5, 1.5)`.
pub fn random_sample<R: Rng>(m: usize, n: usize, rng: &mut R) -> PairedSample {
    let omega = dirichlet_matrix(m, n, rng);
    let sigma = dirichlet_matrix(m, n, rng);
    let y = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
    let z = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
    PairedSample::new(y, z, omega, sigma).unwrap()
}

/// Dual vectors by the cofactor expansion `a_l(i) = n/det * sum_u (-1)^{l+u} minor_lu omega_u(i)`.
pub fn cofactor_dual(w: &WeightMatrix) -> DMatrix<f64> {
    let g = w.gram();
    let m = w.m();
    let det = g.determinant();
    let cof = DMatrix::from_fn(m, m, |l, u| {
        let minor = if m == 1 {
            1.0
        } else {
            g.clone().remove_row(l).remove_column(u).determinant()
        };
        if (l + u) % 2 == 0 {
            minor
        } else {
            -minor
        }
    });
    cof * w.entries() * (w.n() as f64 / det)
}

/// `sum_k int_{I_jk} h` for a nonnegative step function `h` given by `values` on
/// cells `[edges[c], edges[c+1])`, computed exactly by interval overlap.
pub fn lem2_lhs(basis: ScalingBasis, j: u32, edges: &[f64], values: &[f64]) -> f64 {
    let scale = (j as f64).exp2();
    let l = basis.half_support();
    let k_lo = (scale * edges[0] - l).floor() as i64 - 1;
    let k_hi = (scale * edges[edges.len() - 1] + l).ceil() as i64 + 1;
    let mut total = 0.0;
    for k in k_lo..=k_hi {
        let iv = basis.support_interval(LevelIndex::new(j, k));
        for (c, v) in values.iter().enumerate() {
            let lo = iv.lo.max(edges[c]);
            let hi = iv.hi.min(edges[c + 1]);
            if hi > lo {
                total += v * (hi - lo);
            }
        }
    }
    total
}

pub fn step_l1(edges: &[f64], values: &[f64]) -> f64 {
    values.iter().enumerate().map(|(c, v)| v.abs() * (edges[c + 1] - edges[c])).sum()
}

/// A null model whose `Z` weights are the `Y` weights of `base`.
pub fn equal_weight_null(base: &str) -> MixtureSpec {
    let mut spec = builtin_model(base).unwrap();
    spec.z_blocks = spec.y_blocks.clone();
    spec.components_q = spec.components_p.clone();
    spec.name = format!("{base}_equal_weights");
    spec
}

pub fn model_k(name: &str, n: usize) -> f64 {
    let spec = builtin_model(name).unwrap();
    let (o, s) = expand_weights(&spec, n).unwrap();
    mixtest_core::model_K(&o, &s).unwrap()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn binomial_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Relative difference between the naive and fast statistics. When the naive
/// value is exactly zero, the difference is taken relative to
/// `(1/n^2) sum_i sum_l (|a_l(i)| + |b_l(i)|)^2 2^j`, a bound on the summed
/// squared brackets.
pub fn oracle_discrepancy(sample: &PairedSample, a: &DualBasis, b: &DualBasis, j: u32, naive: f64, fast: f64) -> f64 {
    let diff = (naive - fast).abs();
    if naive != 0.0 {
        return diff / naive.abs().max(fast.abs());
    }
    let n = sample.n();
    let scale: f64 = (0..n)
        .map(|i| {
            a.column(i)
                .iter()
                .zip(b.column(i))
                .map(|(x, y)| (x.abs() + y.abs()).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        * (j as f64).exp2()
        / (n * n) as f64;
    diff / scale
}
