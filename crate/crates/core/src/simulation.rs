//! Varying-weight mixture models: sampling, the built-in Gaussian designs,
//! Monte-Carlo power studies and the least-favourable perturbation of a null model.

use std::time::Instant;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::optimal_sum_from_statistics;
use crate::error::{invalid, Error, Result};
use crate::numeric::{normal_quantile, quantile_linear};
use crate::statistic::{fast_from_parts, select_level, PairedSample, MAX_LEVEL};
use crate::wavelet::{CoefficientArray, LevelIndex, ScalingBasis};
use crate::weights::{dual_basis, model_K, smallest_eigenvector, WeightMatrix};

const BLOCK_WEIGHT_TOLERANCE: f64 = 1e-12;
const BLOCK_FRACTION_TOLERANCE: f64 = 1e-9;

/// A component density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComponentDist {
    Normal { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ComponentDist {
    pub fn normal(mean: f64, variance: f64) -> Self {
        ComponentDist::Normal { mean, variance }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        ComponentDist::Uniform { lo, hi }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ComponentDist::Normal { mean, variance } if mean.is_finite() && variance > 0.0 && variance.is_finite() => {
                Ok(())
            }
            ComponentDist::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            other => Err(invalid(format!("invalid component {other:?}"))),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            ComponentDist::Normal { mean, variance } => {
                let sd = variance.sqrt();
                crate::numeric::normal_pdf((x - mean) / sd) / sd
            }
            ComponentDist::Uniform { lo, hi } => {
                if (lo..hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse CDF on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            ComponentDist::Normal { mean, variance } => mean + variance.sqrt() * normal_quantile(u),
            ComponentDist::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ComponentDist::Normal { mean, .. } => mean,
            ComponentDist::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ComponentDist::Normal { variance, .. } => variance,
            ComponentDist::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
        }
    }

    /// `||p||_2`.
    pub fn l2_norm(&self) -> f64 {
        match *self {
            ComponentDist::Normal { variance, .. } => (1.0 / (2.0 * variance.sqrt() * std::f64::consts::PI.sqrt())).sqrt(),
            ComponentDist::Uniform { lo, hi } => (1.0 / (hi - lo)).sqrt(),
        }
    }

    /// `||p||_inf`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            ComponentDist::Normal { variance, .. } => 1.0 / (2.0 * std::f64::consts::PI * variance).sqrt(),
            ComponentDist::Uniform { lo, hi } => 1.0 / (hi - lo),
        }
    }

    /// An interval carrying all but a negligible part of the mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            ComponentDist::Normal { mean, variance } => {
                let sd = variance.sqrt();
                (mean - 12.0 * sd, mean + 12.0 * sd)
            }
            ComponentDist::Uniform { lo, hi } => (lo, hi),
        }
    }
}

/// A run of consecutive observations sharing one weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBlock {
    /// Share of the `n` observations covered by the block.
    pub fraction: f64,
    pub weights: Vec<f64>,
}

impl WeightBlock {
    pub fn new(fraction: f64, weights: &[f64]) -> Self {
        Self {
            fraction,
            weights: weights.to_vec(),
        }
    }
}

/// Data-generating process for a paired sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub name: String,
    /// Components `p_u` of `Y`.
    pub components_p: Vec<ComponentDist>,
    /// Components `q_u` of `Z`.
    pub components_q: Vec<ComponentDist>,
    pub y_blocks: Vec<WeightBlock>,
    pub z_blocks: Vec<WeightBlock>,
}

impl MixtureSpec {
    pub fn m(&self) -> usize {
        self.components_p.len()
    }

    /// True when `p_u = q_u` for every component.
    pub fn is_null(&self) -> bool {
        self.components_p == self.components_q
    }

    /// Same weights, with `q` replaced by `p`.
    pub fn null_variant(&self) -> Self {
        Self {
            name: format!("{}_null", self.name),
            components_q: self.components_p.clone(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 || self.components_q.len() != m {
            return Err(invalid(format!(
                "model {}: {} p-components and {} q-components",
                self.name,
                m,
                self.components_q.len()
            )));
        }
        for c in self.components_p.iter().chain(&self.components_q) {
            c.validate()?;
        }
        for (side, blocks) in [("y", &self.y_blocks), ("z", &self.z_blocks)] {
            if blocks.is_empty() {
                return Err(invalid(format!("model {}: no {side} blocks", self.name)));
            }
            let mut total = 0.0;
            for b in blocks {
                if !(b.fraction > 0.0 && b.fraction <= 1.0) {
                    return Err(invalid(format!("model {}: block fraction {}", self.name, b.fraction)));
                }
                if b.weights.len() != m {
                    return Err(invalid(format!(
                        "model {}: block has {} weights, expected {m}",
                        self.name,
                        b.weights.len()
                    )));
                }
                let sum: f64 = b.weights.iter().sum();
                if b.weights.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > BLOCK_WEIGHT_TOLERANCE {
                    return Err(Error::Weight(format!("model {}: block weights {:?}", self.name, b.weights)));
                }
                total += b.fraction;
            }
            if (total - 1.0).abs() > BLOCK_FRACTION_TOLERANCE {
                return Err(invalid(format!(
                    "model {}: {side} block fractions sum to {total}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn expand_blocks(blocks: &[WeightBlock], n: usize) -> Result<WeightMatrix> {
    let mut cols = Vec::with_capacity(n);
    for (b, block) in blocks.iter().enumerate() {
        let count = if b + 1 == blocks.len() {
            n - cols.len()
        } else {
            (block.fraction * n as f64).floor() as usize
        };
        if count == 0 {
            return Err(invalid(format!("weight block {b} is empty at n={n}")));
        }
        cols.extend(std::iter::repeat_n(block.weights.clone(), count));
    }
    WeightMatrix::from_columns(&cols)
}

/// `(Omega, Sigma)` for `n` observations: each block covers `floor(fraction * n)`
/// columns, the last block takes the remainder.
pub fn expand_weights(spec: &MixtureSpec, n: usize) -> Result<(WeightMatrix, WeightMatrix)> {
    spec.validate()?;
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    Ok((expand_blocks(&spec.y_blocks, n)?, expand_blocks(&spec.z_blocks, n)?))
}

/// Independent ChaCha stream for replication `stream` under `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a seed so that related simulations use unrelated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed.wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pick_component<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (c, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return c;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

fn draw_observations<R: Rng + ?Sized>(components: &[ComponentDist], w: &WeightMatrix, rng: &mut R) -> Vec<f64> {
    (0..w.n())
        .map(|i| {
            let c = pick_component(w.column(i), rng);
            components[c].quantile(rng.sample(Open01))
        })
        .collect()
}

/// Draws `Y` (all observations) then `Z` from the model with the given weights.
pub fn draw_pair<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    omega: &WeightMatrix,
    sigma: &WeightMatrix,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let y = draw_observations(&spec.components_p, omega, rng);
    let z = draw_observations(&spec.components_q, sigma, rng);
    (y, z)
}

/// One paired sample of size `n`; deterministic in `seed`.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<PairedSample> {
    let (omega, sigma) = expand_weights(spec, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y, z) = draw_pair(spec, &omega, &sigma, &mut rng);
    PairedSample::new(y, z, omega, sigma)
}

/// `T_{j_n}` (Haar) for `reps` independent samples of size `n`; replication `r`
/// uses stream `r` of `seed`, so the output does not depend on scheduling.
pub fn simulate_statistics(spec: &MixtureSpec, n: usize, s: f64, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let (omega, sigma) = expand_weights(spec, n)?;
    let rp = select_level(n, s)?;
    let a = dual_basis(&omega)?;
    let b = dual_basis(&sigma)?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            let (y, z) = draw_pair(spec, &omega, &sigma, &mut rng);
            fast_from_parts(&y, &z, &a, &b, ScalingBasis::Haar, rp.j_n)
        })
        .collect()
}

fn block(fraction: f64, weights: &[f64]) -> WeightBlock {
    WeightBlock::new(fraction, weights)
}

fn gaussian_pair(name: &str, y_blocks: Vec<WeightBlock>, z_blocks: Vec<WeightBlock>, alternative: bool) -> MixtureSpec {
    let p = vec![ComponentDist::normal(-2.0, 1.0), ComponentDist::normal(3.0, 4.0)];
    let q = if alternative {
        vec![ComponentDist::normal(0.0, 1.0), ComponentDist::normal(1.0, 1.0)]
    } else {
        p.clone()
    };
    MixtureSpec {
        name: name.to_string(),
        components_p: p,
        components_q: q,
        y_blocks,
        z_blocks,
    }
}

fn model_blocks(model: u8) -> (Vec<WeightBlock>, Vec<WeightBlock>) {
    match model {
        1 => (
            vec![block(0.8, &[0.6, 0.4]), block(0.2, &[0.4, 0.6])],
            vec![block(0.3, &[0.2, 0.8]), block(0.7, &[0.5, 0.5])],
        ),
        2 => (
            vec![block(0.8, &[0.8, 0.2]), block(0.2, &[0.3, 0.7])],
            vec![block(0.3, &[0.1, 0.9]), block(0.7, &[0.4, 0.6])],
        ),
        _ => (
            vec![block(0.8, &[0.8, 0.2]), block(0.2, &[0.3, 0.7])],
            vec![block(0.3, &[0.9, 0.1]), block(0.7, &[0.3, 0.7])],
        ),
    }
}

/// The named models: `model{1,2,3}_{h0,h1}`, `example_2comp`, `example_3comp`.
pub fn builtin_models() -> Vec<MixtureSpec> {
    let mut out = Vec::new();
    for model in 1..=3u8 {
        let (yb, zb) = model_blocks(model);
        out.push(gaussian_pair(&format!("model{model}_h0"), yb.clone(), zb.clone(), false));
        out.push(gaussian_pair(&format!("model{model}_h1"), yb, zb, true));
    }

    let two = vec![ComponentDist::uniform(-1.0, 0.0), ComponentDist::normal(3.0, 4.0)];
    out.push(MixtureSpec {
        name: "example_2comp".into(),
        components_p: two.clone(),
        components_q: two,
        y_blocks: vec![block(0.5, &[0.8, 0.2]), block(0.5, &[0.3, 0.7])],
        z_blocks: vec![block(0.5, &[0.2, 0.8]), block(0.5, &[0.6, 0.4])],
    });

    let three = vec![
        ComponentDist::normal(-2.0, 1.0),
        ComponentDist::normal(0.0, 1.0),
        ComponentDist::normal(2.0, 1.0),
    ];
    let third = 1.0 / 3.0;
    out.push(MixtureSpec {
        name: "example_3comp".into(),
        components_p: three.clone(),
        components_q: three,
        y_blocks: vec![
            block(third, &[0.7, 0.2, 0.1]),
            block(third, &[0.2, 0.6, 0.2]),
            block(third, &[0.1, 0.2, 0.7]),
        ],
        z_blocks: vec![
            block(0.4, &[0.2, 0.2, 0.6]),
            block(0.3, &[0.5, 0.3, 0.2]),
            block(0.3, &[0.3, 0.5, 0.2]),
        ],
    });
    out
}

pub fn builtin_model(name: &str) -> Option<MixtureSpec> {
    builtin_models().into_iter().find(|m| m.name == name)
}

/// Resolves a model name to a `(null, alternative)` pair. A family name such as
/// `model2` maps to `model2_h0`/`model2_h1`; a null-only model is its own alternative.
pub fn model_family(name: &str) -> Result<(MixtureSpec, MixtureSpec)> {
    let base = name.strip_suffix("_h0").or_else(|| name.strip_suffix("_h1")).unwrap_or(name);
    if let (Some(h0), Some(h1)) = (builtin_model(&format!("{base}_h0")), builtin_model(&format!("{base}_h1"))) {
        return Ok((h0, h1));
    }
    match builtin_model(name) {
        Some(spec) => Ok((spec.null_variant(), spec)),
        None => Err(invalid(format!("unknown model {name:?}"))),
    }
}

/// One row of a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub t_n: f64,
    pub power: f64,
    pub gamma_opt: f64,
    pub t_opt: f64,
    pub type1_rate: f64,
    /// Type-I share of `gamma_opt`.
    pub type1_opt: f64,
    /// Type-II share of `gamma_opt`.
    pub type2_opt: f64,
    pub method: String,
    pub reps: usize,
    pub seed: u64,
    pub wall_time_s: f64,
    pub model: String,
    pub s: f64,
    pub gamma1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudyConfig {
    pub n_list: Vec<usize>,
    pub s: f64,
    pub gamma1: f64,
    pub reps: usize,
    pub seed: u64,
}

/// For each `n`: calibrates `t_n` as the `(1 - gamma1)` quantile of null statistics,
/// estimates power on alternative draws and the type-I rate on fresh null draws,
/// and finds `(t_opt, gamma_opt)` from the calibration and power draws.
pub fn run_power_study(h0: &MixtureSpec, h1: &MixtureSpec, config: &PowerStudyConfig) -> Result<Vec<ExperimentReport>> {
    if config.reps < 100 {
        return Err(invalid(format!("reps must be at least 100, got {}", config.reps)));
    }
    if !(config.gamma1 > 0.0 && config.gamma1 < 1.0) {
        return Err(invalid(format!("gamma1 must lie in (0,1), got {}", config.gamma1)));
    }
    config
        .n_list
        .iter()
        .map(|&n| {
            let start = Instant::now();
            let (omega, sigma) = expand_weights(h1, n)?;
            let k = model_K(&omega, &sigma)?;
            let null = simulate_statistics(h0, n, config.s, config.reps, derive_seed(config.seed, 3 * n as u64))?;
            let alt = simulate_statistics(h1, n, config.s, config.reps, derive_seed(config.seed, 3 * n as u64 + 1))?;
            let fresh = simulate_statistics(h0, n, config.s, config.reps, derive_seed(config.seed, 3 * n as u64 + 2))?;
            let t_n = quantile_linear(&null, 1.0 - config.gamma1);
            let rate = |v: &[f64]| v.iter().filter(|&&t| t > t_n).count() as f64 / v.len() as f64;
            let opt = optimal_sum_from_statistics(&null, &alt)?;
            Ok(ExperimentReport {
                n,
                k,
                t_n,
                power: rate(&alt),
                gamma_opt: opt.gamma_opt,
                t_opt: opt.t_opt,
                type1_rate: rate(&fresh),
                type1_opt: opt.type1,
                type2_opt: opt.type2,
                method: "mc-quantile".into(),
                reps: config.reps,
                seed: config.seed,
                wall_time_s: start.elapsed().as_secs_f64(),
                model: h1.name.clone(),
                s: config.s,
                gamma1: config.gamma1,
            })
        })
        .collect()
}

/// Perturbed component densities
/// `q_l = p_l + 2^{s+1} C sqrt(M L) theta_l sum_k zeta_k 2^{-js - j/2} psi_jk`
/// over disjoint translates inside `[0, 1)`.
#[derive(Debug, Clone)]
pub struct AdversarialAlternative {
    pub p: Vec<ComponentDist>,
    pub basis: ScalingBasis,
    pub j: u32,
    pub s: f64,
    pub c: f64,
    /// Unit eigenvector of `Sigma Sigma^T` for its smallest eigenvalue.
    pub theta: Vec<f64>,
    pub translates: Vec<i64>,
    /// Rademacher signs, one per translate.
    pub zeta: Vec<f64>,
    /// Per-component rejection-sampling envelope constant.
    envelope: Vec<f64>,
}

/// Translates `k` whose intervals `I_jk` are pairwise disjoint and inside `[0, 1)`.
pub fn disjoint_translates(basis: ScalingBasis, j: u32) -> Vec<i64> {
    let l = basis.half_support();
    let scale = (j as f64).exp2();
    let first = l.ceil() as i64;
    let step = (2.0 * l).ceil() as i64;
    (0..)
        .map(|m| first + m * step)
        .take_while(|&k| (k as f64 + l) / scale <= 1.0)
        .collect()
}

/// Builds the perturbation of `p` along the least identifiable direction of `sigma`.
///
/// Requires `C < sqrt(R / (M 2^{2s+2}))`; fails if some `q_l` is negative on a
/// `2^{-(j+6)}` grid over `[0, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_alternative(
    p: &[ComponentDist],
    sigma: &WeightMatrix,
    c: f64,
    s: f64,
    r: f64,
    n: usize,
    basis: ScalingBasis,
    seed: u64,
) -> Result<AdversarialAlternative> {
    let m = p.len();
    if m != sigma.m() {
        return Err(Error::DimensionMismatch(format!(
            "{m} components but sigma has {} rows",
            sigma.m()
        )));
    }
    for d in p {
        d.validate()?;
    }
    if r.is_nan() || r <= 0.0 {
        return Err(invalid(format!("R must be positive, got {r}")));
    }
    let cap = (r / (m as f64 * (2.0 * s + 2.0).exp2())).sqrt();
    if !(c > 0.0 && c < cap) {
        return Err(invalid(format!("C must lie in (0, {cap}), got {c}")));
    }
    let j = select_level(n, s)?.j_n;
    if j > MAX_LEVEL {
        return Err(invalid(format!("level {j} too large")));
    }
    let translates = disjoint_translates(basis, j);
    if translates.is_empty() {
        return Err(invalid(format!("no disjoint translates at level {j}")));
    }
    let theta = smallest_eigenvector(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeta: Vec<f64> = translates
        .iter()
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();

    let mut alt = AdversarialAlternative {
        p: p.to_vec(),
        basis,
        j,
        s,
        c,
        theta,
        translates,
        zeta,
        envelope: vec![1.0; m],
    };

    let step = (-(j as f64 + 6.0)).exp2();
    let cells = 1usize << (j + 6);
    for (l, pl) in p.iter().enumerate() {
        let mut min_p = f64::INFINITY;
        let mut max_pert = 0.0_f64;
        for g in 0..cells {
            let x = g as f64 * step;
            let q = alt.density(l, x);
            if q < 0.0 {
                return Err(invalid(format!(
                    "perturbed density {l} is negative at {x} (level {j}); increase n or decrease C"
                )));
            }
            min_p = min_p.min(pl.pdf(x));
            max_pert = max_pert.max(alt.perturbation(l, x).abs());
        }
        alt.envelope[l] = 1.0 + max_pert / min_p;
    }
    Ok(alt)
}

impl AdversarialAlternative {
    pub fn m(&self) -> usize {
        self.p.len()
    }

    /// `2^{s+1} C sqrt(M L)`.
    pub fn amplitude(&self) -> f64 {
        (self.s + 1.0).exp2() * self.c * (self.m() as f64 * self.basis.half_support()).sqrt()
    }

    /// Wavelet coefficients of `q_l - p_l`.
    pub fn coefficients(&self, l: usize) -> CoefficientArray {
        let jf = self.j as f64;
        let base = self.amplitude() * self.theta[l] * (-jf * self.s - jf / 2.0).exp2();
        self.translates
            .iter()
            .zip(&self.zeta)
            .map(|(&k, &z)| (LevelIndex::new(self.j, k), base * z))
            .collect()
    }

    pub fn perturbation(&self, l: usize, x: f64) -> f64 {
        self.coefficients(l)
            .iter()
            .map(|(idx, beta)| beta * self.basis.eval_psi_jk(idx, x))
            .sum()
    }

    /// `q_l(x)`.
    pub fn density(&self, l: usize, x: f64) -> f64 {
        self.p[l].pdf(x) + self.perturbation(l, x)
    }

    /// `T L M C^2 2^{2 + 2s - 2js - j} theta_l^2`.
    pub fn closed_form_sq_distance(&self, l: usize) -> f64 {
        let jf = self.j as f64;
        self.translates.len() as f64
            * self.basis.half_support()
            * self.m() as f64
            * self.c
            * self.c
            * (2.0 + 2.0 * self.s - 2.0 * jf * self.s - jf).exp2()
            * self.theta[l]
            * self.theta[l]
    }

    /// Draws from `q_l` by rejection from `p_l`.
    pub fn sample_component<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> f64 {
        loop {
            let x = self.p[l].quantile(rng.sample(Open01));
            let ratio = self.density(l, x) / (self.envelope[l] * self.p[l].pdf(x));
            if rng.random::<f64>() < ratio {
                return x;
            }
        }
    }

    /// `Y` from the unperturbed mixture, `Z` from the perturbed one.
    pub fn sample<R: Rng + ?Sized>(&self, omega: &WeightMatrix, sigma: &WeightMatrix, rng: &mut R) -> Result<PairedSample> {
        let y = draw_observations(&self.p, omega, rng);
        let z = (0..sigma.n())
            .map(|i| {
                let c = pick_component(sigma.column(i), rng);
                self.sample_component(c, rng)
            })
            .collect();
        PairedSample::new(y, z, omega.clone(), sigma.clone())
    }
}
