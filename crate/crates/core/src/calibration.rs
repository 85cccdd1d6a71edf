//! Rejection thresholds and the separation constants of the upper and lower bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::{normal_quantile, quantile_linear, sample_variance};
use crate::simulation::{derive_seed, replication_rng, simulate_statistics, MixtureSpec};
use crate::statistic::{select_level, statistic_fast, PairedSample, RateParams};
use crate::wavelet::ScalingBasis;

/// Default lower bound `C1` of the densities on `[0, 1)`; only `lower_constant` uses it.
pub const DEFAULT_C1: f64 = 0.5;

/// Inputs of the explicit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub r: f64,
    pub l: f64,
    pub sup_norm_phi: f64,
    pub m: usize,
    pub k: f64,
    pub gamma: f64,
    pub s: f64,
    pub c1: f64,
}

impl ModelConstants {
    pub fn new(r: f64, basis: ScalingBasis, m: usize, k: f64, gamma: f64, s: f64) -> Result<Self> {
        let c = Self {
            r,
            l: basis.half_support(),
            sup_norm_phi: basis.sup_norm_phi(),
            m,
            k,
            gamma,
            s,
            c1: DEFAULT_C1,
        };
        c.validate(false)?;
        Ok(c)
    }

    fn validate(&self, allow_gamma_one: bool) -> Result<()> {
        let positive = [
            ("R", self.r),
            ("L", self.l),
            ("sup_norm_phi", self.sup_norm_phi),
            ("s", self.s),
            ("C1", self.c1),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
        if self.m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        // K <= 1/M always; K = 1 is the single-component design
        if !(self.k > 0.0 && self.k <= 1.0) {
            return Err(invalid(format!("K must lie in (0,1], got {}", self.k)));
        }
        let gamma_ok = if allow_gamma_one {
            self.gamma > 0.0 && self.gamma <= 1.0
        } else {
            self.gamma > 0.0 && self.gamma < 1.0
        };
        if !gamma_ok {
            return Err(invalid(format!("gamma out of range: {}", self.gamma)));
        }
        Ok(())
    }
}

/// `C_T = max(2 Cbar_T, 4 Ctilde_T)`, the constant of the null variance bound.
#[allow(non_snake_case)]
pub fn appendix_CT(r: f64, l: f64, sup_norm_phi: f64) -> Result<f64> {
    if !(r > 0.0 && l > 0.0 && sup_norm_phi > 0.0) || ![r, l, sup_norm_phi].iter().all(|v| v.is_finite()) {
        return Err(invalid(format!(
            "R, L and sup_norm_phi must be positive, got {r}, {l}, {sup_norm_phi}"
        )));
    }
    let phi = sup_norm_phi;
    let phi2 = phi * phi;
    let k1 = 224.0 * r * l.powi(3) * phi2;
    let k2 = 32.0 * r * l * l * phi2;
    let c_bar = k1 + k2;

    let sr = r.sqrt();
    let c31 = 4.0 * l * l * sr * (2.0 * sr + (2.0 * l).sqrt() * phi);
    let c32 = 48.0 * (2.0 * r * l.powi(5)).sqrt() * phi2;
    let c33 = c32;
    let c34 = 4.0 * l * phi * sr * (4.0 * l * sr + (2.0 * l).powf(1.5) * phi);
    let c_tilde = c31 + c32 + c33 + c34;
    Ok((2.0 * c_bar).max(4.0 * c_tilde))
}

/// `t = (2 sqrt(C_T / gamma) + 8 L R^2) M / K`.
pub fn theoretical_constant(c: &ModelConstants) -> Result<f64> {
    c.validate(false)?;
    let c_t = appendix_CT(c.r, c.l, c.sup_norm_phi)?;
    Ok((2.0 * (c_t / c.gamma).sqrt() + 8.0 * c.l * c.r * c.r) * c.m as f64 / c.k)
}

/// `t_n = t r_n^2`.
pub fn theoretical_threshold(c: &ModelConstants, rp: &RateParams) -> Result<f64> {
    Ok(theoretical_constant(c)? * rp.r_n * rp.r_n)
}

/// `C_gamma = sqrt(2 ((1/K) sqrt(6 C_T / gamma) + R + t / M))`.
pub fn upper_constant(c: &ModelConstants) -> Result<f64> {
    c.validate(false)?;
    let c_t = appendix_CT(c.r, c.l, c.sup_norm_phi)?;
    let t = theoretical_constant(c)?;
    Ok((2.0 * ((6.0 * c_t / c.gamma).sqrt() / c.k + c.r + t / c.m as f64)).sqrt())
}

/// `c_gamma` with `c_gamma^4 = min(C1^2 / (L K^2) ln(4 (1 - gamma)^2 + 1), 2 R^2) 2^{-4s} / (4 M^2)`.
/// Accepts `gamma = 1`, where it vanishes.
pub fn lower_constant(c: &ModelConstants) -> Result<f64> {
    c.validate(true)?;
    let info = c.c1 * c.c1 / (c.l * c.k * c.k) * (4.0 * (1.0 - c.gamma).powi(2) + 1.0).ln();
    let m = c.m as f64;
    let fourth = info.min(2.0 * c.r * c.r) * (-4.0 * c.s).exp2() / (4.0 * m * m);
    Ok(fourth.powf(0.25))
}

/// The `(1 - gamma1)` quantile of `T_{j_n}` over `reps` simulated null samples.
pub fn mc_quantile_threshold(model: &MixtureSpec, n: usize, s: f64, gamma1: f64, reps: usize, seed: u64) -> Result<f64> {
    if !model.is_null() {
        return Err(invalid(format!("model {} is not a null model (p != q)", model.name)));
    }
    if reps < 100 {
        return Err(invalid(format!("reps must be at least 100, got {reps}")));
    }
    if !(gamma1 > 0.0 && gamma1 < 1.0) {
        return Err(invalid(format!("gamma1 must lie in (0,1), got {gamma1}")));
    }
    let stats = simulate_statistics(model, n, s, reps, seed)?;
    Ok(quantile_linear(&stats, 1.0 - gamma1))
}

/// Result of minimizing the empirical sum of both error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSum {
    pub t_opt: f64,
    /// Minimal `type1 + type2`.
    pub gamma_opt: f64,
    pub type1: f64,
    pub type2: f64,
}

/// Sweeps thresholds over the merged sorted statistics (rule: reject iff `T > t`)
/// and returns the smallest threshold minimizing type-I plus type-II error.
pub fn optimal_sum_from_statistics(null: &[f64], alt: &[f64]) -> Result<OptimalSum> {
    if null.is_empty() || alt.is_empty() {
        return Err(invalid("optimal-sum sweep needs statistics under both hypotheses"));
    }
    if null.iter().chain(alt).any(|v| v.is_nan()) {
        return Err(invalid("statistics contain NaN"));
    }
    let mut null = null.to_vec();
    let mut alt = alt.to_vec();
    null.sort_by(f64::total_cmp);
    alt.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = null.iter().chain(&alt).copied().collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();

    let (n0, n1) = (null.len(), alt.len());
    let (mut i0, mut i1) = (0usize, 0usize);
    // error sum scaled by n0 * n1, so ties compare exactly
    let mut best: Option<(usize, OptimalSum)> = None;
    for &t in &merged {
        while i0 < n0 && null[i0] <= t {
            i0 += 1;
        }
        while i1 < n1 && alt[i1] <= t {
            i1 += 1;
        }
        let score = (n0 - i0) * n1 + i1 * n0;
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            let type1 = (n0 - i0) as f64 / n0 as f64;
            let type2 = i1 as f64 / n1 as f64;
            best = Some((
                score,
                OptimalSum {
                    t_opt: t,
                    gamma_opt: type1 + type2,
                    type1,
                    type2,
                },
            ));
        }
    }
    Ok(best.expect("merged is non-empty").1)
}

/// Simulates `reps` statistics under each hypothesis and minimizes the error sum.
pub fn optimal_sum_threshold(
    h0: &MixtureSpec,
    h1: &MixtureSpec,
    n: usize,
    s: f64,
    reps: usize,
    seed: u64,
) -> Result<OptimalSum> {
    if reps < 100 {
        return Err(invalid(format!("reps must be at least 100, got {reps}")));
    }
    let null = simulate_statistics(h0, n, s, reps, derive_seed(seed, 0))?;
    let alt = simulate_statistics(h1, n, s, reps, derive_seed(seed, 1))?;
    optimal_sum_from_statistics(&null, &alt)
}

/// Bootstrap standard deviation of `T_{j_n}` times the `1 - alpha` Gaussian quantile.
///
/// Each resample draws `Y` observations with their weight columns, and independently
/// `Z` observations with theirs, with replacement.
pub fn bootstrap_threshold(sample: &PairedSample, s: f64, alpha: f64, resamples: usize, seed: u64) -> Result<f64> {
    if resamples < 50 {
        return Err(invalid(format!("resamples must be at least 50, got {resamples}")));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(invalid(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    let n = sample.n();
    let j = select_level(n, s)?.j_n;
    let stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            use rand::Rng;
            let mut rng = replication_rng(seed, b as u64);
            let y_idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let z_idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resample = sample.reindexed(&y_idx, &z_idx)?;
            let (a, bb) = resample.dual_bases()?;
            statistic_fast(&resample, &a, &bb, ScalingBasis::Haar, j)
        })
        .collect::<Result<_>>()?;
    Ok(sample_variance(&stats).sqrt() * normal_quantile(1.0 - alpha))
}
