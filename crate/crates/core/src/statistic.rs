//! The U-statistic `T_j`, the level/rate choice and the decision rule.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::calibration::{self, ModelConstants};
use crate::error::{invalid, Error, Result};
use crate::numeric::NeumaierSum;
use crate::simulation::MixtureSpec;
use crate::wavelet::{LevelIndex, ScalingBasis};
use crate::weights::{dual_basis, model_K, DualBasis, WeightMatrix};

/// Levels above this are refused rather than allocating per-translate state.
pub const MAX_LEVEL: u32 = 20;

/// Default radius of the `L2`/`L_inf` ball the densities are assumed to lie in.
pub const DEFAULT_R: f64 = 2.0;

/// Observations `Y_1..Y_n`, `Z_1..Z_n` and their weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    y: Vec<f64>,
    z: Vec<f64>,
    omega: WeightMatrix,
    sigma: WeightMatrix,
}

impl PairedSample {
    pub fn new(y: Vec<f64>, z: Vec<f64>, omega: WeightMatrix, sigma: WeightMatrix) -> Result<Self> {
        let n = y.len();
        if z.len() != n || omega.n() != n || sigma.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "len(y)={n}, len(z)={}, omega has {} columns, sigma has {}",
                z.len(),
                omega.n(),
                sigma.n()
            )));
        }
        if omega.m() != sigma.m() {
            return Err(Error::DimensionMismatch(format!(
                "omega has {} components, sigma has {}",
                omega.m(),
                sigma.m()
            )));
        }
        if let Some(bad) = y.iter().chain(&z).find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite observation {bad}")));
        }
        Ok(Self { y, z, omega, sigma })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.omega.m()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn omega(&self) -> &WeightMatrix {
        &self.omega
    }

    pub fn sigma(&self) -> &WeightMatrix {
        &self.sigma
    }

    /// The sample with the roles of `Y` and `Z` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            y: self.z.clone(),
            z: self.y.clone(),
            omega: self.sigma.clone(),
            sigma: self.omega.clone(),
        }
    }

    /// Observation `c` of the result is observation `y_idx[c]` of `Y` (with its
    /// weight column) and `z_idx[c]` of `Z`.
    pub fn reindexed(&self, y_idx: &[usize], z_idx: &[usize]) -> Result<Self> {
        if y_idx.len() != z_idx.len() {
            return Err(Error::DimensionMismatch("index lists differ in length".into()));
        }
        Self::new(
            y_idx.iter().map(|&i| self.y[i]).collect(),
            z_idx.iter().map(|&i| self.z[i]).collect(),
            self.omega.select_columns(y_idx),
            self.sigma.select_columns(z_idx),
        )
    }

    pub fn dual_bases(&self) -> Result<(DualBasis, DualBasis)> {
        Ok((dual_basis(&self.omega)?, dual_basis(&self.sigma)?))
    }
}

/// Level `j_n` and separation rate `r_n` for sample size `n` and smoothness `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub s: f64,
    pub n: usize,
    pub j_n: u32,
    pub r_n: f64,
}

/// Smallest `j` with `2^{-j} <= n^{-2/(1+4s)}`, and `r_n = n^{-2s/(1+4s)}`.
pub fn select_level(n: usize, s: f64) -> Result<RateParams> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("smoothness s must be positive, got {s}")));
    }
    if n < 2 {
        return Err(invalid(format!("sample size must be at least 2, got {n}")));
    }
    let x = 2.0 / (1.0 + 4.0 * s) * (n as f64).log2();
    // absorb rounding when x is an exact integer
    let j = (x - 1e-12 * x.max(1.0)).ceil().max(0.0);
    if j > MAX_LEVEL as f64 {
        return Err(invalid(format!(
            "level {j} exceeds the maximum {MAX_LEVEL} (n={n}, s={s})"
        )));
    }
    Ok(RateParams {
        s,
        n,
        j_n: j as u32,
        r_n: (n as f64).powf(-2.0 * s / (1.0 + 4.0 * s)),
    })
}

fn check_duals(sample: &PairedSample, a: &DualBasis, b: &DualBasis) -> Result<()> {
    let (m, n) = (sample.m(), sample.n());
    for (name, d) in [("a", a), ("b", b)] {
        if d.m() != m || d.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "dual basis {name} is {}x{}, sample is {m}x{n}",
                d.m(),
                d.n()
            )));
        }
    }
    Ok(())
}

/// `T_j` by the literal double sum over ordered pairs `i1 != i2`. Quadratic in `n`.
pub fn statistic_naive(
    sample: &PairedSample,
    a: &DualBasis,
    b: &DualBasis,
    basis: ScalingBasis,
    j: u32,
) -> Result<f64> {
    check_duals(sample, a, b)?;
    let n = sample.n();
    let m = sample.m();
    let scale = (j as f64).exp2();
    let reach = (2.0 * basis.half_support()).ceil() as i64;
    let (lo, hi) = sample
        .y()
        .iter()
        .chain(sample.z())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let k_lo = (scale * lo).floor() as i64 - reach;
    let k_hi = (scale * hi).floor() as i64 + reach;

    let mut total = NeumaierSum::new();
    let mut u = vec![0.0; n];
    for k in k_lo..=k_hi {
        let idx = LevelIndex::new(j, k);
        for l in 0..m {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = a.column(i)[l] * basis.eval_phi_jk(idx, sample.y()[i])
                    - b.column(i)[l] * basis.eval_phi_jk(idx, sample.z()[i]);
            }
            if u.iter().all(|&x| x == 0.0) {
                continue;
            }
            for i1 in 0..n {
                for i2 in 0..n {
                    if i1 != i2 {
                        total += u[i1] * u[i2];
                    }
                }
            }
        }
    }
    Ok(total.value() / (n as f64 * n as f64))
}

/// `T_j` via `sum_{i1 != i2} u_{i1} u_{i2} = (sum u_i)^2 - sum u_i^2`, visiting only
/// the translates active at each observation.
pub fn statistic_fast(
    sample: &PairedSample,
    a: &DualBasis,
    b: &DualBasis,
    basis: ScalingBasis,
    j: u32,
) -> Result<f64> {
    check_duals(sample, a, b)?;
    fast_from_parts(sample.y(), sample.z(), a, b, basis, j)
}

/// [`statistic_fast`] on raw observation slices; dimensions must already agree.
pub(crate) fn fast_from_parts(
    y: &[f64],
    z: &[f64],
    a: &DualBasis,
    b: &DualBasis,
    basis: ScalingBasis,
    j: u32,
) -> Result<f64> {
    if j > MAX_LEVEL {
        return Err(invalid(format!("level {j} exceeds the maximum {MAX_LEVEL}")));
    }
    let n = y.len();
    let m = a.m();

    // slot -> M pairs of (S, Q) accumulators, laid out contiguously
    let mut slot_of: HashMap<i64, usize> = HashMap::new();
    let mut acc: Vec<(NeumaierSum, NeumaierSum)> = Vec::new();
    let mut active: Vec<(i64, f64, f64)> = Vec::with_capacity(4);

    for i in 0..n {
        active.clear();
        basis.for_each_active(j, y[i], |k, v| active.push((k, v, 0.0)));
        basis.for_each_active(j, z[i], |k, v| match active.iter_mut().find(|e| e.0 == k) {
            Some(e) => e.2 = v,
            None => active.push((k, 0.0, v)),
        });
        let (ai, bi) = (a.column(i), b.column(i));
        for &(k, vy, vz) in &active {
            let slot = *slot_of.entry(k).or_insert_with(|| {
                acc.extend(std::iter::repeat_n((NeumaierSum::new(), NeumaierSum::new()), m));
                acc.len() / m - 1
            });
            for l in 0..m {
                let u = ai[l] * vy - bi[l] * vz;
                let cell = &mut acc[slot * m + l];
                cell.0 += u;
                cell.1 += u * u;
            }
        }
    }

    let total: NeumaierSum = acc
        .iter()
        .map(|(s, q)| {
            let s = s.value();
            s * s - q.value()
        })
        .collect();
    Ok(total.value() / (n as f64 * n as f64))
}

/// How the rejection threshold is obtained.
#[derive(Debug, Clone)]
pub enum ThresholdMethod {
    /// `t r_n^2` with the explicit constant; conservative.
    Theoretical { gamma: f64 },
    /// `(1 - gamma1)` quantile of `T_{j_n}` simulated under a null model.
    McQuantile {
        model: MixtureSpec,
        gamma1: f64,
        reps: usize,
        seed: u64,
    },
    /// Threshold minimizing the simulated sum of both error rates.
    OptimalSum {
        h0: MixtureSpec,
        h1: MixtureSpec,
        reps: usize,
        seed: u64,
    },
    /// Bootstrap standard deviation times the `1 - alpha` Gaussian quantile.
    Bootstrap { alpha: f64, resamples: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct ThresholdSpec {
    pub method: ThresholdMethod,
    /// Set once resolved; a preset value is used as is.
    pub value: Option<f64>,
}

impl ThresholdSpec {
    pub fn new(method: ThresholdMethod) -> Self {
        Self { method, value: None }
    }

    pub fn fixed(method: ThresholdMethod, value: f64) -> Self {
        Self {
            method,
            value: Some(value),
        }
    }
}

/// Parameters of a single test run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub s: f64,
    /// Radius `R` of the `L2`/`L_inf` ball.
    pub r: f64,
    pub basis: ScalingBasis,
}

impl TestConfig {
    pub fn new(s: f64) -> Self {
        Self {
            s,
            r: DEFAULT_R,
            basis: ScalingBasis::Haar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `8 L M R^2 / (K n)`.
    pub bias_bound: f64,
    /// `C_T M^2 2^j / (K^2 n^2)`.
    pub null_variance_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestOutcome {
    pub t_j: f64,
    pub j_used: u32,
    pub threshold: f64,
    pub reject: bool,
    pub k: f64,
    pub diagnostics: Diagnostics,
}

/// Resolves the threshold, evaluates `T_{j_n}` and applies `reject <=> T > threshold`.
pub fn run_test(sample: &PairedSample, config: &TestConfig, threshold: &mut ThresholdSpec) -> Result<TestOutcome> {
    let k = model_K(sample.omega(), sample.sigma())?;
    let rp = select_level(sample.n(), config.s)?;
    let (a, b) = sample.dual_bases()?;
    let t_j = statistic_fast(sample, &a, &b, config.basis, rp.j_n)?;

    let value = match threshold.value {
        Some(v) => v,
        None => resolve_threshold(sample, config, &threshold.method, k, &rp)?,
    };
    if !value.is_finite() {
        return Err(Error::NumericalFailure(format!("threshold is {value}")));
    }
    threshold.value = Some(value);

    let l = config.basis.half_support();
    let m = sample.m() as f64;
    let n = sample.n() as f64;
    let c_t = calibration::appendix_CT(config.r, l, config.basis.sup_norm_phi())?;
    Ok(TestOutcome {
        t_j,
        j_used: rp.j_n,
        threshold: value,
        reject: t_j > value,
        k,
        diagnostics: Diagnostics {
            bias_bound: 8.0 * l * m * config.r * config.r / (k * n),
            null_variance_bound: c_t * m * m * (rp.j_n as f64).exp2() / (k * k * n * n),
        },
    })
}

fn resolve_threshold(
    sample: &PairedSample,
    config: &TestConfig,
    method: &ThresholdMethod,
    k: f64,
    rp: &RateParams,
) -> Result<f64> {
    match method {
        ThresholdMethod::Theoretical { gamma } => {
            let c = ModelConstants::new(config.r, config.basis, sample.m(), k, *gamma, config.s)?;
            calibration::theoretical_threshold(&c, rp)
        }
        ThresholdMethod::McQuantile {
            model,
            gamma1,
            reps,
            seed,
        } => calibration::mc_quantile_threshold(model, sample.n(), config.s, *gamma1, *reps, *seed),
        ThresholdMethod::OptimalSum { h0, h1, reps, seed } => {
            calibration::optimal_sum_threshold(h0, h1, sample.n(), config.s, *reps, *seed).map(|o| o.t_opt)
        }
        ThresholdMethod::Bootstrap {
            alpha,
            resamples,
            seed,
        } => calibration::bootstrap_threshold(sample, config.s, *alpha, *resamples, *seed),
    }
}
