//! Compactly supported scaling functions and wavelets on dyadic grids.
//!
//! Translates follow the half-open convention: `phi_jk(x) = 2^{j/2} phi(2^j x - k)`
//! is supported inside `I_jk = [(k - L) / 2^j, (k + L) / 2^j)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Grid spacing used by [`integrate_midpoint`] callers when checking
/// integrals of Haar-type step functions.
pub const QUADRATURE_STEP: f64 = 1.0 / 65536.0;

/// A compactly supported orthonormal scaling function together with its wavelet.
///
/// Only the Haar system is provided; new families are added as variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingBasis {
    #[default]
    Haar,
}

/// Resolution level `j` and translation `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelIndex {
    pub j: u32,
    pub k: i64,
}

impl LevelIndex {
    pub fn new(j: u32, k: i64) -> Self {
        Self { j, k }
    }
}

/// Half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// True when `self` lies inside `outer`.
    pub fn is_within(&self, outer: &Interval) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi
    }
}

#[inline]
fn scale(j: u32) -> f64 {
    (j as f64).exp2()
}

impl ScalingBasis {
    /// Smallest `L` with `support(phi) ∪ support(psi) ⊂ [-L, L)`.
    pub fn half_support(&self) -> f64 {
        match self {
            ScalingBasis::Haar => 1.0,
        }
    }

    pub fn sup_norm_phi(&self) -> f64 {
        match self {
            ScalingBasis::Haar => 1.0,
        }
    }

    pub fn sup_norm_psi(&self) -> f64 {
        match self {
            ScalingBasis::Haar => 1.0,
        }
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        match self {
            ScalingBasis::Haar => {
                if (0.0..1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        match self {
            ScalingBasis::Haar => {
                if (0.0..0.5).contains(&x) {
                    1.0
                } else if (0.5..1.0).contains(&x) {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `2^{j/2} phi(2^j x - k)`.
    #[inline]
    pub fn eval_phi_jk(&self, idx: LevelIndex, x: f64) -> f64 {
        let s = scale(idx.j);
        s.sqrt() * self.phi(s * x - idx.k as f64)
    }

    /// `2^{j/2} psi(2^j x - k)`.
    #[inline]
    pub fn eval_psi_jk(&self, idx: LevelIndex, x: f64) -> f64 {
        let s = scale(idx.j);
        s.sqrt() * self.psi(s * x - idx.k as f64)
    }

    /// `I_jk = [(k - L) / 2^j, (k + L) / 2^j)`.
    pub fn support_interval(&self, idx: LevelIndex) -> Interval {
        let s = scale(idx.j);
        let l = self.half_support();
        Interval {
            lo: (idx.k as f64 - l) / s,
            hi: (idx.k as f64 + l) / s,
        }
    }

    /// Calls `f(k, phi_jk(x))` for every translate with a nonzero value at `x`,
    /// in increasing `k`.
    #[inline]
    pub fn for_each_active<F: FnMut(i64, f64)>(&self, j: u32, x: f64, mut f: F) {
        let s = scale(j);
        let t = s * x;
        if !t.is_finite() {
            return;
        }
        match self {
            ScalingBasis::Haar => f(t.floor() as i64, s.sqrt()),
        }
    }

    /// All `k` with `phi_jk(x) != 0`.
    pub fn active_translates(&self, j: u32, x: f64) -> Vec<i64> {
        let mut out = Vec::with_capacity(2);
        self.for_each_active(j, x, |k, _| out.push(k));
        out
    }

    /// Number of `k'` whose interval `I_jk'` meets `I_jk` (including `k` itself).
    pub fn overlap_count(&self, j: u32, k: i64) -> usize {
        let l = self.half_support();
        let reach = (2.0 * l).ceil() as i64;
        let own = self.support_interval(LevelIndex::new(j, k));
        (k - reach..=k + reach)
            .filter(|&kp| own.intersects(&self.support_interval(LevelIndex::new(j, kp))))
            .count()
    }
}

/// Finitely supported wavelet coefficients `beta_{jk}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientArray {
    coeffs: BTreeMap<LevelIndex, f64>,
}

impl CoefficientArray {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, idx: LevelIndex, value: f64) {
        if value == 0.0 {
            self.coeffs.remove(&idx);
        } else {
            self.coeffs.insert(idx, value);
        }
    }

    pub fn get(&self, idx: LevelIndex) -> f64 {
        self.coeffs.get(&idx).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LevelIndex, f64)> + '_ {
        self.coeffs.iter().map(|(i, v)| (*i, *v))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self::new();
        for (idx, v) in self.iter() {
            out.insert(idx, v * factor);
        }
        out
    }

    /// `sup_j 2^{2js} sum_{j' >= j} sum_k beta_{j'k}^2`, with the sup taken over
    /// level 0 and every level present in the array.
    pub fn besov_tail_seminorm(&self, s: f64) -> f64 {
        let mut per_level: BTreeMap<u32, f64> = BTreeMap::new();
        per_level.insert(0, 0.0);
        for (idx, v) in self.iter() {
            *per_level.entry(idx.j).or_insert(0.0) += v * v;
        }
        let mut tail = 0.0;
        let mut best = 0.0_f64;
        for (&j, &energy) in per_level.iter().rev() {
            tail += energy;
            best = best.max((2.0 * j as f64 * s).exp2() * tail);
        }
        best
    }
}

impl FromIterator<(LevelIndex, f64)> for CoefficientArray {
    fn from_iter<I: IntoIterator<Item = (LevelIndex, f64)>>(iter: I) -> Self {
        let mut out = Self::new();
        for (idx, v) in iter {
            out.insert(idx, v);
        }
        out
    }
}

/// Composite midpoint rule on `[lo, hi)` with cells of width at most `step`.
pub fn integrate_midpoint<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, step: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let cells = ((hi - lo) / step).ceil().max(1.0) as usize;
    let h = (hi - lo) / cells as f64;
    let mut acc = crate::numeric::NeumaierSum::new();
    for c in 0..cells {
        acc += f(lo + (c as f64 + 0.5) * h);
    }
    acc.value() * h
}
