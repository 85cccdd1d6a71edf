//! Known mixing-weight matrices, their Gram spectra and the dual vectors
//! `a_l` with `(1/n) sum_i omega_k(i) a_l(i) = delta_kl`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Column-sum tolerance applied by [`WeightMatrix::new`].
pub const DEFAULT_COLUMN_TOLERANCE: f64 = 1e-12;

/// `lambda_min / n` at or below this value is treated as a singular design.
pub const RANK_DEFICIENT_K: f64 = 1e-12;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// An `M x n` matrix of mixing weights: row `u` is a component, column `i`
/// an observation. Every column is a probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(entries, DEFAULT_COLUMN_TOLERANCE, false)
    }

    /// Validates with a custom column-sum tolerance. With `renormalize`, columns
    /// are rescaled to sum to one instead of being checked.
    pub fn with_tolerance(mut entries: DMatrix<f64>, tolerance: f64, renormalize: bool) -> Result<Self> {
        let (m, n) = entries.shape();
        if m == 0 || n == 0 {
            return Err(Error::Weight(format!("weight matrix must be non-empty, got {m}x{n}")));
        }
        for i in 0..n {
            let mut col = entries.column_mut(i);
            if let Some(bad) = col.iter().find(|w| !w.is_finite() || **w < 0.0) {
                return Err(Error::Weight(format!("column {i} has invalid weight {bad}")));
            }
            let sum: f64 = col.iter().sum();
            if renormalize {
                if sum <= 0.0 {
                    return Err(Error::Weight(format!("column {i} sums to zero")));
                }
                col /= sum;
            } else if (sum - 1.0).abs() > tolerance {
                return Err(Error::Weight(format!(
                    "column {i} sums to {sum}, expected 1 within {tolerance:e}"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Builds from per-observation weight vectors (each of length `M`).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        Self::from_columns_with_tolerance(columns, DEFAULT_COLUMN_TOLERANCE, false)
    }

    pub fn from_columns_with_tolerance(columns: &[Vec<f64>], tolerance: f64, renormalize: bool) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "column {i} has {} weights, expected {m}",
                c.len()
            )));
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::with_tolerance(DMatrix::from_vec(m, columns.len(), flat), tolerance, renormalize)
    }

    /// Number of components `M`.
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of observations `n`.
    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Weights of observation `i`.
    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.entries.as_slice()[i * m..(i + 1) * m]
    }

    /// New matrix whose column `c` is column `indices[c]` of `self`.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        Self {
            entries: self.entries.select_columns(indices),
        }
    }

    /// `Gamma_n = Omega Omega^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.entries * self.entries.transpose()
    }
}

/// Eigen-decomposition summary of `Omega Omega^T`.
#[derive(Debug, Clone)]
pub struct GramSpectrum {
    pub gram: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    /// `lambda_min / n`.
    pub k_single: f64,
}

pub fn gram_spectrum(w: &WeightMatrix) -> Result<GramSpectrum> {
    let gram = w.gram();
    let eig = SymmetricEigen::try_new(gram.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let lambda_min = eigenvalues[0];
    Ok(GramSpectrum {
        gram,
        k_single: lambda_min / w.n() as f64,
        eigenvalues,
        lambda_min,
    })
}

/// Unit eigenvector of `Omega Omega^T` for its smallest eigenvalue, signed so
/// that the first nonzero coordinate is positive.
pub fn smallest_eigenvector(w: &WeightMatrix) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(w.gram(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let idx = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let mut theta: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    theta.iter_mut().for_each(|x| *x /= norm);
    if let Some(first) = theta.iter().find(|x| x.abs() > 1e-14) {
        if *first < 0.0 {
            theta.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(theta)
}

/// The conditioning constant `K = min(lambda_min(Omega Omega^T), lambda_min(Sigma Sigma^T)) / n`.
#[allow(non_snake_case)]
pub fn model_K(omega: &WeightMatrix, sigma: &WeightMatrix) -> Result<f64> {
    if omega.m() != sigma.m() || omega.n() != sigma.n() {
        return Err(Error::DimensionMismatch(format!(
            "weight matrices are {}x{} and {}x{}",
            omega.m(),
            omega.n(),
            sigma.m(),
            sigma.n()
        )));
    }
    let k = gram_spectrum(omega)?.k_single.min(gram_spectrum(sigma)?.k_single);
    if k <= RANK_DEFICIENT_K {
        return Err(Error::RankDeficient { k });
    }
    Ok(k)
}

/// Dual vectors `a_l` stacked as an `M x n` matrix (row `l` is `a_l`).
#[derive(Debug, Clone)]
pub struct DualBasis {
    vectors: DMatrix<f64>,
    k_single: f64,
}

impl DualBasis {
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `lambda_min / n` of the generating weight matrix.
    pub fn k_single(&self) -> f64 {
        self.k_single
    }

    pub fn m(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn n(&self) -> usize {
        self.vectors.ncols()
    }

    /// `(a_1(i), ..., a_M(i))`.
    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.vectors.as_slice()[i * m..(i + 1) * m]
    }

    /// `sum_l <a_l, a_l>_n`.
    pub fn norm_sum(&self) -> f64 {
        self.vectors.iter().map(|x| x * x).sum::<f64>() / self.n() as f64
    }
}

/// Solves `Gamma_n A = n Omega` by Cholesky.
pub fn dual_basis(w: &WeightMatrix) -> Result<DualBasis> {
    let spectrum = gram_spectrum(w)?;
    if spectrum.k_single <= RANK_DEFICIENT_K {
        return Err(Error::RankDeficient { k: spectrum.k_single });
    }
    let chol = spectrum.gram.cholesky().ok_or(Error::RankDeficient {
        k: spectrum.k_single,
    })?;
    let vectors = chol.solve(w.entries()) * w.n() as f64;
    Ok(DualBasis {
        vectors,
        k_single: spectrum.k_single,
    })
}
