//! Noise covariance, effective rank and the variance quantities `V_k`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{HodseError, Result};

/// Per-observation noise covariance `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    Full(DMatrix<f64>),
    Diagonal(Vec<f64>),
}

impl CovarianceModel {
    pub fn full(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(HodseError::input("covariance must be a non-empty square matrix"));
        }
        let scale = matrix.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if (&matrix - matrix.transpose()).iter().any(|v| v.abs() > 1e-12 * scale.max(1.0)) {
            return Err(HodseError::input("covariance is not symmetric"));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * top) {
            return Err(HodseError::input("covariance is not positive semidefinite"));
        }
        Ok(CovarianceModel::Full(matrix))
    }

    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HodseError::input("covariance must be non-empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(HodseError::input("diagonal covariance entries must be finite and >= 0"));
        }
        Ok(CovarianceModel::Diagonal(values))
    }

    pub fn isotropic(d: usize, variance: f64) -> Result<Self> {
        Self::diagonal(vec![variance; d])
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceModel::Full(m) => m.nrows(),
            CovarianceModel::Diagonal(v) => v.len(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            CovarianceModel::Full(m) => m.clone(),
            CovarianceModel::Diagonal(v) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v)),
        }
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        match self {
            CovarianceModel::Full(m) => m[(a, b)],
            CovarianceModel::Diagonal(v) => {
                if a == b {
                    v[a]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            CovarianceModel::Full(m) => CovarianceModel::Full(m * lambda),
            CovarianceModel::Diagonal(v) => CovarianceModel::Diagonal(v.iter().map(|x| x * lambda).collect()),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|a| self.entry(a, a)).sum()
    }

    /// Largest eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        match self {
            CovarianceModel::Full(m) => SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .fold(0.0_f64, |a, &b| a.max(b)),
            CovarianceModel::Diagonal(v) => v.iter().fold(0.0_f64, |a, &b| a.max(b)),
        }
    }
}

/// `(σ, r)` with `σ² = ‖Σ‖_S` and `r = trace(Σ)/σ²`.
pub fn effective_rank(cov: &CovarianceModel) -> Result<(f64, f64)> {
    let s2 = cov.spectral_norm();
    if s2 <= 0.0 {
        return Err(HodseError::contract("effective rank is undefined for a zero covariance"));
    }
    Ok((s2.sqrt(), cov.trace() / s2))
}

/// `C_{k,n} k! V_k / n^k`, the variance of `⟨f^{(k)}(θ), ε̄^{(k)}⟩` for i.i.d. noise.
pub fn predicted_var_s_k(n: usize, k: usize, v_k: f64) -> Result<f64> {
    let c = crate::ustat::counting_constant(n, k)?;
    Ok(c.c_kn * crate::numeric::factorial(k) * v_k / (n as f64).powi(k as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    /// `V_1..V_m`
    pub v_k: Vec<f64>,
    pub predicted_var_s_k: Vec<f64>,
    /// `‖f^{(k)}‖_S² σ^{2k} r^{k-1}` with an estimated spectral norm
    pub v_k_bound: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_rank_examples() {
        let (s, r) = effective_rank(&CovarianceModel::isotropic(5, 1.0).unwrap()).unwrap();
        assert_eq!((s, r), (1.0, 5.0));
        let (s, r) = effective_rank(&CovarianceModel::diagonal(vec![1.0, 0.5]).unwrap()).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && (r - 1.5).abs() < 1e-15);
        let full = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (s, r) = effective_rank(&CovarianceModel::full(full).unwrap()).unwrap();
        assert!((s * s - 3.0).abs() < 1e-12 && (r - 4.0 / 3.0).abs() < 1e-12);
        assert!(effective_rank(&CovarianceModel::isotropic(3, 0.0).unwrap()).is_err());
    }

    #[test]
    fn rejects_invalid_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(CovarianceModel::full(asym).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CovarianceModel::full(indef).is_err());
        assert!(CovarianceModel::diagonal(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn predicted_variance_examples() {
        assert!((predicted_var_s_k(10, 1, 2.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((predicted_var_s_k(4, 2, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }
}
