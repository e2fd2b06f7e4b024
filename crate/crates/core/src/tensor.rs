//! Dense order-k tensors over R^d, stored row-major.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HodseError, Result};

/// Entries allowed in one dense tensor.
pub const DENSE_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

/// `dim^order`, or `None` on overflow.
pub fn checked_len(dim: usize, order: usize) -> Option<usize> {
    let mut len: usize = 1;
    for _ in 0..order {
        len = len.checked_mul(dim)?;
    }
    Some(len)
}

impl DenseTensor {
    pub fn zeros(dim: usize, order: usize) -> Result<Self> {
        let len = checked_len(dim, order)
            .filter(|&l| l <= DENSE_BUDGET)
            .ok_or_else(|| {
                HodseError::capacity(format!(
                    "dense tensor of order {order} over R^{dim} exceeds {DENSE_BUDGET} entries; \
                     use a separable functional instead"
                ))
            })?;
        Ok(DenseTensor {
            dim,
            order,
            data: vec![0.0; len],
        })
    }

    pub fn scalar(value: f64) -> Self {
        DenseTensor {
            dim: 1,
            order: 0,
            data: vec![value],
        }
    }

    pub fn from_vec(dim: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        if checked_len(dim, order) != Some(data.len()) {
            return Err(HodseError::input(format!(
                "tensor data length {} does not match {dim}^{order}",
                data.len()
            )));
        }
        Ok(DenseTensor { dim, order, data })
    }

    /// Tensor whose entry at each multi-index is `f(index)`.
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(dim: usize, order: usize, mut f: F) -> Result<Self> {
        let mut t = Self::zeros(dim, order)?;
        let mut idx = vec![0usize; order];
        for flat in 0..t.data.len() {
            t.unflatten_into(flat, &mut idx);
            t.data[flat] = f(&idx);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn unflatten_into(&self, mut flat: usize, idx: &mut [usize]) {
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let f = self.flat_index(idx);
        self.data[f] = value;
    }

    fn check_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.dim != other.dim || self.order != other.order {
            return Err(HodseError::input(format!(
                "tensor shape mismatch: order {} over R^{} vs order {} over R^{}",
                self.order, self.dim, other.order, other.dim
            )));
        }
        Ok(())
    }

    /// Full inner product over all `dim^order` entries.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Entries `(a, ..., a)`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| {
                let idx = vec![a; self.order];
                self.get(&idx)
            })
            .collect()
    }

    /// Mode-`mode` product with a square matrix: contracts slot `mode`
    /// with the matrix columns, `(T x_mode M)[.., i, ..] = sum_j T[.., j, ..] M[i, j]`.
    pub fn mode_product(&self, matrix: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
        if matrix.nrows() != self.dim || matrix.ncols() != self.dim {
            return Err(HodseError::input("mode product matrix must be dim x dim"));
        }
        if mode >= self.order {
            return Err(HodseError::input(format!("mode {mode} out of range")));
        }
        let stride = self.dim.pow((self.order - 1 - mode) as u32);
        let block = stride * self.dim;
        let mut out = vec![0.0; self.data.len()];
        for base in (0..self.data.len()).step_by(block) {
            for inner in 0..stride {
                for i in 0..self.dim {
                    let mut acc = 0.0;
                    for j in 0..self.dim {
                        acc += self.data[base + j * stride + inner] * matrix[(i, j)];
                    }
                    out[base + i * stride + inner] = acc;
                }
            }
        }
        Ok(DenseTensor {
            dim: self.dim,
            order: self.order,
            data: out,
        })
    }

    /// `T x_1 M x_2 M ... x_k M`.
    pub fn all_mode_product(&self, matrix: &DMatrix<f64>) -> Result<DenseTensor> {
        let mut t = self.clone();
        for mode in 0..self.order {
            t = t.mode_product(matrix, mode)?;
        }
        Ok(t)
    }

    /// Multilinear form `T(v_1, ..., v_k)`.
    pub fn contract_vectors(&self, vectors: &[&[f64]]) -> Result<f64> {
        if vectors.len() != self.order || vectors.iter().any(|v| v.len() != self.dim) {
            return Err(HodseError::input("contract_vectors: shape mismatch"));
        }
        let mut cur = self.data.clone();
        for v in vectors.iter().rev() {
            cur = cur
                .chunks(self.dim)
                .map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect();
        }
        Ok(cur[0])
    }

    /// Contraction of the last `order - 1` slots with `x`: the vector `T(., x, ..., x)`.
    pub fn contract_all_but_one(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = self.data.clone();
        for _ in 1..self.order {
            cur = cur
                .chunks(self.dim)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect();
        }
        cur
    }

    /// Max deviation between an entry and its transposed counterparts.
    pub fn symmetry_defect(&self) -> f64 {
        let mut idx = vec![0usize; self.order];
        let mut sorted = vec![0usize; self.order];
        let mut worst = 0.0_f64;
        for flat in 0..self.data.len() {
            self.unflatten_into(flat, &mut idx);
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            let canon = self.get(&sorted);
            worst = worst.max((self.data[flat] - canon).abs());
        }
        worst
    }

    /// Spectral norm `max_{|x|=1} |T(x, ..., x)|` of a symmetric tensor by
    /// shifted symmetric power iteration from `restarts` random starts.
    /// A lower estimate: the iteration may stop at a local maximum.
    pub fn spectral_norm_estimate<R: Rng>(&self, restarts: usize, rng: &mut R) -> f64 {
        if self.order == 0 {
            return self.data[0].abs();
        }
        if self.order == 1 {
            return self.hs_norm();
        }
        let shift = self.hs_norm() * (self.order as f64 - 1.0);
        let mut best = 0.0_f64;
        for sign in [1.0, -1.0] {
            for _ in 0..restarts {
                let mut x: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                normalize(&mut x);
                let mut last = f64::NAN;
                for _ in 0..2000 {
                    let g = self.contract_all_but_one(&x);
                    let mut next: Vec<f64> =
                        g.iter().zip(&x).map(|(gi, xi)| sign * gi + shift * xi).collect();
                    if normalize(&mut next) == 0.0 {
                        break;
                    }
                    x = next;
                    let val = form(self, &x);
                    if (val - last).abs() <= 1e-15 * val.abs().max(1e-300) {
                        break;
                    }
                    last = val;
                }
                best = best.max(form(self, &x).abs());
            }
        }
        best
    }
}

fn form(t: &DenseTensor, x: &[f64]) -> f64 {
    t.contract_all_but_one(x).iter().zip(x).map(|(a, b)| a * b).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn mode_product_matches_matrix_sandwich() {
        // order 2: T x_1 A x_2 A = A T A^T
        let t = DenseTensor::from_vec(2, 2, vec![1.0, 2.0, 2.0, 5.0]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -1.0, 2.0]);
        let got = t.all_mode_product(&a).unwrap();
        let tm = DMatrix::from_row_slice(2, 2, t.data());
        let want = &a * tm * a.transpose();
        for i in 0..2 {
            for j in 0..2 {
                assert!((got.get(&[i, j]) - want[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_vectors_of_outer_product() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 1.0, 2.0];
        let w = [2.0, 0.0, -1.0];
        let t = DenseTensor::from_fn(3, 3, |i| u[i[0]] * v[i[1]] * w[i[2]]).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let got = t.contract_vectors(&[&w, &u, &v]).unwrap();
        let want = dot(&u, &w) * dot(&v, &u) * dot(&w, &v);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let err = DenseTensor::zeros(100, 4).unwrap_err();
        assert!(matches!(err, HodseError::Capacity(_)));
    }

    #[test]
    fn spectral_norm_of_matrix_is_largest_eigenvalue() {
        let t = DenseTensor::from_vec(2, 2, vec![2.0, 1.0, 1.0, -3.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let got = t.spectral_norm_estimate(5, &mut rng);
        let want = (0.5_f64 + (6.25_f64 + 1.0).sqrt()).abs().max((-0.5 - 7.25_f64.sqrt()).abs());
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}
