//! Small numeric helpers shared across modules.

use statrs::function::factorial::ln_factorial;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// log(n (n-1) ... (n-k+1)).
pub fn ln_falling_factorial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n as u64) - ln_factorial((n - k) as u64)
}

pub fn factorial(k: usize) -> f64 {
    statrs::function::factorial::factorial(k as u64)
}

/// (2k-1)!! with (-1)!! = 1.
pub fn double_factorial_odd(k: usize) -> f64 {
    (1..=k).map(|i| (2 * i - 1) as f64).product()
}

/// Largest absolute entry, or 0 for an empty slice.
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Real polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly1 { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly1 {
        if self.coeffs.len() <= 1 {
            return Poly1::new(vec![0.0]);
        }
        Poly1::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Poly1 {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn mul(&self, other: &Poly1) -> Poly1 {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1::new(out)
    }

    /// Multiply by `x^j`.
    pub fn shift(&self, j: usize) -> Poly1 {
        let mut out = vec![0.0; j];
        out.extend_from_slice(&self.coeffs);
        Poly1::new(out)
    }

    /// Exact integral over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let e = (i + 1) as i32;
                c * (b.powi(e) - a.powi(e)) / e as f64
            })
            .sum()
    }

    /// Is every odd coefficient zero?
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_calculus() {
        // (1 - x^2)^3
        let p = Poly1::new(vec![1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0]);
        assert!((p.integrate(-1.0, 1.0) - 32.0 / 35.0).abs() < 1e-15);
        assert!(p.is_even());
        let d2 = p.nth_derivative(2);
        assert!(d2.eval(1.0).abs() < 1e-15 && d2.eval(-1.0).abs() < 1e-15);
        assert_eq!(p.mul(&Poly1::new(vec![0.0, 1.0])).coeffs(), p.shift(1).coeffs());
        assert_eq!(p.nth_derivative(7).coeffs(), &[0.0]);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0e16, 1.0, -1.0e16];
        v.extend(std::iter::repeat(1.0e-3).take(1000));
        let naive: f64 = v.iter().sum();
        let comp = compensated_sum(v.iter().copied());
        assert!((comp - 2.0).abs() < 1e-12, "{comp}");
        assert!((naive - 2.0).abs() > 1e-6);
    }

    #[test]
    fn falling_factorials() {
        assert!((ln_falling_factorial(5, 2).exp() - 20.0).abs() < 1e-10);
        assert_eq!(ln_falling_factorial(7, 0), 0.0);
        assert_eq!(double_factorial_odd(3), 15.0);
        assert_eq!(double_factorial_odd(0), 1.0);
        assert!((factorial(5) - 120.0).abs() < 1e-9);
    }
}
