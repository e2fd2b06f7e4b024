//! Truncated Taylor series for 1-d derivative jets.

/// Coefficients of `t^0..t^m` of a function expanded at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor(pub Vec<f64>);

impl Taylor {
    pub fn constant(c: f64, m: usize) -> Self {
        let mut v = vec![0.0; m + 1];
        v[0] = c;
        Taylor(v)
    }

    /// The identity `x0 + t`.
    pub fn variable(x0: f64, m: usize) -> Self {
        let mut v = Self::constant(x0, m);
        if m >= 1 {
            v.0[1] = 1.0;
        }
        v
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn mul(&self, other: &Taylor) -> Taylor {
        let m = self.order();
        let mut out = vec![0.0; m + 1];
        for i in 0..=m {
            for j in 0..=(m - i) {
                out[i + j] += self.0[i] * other.0[j];
            }
        }
        Taylor(out)
    }

    pub fn recip(&self) -> Taylor {
        let m = self.order();
        let a0 = self.0[0];
        let mut out = vec![0.0; m + 1];
        out[0] = 1.0 / a0;
        for k in 1..=m {
            let s: f64 = (1..=k).map(|i| self.0[i] * out[k - i]).sum();
            out[k] = -s / a0;
        }
        Taylor(out)
    }

    /// Antiderivative with constant term `c0`, truncated to the same order.
    pub fn integrate(&self, c0: f64) -> Taylor {
        let m = self.order();
        let mut out = vec![0.0; m + 1];
        out[0] = c0;
        for k in 1..=m {
            out[k] = self.0[k - 1] / k as f64;
        }
        Taylor(out)
    }

    /// `[f, f', ..., f^(m)]` at the expansion point.
    pub fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.0
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_of_geometric_series() {
        // 1/(1 - t) = 1 + t + t^2 + ...
        let t = Taylor(vec![1.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.recip().0, vec![1.0; 5]);
    }

    #[test]
    fn atan_derivatives() {
        let x0 = 0.7;
        let u = Taylor::variable(x0, 4);
        let w = u.mul(&u).0.iter().enumerate().map(|(i, v)| if i == 0 { v + 1.0 } else { *v }).collect();
        let d = Taylor(w).recip().integrate(f64::atan(x0)).derivatives();
        let s = 1.0 + x0 * x0;
        assert!((d[1] - 1.0 / s).abs() < 1e-15);
        assert!((d[2] + 2.0 * x0 / (s * s)).abs() < 1e-15);
        assert!((d[3] - (6.0 * x0 * x0 - 2.0) / (s * s * s)).abs() < 1e-14);
    }
}
