//! Natural cubic spline interpolation for tabulated 1-d functions.

use crate::error::{HodseError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m2: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(HodseError::input("spline needs at least 3 knots with matching values"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(HodseError::input("spline knots must be finite and strictly increasing"));
        }
        // tridiagonal system for interior second derivatives, natural ends
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        let mut m2 = vec![0.0; n];
        // Thomas algorithm on rows 1..n-1
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let lower = xs[i] - xs[i - 1];
            let lower = if i == 1 { 0.0 } else { lower };
            let denom = diag[i] - lower * c[i - 1];
            c[i] = upper[i] / denom;
            d[i] = (rhs[i] - lower * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m2[i] = d[i] - c[i] * m2[i + 1];
        }
        Ok(CubicSpline { xs, ys, m2 })
    }

    /// `[s(x), s'(x), s''(x)]` truncated to `order + 1` entries, `order <= 2`.
    pub fn jet(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        if order > 2 {
            return Err(HodseError::contract(format!(
                "table functional supports derivatives up to order 2, requested {order}"
            )));
        }
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - x) / h, (x - x0) / h);
        let (m0, m1) = (self.m2[i], self.m2[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        Ok([v, d1, d2][..=order].to_vec())
    }
}
