//! Gauss–Legendre panel quadrature with dyadic refinement.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{HodseError, Result};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of `P_n`, found by Newton iteration from the
    /// Tricomi initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Single-panel integral over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule over `panels` equal panels of `[a, b]`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + h * i as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }

    /// Vector-valued composite rule: `f(x, out)` writes the integrand vector.
    pub fn integrate_panels_vec<F: FnMut(f64, &mut [f64])>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        acc: &mut [f64],
        f: &mut F,
    ) {
        let dim = acc.len();
        acc.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; dim];
        let h = (b - a) / panels as f64;
        for i in 0..panels {
            let lo = a + h * i as f64;
            let half = 0.5 * h;
            let mid = lo + half;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                f(mid + half * x, &mut buf);
                let scale = w * half;
                for (s, v) in acc.iter_mut().zip(&buf) {
                    *s += scale * v;
                }
            }
        }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Settings for [`integrate_adaptive`]: panels double until two successive
/// composite results differ by at most `tol * max(1, |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub order: usize,
    pub tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            order: 16,
            tol: 1e-12,
            initial_panels: 1,
            max_panels: 1 << 16,
        }
    }
}

impl QuadSettings {
    pub fn with_tol(tol: f64) -> Self {
        QuadSettings {
            tol,
            ..Default::default()
        }
    }
}

pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    settings: &QuadSettings,
    mut f: F,
) -> Result<f64> {
    let mut out = [0.0];
    integrate_adaptive_vec(a, b, settings, &mut out, |x, v| v[0] = f(x))?;
    Ok(out[0])
}

/// Vector-valued version of [`integrate_adaptive`]; convergence is judged in
/// the max norm over components.
pub fn integrate_adaptive_vec<F: FnMut(f64, &mut [f64])>(
    a: f64,
    b: f64,
    settings: &QuadSettings,
    out: &mut [f64],
    mut f: F,
) -> Result<()> {
    if a == b {
        out.iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }
    let rule = rule_for(settings.order);
    let mut panels = settings.initial_panels.max(1);
    let dim = out.len();
    let mut prev = vec![0.0; dim];
    rule.integrate_panels_vec(a, b, panels, &mut prev, &mut f);
    let mut cur = vec![0.0; dim];
    loop {
        panels *= 2;
        rule.integrate_panels_vec(a, b, panels, &mut cur, &mut f);
        let scale = cur.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let diff = cur
            .iter()
            .zip(&prev)
            .fold(0.0_f64, |m, (c, p)| m.max((c - p).abs()));
        if diff <= settings.tol * scale {
            out.copy_from_slice(&cur);
            return Ok(());
        }
        if panels >= settings.max_panels {
            return Err(HodseError::numeric(
                format!("quadrature on [{a}, {b}] did not converge with {panels} panels"),
                diff / scale,
            ));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
}

fn rule_for(order: usize) -> std::borrow::Cow<'static, GaussLegendre> {
    if order == 16 {
        std::borrow::Cow::Borrowed(gl16())
    } else {
        std::borrow::Cow::Owned(GaussLegendre::new(order))
    }
}

/// Integral over `[a, a + len]` of an integrand with an integrable singularity
/// (or derivative singularity) at `a`, using geometrically shrinking panels.
pub fn integrate_graded_vec<F: FnMut(f64, &mut [f64])>(
    a: f64,
    len: f64,
    levels: usize,
    out: &mut [f64],
    mut f: F,
) {
    let rule = gl16();
    let dim = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut buf = vec![0.0; dim];
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in rule.nodes().iter().zip(rule.weights()) {
            f(a + mid + half * x, &mut buf);
            for (s, v) in out.iter_mut().zip(&buf) {
                *s += w * half * v;
            }
        }
        hi = lo;
    }
}

pub fn integrate_graded<F: FnMut(f64) -> f64>(a: f64, len: f64, levels: usize, mut f: F) -> f64 {
    let mut out = [0.0];
    integrate_graded_vec(a, len, levels, &mut out, |x, v| v[0] = f(x));
    out[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for order in [1, 2, 3, 5, 8, 16, 20] {
            let rule = GaussLegendre::new(order);
            for deg in 0..(2 * order) {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "order {order} deg {deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let rule = GaussLegendre::new(16);
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let settings = QuadSettings::with_tol(1e-12);
        let got = integrate_adaptive(0.0, 1.0, &settings, |x| (200.0 * x).cos()).unwrap();
        let want = (200.0_f64).sin() / 200.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let settings = QuadSettings {
            max_panels: 4,
            tol: 1e-15,
            ..Default::default()
        };
        let err = integrate_adaptive(0.0, 1.0, &settings, |x| (5000.0 * x).sin()).unwrap_err();
        assert!(matches!(err, HodseError::Numeric { .. }));
    }

    #[test]
    fn graded_handles_endpoint_singularity() {
        let got = integrate_graded(0.0, 1.0, 60, |x| x.powf(-0.5));
        assert!((got - 2.0).abs() < 5e-9, "{got}");
        let got = integrate_graded(0.0, 1.0, 60, |x| x.powf(0.5));
        assert!((got - 2.0 / 3.0).abs() < 1e-14);
    }
}
