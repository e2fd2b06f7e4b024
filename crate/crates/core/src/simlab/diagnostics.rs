//! Replication-level summaries: moments with jackknife standard errors and
//! normality diagnostics.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{HodseError, Result};

/// Statistic with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Jackknife over replications of a statistic `g(mean, mean of squares, R)`.
/// Leave-one-out moments come from the power sums, so the cost is `O(R)`.
pub fn jackknife_moments(xs: &[f64], g: impl Fn(f64, f64, f64) -> f64) -> Estimate {
    let r = xs.len();
    let rf = r as f64;
    let s1: f64 = xs.iter().sum();
    let s2: f64 = xs.iter().map(|x| x * x).sum();
    let value = g(s1 / rf, s2 / rf, rf);
    if r < 3 {
        return Estimate {
            value,
            std_error: f64::NAN,
        };
    }
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| g((s1 - x) / (rf - 1.0), (s2 - x * x) / (rf - 1.0), rf - 1.0))
        .collect();
    let mean = loo.iter().sum::<f64>() / rf;
    let ss: f64 = loo.iter().map(|v| (v - mean).powi(2)).sum();
    Estimate {
        value,
        std_error: ((rf - 1.0) / rf * ss).sqrt(),
    }
}

fn unbiased_var(m1: f64, m2: f64, r: f64) -> f64 {
    (m2 - m1 * m1) * r / (r - 1.0)
}

/// Bias, variance and MSE of replication errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSummary {
    pub bias: Estimate,
    pub variance: Estimate,
    pub mse: Estimate,
}

pub fn risk_summary(errors: &[f64]) -> RiskSummary {
    RiskSummary {
        bias: jackknife_moments(errors, |m1, _, _| m1),
        variance: jackknife_moments(errors, unbiased_var),
        mse: jackknife_moments(errors, |_, m2, _| m2),
    }
}

/// Unbiased sample variance with its jackknife standard error.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    jackknife_moments(xs, unbiased_var)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let r = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / r;
    let my = ys.iter().sum::<f64>() / r;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltDiagnostics {
    /// Two-sided Kolmogorov-Smirnov distance to the standard normal.
    pub ks_distance: f64,
    pub skewness: f64,
    /// Pearson kurtosis; 3 for a normal law.
    pub kurtosis: f64,
}

/// Diagnostics of `√n · error / √V₁`.
pub fn clt_diagnostics(errors: &[f64], v1: f64, n: usize) -> Result<CltDiagnostics> {
    if !(v1 > 0.0) {
        return Err(HodseError::input(format!("V1 must be positive, got {v1}")));
    }
    if errors.is_empty() {
        return Err(HodseError::input("no errors to diagnose"));
    }
    let scale = (v1 / n as f64).sqrt();
    let mut z: Vec<f64> = errors.iter().map(|e| e / scale).collect();
    Ok(CltDiagnostics {
        ks_distance: ks_distance_normal(&mut z),
        skewness: skewness(&z),
        kurtosis: kurtosis(&z),
    })
}

/// `sup_x |F_R(x) - Φ(x)|`; sorts `z` in place.
pub fn ks_distance_normal(z: &mut [f64]) -> f64 {
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    z.sort_by(|a, b| a.total_cmp(b));
    let r = z.len() as f64;
    let mut d = 0.0_f64;
    for (i, v) in z.iter().enumerate() {
        let f = phi.cdf(*v);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    d
}

fn central_moments(z: &[f64]) -> (f64, f64, f64) {
    let r = z.len() as f64;
    let mean = z.iter().sum::<f64>() / r;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in z {
        let c = v - mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    (m2 / r, m3 / r, m4 / r)
}

pub fn skewness(z: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(z);
    if m2 == 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

pub fn kurtosis(z: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(z);
    if m2 == 0.0 {
        return f64::NAN;
    }
    m4 / (m2 * m2)
}
