//! Self-validation suites run by `hodse validate`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::error::Result;
use crate::estimator::{bootstrap_exhaustive, hodse_estimate, verify_identity};
use crate::functional::{parse_polynomial, Custom1d, FunctionalModel, FunctionalSpec};
use crate::numeric::factorial;
use crate::quadrature::QuadSettings;
use crate::simlab::{
    check_noise_condition, run_experiment, CheckMethod, EstimatorKind, ExperimentConfig, NoiseFamily, NoiseModel,
    ThetaGenerator,
};
use crate::smoothing::{default_profile, kernel_moments, SmoothedFunctional};
use crate::ustat::{
    brute_force_ustat, center, counting_constant, degenerate_ustat_scalar, degenerate_ustat_tensor,
    distinct_tuple_mean_scalar, SampleMatrix,
};

pub const REFERENCE_SEED: u64 = 20_240_601;

/// Deliberate defects for checking that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Form `ū^{(k)}` from raw rather than centered data.
    SkipCentering,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Only the sub-second suites.
    pub fast: bool,
    pub fault: Option<Fault>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl SuiteResult {
    pub fn to_json(&self) -> Value {
        json!({"name": self.name, "passed": self.passed, "detail": self.detail, "seconds": self.seconds})
    }
}

type Suite = fn(&ValidateOptions) -> Result<(bool, String)>;

const SUITES: &[(&str, bool, Suite)] = &[
    ("ustat-oracle", true, suite_ustat_oracle),
    ("ustat-degeneracy", true, suite_degeneracy),
    ("counting-constant", true, suite_counting),
    ("identity", true, suite_identity),
    ("bootstrap", true, suite_bootstrap),
    ("noise-condition", true, suite_noise),
    ("kernel", false, suite_kernel),
    ("variance", false, suite_variance),
    ("clt", false, suite_clt),
];

pub fn suite_names(fast: bool) -> Vec<&'static str> {
    SUITES.iter().filter(|s| !fast || s.1).map(|s| s.0).collect()
}

pub fn run_validation(opts: &ValidateOptions) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .filter(|s| !opts.fast || s.1)
        .map(|(name, _, f)| {
            let t = Instant::now();
            let (passed, detail) = match f(opts) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            SuiteResult {
                name,
                passed,
                detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn suite_ustat_oracle(opts: &ValidateOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let d = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=n.min(4));
        let vals: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c = center(&SampleMatrix::new(n, d, vals)?)?;
        let fast = degenerate_ustat_tensor(&c, k)?;
        let slow = brute_force_ustat(&c, k)?;
        let scale = slow.hs_norm().max(1.0);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            worst = worst.max((a - b).abs() / scale);
        }
        if d == 1 {
            let s = degenerate_ustat_scalar(&c.centered.column(0), k)?;
            worst = worst.max((s[k - 1] - slow.data()[0]).abs() / scale);
        }
    }
    Ok((worst <= 1e-10, format!("max relative error {worst:.2e} over 200 instances")))
}

fn ustat_with_fault(values: &[f64], m: usize, fault: Option<Fault>) -> Result<Vec<f64>> {
    match fault {
        Some(Fault::SkipCentering) => distinct_tuple_mean_scalar(values, m),
        None => {
            let c = center(&SampleMatrix::from_column(values)?)?;
            degenerate_ustat_scalar(&c.centered.column(0), m)
        }
    }
}

/// Translation invariance of `ū^{(k)}` and exhaustive unbiasedness of the
/// expansion assembled from it.
fn suite_degeneracy(opts: &ValidateOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 1);
    let m = 3;
    let mut shift_err = 0.0_f64;
    for _ in 0..20 {
        let xs: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = xs.iter().map(|x| x + 2.5).collect();
        let a = ustat_with_fault(&xs, m, opts.fault)?;
        let b = ustat_with_fault(&shifted, m, opts.fault)?;
        for k in 2..=m {
            shift_err = shift_err.max(rel_err(a[k - 1], b[k - 1]));
        }
    }
    // f(θ) = θ³ - θ, ±1 noise around θ = 0.4, n = 8
    let (theta, n) = (0.4, 8usize);
    let f = |x: f64| [x * x * x - x, 3.0 * x * x - 1.0, 6.0 * x, 6.0];
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let xs: Vec<f64> = (0..n).map(|j| theta + if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let xbar = xs.iter().sum::<f64>() / n as f64;
        let u = ustat_with_fault(&xs, m, opts.fault)?;
        let jet = f(xbar);
        total += jet[0] + (2..=m).map(|k| jet[k] * u[k - 1] / factorial(k)).sum::<f64>();
    }
    let bias = (total / (1u32 << n) as f64 - f(theta)[0]).abs();
    Ok((
        shift_err <= 1e-10 && bias <= 1e-10,
        format!("translation defect {shift_err:.2e}, exhaustive bias {bias:.2e}"),
    ))
}

fn suite_counting(_: &ValidateOptions) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=200 {
        for k in 1..=n {
            let c = counting_constant(n, k)?;
            worst = worst.max(c.c_kn.ln() - ((k - 1) * k) as f64 / n as f64);
        }
    }
    Ok((worst <= 1e-12, format!("max log C_kn - (k-1)k/n = {worst:.3e}")))
}

fn suite_identity(opts: &ValidateOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 2);
    let mut worst = 0.0_f64;
    for f in [Custom1d::Exp, Custom1d::Sin, Custom1d::XAtanX] {
        for m in 3..=5 {
            let theta: f64 = rng.gen_range(-0.5..0.5);
            let xs: Vec<f64> = (0..20).map(|_| theta + rng.sample::<f64, _>(StandardNormal)).collect();
            let chk = verify_identity(
                &FunctionalModel::Custom(f),
                theta,
                &SampleMatrix::from_column(&xs)?,
                m,
                &QuadSettings::default(),
            )?;
            worst = worst.max(chk.residual);
        }
    }
    Ok((worst <= 1e-8, format!("max residual {worst:.2e}")))
}

fn suite_bootstrap(opts: &ValidateOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 3);
    let f = FunctionalModel::Polynomial(parse_polynomial("x1^3 - x1*x2 + 2*x2^2", 2)?);
    let mut worst = 0.0_f64;
    for n in 4..=6 {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let s = SampleMatrix::from_rows(&rows)?;
        for m in 2..=3 {
            let a = bootstrap_exhaustive(&s, &f, m)?.value;
            let b = hodse_estimate(&s, &f, m)?.value;
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max |exhaustive bootstrap - estimate| = {worst:.2e}")))
}

fn suite_noise(_: &ValidateOptions) -> Result<(bool, String)> {
    let g = check_noise_condition(&NoiseModel::new(NoiseFamily::Gaussian, 1.0)?, 8, 6, CheckMethod::ClosedForm, 1e-12)?;
    let r = check_noise_condition(&NoiseModel::new(NoiseFamily::Rademacher, 1.0)?, 8, 4, CheckMethod::Exhaustive, 1e-12)?;
    let ok = g.iter().chain(&r).all(|c| c.pass);
    Ok((ok, format!("gaussian k<=6 and rademacher n=8 k<=4: {}", if ok { "all pass" } else { "violation" })))
}

fn suite_kernel(_: &ValidateOptions) -> Result<(bool, String)> {
    let profile = default_profile();
    let mom = kernel_moments(&profile)?;
    let mass = (mom.integral - 1.0).abs();
    let sf = SmoothedFunctional::abs(0.3)?;
    let mut worst = 0.0_f64;
    for i in -20..=20 {
        let x = i as f64 * 0.1;
        let a = sf.derivatives(x, 2)?[1];
        let b = sf.abs_deriv_via_kernel(x, 2)?;
        worst = worst.max((a - b).abs());
    }
    Ok((
        mass <= 1e-8 && worst <= 1e-8,
        format!("|∫K - 1| = {mass:.2e}, max |f_h'' - 2K_h| = {worst:.2e}"),
    ))
}

fn suite_variance(opts: &ValidateOptions) -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::new(FunctionalSpec::parse("sep:square")?, 100, 10, 20_000, opts.seed);
    cfg.order = Some(2);
    cfg.sigma_n = 0.1;
    cfg.estimators = vec![EstimatorKind::Hodse];
    let rep = run_experiment(&cfg)?;
    let o = &rep.per_order[1];
    let z = o.z_score().unwrap_or(0.0);
    Ok((
        z.abs() <= 4.0,
        format!(
            "Var(S_2) {:.4e} vs predicted {:.4e} ({z:+.2} SE)",
            o.var_s_k.value, o.predicted_var_s_k
        ),
    ))
}

fn suite_clt(opts: &ValidateOptions) -> Result<(bool, String)> {
    let r = 1000;
    let mut cfg = ExperimentConfig::new(FunctionalSpec::parse("sep:square")?, 200, 20, r, opts.seed);
    cfg.order = Some(2);
    cfg.theta = ThetaGenerator::Constant(1.0);
    cfg.sigma_n = 1.0 / (200f64).sqrt();
    cfg.estimators = vec![EstimatorKind::Hodse];
    cfg.decompose = false;
    let rep = run_experiment(&cfg)?;
    let clt = rep.clt.expect("V1 > 0 at θ = 1");
    // 99% point of the Kolmogorov distribution
    let threshold = 1.63 / (r as f64).sqrt();
    Ok((
        clt.ks_distance <= threshold,
        format!("KS {:.4} (threshold {threshold:.4}), skewness {:.3}", clt.ks_distance, clt.skewness),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        let opts = ValidateOptions {
            fast: true,
            fault: None,
            seed: REFERENCE_SEED,
        };
        for r in run_validation(&opts) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn skipping_centering_is_caught() {
        let opts = ValidateOptions {
            fast: true,
            fault: Some(Fault::SkipCentering),
            seed: REFERENCE_SEED,
        };
        let results = run_validation(&opts);
        let deg = results.iter().find(|r| r.name == "ustat-degeneracy").unwrap();
        assert!(!deg.passed, "{}", deg.detail);
    }
}
