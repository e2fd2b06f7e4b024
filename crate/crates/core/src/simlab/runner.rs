//! Monte Carlo runner: one substream per replication, merged in replication order.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{EstimatorKind, ExperimentConfig, ThetaGenerator};
use super::diagnostics::{clt_diagnostics, correlation, risk_summary, variance_estimate, CltDiagnostics, Estimate, RiskSummary};
use super::noise::NoiseModel;
use super::overlays::{theoretical_overlays, OverlayParams, Overlays};
use crate::error::{HodseError, Result};
use crate::estimator::{bootstrap_estimate, decompose_with, hodse_estimate, noise_ustats_scalar, plug_in_estimate};
use crate::functional::{predicted_var_s_k, v_k, CovarianceModel, F0Spec, FunctionalModel, FunctionalSpec};
use crate::numeric::factorial;
use crate::rng::{substream, substream_seed};
use crate::smoothing::{tuning, TuningRule};
use crate::ustat::SampleMatrix;

const THETA_STREAM: u64 = u64::MAX;
const BOOTSTRAP_SALT: u64 = 0xB007_5EED_0000_0001;

/// Everything fixed across replications.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub theta: Vec<f64>,
    pub model: FunctionalModel,
    pub m: usize,
    pub h: Option<f64>,
    pub tuning: Option<TuningRule>,
    pub noise: NoiseModel,
    /// Per-observation covariance.
    pub covariance: CovarianceModel,
    /// Estimation target `f(θ)` for the unsmoothed functional.
    pub truth: f64,
    /// `f_h(θ)`; equal to `truth` for smooth functionals.
    pub smoothed_truth: f64,
}

pub fn generate_theta(gen: &ThetaGenerator, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, THETA_STREAM);
    match *gen {
        ThetaGenerator::Zeros => vec![0.0; d],
        ThetaGenerator::Constant(c) => vec![c; d],
        ThetaGenerator::Uniform(a, b) => (0..d).map(|_| rng.gen_range(a..b)).collect(),
        ThetaGenerator::Sparse { k, magnitude } => {
            let mut t = vec![0.0; d];
            for i in index::sample(&mut rng, d, k.min(d)) {
                t[i] = if rng.gen::<bool>() { magnitude } else { -magnitude };
            }
            t
        }
    }
}

fn auto_order(cfg: &ExperimentConfig, rule: Option<&TuningRule>) -> usize {
    match &cfg.functional {
        FunctionalSpec::Poly(_) => 0,
        FunctionalSpec::Separable { f0: F0Spec::Square, .. } => 2,
        _ => rule.map_or(cfg.tuning_cap - 1, TuningRule::m),
    }
}

/// Resolves θ, tuning, bandwidth and order.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Scenario> {
    cfg.validate()?;
    let rule = if cfg.d >= 3 {
        Some(tuning(cfg.d, cfg.sigma_n, Some(cfg.tuning_cap))?)
    } else {
        None
    };
    let h = if cfg.functional.needs_smoothing() {
        let h = cfg
            .bandwidth
            .or(cfg.functional.bandwidth())
            .or(rule.map(|r| r.h_theory))
            .ok_or_else(|| HodseError::input("bandwidth must be given when d < 3"))?;
        Some(h)
    } else {
        None
    };
    let model = cfg.functional.build(cfg.d, h, &cfg.profile()?)?;
    let m = match cfg.order {
        Some(m) => m,
        None => match &model {
            FunctionalModel::Polynomial(p) => p.degree().max(1),
            _ => auto_order(cfg, rule.as_ref()),
        },
    };
    if cfg.n < m {
        return Err(HodseError::contract(format!(
            "expansion order m = {m} needs m distinct observations (n >= m), got n = {}",
            cfg.n
        )));
    }
    let theta = generate_theta(&cfg.theta, cfg.d, cfg.seed);
    let noise = cfg.noise_model()?;
    let covariance = noise.covariance(cfg.n, cfg.d)?;
    Ok(Scenario {
        truth: model.target(&theta)?,
        smoothed_truth: model.eval(&theta)?,
        theta,
        model,
        m,
        h,
        tuning: rule,
        noise,
        covariance,
    })
}

#[derive(Debug, Clone)]
struct Outcome {
    estimates: Vec<f64>,
    s_k: Vec<f64>,
    remainder: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub estimator: EstimatorKind,
    pub risk: RiskSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub k: usize,
    pub v_k: f64,
    /// Empirical `Var(S_k)` with `S_k = ⟨f^{(k)}(θ), ε̄^{(k)}⟩ / k!`.
    pub var_s_k: Estimate,
    /// `C_{k,n} V_k / (k! n^k)`, the same quantity predicted.
    pub predicted_var_s_k: f64,
}

impl OrderReport {
    /// Deviation in standard errors; `None` when both sides vanish.
    pub fn z_score(&self) -> Option<f64> {
        let diff = self.var_s_k.value - self.predicted_var_s_k;
        if self.var_s_k.std_error > 0.0 {
            Some(diff / self.var_s_k.std_error)
        } else if diff.abs() <= 1e-300 {
            None
        } else {
            Some(f64::INFINITY)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub m: usize,
    pub h: Option<f64>,
    pub tuning: Option<TuningRule>,
    pub truth: f64,
    pub smoothed_truth: f64,
    pub sigma_n: f64,
    pub v1: f64,
    pub outside_theory: bool,
    pub failures: usize,
    pub estimators: Vec<EstimatorReport>,
    pub per_order: Vec<OrderReport>,
    /// `corr(S_k, S_{k'})` for `k, k' = 1..m`.
    pub s_k_correlation: Vec<Vec<f64>>,
    pub remainder: Option<Estimate>,
    pub clt: Option<CltDiagnostics>,
    pub overlays: Option<Overlays>,
    /// Per replication, one estimate per configured estimator (NaN on failure).
    pub replications: Vec<Vec<f64>>,
}

fn run_one(cfg: &ExperimentConfig, sc: &Scenario, theta_jets: Option<&[Vec<f64>]>, r: usize) -> Result<Outcome> {
    let (n, d) = (cfg.n, cfg.d);
    let mut rng = substream(cfg.seed, r as u64);
    let mut buf = Vec::with_capacity(n * d);
    sc.noise.sample_into(n, d, &mut rng, &mut buf)?;
    for (i, v) in buf.iter_mut().enumerate() {
        *v += sc.theta[i % d];
    }
    let samples = SampleMatrix::new(n, d, buf)?;
    let mut estimates = Vec::with_capacity(cfg.estimators.len());
    let mut hodse_value = None;
    for e in &cfg.estimators {
        let v = match e {
            EstimatorKind::Plugin => plug_in_estimate(&samples, &sc.model)?,
            EstimatorKind::Hodse => {
                let v = hodse_estimate(&samples, &sc.model, sc.m)?.value;
                hodse_value = Some(v);
                v
            }
            EstimatorKind::Bootstrap => {
                let seed = substream_seed(cfg.seed ^ BOOTSTRAP_SALT, r as u64);
                bootstrap_estimate(&samples, &sc.model, sc.m, cfg.bootstrap_draws, seed)?.value
            }
        };
        estimates.push(v);
    }
    let (mut s_k, mut remainder) = (Vec::new(), f64::NAN);
    if let (true, Some(est)) = (cfg.decompose, hodse_value) {
        match theta_jets {
            Some(jets) => {
                let eps = noise_ustats_scalar(&samples, &sc.theta, sc.m)?;
                let w = sc.model.coordinate_weight();
                s_k = (1..=sc.m)
                    .map(|k| w * jets.iter().zip(&eps[k - 1]).map(|(j, e)| j[k] * e).sum::<f64>() / factorial(k))
                    .collect();
                remainder = sc.smoothed_truth + s_k.iter().sum::<f64>() - est;
            }
            None => {
                let dec = decompose_with(&samples, &sc.model, sc.m, &sc.theta, est)?;
                s_k = dec.s_k;
                remainder = dec.remainder;
            }
        }
    }
    Ok(Outcome {
        estimates,
        s_k,
        remainder,
    })
}

fn v_table(sc: &Scenario, theta_jets: Option<&[Vec<f64>]>, top: usize) -> Result<Vec<f64>> {
    match (theta_jets, &sc.covariance) {
        (Some(jets), CovarianceModel::Diagonal(s)) => {
            let w = sc.model.coordinate_weight();
            Ok((1..=top)
                .map(|k| jets.iter().zip(s).map(|(j, sa)| (w * j[k]).powi(2) * sa.powi(k as i32)).sum())
                .collect())
        }
        _ => (1..=top).map(|k| v_k(&sc.model, &sc.theta, &sc.covariance, k)).collect(),
    }
}

/// Runs all replications on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let sc = resolve(cfg)?;
    let m = sc.m;
    let theta_jets = if sc.model.is_coordinatewise() {
        Some(sc.model.coordinate_jets(&sc.theta, m)?)
    } else {
        None
    };
    let jets_ref = theta_jets.as_deref();
    let outcomes: Vec<Result<Outcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_one(cfg, &sc, jets_ref, r))
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures * 100 > cfg.replications {
        let first = outcomes.into_iter().find_map(|o| o.err()).expect("failures > 0");
        log::error!("{failures} of {} replications failed", cfg.replications);
        return Err(first);
    }
    if failures > 0 {
        log::warn!("{failures} of {} replications failed and were skipped", cfg.replications);
    }
    let ok: Vec<&Outcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let column = |i: usize| -> Vec<f64> { ok.iter().map(|o| o.estimates[i] - sc.truth).collect() };
    let estimators: Vec<EstimatorReport> = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(i, e)| EstimatorReport {
            estimator: *e,
            risk: risk_summary(&column(i)),
        })
        .collect();

    let v_top = if cfg.decompose { m } else { 1 };
    let vs = v_table(&sc, jets_ref, v_top)?;
    let v1 = vs[0];
    let mut per_order = Vec::new();
    let mut s_k_correlation = Vec::new();
    let mut remainder = None;
    let decomposed = cfg.decompose && cfg.estimators.contains(&EstimatorKind::Hodse) && !ok.is_empty();
    if decomposed {
        let cols: Vec<Vec<f64>> = (0..m).map(|k| ok.iter().map(|o| o.s_k[k]).collect()).collect();
        for k in 1..=m {
            per_order.push(OrderReport {
                k,
                v_k: vs[k - 1],
                var_s_k: variance_estimate(&cols[k - 1]),
                predicted_var_s_k: predicted_var_s_k(cfg.n, k, vs[k - 1])? / factorial(k).powi(2),
            });
        }
        s_k_correlation = (0..m)
            .map(|a| (0..m).map(|b| if a == b { 1.0 } else { correlation(&cols[a], &cols[b]) }).collect())
            .collect();
        let rem: Vec<f64> = ok.iter().map(|o| o.remainder).collect();
        remainder = Some(risk_summary(&rem).bias);
    }
    let clt = match cfg.estimators.iter().position(|e| *e == EstimatorKind::Hodse) {
        Some(i) if v1 > 0.0 && !ok.is_empty() => Some(clt_diagnostics(&column(i), v1, cfg.n)?),
        _ => None,
    };
    let overlays = match &sc.model {
        FunctionalModel::Separable(sep) => {
            let alpha = sep.smoothing.as_ref().map(|sf| (sf.p(), sf.profile.c1()));
            theoretical_overlays(&OverlayParams {
                model: &sc.model,
                theta: &sc.theta,
                sigma_n: sc.noise.sigma_n(),
                s: m + 1,
                alpha,
            })
            .ok()
        }
        _ => None,
    };
    let replications = outcomes
        .iter()
        .map(|o| match o {
            Ok(o) => o.estimates.clone(),
            Err(_) => vec![f64::NAN; cfg.estimators.len()],
        })
        .collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        m,
        h: sc.h,
        tuning: sc.tuning,
        truth: sc.truth,
        smoothed_truth: sc.smoothed_truth,
        sigma_n: sc.noise.sigma_n(),
        v1,
        outside_theory: cfg.noise_family.outside_theory(),
        failures,
        estimators,
        per_order,
        s_k_correlation,
        remainder,
        clt,
        overlays,
        replications,
    })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HodseError::Io(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn est(e: &Estimate) -> Value {
    json!({"value": num(e.value), "std_error": num(e.std_error)})
}

impl ExperimentReport {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&RiskSummary> {
        self.estimators.iter().find(|e| e.estimator == kind).map(|e| &e.risk)
    }

    /// Report as JSON with sorted keys; per-replication values go to the CSV.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        root.insert(
            "config".into(),
            Value::Object(self.config.entries().into_iter().map(|(k, v)| (k, Value::String(v))).collect()),
        );
        root.insert("m".into(), json!(self.m));
        root.insert("h".into(), self.h.map_or(Value::Null, num));
        root.insert(
            "tuning".into(),
            self.tuning.map_or(Value::Null, |t| {
                json!({"h_theory": num(t.h_theory), "s_theory": t.s_theory, "s_cap": t.s_cap, "capped": t.capped})
            }),
        );
        root.insert("truth".into(), num(self.truth));
        root.insert("smoothed_truth".into(), num(self.smoothed_truth));
        root.insert("sigma_n".into(), num(self.sigma_n));
        root.insert("v1".into(), num(self.v1));
        root.insert("outside_theory".into(), json!(self.outside_theory));
        root.insert("failures".into(), json!(self.failures));
        let mut ests = Map::new();
        for e in &self.estimators {
            ests.insert(
                e.estimator.label().into(),
                json!({"bias": est(&e.risk.bias), "variance": est(&e.risk.variance), "mse": est(&e.risk.mse)}),
            );
        }
        root.insert("estimators".into(), Value::Object(ests));
        root.insert(
            "per_order".into(),
            Value::Array(
                self.per_order
                    .iter()
                    .map(|o| {
                        json!({
                            "k": o.k,
                            "v_k": num(o.v_k),
                            "var_s_k": est(&o.var_s_k),
                            "predicted_var_s_k": num(o.predicted_var_s_k),
                            "z_score": o.z_score().map_or(Value::Null, num),
                        })
                    })
                    .collect(),
            ),
        );
        root.insert(
            "s_k_correlation".into(),
            Value::Array(
                self.s_k_correlation
                    .iter()
                    .map(|row| Value::Array(row.iter().map(|v| num(*v)).collect()))
                    .collect(),
            ),
        );
        root.insert("remainder_mean".into(), self.remainder.as_ref().map_or(Value::Null, est));
        root.insert(
            "clt".into(),
            self.clt.map_or(Value::Null, |c| {
                json!({"ks_distance": num(c.ks_distance), "skewness": num(c.skewness), "kurtosis": num(c.kurtosis)})
            }),
        );
        root.insert(
            "overlays".into(),
            self.overlays.map_or(Value::Null, |o| {
                json!({
                    "bias": num(o.bias),
                    "kappa": num(o.kappa),
                    "holder_norm": num(o.holder_norm),
                    "error_bound": num(o.error_bound),
                    "rate_bound": o.rate_bound.map_or(Value::Null, num),
                    "rate_value": o.rate_value.map_or(Value::Null, num),
                })
            }),
        );
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        s.push('\n');
        s
    }

    /// `replication,truth,<estimator>...` with one row per replication.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replication,truth");
        for e in &self.config.estimators {
            out.push(',');
            out.push_str(e.label());
        }
        out.push('\n');
        for (r, row) in self.replications.iter().enumerate() {
            out.push_str(&format!("{r},{}", self.truth));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// One line per estimator: `name bias=... variance=... mse=... (se ...)`.
    pub fn summary_lines(&self) -> Vec<String> {
        self.estimators
            .iter()
            .map(|e| {
                format!(
                    "{:<9} bias={:+.6e} variance={:.6e} mse={:.6e} (se {:.2e})",
                    e.estimator.label(),
                    e.risk.bias.value,
                    e.risk.variance.value,
                    e.risk.mse.value,
                    e.risk.mse.std_error
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_cfg(r: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(FunctionalSpec::parse("poly:2*x1 - x2 + 0.5*x3").unwrap(), 20, 3, r, 11);
        cfg.sigma_n = 0.3;
        cfg.theta = ThetaGenerator::Constant(1.0);
        cfg.estimators = vec![EstimatorKind::Hodse];
        cfg
    }

    #[test]
    fn single_linear_replication() {
        let cfg = linear_cfg(1);
        let rep = run_experiment(&cfg).unwrap();
        let sc = resolve(&cfg).unwrap();
        let mut rng = substream(cfg.seed, 0);
        let mut buf = Vec::new();
        sc.noise.sample_into(cfg.n, cfg.d, &mut rng, &mut buf).unwrap();
        let c = [2.0, -1.0, 0.5];
        let mean_noise: Vec<f64> = (0..3).map(|a| buf.iter().skip(a).step_by(3).sum::<f64>() / 20.0).collect();
        let err: f64 = c.iter().zip(&mean_noise).map(|(c, e)| c * e).sum();
        assert!((rep.estimators[0].risk.bias.value - err).abs() < 1e-12);
        assert!(rep.remainder.unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let mut cfg = ExperimentConfig::new(FunctionalSpec::parse("sep:abs").unwrap(), 30, 8, 40, 5);
        cfg.tuning_cap = 6;
        cfg.estimators = vec![EstimatorKind::Plugin, EstimatorKind::Hodse, EstimatorKind::Bootstrap];
        cfg.bootstrap_draws = 20;
        let a = run_experiment_with_threads(&cfg, 1).unwrap();
        let b = run_experiment_with_threads(&cfg, 3).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.m, 5);
    }

    #[test]
    fn order_above_n_is_a_contract_error() {
        let mut cfg = linear_cfg(2);
        cfg.order = Some(21);
        assert!(matches!(run_experiment(&cfg).unwrap_err(), HodseError::Contract(_)));
    }
}
