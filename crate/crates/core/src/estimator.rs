//! The degenerate-expansion estimator, its baselines and the exact
//! expansion diagnostics.
//!
//! `f̂ = f(x̄) + Σ_{k=2}^m ⟨f^{(k)}(x̄), ū^{(k)}⟩ / k!`.

use rand::seq::index;
use statrs::function::gamma::gamma;

use crate::error::{HodseError, Result};
use crate::functional::{FunctionalModel, PolynomialModel};
use crate::numeric::factorial;
use crate::quadrature::{integrate_adaptive, QuadSettings};
use crate::rng::substream;
use crate::tensor::{checked_len, DenseTensor, DENSE_BUDGET};
use crate::ustat::{center, distinct_tuple_mean_scalar, distinct_tuple_mean_tensor, SampleMatrix, UStatSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatePath {
    Dense,
    Separable,
    Bootstrap,
}

impl EstimatePath {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatePath::Dense => "dense",
            EstimatePath::Separable => "separable",
            EstimatePath::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub value: f64,
    pub m: usize,
    /// `f(x̄)`, the first term of the expansion.
    pub base: f64,
    /// `⟨f^{(k)}(x̄), ū^{(k)}⟩ / k!` for `k = 2..m`.
    pub per_order_terms: Vec<f64>,
    pub path: EstimatePath,
}

impl EstimateResult {
    fn assemble(base: f64, m: usize, per_order_terms: Vec<f64>, path: EstimatePath) -> Self {
        let value = base + per_order_terms.iter().sum::<f64>();
        EstimateResult {
            value,
            m,
            base,
            per_order_terms,
            path,
        }
    }
}

fn check_order(samples: &SampleMatrix, model: &FunctionalModel, m: usize) -> Result<()> {
    if samples.d() != model.d() {
        return Err(HodseError::input(format!(
            "samples have {} columns, functional expects {}",
            samples.d(),
            model.d()
        )));
    }
    if m == 0 {
        return Err(HodseError::input("expansion order must be at least 1"));
    }
    if samples.n() < m {
        return Err(HodseError::contract(format!(
            "expansion order m = {m} needs m distinct observations (n >= m), got n = {}",
            samples.n()
        )));
    }
    Ok(())
}

/// Highest order that can contribute: polynomial derivatives vanish past the degree.
fn effective_order(model: &FunctionalModel, m: usize) -> usize {
    match model {
        FunctionalModel::Polynomial(p) => m.min(p.degree()),
        _ => m,
    }
}

fn dense_budget_check(d: usize, k: usize) -> Result<()> {
    if checked_len(d, k).map_or(true, |l| l > DENSE_BUDGET) {
        return Err(HodseError::capacity(format!(
            "order-{k} derivative tensors over R^{d} exceed the dense budget; use a separable functional"
        )));
    }
    Ok(())
}

/// Derivatives of a functional at one point, in whichever form is cheapest.
enum DerivativesAt {
    /// `w · g^{(k)}(θ_a)` for each coordinate, indexed `[k][a]`.
    Diagonal(Vec<Vec<f64>>),
    /// Dense `f^{(k)}(θ)` indexed by `k`; entries past the degree are absent.
    Dense(Vec<DenseTensor>),
    Polynomial(PolynomialModel, Vec<f64>),
}

impl DerivativesAt {
    fn new(model: &FunctionalModel, theta: &[f64], m: usize, need_dense: bool) -> Result<Self> {
        match model {
            FunctionalModel::Polynomial(p) => {
                let top = m.min(p.degree());
                if need_dense || checked_len(p.d(), top).is_some_and(|l| l <= 4096) {
                    dense_budget_check(p.d(), top)?;
                    let tensors = (0..=top)
                        .map(|k| {
                            if k == 0 {
                                Ok(DenseTensor::scalar(p.eval(theta)))
                            } else {
                                p.derivative_tensor(theta, k)
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(DerivativesAt::Dense(tensors))
                } else {
                    Ok(DerivativesAt::Polynomial(p.clone(), theta.to_vec()))
                }
            }
            _ => {
                let jets = model.coordinate_jets(theta, m)?;
                let w = model.coordinate_weight();
                let per_k = (0..=m).map(|k| jets.iter().map(|j| w * j[k]).collect()).collect();
                Ok(DerivativesAt::Diagonal(per_k))
            }
        }
    }

    /// `f^{(k)}[v_1, ..., v_k]`.
    fn form(&self, vectors: &[&[f64]]) -> Result<f64> {
        let k = vectors.len();
        match self {
            DerivativesAt::Diagonal(per_k) => Ok(per_k[k]
                .iter()
                .enumerate()
                .map(|(a, c)| c * vectors.iter().map(|v| v[a]).product::<f64>())
                .sum()),
            DerivativesAt::Dense(t) => match t.get(k) {
                Some(t) => t.contract_vectors(vectors),
                None => Ok(0.0),
            },
            DerivativesAt::Polynomial(p, theta) => p.multilinear(theta, vectors),
        }
    }
}

/// `f(x̄) + Σ_{k=2}^m ⟨f^{(k)}(x̄), ū^{(k)}⟩/k!`, dense for polynomial
/// functionals and coordinatewise otherwise.
pub fn hodse_estimate(samples: &SampleMatrix, model: &FunctionalModel, m: usize) -> Result<EstimateResult> {
    check_order(samples, model, m)?;
    if model.is_coordinatewise() {
        return separable_core(samples, model, m);
    }
    let c = center(samples)?;
    let top = effective_order(model, m);
    dense_budget_check(model.d(), top)?;
    let base = model.eval(&c.mean)?;
    let mut terms = vec![0.0; m.saturating_sub(1)];
    for k in 2..=top {
        let u = distinct_tuple_mean_tensor(&c.centered, k)?;
        let f = model.derivative_tensor(&c.mean, k)?;
        terms[k - 2] = f.inner(&u)? / factorial(k);
    }
    Ok(EstimateResult::assemble(base, m, terms, EstimatePath::Dense))
}

fn separable_core(samples: &SampleMatrix, model: &FunctionalModel, m: usize) -> Result<EstimateResult> {
    let c = center(samples)?;
    let u = UStatSet::compute(&c, m, false)?;
    let jets = model.coordinate_jets(&c.mean, m)?;
    let w = model.coordinate_weight();
    let base = w * jets.iter().map(|j| j[0]).sum::<f64>();
    let terms = (2..=m)
        .map(|k| {
            let s: f64 = jets.iter().zip(u.order(k)).map(|(j, uk)| j[k] * uk).sum();
            w * s / factorial(k)
        })
        .collect();
    Ok(EstimateResult::assemble(base, m, terms, EstimatePath::Separable))
}

/// `(1/d) Σ_a { g(x̄_a) + Σ_{k=2}^m g^{(k)}(x̄_a) ū_a^{(k)} / k! }` with `g = f_h`.
pub fn separable_estimate(samples: &SampleMatrix, model: &FunctionalModel, m: usize) -> Result<EstimateResult> {
    if !model.is_coordinatewise() {
        return Err(HodseError::contract("separable_estimate needs a separable functional"));
    }
    check_order(samples, model, m)?;
    separable_core(samples, model, m)
}

/// `f(x̄)` for the unsmoothed target functional.
pub fn plug_in_estimate(samples: &SampleMatrix, model: &FunctionalModel) -> Result<f64> {
    if samples.d() != model.d() {
        return Err(HodseError::input("sample dimension does not match the functional"));
    }
    let c = center(samples)?;
    model.target(&c.mean)
}

/// Monte Carlo form of the expansion: each of `n_draws` draws takes `m`
/// rows without replacement and contributes `f^{(k)}(x̄)[ε*_1, ..., ε*_k]/k!`.
pub fn bootstrap_estimate(
    samples: &SampleMatrix,
    model: &FunctionalModel,
    m: usize,
    n_draws: usize,
    seed: u64,
) -> Result<EstimateResult> {
    if n_draws == 0 {
        return Err(HodseError::input("bootstrap needs at least one draw"));
    }
    check_order(samples, model, m)?;
    let c = center(samples)?;
    let der = DerivativesAt::new(model, &c.mean, m, false)?;
    let top = effective_order(model, m);
    let base = model.eval(&c.mean)?;
    let mut sums = vec![0.0; m.saturating_sub(1)];
    for b in 0..n_draws {
        let mut rng = substream(seed, b as u64);
        let picks = index::sample(&mut rng, samples.n(), m);
        let rows: Vec<&[f64]> = picks.iter().map(|j| c.centered.row(j)).collect();
        for k in 2..=top {
            sums[k - 2] += der.form(&rows[..k])?;
        }
    }
    let terms = sums
        .iter()
        .enumerate()
        .map(|(i, s)| s / n_draws as f64 / factorial(i + 2))
        .collect();
    Ok(EstimateResult::assemble(base, m, terms, EstimatePath::Bootstrap))
}

fn for_each_ordered_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(
        n: usize,
        k: usize,
        cur: &mut Vec<usize>,
        used: &mut Vec<bool>,
        f: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if cur.len() == k {
            return f(cur);
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(n, k, cur, used, f)?;
                cur.pop();
                used[j] = false;
            }
        }
        Ok(())
    }
    rec(n, k, &mut Vec::with_capacity(k), &mut vec![false; n], &mut f)
}

/// The bootstrap average taken over every ordered `k`-subset of rows; equals
/// [`hodse_estimate`] exactly.
pub fn bootstrap_exhaustive(samples: &SampleMatrix, model: &FunctionalModel, m: usize) -> Result<EstimateResult> {
    check_order(samples, model, m)?;
    let n = samples.n();
    if checked_len(n, m).map_or(true, |l| l > crate::ustat::ENUMERATION_BUDGET) {
        return Err(HodseError::capacity(format!("{n}^{m} ordered subsets exceed the enumeration budget")));
    }
    let c = center(samples)?;
    let der = DerivativesAt::new(model, &c.mean, m, false)?;
    let base = model.eval(&c.mean)?;
    let mut terms = vec![0.0; m.saturating_sub(1)];
    for k in 2..=effective_order(model, m) {
        let mut acc = 0.0;
        let mut count = 0usize;
        for_each_ordered_tuple(n, k, |t| {
            let rows: Vec<&[f64]> = t.iter().map(|&j| c.centered.row(j)).collect();
            acc += der.form(&rows)?;
            count += 1;
            Ok(())
        })?;
        terms[k - 2] = acc / count as f64 / factorial(k);
    }
    Ok(EstimateResult::assemble(base, m, terms, EstimatePath::Bootstrap))
}

/// Terms of the exact expansion around the true `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `⟨f^{(k)}(θ), ε̄^{(k)}⟩ / k!` for `k = 1..m`.
    pub s_k: Vec<f64>,
    /// `f(θ) + Σ s_k - f̂`.
    pub remainder: f64,
    pub f_true: f64,
    pub estimate: f64,
}

/// Noise U-statistics `ε̄^{(k)}` per coordinate (`[k-1][a]`), from `ε_j = x_j - θ`.
pub fn noise_ustats_scalar(samples: &SampleMatrix, theta: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    if theta.len() != samples.d() {
        return Err(HodseError::input("θ dimension does not match the samples"));
    }
    let mut out = vec![vec![0.0; samples.d()]; m];
    for (a, th) in theta.iter().enumerate() {
        let eps: Vec<f64> = samples.column(a).iter().map(|x| x - th).collect();
        for (k, v) in distinct_tuple_mean_scalar(&eps, m)?.into_iter().enumerate() {
            out[k][a] = v;
        }
    }
    Ok(out)
}

fn noise_rows(samples: &SampleMatrix, theta: &[f64]) -> Result<SampleMatrix> {
    let d = samples.d();
    let vals = samples
        .values()
        .iter()
        .enumerate()
        .map(|(i, x)| x - theta[i % d])
        .collect();
    SampleMatrix::new(samples.n(), d, vals)
}

pub fn decompose(
    samples: &SampleMatrix,
    model: &FunctionalModel,
    m: usize,
    theta: &[f64],
) -> Result<Decomposition> {
    if theta.len() != model.d() || samples.d() != model.d() {
        return Err(HodseError::input("dimension mismatch between samples, θ and the functional"));
    }
    let est = hodse_estimate(samples, model, m)?;
    decompose_with(samples, model, m, theta, est.value)
}

/// [`decompose`] with a precomputed estimate.
pub fn decompose_with(
    samples: &SampleMatrix,
    model: &FunctionalModel,
    m: usize,
    theta: &[f64],
    estimate: f64,
) -> Result<Decomposition> {
    let f_true = model.eval(theta)?;
    let mut s_k = vec![0.0; m];
    if model.is_coordinatewise() {
        let eps = noise_ustats_scalar(samples, theta, m)?;
        let jets = model.coordinate_jets(theta, m)?;
        let w = model.coordinate_weight();
        for k in 1..=m {
            let s: f64 = jets.iter().zip(&eps[k - 1]).map(|(j, e)| j[k] * e).sum();
            s_k[k - 1] = w * s / factorial(k);
        }
    } else {
        let rows = noise_rows(samples, theta)?;
        for k in 1..=effective_order(model, m) {
            let e = distinct_tuple_mean_tensor(&rows, k)?;
            let f = model.derivative_tensor(theta, k)?;
            s_k[k - 1] = f.inner(&e)? / factorial(k);
        }
    }
    let remainder = f_true + s_k.iter().sum::<f64>() - estimate;
    Ok(Decomposition {
        s_k,
        remainder,
        f_true,
        estimate,
    })
}

/// Both sides of the 1-d remainder identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `Σ_k ⟨J^{m-k} Δ^{(m)}, ε̄^{m-k} ε̄^{(k)}⟩ / ((-1)^{m-k} k!)` by quadrature.
    pub by_quadrature: f64,
    /// `f(θ) + Σ_k f^{(k)}(θ) ε̄^{(k)}/k! - f̂`.
    pub by_reconstruction: f64,
    pub residual: f64,
}

/// `J^α h = ∫₀¹ h(t) (1-t)^{α-1} dt / Γ(α)`, `J⁰h = h(1)`.
pub fn riemann_liouville(alpha: usize, h: impl Fn(f64) -> f64, quad: &QuadSettings) -> Result<f64> {
    if alpha == 0 {
        return Ok(h(1.0));
    }
    let a = alpha as f64;
    Ok(integrate_adaptive(0.0, 1.0, quad, |t| h(t) * (1.0 - t).powi(alpha as i32 - 1))? / gamma(a))
}

pub fn verify_identity(
    model: &FunctionalModel,
    theta: f64,
    samples: &SampleMatrix,
    m: usize,
    quad: &QuadSettings,
) -> Result<IdentityCheck> {
    if model.d() != 1 || samples.d() != 1 {
        return Err(HodseError::input("the identity check is one-dimensional"));
    }
    let est = hodse_estimate(samples, model, m)?;
    let dec = decompose_with(samples, model, m, &[theta], est.value)?;
    let c = center(samples)?;
    let xbar = c.mean[0];
    let eps_bar = xbar - theta;
    let mut eps_k = vec![1.0];
    eps_k.extend(noise_ustats_scalar(samples, &[theta], m)?.into_iter().map(|v| v[0]));
    let dm = |x: f64| -> Result<f64> {
        if model.is_coordinatewise() {
            Ok(model.coordinate_jets(&[x], m)?[0][m])
        } else {
            Ok(model.derivative_tensor(&[x], m)?.data()[0])
        }
    };
    let g0 = dm(xbar)?;
    let mut err = None;
    let delta = |t: f64| match dm(xbar + t * (theta - xbar)) {
        Ok(v) => v - g0,
        Err(e) => {
            if err.is_none() {
                err = Some(e);
            }
            0.0
        }
    };
    let delta = std::cell::RefCell::new(delta);
    let mut rem = 0.0;
    for k in 0..=m {
        let j = riemann_liouville(m - k, |t| (delta.borrow_mut())(t), quad)?;
        let sign = if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
        rem += sign * j * eps_bar.powi((m - k) as i32) * eps_k[k] / factorial(k);
    }
    drop(delta);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(IdentityCheck {
        by_quadrature: rem,
        by_reconstruction: dec.remainder,
        residual: (rem - dec.remainder).abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderBound {
    pub bound: f64,
    /// Summand for each `k = 0..m`.
    pub components: Vec<f64>,
}

/// `Σ_k M ‖ε̄‖^{s-k} ⟨ε̄^{(k)}, ε̄^{(k)}⟩^{1/2} / (Γ(s-k+1) k!)` where `M` bounds
/// the Hölder ratio `‖Δ^{(m)}(t)‖ / (t‖ε̄‖)^{s-m}`; Hilbert-Schmidt norms for `d > 1`.
pub fn remainder_bound(
    samples: &SampleMatrix,
    theta: &[f64],
    m: usize,
    s: f64,
    holder_norm: f64,
) -> Result<RemainderBound> {
    if theta.len() != samples.d() {
        return Err(HodseError::input("θ dimension does not match the samples"));
    }
    if !(s > m as f64 && s <= m as f64 + 1.0) {
        return Err(HodseError::input(format!("need m = ceil(s) - 1, got m = {m}, s = {s}")));
    }
    if !(holder_norm >= 0.0) {
        return Err(HodseError::input("holder norm must be non-negative"));
    }
    let c = center(samples)?;
    let eps_bar: f64 = c
        .mean
        .iter()
        .zip(theta)
        .map(|(x, t)| (x - t) * (x - t))
        .sum::<f64>()
        .sqrt();
    let mut norms = vec![1.0];
    if samples.d() == 1 {
        norms.extend(noise_ustats_scalar(samples, theta, m)?.into_iter().map(|v| v[0].abs()));
    } else {
        let rows = noise_rows(samples, theta)?;
        for k in 1..=m {
            norms.push(distinct_tuple_mean_tensor(&rows, k)?.hs_norm());
        }
    }
    let components: Vec<f64> = (0..=m)
        .map(|k| holder_norm * eps_bar.powf(s - k as f64) * norms[k] / (gamma(s - k as f64 + 1.0) * factorial(k)))
        .collect();
    Ok(RemainderBound {
        bound: components.iter().sum(),
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{make_separable, parse_polynomial, Custom1d, F0Spec};
    use crate::smoothing::SmoothedFunctional;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn col(v: &[f64]) -> SampleMatrix {
        SampleMatrix::from_column(v).unwrap()
    }

    #[test]
    fn square_example() {
        let f = FunctionalModel::Polynomial(parse_polynomial("x^2", 1).unwrap());
        let r = hodse_estimate(&col(&[1.0, 3.0]), &f, 1).unwrap();
        assert_eq!(r.value, 4.0);
        let s = col(&[1.0, 3.0, 4.0]);
        let r = hodse_estimate(&s, &f, 2).unwrap();
        // x̄² - s²/n with s² the unbiased sample variance
        let xbar: f64 = 8.0 / 3.0;
        let s2 = [1.0f64, 3.0, 4.0].iter().map(|x| (x - xbar).powi(2)).sum::<f64>() / 2.0;
        assert!((r.value - (xbar * xbar - s2 / 3.0)).abs() < 1e-13);
        let r = hodse_estimate(&col(&[1.0, 3.0]), &f, 2).unwrap();
        assert!((r.value - 3.0).abs() < 1e-14);
        assert!(matches!(
            hodse_estimate(&col(&[1.0, 3.0]), &f, 3).unwrap_err(),
            HodseError::Contract(_)
        ));
    }

    #[test]
    fn linear_functional_ignores_order() {
        let f = FunctionalModel::Polynomial(parse_polynomial("2*x1 - x2", 2).unwrap());
        let s = SampleMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 5.0], vec![0.5, -1.0], vec![3.0, 1.0]]).unwrap();
        let mean = [6.5 / 4.0, 5.0 / 4.0];
        for m in 1..=3 {
            let r = hodse_estimate(&s, &f, m).unwrap();
            assert_eq!(r.value, 2.0 * mean[0] - mean[1]);
            let b = bootstrap_estimate(&s, &f, m, 10, 3).unwrap();
            assert_eq!(b.value, r.value);
        }
    }

    #[test]
    fn exhaustive_rademacher_unbiasedness() {
        let f = FunctionalModel::Polynomial(parse_polynomial("x^3 - 2*x^2 + x", 1).unwrap());
        let theta = 0.7;
        let n = 8;
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let xs: Vec<f64> = (0..n).map(|j| theta + if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            total += hodse_estimate(&col(&xs), &f, 3).unwrap().value;
        }
        let mean = total / (1u32 << n) as f64;
        assert!((mean - f.eval(&[theta]).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn separable_square_is_unbiased_norm_estimator() {
        let rows = vec![vec![1.0, -0.5, 2.0], vec![0.3, 0.1, 1.0], vec![-0.7, 0.4, 2.5], vec![1.1, 0.0, 1.5]];
        let s = SampleMatrix::from_rows(&rows).unwrap();
        let f = make_separable(F0Spec::Square, 3, None).unwrap();
        let r = separable_estimate(&s, &f, 2).unwrap();
        let n = 4.0;
        let mut want = 0.0;
        for a in 0..3 {
            let c = s.column(a);
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            want += mean * mean - var / n;
        }
        assert!((r.value - want / 3.0).abs() < 1e-13);
        let r3 = separable_estimate(&s, &f, 3).unwrap();
        assert!((r3.value - r.value).abs() < 1e-12);
        let dense = FunctionalModel::Polynomial(PolynomialModel::squared_norm_over_d(3));
        assert!((hodse_estimate(&s, &dense, 2).unwrap().value - r.value).abs() < 1e-13);
    }

    #[test]
    fn separable_d1_matches_custom() {
        let s = col(&[0.1, 0.5, -0.3, 0.9, 0.0]);
        let a = separable_estimate(&s, &make_separable(F0Spec::Sin, 1, None).unwrap(), 4).unwrap();
        let b = hodse_estimate(&s, &FunctionalModel::Custom(Custom1d::Sin), 4).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn plug_in_examples() {
        let s = col(&[1.0, 3.0]);
        let f = FunctionalModel::Polynomial(parse_polynomial("x^2", 1).unwrap());
        assert_eq!(plug_in_estimate(&s, &f).unwrap(), hodse_estimate(&s, &f, 1).unwrap().value);
        let abs = make_separable(F0Spec::Abs, 1, Some(SmoothedFunctional::abs(0.5).unwrap())).unwrap();
        assert_eq!(plug_in_estimate(&col(&[-1.0, -2.0]), &abs).unwrap(), 1.5);
    }

    #[test]
    fn bootstrap_exhaustive_equals_estimate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = FunctionalModel::Polynomial(parse_polynomial("x1^3 + x1*x2^2 - 2*x2^3 + x1*x2", 2).unwrap());
        for n in 4..=6 {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let s = SampleMatrix::from_rows(&rows).unwrap();
            for m in 2..=3 {
                let a = bootstrap_exhaustive(&s, &f, m).unwrap().value;
                let b = hodse_estimate(&s, &f, m).unwrap().value;
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_of_polynomial_has_zero_remainder() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let f = FunctionalModel::Polynomial(parse_polynomial("x1^2*x2 + x2^3 - x1", 2).unwrap());
        let theta = [0.4, -0.2];
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| theta.iter().map(|t| t + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let s = SampleMatrix::from_rows(&rows).unwrap();
        let dec = decompose(&s, &f, 3, &theta).unwrap();
        assert!(dec.remainder.abs() < 1e-10, "{}", dec.remainder);
        let still = SampleMatrix::from_rows(&vec![theta.to_vec(); 5]).unwrap();
        let dec = decompose(&still, &f, 3, &theta).unwrap();
        assert!(dec.s_k.iter().all(|v| v.abs() < 1e-15));
        assert!(dec.remainder.abs() < 1e-15);
    }

    #[test]
    fn identity_holds_for_exp() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let xs: Vec<f64> = (0..20).map(|_| 0.3 + rng.sample::<f64, _>(StandardNormal)).collect();
        let s = col(&xs);
        let check = verify_identity(&FunctionalModel::Custom(Custom1d::Exp), 0.3, &s, 4, &QuadSettings::default()).unwrap();
        assert!(check.residual < 1e-8, "{check:?}");
        assert!(check.by_reconstruction.abs() > 1e-6);
        let poly = FunctionalModel::Polynomial(parse_polynomial("x^3 - 2*x", 1).unwrap());
        let c = verify_identity(&poly, 0.3, &s, 4, &QuadSettings::default()).unwrap();
        assert!(c.by_quadrature.abs() <= 1e-12 && c.by_reconstruction.abs() <= 1e-12, "{c:?}");
    }

    #[test]
    fn identity_residual_tracks_quadrature_tolerance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let xs: Vec<f64> = (0..20).map(|_| 0.3 + rng.sample::<f64, _>(StandardNormal)).collect();
        let s = col(&xs);
        let f = FunctionalModel::Custom(Custom1d::Exp);
        let at = |tol: f64| {
            let q = QuadSettings {
                order: 1,
                tol,
                initial_panels: 1,
                max_panels: 1 << 20,
            };
            verify_identity(&f, 0.3, &s, 4, &q).unwrap().residual
        };
        let (loose, tight) = (at(1e-3), at(1e-5));
        assert!(tight * 10.0 <= loose, "{loose:e} -> {tight:e}");
    }

    #[test]
    fn remainder_bound_examples() {
        let still = col(&[0.5; 6]);
        assert_eq!(remainder_bound(&still, &[0.5], 3, 4.0, 1.0).unwrap().bound, 0.0);
        let s = col(&[0.1, 0.9, 0.4, -0.2, 0.6]);
        assert_eq!(remainder_bound(&s, &[0.2], 3, 4.0, 0.0).unwrap().bound, 0.0);
        assert!(remainder_bound(&s, &[0.2], 3, 5.0, 1.0).is_err());
        let dec = decompose(&s, &FunctionalModel::Custom(Custom1d::Sin), 3, &[0.2]).unwrap();
        let b = remainder_bound(&s, &[0.2], 3, 4.0, 1.0).unwrap();
        assert!(dec.remainder.abs() <= b.bound);
    }
}
