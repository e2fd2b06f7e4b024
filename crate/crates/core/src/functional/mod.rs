//! Functionals `f(θ)` with derivative access and variance quantities.

mod covariance;
mod polynomial;
mod spec;
mod spline;
mod taylor;

use std::collections::BTreeMap;

use rand::Rng;

pub use covariance::{effective_rank, predicted_var_s_k, CovarianceModel, VarianceTable};
pub use polynomial::{parse_polynomial, Monomial, PolynomialModel};
pub use spec::FunctionalSpec;
pub use spline::CubicSpline;
pub use taylor::Taylor;

use crate::error::{HodseError, Result};
use crate::smoothing::{SmoothBase, SmoothedFunctional};
use crate::tensor::DenseTensor;

/// One-dimensional base function of a separable functional.
#[derive(Debug, Clone, PartialEq)]
pub enum F0Spec {
    Abs,
    Pow(f64),
    Square,
    Sin,
    Table(CubicSpline),
}

impl F0Spec {
    fn raw(&self, x: f64) -> Result<f64> {
        Ok(match self {
            F0Spec::Abs => x.abs(),
            F0Spec::Pow(p) => x.abs().powf(*p),
            F0Spec::Square => x * x,
            F0Spec::Sin => x.sin(),
            F0Spec::Table(s) => s.jet(x, 0)?[0],
        })
    }

    pub fn label(&self) -> String {
        match self {
            F0Spec::Abs => "abs".into(),
            F0Spec::Pow(p) => format!("pow:{p}"),
            F0Spec::Square => "square".into(),
            F0Spec::Sin => "sin".into(),
            F0Spec::Table(_) => "table".into(),
        }
    }
}

/// `f(θ) = (1/d) Σ_a f₀(θ_a)`, with `f₀` replaced by `f_h` once smoothing is attached.
#[derive(Debug, Clone)]
pub struct SeparableModel {
    pub f0: F0Spec,
    pub d: usize,
    pub smoothing: Option<SmoothedFunctional>,
}

fn sin_jet(x: f64, m: usize) -> Vec<f64> {
    let (s, c) = x.sin_cos();
    (0..=m)
        .map(|k| match k % 4 {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        })
        .collect()
}

impl SeparableModel {
    /// `[g(x), ..., g^{(m)}(x)]` where `g` is `f_h` or the smooth `f₀`.
    pub fn coordinate_jet(&self, x: f64, m: usize) -> Result<Vec<f64>> {
        match (&self.f0, &self.smoothing) {
            (F0Spec::Abs | F0Spec::Pow(_), Some(sf)) => {
                if m == 0 {
                    Ok(vec![sf.eval(x)?])
                } else {
                    sf.jet(x, m)
                }
            }
            (F0Spec::Abs | F0Spec::Pow(_), None) => {
                if m == 0 {
                    Ok(vec![self.f0.raw(x)?])
                } else {
                    Err(HodseError::contract(format!(
                        "f0 = {} is not differentiable at 0; attach a smoothing before derivative queries",
                        self.f0.label()
                    )))
                }
            }
            (F0Spec::Square, _) => {
                let mut v = vec![0.0; m + 1];
                v[0] = x * x;
                if m >= 1 {
                    v[1] = 2.0 * x;
                }
                if m >= 2 {
                    v[2] = 2.0;
                }
                Ok(v)
            }
            (F0Spec::Sin, _) => Ok(sin_jet(x, m)),
            (F0Spec::Table(s), _) => s.jet(x, m),
        }
    }

    /// Value of `g` at `x` without derivatives.
    pub fn coordinate_value(&self, x: f64) -> Result<f64> {
        Ok(self.coordinate_jet(x, 0)?[0])
    }
}

/// Built-in 1-d functionals with derivatives of every order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Custom1d {
    Exp,
    Sin,
    XAtanX,
}

impl Custom1d {
    pub fn jet(&self, x: f64, m: usize) -> Vec<f64> {
        match self {
            Custom1d::Exp => vec![x.exp(); m + 1],
            Custom1d::Sin => sin_jet(x, m),
            Custom1d::XAtanX => {
                let u = Taylor::variable(x, m);
                let mut w = u.mul(&u);
                w.0[0] += 1.0;
                let atan = w.recip().integrate(x.atan());
                u.mul(&atan).derivatives()
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Custom1d::Exp => "exp",
            Custom1d::Sin => "sin",
            Custom1d::XAtanX => "xatan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Polynomial,
    Separable,
    Custom,
}

#[derive(Debug, Clone)]
pub enum FunctionalModel {
    Polynomial(PolynomialModel),
    Separable(SeparableModel),
    Custom(Custom1d),
}

pub fn make_polynomial(coefficients: &BTreeMap<Vec<u32>, f64>, d: usize) -> Result<FunctionalModel> {
    Ok(FunctionalModel::Polynomial(PolynomialModel::new(d, coefficients)?))
}

pub fn make_separable(f0: F0Spec, d: usize, smoothing: Option<SmoothedFunctional>) -> Result<FunctionalModel> {
    if d == 0 {
        return Err(HodseError::input("separable dimension must be at least 1"));
    }
    if let Some(sf) = &smoothing {
        let matches = match (&f0, sf.base) {
            (F0Spec::Abs, SmoothBase::Abs) => true,
            (F0Spec::Pow(p), SmoothBase::Pow(q)) => (p - q).abs() < 1e-15,
            _ => false,
        };
        if !matches {
            return Err(HodseError::input(format!(
                "smoothing base {:?} does not match f0 = {}",
                sf.base,
                f0.label()
            )));
        }
    }
    if let F0Spec::Pow(p) = f0 {
        if !(p > 0.0 && p < 1.0) {
            return Err(HodseError::input(format!("pow exponent must lie in (0, 1), got {p}")));
        }
    }
    Ok(FunctionalModel::Separable(SeparableModel { f0, d, smoothing }))
}

impl FunctionalModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FunctionalModel::Polynomial(_) => ModelKind::Polynomial,
            FunctionalModel::Separable(_) => ModelKind::Separable,
            FunctionalModel::Custom(_) => ModelKind::Custom,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            FunctionalModel::Polynomial(p) => p.d(),
            FunctionalModel::Separable(s) => s.d,
            FunctionalModel::Custom(_) => 1,
        }
    }

    /// Highest derivative order available, `None` when unbounded.
    pub fn derivative_order_max(&self) -> Option<usize> {
        match self {
            FunctionalModel::Separable(s) => match (&s.f0, &s.smoothing) {
                (F0Spec::Abs | F0Spec::Pow(_), None) => Some(0),
                (F0Spec::Table(_), _) => Some(2),
                _ => None,
            },
            _ => None,
        }
    }

    /// Does every coordinate enter through its own 1-d function?
    pub fn is_coordinatewise(&self) -> bool {
        matches!(self, FunctionalModel::Separable(_) | FunctionalModel::Custom(_))
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.d() {
            return Err(HodseError::input(format!(
                "point has dimension {}, functional expects {}",
                theta.len(),
                self.d()
            )));
        }
        Ok(())
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if let Some(max) = self.derivative_order_max() {
            if k > max {
                return Err(HodseError::contract(format!(
                    "derivative of order {k} requested, functional provides up to {max}"
                )));
            }
        }
        Ok(())
    }

    /// `f(θ)`; smoothed separable models return the smoothed value.
    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        match self {
            FunctionalModel::Polynomial(p) => Ok(p.eval(theta)),
            FunctionalModel::Separable(s) => {
                let mut acc = 0.0;
                for &x in theta {
                    acc += s.coordinate_value(x)?;
                }
                Ok(acc / s.d as f64)
            }
            FunctionalModel::Custom(c) => Ok(c.jet(theta[0], 0)[0]),
        }
    }

    /// The estimation target: the unsmoothed `f(θ)`.
    pub fn target(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        match self {
            FunctionalModel::Separable(s) => {
                let mut acc = 0.0;
                for &x in theta {
                    acc += s.f0.raw(x)?;
                }
                Ok(acc / s.d as f64)
            }
            _ => self.eval(theta),
        }
    }

    /// Per-coordinate jets `[g(θ_a), ..., g^{(m)}(θ_a)]`, not divided by `d`.
    pub fn coordinate_jets(&self, theta: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
        self.check_dim(theta)?;
        self.check_order(m)?;
        match self {
            FunctionalModel::Separable(s) => theta.iter().map(|&x| s.coordinate_jet(x, m)).collect(),
            FunctionalModel::Custom(c) => Ok(vec![c.jet(theta[0], m)]),
            FunctionalModel::Polynomial(_) => Err(HodseError::contract(
                "coordinate jets are only defined for coordinatewise functionals",
            )),
        }
    }

    /// Weight applied to each coordinate jet: `1/d` for separable models.
    pub fn coordinate_weight(&self) -> f64 {
        match self {
            FunctionalModel::Separable(s) => 1.0 / s.d as f64,
            _ => 1.0,
        }
    }

    /// Dense `f^{(k)}(θ)`; diagonal for coordinatewise models.
    pub fn derivative_tensor(&self, theta: &[f64], k: usize) -> Result<DenseTensor> {
        self.check_dim(theta)?;
        self.check_order(k)?;
        match self {
            FunctionalModel::Polynomial(p) => p.derivative_tensor(theta, k),
            _ => {
                let jets = self.coordinate_jets(theta, k)?;
                let w = self.coordinate_weight();
                let mut t = DenseTensor::zeros(self.d(), k)?;
                for (a, jet) in jets.iter().enumerate() {
                    t.set(&vec![a; k], w * jet[k]);
                }
                Ok(t)
            }
        }
    }

    /// `f^{(k)}(θ)[v_1, ..., v_k]` without forming a dense tensor.
    pub fn multilinear(&self, theta: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        self.check_dim(theta)?;
        let k = vectors.len();
        if vectors.iter().any(|v| v.len() != self.d()) {
            return Err(HodseError::input("multilinear form: vector dimension mismatch"));
        }
        match self {
            FunctionalModel::Polynomial(p) => p.multilinear(theta, vectors),
            _ => {
                let jets = self.coordinate_jets(theta, k)?;
                let w = self.coordinate_weight();
                Ok(jets
                    .iter()
                    .enumerate()
                    .map(|(a, jet)| w * jet[k] * vectors.iter().map(|v| v[a]).product::<f64>())
                    .sum())
            }
        }
    }
}

/// `⟨f^{(k)}(θ), T⟩` over all `d^k` entries; coordinatewise models touch only the diagonal.
pub fn contract(model: &FunctionalModel, theta: &[f64], k: usize, tensor: &DenseTensor) -> Result<f64> {
    if tensor.order() != k || tensor.dim() != model.d() {
        return Err(HodseError::input(format!(
            "tensor has order {} over R^{}, expected order {k} over R^{}",
            tensor.order(),
            tensor.dim(),
            model.d()
        )));
    }
    match model {
        FunctionalModel::Polynomial(p) => p.derivative_tensor(theta, k)?.inner(tensor),
        _ => {
            let jets = model.coordinate_jets(theta, k)?;
            let w = model.coordinate_weight();
            let diag = tensor.diagonal();
            Ok(jets.iter().zip(&diag).map(|(jet, t)| w * jet[k] * t).sum())
        }
    }
}

/// `V_k = ⟨f^{(k)}(θ), f^{(k)}(θ) ×₁ Σ ⋯ ×_k Σ⟩`.
pub fn v_k(model: &FunctionalModel, theta: &[f64], cov: &CovarianceModel, k: usize) -> Result<f64> {
    if cov.dim() != model.d() {
        return Err(HodseError::input("covariance dimension does not match the functional"));
    }
    if model.is_coordinatewise() {
        // diagonal f^{(k)}: V_k = Σ_{a,b} F_a F_b Σ_ab^k
        let jets = model.coordinate_jets(theta, k)?;
        let w = model.coordinate_weight();
        let f: Vec<f64> = jets.iter().map(|j| w * j[k]).collect();
        return Ok(match cov {
            CovarianceModel::Diagonal(s) => f.iter().zip(s).map(|(fa, sa)| fa * fa * sa.powi(k as i32)).sum(),
            CovarianceModel::Full(_) => {
                let mut acc = 0.0;
                for (a, fa) in f.iter().enumerate() {
                    for (b, fb) in f.iter().enumerate() {
                        acc += fa * fb * cov.entry(a, b).powi(k as i32);
                    }
                }
                acc
            }
        });
    }
    let t = model.derivative_tensor(theta, k)?;
    let g = t.all_mode_product(&cov.to_matrix())?;
    t.inner(&g)
}

/// `V_k`, predicted `Var(S_k)` and the spectral-norm bound for `k = 1..m`.
pub fn variance_table<R: Rng>(
    model: &FunctionalModel,
    theta: &[f64],
    cov: &CovarianceModel,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<VarianceTable> {
    let (sigma, r) = effective_rank(cov)?;
    let mut table = VarianceTable {
        v_k: Vec::with_capacity(m),
        predicted_var_s_k: Vec::with_capacity(m),
        v_k_bound: Vec::with_capacity(m),
    };
    for k in 1..=m {
        let v = v_k(model, theta, cov, k)?;
        table.v_k.push(v);
        table.predicted_var_s_k.push(predicted_var_s_k(n, k, v)?);
        let spec = if model.is_coordinatewise() {
            // diagonal tensor: the largest |entry| for k >= 2, the euclidean norm for k = 1
            let w = model.coordinate_weight();
            let jets = model.coordinate_jets(theta, k)?;
            if k == 1 {
                jets.iter().map(|j| (w * j[1]).powi(2)).sum::<f64>().sqrt()
            } else {
                jets.iter().fold(0.0_f64, |acc, j| acc.max((w * j[k]).abs()))
            }
        } else {
            model.derivative_tensor(theta, k)?.spectral_norm_estimate(20, rng)
        };
        table
            .v_k_bound
            .push(spec * spec * sigma.powi(2 * k as i32) * r.powi(k as i32 - 1));
    }
    Ok(table)
}

/// Grid estimate of `sup |g(x) - g(y)| / |x - y|^β` over all pairs of grid
/// points, where `g = f^{(m)}` and `β = s - m ∈ (0, 1]`.
pub fn holder_norm_grid(g: impl Fn(f64) -> f64, beta: f64, lo: f64, hi: f64, points: usize) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) || points < 2 || !(hi > lo) {
        return Err(HodseError::input("holder grid needs 0 < beta <= 1, points >= 2 and hi > lo"));
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut best = 0.0_f64;
    for i in 0..points {
        for j in i + 1..points {
            best = best.max((gs[i] - gs[j]).abs() / (xs[j] - xs[i]).powf(beta));
        }
    }
    Ok(best)
}
