//! Noise families and the sub-Gaussian moment condition
//! `E|n⁻¹ Σ_j ε'_j ε_{j,a}|^{2k} ≤ σ_n^{2k} 2^{k-1} k!`.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{HodseError, Result};
use crate::functional::CovarianceModel;
use crate::numeric::{double_factorial_odd, factorial};
use crate::ustat::SampleMatrix;

/// Unit-variance noise shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    Rademacher,
    Uniform,
    /// `N(0, s₁²)` w.p. `1-w`, `N(0, (ratio·s₁)²)` w.p. `w`.
    ScaledMixture { weight: f64, ratio: f64 },
    StudentT { df: f64 },
}

impl NoiseFamily {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (text, None),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| HodseError::input(format!("noise family `{text}`: bad number `{v}`")))
                })
                .collect()
        };
        let fam = match (name, args) {
            ("gaussian", None) => NoiseFamily::Gaussian,
            ("rademacher", None) => NoiseFamily::Rademacher,
            ("uniform", None) => NoiseFamily::Uniform,
            ("mixture", Some(a)) => match nums(a)?.as_slice() {
                [w, r] => NoiseFamily::ScaledMixture { weight: *w, ratio: *r },
                _ => return Err(HodseError::input("mixture takes `mixture:<weight>,<ratio>`")),
            },
            ("student-t", Some(a)) => match nums(a)?.as_slice() {
                [df] => NoiseFamily::StudentT { df: *df },
                _ => return Err(HodseError::input("student-t takes `student-t:<df>`")),
            },
            _ => return Err(HodseError::input(format!("unknown noise family `{text}`"))),
        };
        fam.validate()?;
        Ok(fam)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseFamily::ScaledMixture { weight, ratio } if !(weight > 0.0 && weight < 1.0 && ratio > 0.0) => {
                Err(HodseError::input("mixture needs weight in (0, 1) and a positive ratio"))
            }
            NoiseFamily::StudentT { df } if !(df > 4.0) => Err(HodseError::input("student-t needs df > 4")),
            _ => Ok(()),
        }
    }

    /// Sub-Gaussian noise condition does not hold.
    pub fn outside_theory(&self) -> bool {
        matches!(self, NoiseFamily::StudentT { .. })
    }

    fn is_two_point(&self) -> bool {
        matches!(self, NoiseFamily::Rademacher)
    }

    /// One unit-variance draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Gaussian => rng.sample(StandardNormal),
            NoiseFamily::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseFamily::Uniform => 3f64.sqrt() * rng.gen_range(-1.0..1.0),
            NoiseFamily::ScaledMixture { weight, ratio } => {
                let s1 = 1.0 / ((1.0 - weight) + weight * ratio * ratio).sqrt();
                let z: f64 = rng.sample(StandardNormal);
                if rng.gen::<f64>() < weight {
                    z * s1 * ratio
                } else {
                    z * s1
                }
            }
            NoiseFamily::StudentT { df } => {
                let t = StudentT::new(df).expect("df validated");
                t.sample(rng) / (df / (df - 2.0)).sqrt()
            }
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseFamily::Gaussian => write!(f, "gaussian"),
            NoiseFamily::Rademacher => write!(f, "rademacher"),
            NoiseFamily::Uniform => write!(f, "uniform"),
            NoiseFamily::ScaledMixture { weight, ratio } => write!(f, "mixture:{weight},{ratio}"),
            NoiseFamily::StudentT { df } => write!(f, "student-t:{df}"),
        }
    }
}

/// Observation noise `ε_{j,a} = √n σ_a (L z_j)_a` with unit-variance `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    /// `σ_a` per coordinate, or one value for all.
    pub scale: Vec<f64>,
    /// Cross-coordinate correlation matrix; `None` means uncorrelated.
    pub correlation: Option<DMatrix<f64>>,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily, sigma_n: f64) -> Result<Self> {
        Self::with_scales(family, vec![sigma_n], None)
    }

    pub fn with_scales(family: NoiseFamily, scale: Vec<f64>, correlation: Option<DMatrix<f64>>) -> Result<Self> {
        family.validate()?;
        if scale.is_empty() || scale.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(HodseError::input("noise scales must be finite and non-negative"));
        }
        if let Some(c) = &correlation {
            if !c.is_square() || (0..c.nrows()).any(|i| (c[(i, i)] - 1.0).abs() > 1e-12) {
                return Err(HodseError::input("correlation matrix must be square with unit diagonal"));
            }
            if c.clone().cholesky().is_none() {
                return Err(HodseError::input("correlation matrix must be positive definite"));
            }
        }
        Ok(NoiseModel {
            family,
            scale,
            correlation,
        })
    }

    /// `σ_n = max_a σ_a`, so that `E[ε̄_a²] ≤ σ_n²`.
    pub fn sigma_n(&self) -> f64 {
        self.scale.iter().cloned().fold(0.0, f64::max)
    }

    fn scale_at(&self, a: usize) -> f64 {
        if self.scale.len() == 1 {
            self.scale[0]
        } else {
            self.scale[a]
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.scale.len() != 1 && self.scale.len() != d {
            return Err(HodseError::input(format!("{} noise scales given for d = {d}", self.scale.len())));
        }
        if let Some(c) = &self.correlation {
            if c.nrows() != d {
                return Err(HodseError::input(format!("correlation is {0}x{0}, data has d = {d}", c.nrows())));
            }
        }
        Ok(())
    }

    /// Per-observation covariance `Σ_{ab} = n σ_a σ_b C_{ab}`.
    pub fn covariance(&self, n: usize, d: usize) -> Result<CovarianceModel> {
        self.check_dim(d)?;
        let nf = n as f64;
        match &self.correlation {
            None => CovarianceModel::diagonal((0..d).map(|a| nf * self.scale_at(a).powi(2)).collect()),
            Some(c) => CovarianceModel::full(DMatrix::from_fn(d, d, |a, b| {
                nf * self.scale_at(a) * self.scale_at(b) * c[(a, b)]
            })),
        }
    }

    /// Row-major `n × d` noise draw.
    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, d: usize, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        self.check_dim(d)?;
        let root_n = (n as f64).sqrt();
        let chol = self.correlation.as_ref().map(|c| c.clone().cholesky().expect("validated").l());
        out.clear();
        out.reserve(n * d);
        let mut z = vec![0.0; d];
        for _ in 0..n {
            for v in z.iter_mut() {
                *v = self.family.draw(rng);
            }
            match &chol {
                None => out.extend(z.iter().enumerate().map(|(a, v)| root_n * self.scale_at(a) * v)),
                Some(l) => {
                    for a in 0..d {
                        let mut acc = 0.0;
                        for b in 0..=a {
                            acc += l[(a, b)] * z[b];
                        }
                        out.push(root_n * self.scale_at(a) * acc);
                    }
                }
            }
        }
        Ok(())
    }
}

/// `n × d` noise matrix from a fixed seed.
pub fn sample_noise(model: &NoiseModel, n: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::new();
    model.sample_into(n, d, &mut rng, &mut buf)?;
    SampleMatrix::new(n, d, buf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckMethod {
    ClosedForm,
    /// All `2^{2n}` sign patterns of `(ε', ε)`.
    Exhaustive,
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCheck {
    pub k: usize,
    /// `E|n⁻¹ Σ ε'_j ε_{j,a}|^{2k}` (estimated for Monte Carlo).
    pub moment: f64,
    /// `σ_n^{2k} 2^{k-1} k!`
    pub bound: f64,
    /// `bound - moment`
    pub margin: f64,
    /// Monte Carlo standard error of `moment`.
    pub std_error: Option<f64>,
    pub pass: bool,
}

/// Checks the `2k`-th moment condition for `k = 1..k_max` on one coordinate at the largest scale.
pub fn check_noise_condition(
    model: &NoiseModel,
    n: usize,
    k_max: usize,
    method: CheckMethod,
    tol: f64,
) -> Result<Vec<NoiseCheck>> {
    if n == 0 || k_max == 0 {
        return Err(HodseError::input("noise check needs n >= 1 and k_max >= 1"));
    }
    let sigma = model.sigma_n();
    let bound = |k: usize| sigma.powi(2 * k as i32) * 2f64.powi(k as i32 - 1) * factorial(k);
    let mk = |k: usize, moment: f64, std_error: Option<f64>, pass: bool| NoiseCheck {
        k,
        moment,
        bound: bound(k),
        margin: bound(k) - moment,
        std_error,
        pass,
    };
    let within = |k: usize, moment: f64| moment <= bound(k) * (1.0 + tol);
    match method {
        CheckMethod::ClosedForm => match model.family {
            NoiseFamily::Gaussian => Ok((1..=k_max)
                .map(|k| {
                    let m = sigma.powi(2 * k as i32) * double_factorial_odd(k);
                    mk(k, m, None, within(k, m))
                })
                .collect()),
            NoiseFamily::Rademacher => {
                // n⁻¹ Σ ε'_j ε_j = σ n^{-1/2} Σ r_j with r_j i.i.d. Rademacher
                Ok((1..=k_max)
                    .map(|k| {
                        let raw = rademacher_sum_moment(n, 2 * k);
                        let m = sigma.powi(2 * k as i32) * raw / (n as f64).powi(k as i32);
                        mk(k, m, None, within(k, m))
                    })
                    .collect())
            }
            f => Err(HodseError::input(format!("no closed form for the {f} family"))),
        },
        CheckMethod::Exhaustive => {
            if !model.family.is_two_point() {
                return Err(HodseError::input("exhaustive enumeration needs a two-point family"));
            }
            if n > 12 {
                return Err(HodseError::input(format!("exhaustive enumeration allows n <= 12, got {n}")));
            }
            let amp = (n as f64).sqrt() * sigma;
            let total = 1u64 << (2 * n);
            let mut sums = vec![0.0; k_max];
            for pattern in 0..total {
                let mut t = 0.0;
                for j in 0..n {
                    let e1 = if pattern >> j & 1 == 1 { 1.0 } else { -1.0 };
                    let e2 = if pattern >> (n + j) & 1 == 1 { amp } else { -amp };
                    t += e1 * e2;
                }
                t /= n as f64;
                let t2 = t * t;
                let mut p = 1.0;
                for s in sums.iter_mut() {
                    p *= t2;
                    *s += p;
                }
            }
            Ok(sums
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let m = s / total as f64;
                    mk(i + 1, m, None, within(i + 1, m))
                })
                .collect())
        }
        CheckMethod::MonteCarlo { draws, seed } => {
            if draws < 2 {
                return Err(HodseError::input("Monte Carlo check needs at least 2 draws"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amp = (n as f64).sqrt() * sigma;
            let mut s1 = vec![0.0; k_max];
            let mut s2 = vec![0.0; k_max];
            for _ in 0..draws {
                let mut t = 0.0;
                for _ in 0..n {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    t += sign * amp * model.family.draw(&mut rng);
                }
                t /= n as f64;
                let t2 = t * t;
                let mut p = 1.0;
                for i in 0..k_max {
                    p *= t2;
                    s1[i] += p;
                    s2[i] += p * p;
                }
            }
            let r = draws as f64;
            Ok((0..k_max)
                .map(|i| {
                    let mean = s1[i] / r;
                    let var = (s2[i] / r - mean * mean).max(0.0) * r / (r - 1.0);
                    let se = (var / r).sqrt();
                    // only a violation beyond three standard errors counts
                    let pass = mean - 3.0 * se <= bound(i + 1) * (1.0 + tol);
                    mk(i + 1, mean, Some(se), pass)
                })
                .collect())
        }
    }
}

/// `E(Σ_{j≤n} r_j)^{q}` for i.i.d. Rademacher `r_j`.
fn rademacher_sum_moment(n: usize, q: usize) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0;
    for i in 0..=n {
        let s = 2.0 * i as f64 - n as f64;
        acc += binom * s.powi(q as i32);
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    acc / 2f64.powi(n as i32)
}
