//! Kernel smoothing of `|x|` and `|x|^p` with band-limited kernels.
//!
//! The kernel is the Fourier inversion `K(x) = (2π)^{-1/2} ∫ e^{iζx} Q(ζ) dζ`
//! of a polynomial frequency profile `Q` supported on `[-1, 1]`, and
//! `f_h = K_h * f₀` with `K_h(x) = K(x/h)/h`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use statrs::function::gamma::gamma;

use crate::error::{HodseError, Result};
use crate::numeric::Poly1;
use crate::quadrature::{gl16, integrate_adaptive, integrate_adaptive_vec, integrate_graded, QuadSettings};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Highest kernel derivative order served by [`kernel_eval`].
pub const MAX_KERNEL_ORDER: usize = 12;
/// Reach of the convolution quadrature in kernel units.
pub const Y_MAX: f64 = 1000.0;
/// Largest `|x|/h` accepted before the oscillatory integrals lose digits.
pub const MAX_SCALED_ARG: f64 = 1e4;
/// Beyond this `|x|` the kernel is evaluated by its terminating
/// integration-by-parts expansion.
const ASYMPTOTIC_FROM: f64 = 40.0;
const GRADED_LEVELS: usize = 48;
const TABLE_PANELS: usize = Y_MAX as usize;

/// Values of `Q`, `Q'`, `Q''` at `-1` and `+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessCertificate {
    pub q: [f64; 2],
    pub dq: [f64; 2],
    pub d2q: [f64; 2],
}

impl SmoothnessCertificate {
    pub fn max_abs(&self) -> f64 {
        self.q
            .iter()
            .chain(&self.dq)
            .chain(&self.d2q)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Norms of a profile and the constant `C₁` they certify.
///
/// `c1_terms` are, in order: `√(2/π)‖Q‖₁`, `√(2π) max(‖Q‖₂, ‖Q''‖₂)`,
/// `√π (‖Q‖₂² + ‖Q'‖₂²)^{1/2}`, `√π (‖Q'‖₂² + ‖Q''‖₂²)^{1/2}` and
/// `√π (‖Q‖₂² + 2‖Q'‖₂² + ‖Q''‖₂²)^{1/2}`. The first bounds `2‖K^{(j)}‖_∞`
/// and the derivative growth of `f_h`; the others bound `∫|K|`, `∫|yK|` and
/// `∫|y|^p |K|` through Plancherel. `c1` is their maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAudit {
    pub q0: f64,
    pub l1_norm: f64,
    pub l2_norms: [f64; 3],
    pub c1_terms: [f64; 5],
    pub c1: f64,
}

struct KernelTable {
    /// `K` at the 16 Gauss-Legendre nodes of each unit panel `[i, i+1]`.
    values: Vec<f64>,
}

#[derive(Clone)]
pub struct FrequencyProfile {
    name: String,
    poly: Poly1,
    even: bool,
    certificate: SmoothnessCertificate,
    audit: ProfileAudit,
    table: Arc<OnceLock<KernelTable>>,
}

impl fmt::Debug for FrequencyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrequencyProfile")
            .field("name", &self.name)
            .field("coeffs", &self.poly.coeffs())
            .field("even", &self.even)
            .field("c1", &self.audit.c1)
            .finish()
    }
}

fn l2_norm(p: &Poly1) -> f64 {
    p.mul(p).integrate(-1.0, 1.0).sqrt()
}

impl FrequencyProfile {
    /// Profile `Q(ζ) = Σ coeffs[i] ζ^i` on `[-1, 1]`, zero outside.
    /// Fails unless `Q(0) = (2π)^{-1/2}` and `Q, Q', Q''` vanish at `±1`.
    pub fn polynomial(name: &str, coeffs: Vec<f64>) -> Result<Self> {
        let poly = Poly1::new(coeffs);
        let d1 = poly.derivative();
        let d2 = d1.derivative();
        let certificate = SmoothnessCertificate {
            q: [poly.eval(-1.0), poly.eval(1.0)],
            dq: [d1.eval(-1.0), d1.eval(1.0)],
            d2q: [d2.eval(-1.0), d2.eval(1.0)],
        };
        let q0 = poly.eval(0.0);
        if (q0 - INV_SQRT_2PI).abs() > 1e-12 {
            return Err(HodseError::contract(format!(
                "profile {name}: Q(0) = {q0}, expected 1/sqrt(2π)"
            )));
        }
        if certificate.max_abs() > 1e-12 {
            return Err(HodseError::contract(format!(
                "profile {name}: Q, Q', Q'' must vanish at ±1, got {certificate:?}"
            )));
        }
        let rule = gl16();
        let l1_norm = rule.integrate_panels(-1.0, 1.0, 64, |z| poly.eval(z).abs());
        let l2 = [l2_norm(&poly), l2_norm(&d1), l2_norm(&d2)];
        let sq = |v: f64| v * v;
        let sqrt_pi = PI.sqrt();
        let c1_terms = [
            (2.0 / PI).sqrt() * l1_norm,
            (2.0 * PI).sqrt() * l2[0].max(l2[2]),
            sqrt_pi * (sq(l2[0]) + sq(l2[1])).sqrt(),
            sqrt_pi * (sq(l2[1]) + sq(l2[2])).sqrt(),
            sqrt_pi * (sq(l2[0]) + 2.0 * sq(l2[1]) + sq(l2[2])).sqrt(),
        ];
        let c1 = c1_terms.iter().fold(0.0_f64, |m, &v| m.max(v));
        if !c1.is_finite() {
            return Err(HodseError::contract(format!("profile {name}: C1 is not finite")));
        }
        Ok(FrequencyProfile {
            name: name.to_string(),
            even: poly.is_even(),
            poly,
            certificate,
            audit: ProfileAudit {
                q0,
                l1_norm,
                l2_norms: l2,
                c1_terms,
                c1,
            },
            table: Arc::new(OnceLock::new()),
        })
    }

    /// `Q_q(ζ) = (2π)^{-1/2} (1 - ζ^{2q})³`. `q = 1` is the default profile;
    /// larger `q` flattens `Q` near the origin and lowers the smoothing bias.
    pub fn flat_top(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(HodseError::input("flat-top order must be at least 1"));
        }
        let mut coeffs = vec![0.0; 6 * q + 1];
        for (i, c) in [1.0, -3.0, 3.0, -1.0].into_iter().enumerate() {
            coeffs[2 * q * i] = c * INV_SQRT_2PI;
        }
        let name = if q == 1 { "default".to_string() } else { format!("flat{q}") };
        Self::polynomial(&name, coeffs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn poly(&self) -> &Poly1 {
        &self.poly
    }

    pub fn certificate(&self) -> &SmoothnessCertificate {
        &self.certificate
    }

    pub fn audit(&self) -> &ProfileAudit {
        &self.audit
    }

    pub fn c1(&self) -> f64 {
        self.audit.c1
    }

    /// `Q(ζ)`, zero outside `[-1, 1]`.
    pub fn q(&self, zeta: f64) -> f64 {
        if zeta.abs() > 1.0 {
            0.0
        } else {
            self.poly.eval(zeta)
        }
    }

    /// `∫₀^∞ y K(y) dy` in the Abel sense, `√(2/π)[Q(0) + ∫₀¹ (Q(0) - Q(ζ))/ζ² dζ]`.
    /// Only defined for even profiles.
    fn first_half_moment(&self) -> f64 {
        let c = self.poly.coeffs();
        let reduced = Poly1::new(c.iter().skip(2).map(|v| -v).collect());
        (2.0 / PI).sqrt() * (self.audit.q0 + reduced.integrate(0.0, 1.0))
    }

    fn table(&self) -> &KernelTable {
        self.table.get_or_init(|| {
            let rule = gl16();
            let mut values = Vec::with_capacity(TABLE_PANELS * 16);
            for i in 0..TABLE_PANELS {
                for x in rule.nodes() {
                    let y = i as f64 + 0.5 + 0.5 * x;
                    values.push(kernel_eval(self, y, 0).unwrap_or(f64::NAN));
                }
            }
            KernelTable { values }
        })
    }

    /// `∫_{i0}^{i1} K(y) g(y) dy` over whole unit panels from the cached table.
    fn table_integral(&self, i0: usize, i1: usize, mut g: impl FnMut(f64) -> f64) -> Result<f64> {
        let t = self.table();
        let rule = gl16();
        let mut acc = 0.0;
        for i in i0..i1.min(TABLE_PANELS) {
            let mut panel = 0.0;
            for (q, (x, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
                let y = i as f64 + 0.5 + 0.5 * x;
                panel += w * t.values[i * 16 + q] * g(y);
            }
            acc += 0.5 * panel;
        }
        if !acc.is_finite() {
            return Err(HodseError::numeric("kernel table contains non-finite values", f64::NAN));
        }
        Ok(acc)
    }
}

pub fn default_profile() -> FrequencyProfile {
    FrequencyProfile::flat_top(1).expect("default profile satisfies its own conditions")
}

fn trig(j: usize, v: f64) -> f64 {
    match j % 4 {
        0 => v.cos(),
        1 => -v.sin(),
        2 => -v.cos(),
        _ => v.sin(),
    }
}

/// Multiply `(re, im)` by `i^n`.
fn times_i_pow(z: (f64, f64), n: usize) -> (f64, f64) {
    match n % 4 {
        0 => z,
        1 => (-z.1, z.0),
        2 => (-z.0, -z.1),
        _ => (z.1, -z.0),
    }
}

/// `K^{(j)}(x)` from `∫_{-1}^{1} R e^{iζx} = Σ_l (-1)^l [R^{(l)} e^{iζx}]_{-1}^{1} / (ix)^{l+1}`
/// with `R = ζ^j Q`. Terminates because `R` is a polynomial.
fn kernel_by_parts(profile: &FrequencyProfile, x: f64, j: usize) -> f64 {
    let mut deriv = profile.poly.shift(j);
    let (s, c) = x.sin_cos();
    let mut acc = (0.0, 0.0);
    let mut xpow = x;
    for l in 0..=deriv.degree() {
        let a = deriv.eval(1.0);
        let b = deriv.eval(-1.0);
        let bracket = ((a - b) * c, (a + b) * s);
        // (-1)^l / (ix)^{l+1} = (-1)^l (-i)^{l+1} / x^{l+1} = i^{3(l+1) + 2l} / x^{l+1}
        let z = times_i_pow(bracket, (3 * (l + 1) + 2 * l) % 4);
        acc.0 += z.0 / xpow;
        acc.1 += z.1 / xpow;
        xpow *= x;
        deriv = deriv.derivative();
    }
    INV_SQRT_2PI * times_i_pow(acc, j).0
}

fn kernel_quadrature(profile: &FrequencyProfile, x: f64, j: usize, tol: f64) -> Result<f64> {
    let r = profile.poly.shift(j);
    let settings = QuadSettings {
        tol,
        initial_panels: (x.abs() / 8.0).ceil().max(1.0) as usize,
        ..QuadSettings::default()
    };
    let f = |z: f64| r.eval(z) * trig(j, z * x);
    if profile.even {
        Ok(2.0 * INV_SQRT_2PI * integrate_adaptive(0.0, 1.0, &settings, f)?)
    } else {
        Ok(INV_SQRT_2PI * integrate_adaptive(-1.0, 1.0, &settings, f)?)
    }
}

/// `K^{(j)}(x)`, the real part of `(2π)^{-1/2} ∫ (iζ)^j e^{iζx} Q(ζ) dζ`.
pub fn kernel_eval(profile: &FrequencyProfile, x: f64, j: usize) -> Result<f64> {
    if j > MAX_KERNEL_ORDER {
        return Err(HodseError::input(format!(
            "kernel derivative order {j} exceeds the ceiling {MAX_KERNEL_ORDER}"
        )));
    }
    if !x.is_finite() {
        return Err(HodseError::input("kernel argument must be finite"));
    }
    if x.abs() >= ASYMPTOTIC_FROM {
        Ok(kernel_by_parts(profile, x, j))
    } else {
        kernel_quadrature(profile, x, j, 1e-13)
    }
}

/// `∫K`, `∫|K|`, `∫|yK|` and `∫|y|K` over `[-Y_MAX, Y_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    pub integral: f64,
    pub abs_integral: f64,
    pub abs_first_moment: f64,
    pub abs_y_moment: f64,
}

pub fn kernel_moments(profile: &FrequencyProfile) -> Result<KernelMoments> {
    if !profile.even {
        return Err(HodseError::contract("kernel moments are tabulated for even profiles only"));
    }
    let t = profile.table();
    let rule = gl16();
    let (mut m0, mut a0, mut a1, mut y1) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..TABLE_PANELS {
        for (q, (x, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
            let y = i as f64 + 0.5 + 0.5 * x;
            let k = t.values[i * 16 + q];
            m0 += w * k;
            a0 += w * k.abs();
            a1 += w * (y * k).abs();
            y1 += w * y * k;
        }
    }
    // two halves, each panel has Jacobian 1/2
    Ok(KernelMoments {
        integral: m0,
        abs_integral: a0,
        abs_first_moment: a1,
        abs_y_moment: y1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothBase {
    Abs,
    Pow(f64),
}

impl SmoothBase {
    pub fn p(&self) -> f64 {
        match self {
            SmoothBase::Abs => 1.0,
            SmoothBase::Pow(p) => *p,
        }
    }

    pub fn raw(&self, x: f64) -> f64 {
        match self {
            SmoothBase::Abs => x.abs(),
            SmoothBase::Pow(p) => x.abs().powf(*p),
        }
    }
}

/// `C_p = √(2/π) Γ(p+1) sin(πp/2)`.
pub fn c_p(p: f64) -> f64 {
    (2.0 / PI).sqrt() * gamma(p + 1.0) * (PI * p / 2.0).sin()
}

/// `f_h = K_h * f₀` for `f₀ = |x|` or `|x|^p`.
#[derive(Debug, Clone)]
pub struct SmoothedFunctional {
    pub base: SmoothBase,
    pub profile: FrequencyProfile,
    pub h: f64,
    pub quad: QuadSettings,
    pub c_p: f64,
}

impl SmoothedFunctional {
    pub fn new(base: SmoothBase, profile: FrequencyProfile, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(HodseError::input(format!("bandwidth must be positive, got {h}")));
        }
        if let SmoothBase::Pow(p) = base {
            if !(p > 0.0 && p < 1.0) {
                return Err(HodseError::input(format!("pow exponent must lie in (0, 1), got {p}")));
            }
        }
        if !profile.is_even() {
            return Err(HodseError::contract("smoothing requires an even frequency profile"));
        }
        Ok(SmoothedFunctional {
            c_p: c_p(base.p()),
            base,
            profile,
            h,
            quad: QuadSettings::default(),
        })
    }

    pub fn abs(h: f64) -> Result<Self> {
        Self::new(SmoothBase::Abs, default_profile(), h)
    }

    pub fn pow(p: f64, h: f64) -> Result<Self> {
        Self::new(SmoothBase::Pow(p), default_profile(), h)
    }

    pub fn p(&self) -> f64 {
        self.base.p()
    }

    fn scaled(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(HodseError::input("smoothing argument must be finite"));
        }
        let c = x / self.h;
        if c.abs() > MAX_SCALED_ARG {
            return Err(HodseError::numeric(
                format!("|x|/h = {:.3e} exceeds the oscillatory guard {MAX_SCALED_ARG:e}", c.abs()),
                f64::NAN,
            ));
        }
        Ok(c)
    }

    /// `f_h(x)` by convolution in the spatial domain.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let c = self.scaled(x)?.abs();
        match self.base {
            SmoothBase::Abs => {
                // ∫K(y)|c-y|dy = 2∫₀^c (c-y)K(y)dy + 2∫₀^∞ yK(y)dy for even K
                let top = c.min(Y_MAX);
                let full = top.floor() as usize;
                let mut inner = self.profile.table_integral(0, full, |y| c - y)?;
                let lo = full as f64;
                if top > lo {
                    let mut err = None;
                    let part = gl16().integrate(lo, top, |y| match kernel_eval(&self.profile, y, 0) {
                        Ok(k) => k * (c - y),
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    });
                    if let Some(e) = err {
                        return Err(e);
                    }
                    inner += part;
                }
                Ok(self.h * (2.0 * inner + 2.0 * self.profile.first_half_moment()))
            }
            SmoothBase::Pow(p) => {
                let g = |y: f64| (c - y).abs().powf(p) + (c + y).abs().powf(p);
                let value = if c >= Y_MAX {
                    self.profile.table_integral(0, TABLE_PANELS, g)?
                } else {
                    let k = c.floor() as usize;
                    let lo = k.saturating_sub(2);
                    let hi = (k + 3).min(TABLE_PANELS);
                    let mut total = self.profile.table_integral(0, lo, g)?
                        + self.profile.table_integral(hi, TABLE_PANELS, g)?;
                    let mut err = None;
                    let mut fk = |y: f64| match kernel_eval(&self.profile, y, 0) {
                        Ok(kv) => kv * g(y),
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    };
                    if c > lo as f64 {
                        total -= integrate_graded(c, lo as f64 - c, GRADED_LEVELS, &mut fk);
                    }
                    total += integrate_graded(c, hi as f64 - c, GRADED_LEVELS, &mut fk);
                    if let Some(e) = err {
                        return Err(e);
                    }
                    total
                };
                Ok(self.h.powf(p) * value)
            }
        }
    }

    /// `f_h^{(1)}(x), ..., f_h^{(m)}(x)` from the frequency representation
    /// `f_h^{(k)}(x) = h^{p-k} 2C_p ∫₀¹ Q(u) T_k(cu) u^{k-1-p} du`, `c = x/h`,
    /// with `T_k = ±sin` for odd `k` and `±cos` for even `k`.
    pub fn derivatives(&self, x: f64, m: usize) -> Result<Vec<f64>> {
        if m == 0 {
            return Ok(Vec::new());
        }
        let c = self.scaled(x)?;
        let p = self.p();
        let q = &self.profile.poly;
        let signed = |k: usize, v: f64| -> f64 {
            let (s, cs) = v.sin_cos();
            let (base, turn) = if k % 2 == 1 { (s, (k - 1) / 2) } else { (cs, (k - 2) / 2) };
            if turn % 2 == 0 { base } else { -base }
        };
        // integrand in u with the weight u^{-p} factored as `weight`
        let fill = |u: f64, weight: f64, out: &mut [f64]| {
            let base = q.eval(u) * weight;
            let mut upow = 1.0;
            for (i, slot) in out.iter_mut().enumerate() {
                let k = i + 1;
                *slot = base * upow * signed(k, c * u);
                upow *= u;
            }
        };
        let mut acc = vec![0.0; m];
        let mut buf = vec![0.0; m];
        let mut settings = self.quad.clone();
        settings.initial_panels = (c.abs() / 4.0).ceil().max(1.0) as usize;
        if p < 1.0 {
            // u = v^β with β = 1/(1-p) absorbs the u^{-p} singularity on [0, u0]
            let u0 = 1.0 / c.abs().max(1.0);
            let beta = 1.0 / (1.0 - p);
            let v0 = u0.powf(1.0 - p);
            let mut sub = vec![0.0; m];
            crate::quadrature::integrate_graded_vec(0.0, v0, GRADED_LEVELS, &mut sub, |v, out| {
                if v == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return;
                }
                let u = v.powf(beta);
                // du = β v^{β-1} dv and u^{-p} β v^{β-1} = β
                fill(u, beta, out);
            });
            if u0 < 1.0 {
                integrate_adaptive_vec(u0, 1.0, &settings, &mut buf, |u, out| fill(u, u.powf(-p), out))?;
            } else {
                buf.iter_mut().for_each(|b| *b = 0.0);
            }
            for i in 0..m {
                acc[i] = sub[i] + buf[i];
            }
        } else {
            integrate_adaptive_vec(0.0, 1.0, &settings, &mut acc, |u, out| fill(u, 1.0 / u, out))?;
        }
        Ok(acc
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let k = (i + 1) as i32;
                self.h.powf(p - k as f64) * 2.0 * self.c_p * v
            })
            .collect())
    }

    /// `[f_h(x), f_h'(x), ..., f_h^{(m)}(x)]`.
    pub fn jet(&self, x: f64, m: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(m + 1);
        out.push(self.eval(x)?);
        out.extend(self.derivatives(x, m)?);
        Ok(out)
    }

    /// `sup_x |f_h^{(k)}| ≤ 2 C_p h^{p-k} ∫₀¹ |Q(u)| u^{k-1-p} du` for `k ≥ 2`.
    pub fn derivative_sup_bound(&self, k: usize) -> Result<f64> {
        if k < 2 {
            return Err(HodseError::input("sup bound is available for k >= 2"));
        }
        let p = self.p();
        let q = &self.profile.poly;
        let e = k as f64 - 1.0 - p;
        let v = crate::quadrature::integrate_graded(0.0, 1.0, GRADED_LEVELS, |u| q.eval(u).abs() * u.powf(e));
        Ok(self.h.powf(p - k as f64) * 2.0 * self.c_p * v)
    }

    /// `f_h^{(k)}(x) = 2 h^{1-k} K^{(k-2)}(x/h)` for `f₀ = |x|`, `k ≥ 2`.
    pub fn abs_deriv_via_kernel(&self, x: f64, k: usize) -> Result<f64> {
        if self.base != SmoothBase::Abs || k < 2 {
            return Err(HodseError::contract("kernel route needs f0 = |x| and k >= 2"));
        }
        let c = self.scaled(x)?;
        Ok(2.0 * self.h.powi(1 - k as i32) * kernel_eval(&self.profile, c, k - 2)?)
    }
}

pub fn smooth_eval(sf: &SmoothedFunctional, x: f64) -> Result<f64> {
    sf.eval(x)
}

pub fn smooth_deriv(sf: &SmoothedFunctional, x: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(HodseError::input("derivative order must be at least 1"));
    }
    Ok(sf.derivatives(x, k)?[k - 1])
}

/// Bandwidth and expansion-order rules for `d` coordinates at noise level `σ_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningRule {
    pub d: usize,
    pub sigma_n: f64,
    /// `σ_n / √log(d / log d)`
    pub h_theory: f64,
    /// `⌈2⁷ e log(d / log d)⌉`
    pub s_theory: usize,
    pub s_cap: usize,
    pub capped: bool,
}

impl TuningRule {
    /// Expansion order `m = s_cap - 1`.
    pub fn m(&self) -> usize {
        self.s_cap - 1
    }
}

pub fn tuning(d: usize, sigma_n: f64, cap: Option<usize>) -> Result<TuningRule> {
    if d < 3 {
        return Err(HodseError::input(format!("tuning needs d >= 3, got {d}")));
    }
    if !(sigma_n > 0.0 && sigma_n.is_finite()) {
        return Err(HodseError::input(format!("sigma_n must be positive, got {sigma_n}")));
    }
    let df = d as f64;
    let l = (df / df.ln()).ln();
    if l <= 0.0 {
        return Err(HodseError::input(format!("log(d / log d) <= 0 for d = {d}")));
    }
    let s_theory = (128.0 * std::f64::consts::E * l).ceil() as usize;
    let (s_cap, capped) = match cap {
        Some(c) if c < s_theory => (c.max(2), true),
        _ => (s_theory, false),
    };
    if capped {
        log::warn!("expansion order capped: s = {s_cap} instead of {s_theory}");
    }
    Ok(TuningRule {
        d,
        sigma_n,
        h_theory: sigma_n / l.sqrt(),
        s_theory,
        s_cap,
        capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `K(x) = 48 j₃(x) / (π x³)` for the default profile.
    fn kernel_closed_form(x: f64) -> f64 {
        if x.abs() < 2.0 {
            // j3(x)/x³ = Σ_k (-x²/2)^k / (k! (2k+7)!!)
            let mut term = 1.0 / 105.0;
            let mut sum = term;
            for k in 1..30 {
                term *= -x * x / 2.0 / (k as f64 * (2 * k + 7) as f64);
                sum += term;
            }
            return 48.0 / PI * sum;
        }
        let (s, c) = x.sin_cos();
        let j3 = (15.0 / x.powi(3) - 6.0 / x) * s / x - (15.0 / x.powi(2) - 1.0) * c / x;
        48.0 * j3 / (PI * x.powi(3))
    }

    /// `f_h(x) = 2 h^p C_p [Q0/p + ∫₀¹ (Q0 - Q(u) cos(cu)) / u^{1+p} du]`.
    fn regularized_value(sf: &SmoothedFunctional, x: f64) -> f64 {
        let p = sf.p();
        let c = x / sf.h;
        let q0 = INV_SQRT_2PI;
        let coeffs = sf.profile.poly().coeffs().to_vec();
        let g = |u: f64| {
            let qu = sf.profile.q(u);
            let half = (0.5 * c * u).sin();
            // (Q0 - Q(u)) / u^{1+p} term by term
            let drop: f64 = coeffs
                .iter()
                .enumerate()
                .skip(2)
                .map(|(i, a)| -a * u.powf(i as f64 - 1.0 - p))
                .sum();
            drop + 2.0 * qu * half * half / u.powf(1.0 + p)
        };
        let mut total = 0.0;
        let panels = 8 + (c.abs() * 4.0) as usize;
        let rule = gl16();
        // graded toward 0, uniform afterwards
        let start = 1.0 / panels as f64;
        total += integrate_graded(0.0, start, 60, g);
        total += rule.integrate_panels(start, 1.0, panels, g);
        2.0 * sf.h.powf(p) * sf.c_p * (q0 / p + total)
    }

    #[test]
    fn default_profile_examples() {
        let q = default_profile();
        assert!((q.q(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((q.audit().l1_norm - INV_SQRT_2PI * 32.0 / 35.0).abs() < 1e-14);
        assert!(q.certificate().max_abs() < 1e-14);
        assert_eq!(q.q(1.5), 0.0);
        assert!(q.c1().is_finite() && q.c1() > 0.0);
    }

    #[test]
    fn profile_conditions_are_enforced() {
        let bad = FrequencyProfile::polynomial("bad", vec![INV_SQRT_2PI, 0.0, -INV_SQRT_2PI]);
        assert!(matches!(bad.unwrap_err(), HodseError::Contract(_)));
        let bad = FrequencyProfile::polynomial("bad0", vec![1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0]);
        assert!(bad.is_err());
        assert!(FrequencyProfile::flat_top(2).is_ok());
    }

    #[test]
    fn kernel_matches_closed_form() {
        let q = default_profile();
        assert!((kernel_eval(&q, 0.0, 0).unwrap() - 16.0 / (35.0 * PI)).abs() < 1e-14);
        for i in 0..400 {
            let x = -60.0 + 0.3 * i as f64 + 0.0137;
            let got = kernel_eval(&q, x, 0).unwrap();
            let want = kernel_closed_form(x);
            assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
            assert_eq!(got, kernel_eval(&q, -x, 0).unwrap());
        }
        assert!(kernel_eval(&q, 1.0, 13).is_err());
    }

    #[test]
    fn by_parts_agrees_with_quadrature() {
        for q in [default_profile(), FrequencyProfile::flat_top(2).unwrap()] {
            for j in 0..=MAX_KERNEL_ORDER {
                for x in [40.0, 41.3, 57.9, 120.5] {
                    let a = kernel_by_parts(&q, x, j);
                    let b = kernel_quadrature(&q, x, j, 1e-14).unwrap();
                    assert!((a - b).abs() < 1e-12, "j={j} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        let q = default_profile();
        let step = 1e-4;
        for j in 0..6 {
            for x in [0.0, 0.7, 3.1, -8.2, 45.0] {
                let fd = (kernel_eval(&q, x + step, j).unwrap() - kernel_eval(&q, x - step, j).unwrap())
                    / (2.0 * step);
                let d = kernel_eval(&q, x, j + 1).unwrap();
                assert!((fd - d).abs() < 1e-8, "j={j} x={x}");
            }
        }
    }

    #[test]
    fn kernel_integrates_to_one() {
        for q in [default_profile(), FrequencyProfile::flat_top(2).unwrap()] {
            let m = kernel_moments(&q).unwrap();
            assert!((m.integral - 1.0).abs() < 1e-8, "{}", m.integral);
            assert!(m.abs_integral <= q.c1());
            assert!(m.abs_first_moment <= q.c1());
        }
    }

    #[test]
    fn c_p_values() {
        assert!((c_p(0.5) - 0.5).abs() < 1e-14);
        assert!((c_p(1.0) - (2.0 / PI).sqrt()).abs() < 1e-14);
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert!(c_p(p) > 0.0 && c_p(p) <= (2.0 / PI).sqrt() + 1e-15);
        }
    }

    #[test]
    fn abs_value_matches_frequency_oracle() {
        let sf = SmoothedFunctional::abs(0.3).unwrap();
        assert!((sf.eval(0.0).unwrap() - 0.3 * 6.4 / PI).abs() < 1e-12);
        for x in [0.0, 0.05, 0.31, 1.0, -2.2, 7.7, 40.0] {
            let a = sf.eval(x).unwrap();
            let b = regularized_value(&sf, x);
            assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn pow_value_matches_frequency_oracle() {
        for p in [0.5, 0.25] {
            let sf = SmoothedFunctional::pow(p, 0.3).unwrap();
            for x in [0.0, 0.011, 0.3, 1.0, -2.2, 7.7] {
                let a = sf.eval(x).unwrap();
                let b = regularized_value(&sf, x);
                assert!((a - b).abs() < 1e-9, "p={p} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn second_derivative_is_twice_the_kernel() {
        for h in [0.1, 0.5, 1.0] {
            let sf = SmoothedFunctional::abs(h).unwrap();
            for x in [-3.0, -0.2, 0.0, 0.05, 0.9, 4.0] {
                let freq = smooth_deriv(&sf, x, 2).unwrap();
                let kern = 2.0 / h * kernel_eval(&sf.profile, x / h, 0).unwrap();
                assert!((freq - kern).abs() < 1e-8 * h.powi(-1).max(1.0));
                for k in 3..=4 {
                    let a = smooth_deriv(&sf, x, k).unwrap();
                    let b = sf.abs_deriv_via_kernel(x, k).unwrap();
                    assert!((a - b).abs() < 1e-8 * h.powi(1 - k as i32).max(1.0), "k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let step = 1e-5;
        for sf in [
            SmoothedFunctional::abs(1.0).unwrap(),
            SmoothedFunctional::pow(0.5, 1.0).unwrap(),
        ] {
            for x in [-1.3, 0.0, 0.4, 2.5] {
                let jp = sf.jet(x + step, 5).unwrap();
                let jm = sf.jet(x - step, 5).unwrap();
                let j0 = sf.jet(x, 5).unwrap();
                for k in 1..=5 {
                    let fd = (jp[k - 1] - jm[k - 1]) / (2.0 * step);
                    assert!((fd - j0[k]).abs() < 1e-5, "p={} x={x} k={k}: {fd} vs {}", sf.p(), j0[k]);
                }
            }
        }
    }

    #[test]
    fn oscillation_guard() {
        let sf = SmoothedFunctional::abs(1e-5).unwrap();
        assert!(matches!(sf.eval(1.0).unwrap_err(), HodseError::Numeric { .. }));
        assert!(sf.derivatives(1.0, 2).is_err());
    }

    #[test]
    fn tuning_examples() {
        let t = tuning(1024, 1.0, None).unwrap();
        assert!((t.h_theory - 0.4474).abs() < 5e-5);
        assert_eq!(t.s_theory, 1739);
        assert!(!t.capped);
        let t2 = tuning(1024, 2.0, Some(16)).unwrap();
        assert!((t2.h_theory - 2.0 * t.h_theory).abs() < 1e-14);
        assert_eq!(t2.s_theory, t.s_theory);
        assert_eq!(t2.s_cap, 16);
        assert_eq!(t2.m(), 15);
        assert!(t2.capped);
        let mut last = f64::INFINITY;
        for d in [3, 10, 100, 1000, 10_000, 1_000_000] {
            let h = tuning(d, 1.0, None).unwrap().h_theory;
            assert!(h < last);
            last = h;
        }
        assert!(tuning(2, 1.0, None).is_err());
    }
}
