//! Theoretical risk curves for separable scenarios.

use crate::error::{HodseError, Result};
use crate::functional::{F0Spec, FunctionalModel};
use crate::numeric::factorial;

#[derive(Debug, Clone)]
pub struct OverlayParams<'a> {
    pub model: &'a FunctionalModel,
    pub theta: &'a [f64],
    pub sigma_n: f64,
    /// Integer smoothness index `s = m + 1`.
    pub s: usize,
    /// `(α, C_α)` with `‖f₀ - f_h‖_∞ ≤ C_α h^α`; `None` skips the rate values.
    pub alpha: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlays {
    /// `(1/d) Σ_a (f₀ - f_h)(θ_a)`
    pub bias: f64,
    /// `Σ_{k=1}^{s-1} ‖f_h^{(k)}(θ)‖₂² σ_n^{2k} / ((d²/2) k!)`
    pub kappa: f64,
    /// Upper bound on `‖f_h‖_(s)`, the sup of `|f_h^{(s)}|`.
    pub holder_norm: f64,
    /// `{bias² + κ}^{1/2} + ‖f_h‖_(s) (2^{7/2} σ_n)^s / √(s!)`
    pub error_bound: f64,
    /// `|bias| + (s^{-1/4} + √(2/log d)) C_α σ_n^α / log(d/log d)^{α/2}`
    pub rate_bound: Option<f64>,
    /// `C_α σ_n^α / (log d)^{α/2}`
    pub rate_value: Option<f64>,
}

pub fn theoretical_overlays(params: &OverlayParams<'_>) -> Result<Overlays> {
    let FunctionalModel::Separable(sep) = params.model else {
        return Err(HodseError::input("overlays need a separable functional"));
    };
    let s = params.s;
    if s < 2 {
        return Err(HodseError::input("overlays need s >= 2"));
    }
    let m = s - 1;
    let d = sep.d as f64;
    let sigma = params.sigma_n;
    let jets = params.model.coordinate_jets(params.theta, m)?;
    let bias = params.model.target(params.theta)? - params.model.eval(params.theta)?;
    let mut kappa = 0.0;
    for k in 1..=m {
        let norm2: f64 = jets.iter().map(|j| j[k] * j[k]).sum();
        kappa += norm2 * sigma.powi(2 * k as i32) / (d * d / 2.0 * factorial(k));
    }
    let holder_norm = match (&sep.smoothing, &sep.f0) {
        (Some(sf), _) => sf.derivative_sup_bound(s)?,
        (None, F0Spec::Square) => {
            if s > 2 {
                0.0
            } else {
                2.0
            }
        }
        (None, F0Spec::Sin) => 1.0,
        (None, f0) => return Err(HodseError::input(format!("no derivative bound for `{}`", f0.label()))),
    };
    let error_bound = (bias * bias + kappa).sqrt()
        + holder_norm * (2f64.powf(3.5) * sigma).powi(s as i32) / factorial(s).sqrt();
    let (rate_bound, rate_value) = match params.alpha {
        Some((alpha, c)) if sep.d >= 3 => {
            let ld = d.ln();
            let l = (d / ld).ln();
            let scaled = c * sigma.powf(alpha);
            (
                Some(bias.abs() + ((s as f64).powf(-0.25) + (2.0 / ld).sqrt()) * scaled / l.powf(alpha / 2.0)),
                Some(scaled / ld.powf(alpha / 2.0)),
            )
        }
        _ => (None, None),
    };
    Ok(Overlays {
        bias,
        kappa,
        holder_norm,
        error_bound,
        rate_bound,
        rate_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::make_separable;
    use crate::smoothing::SmoothedFunctional;

    #[test]
    fn far_from_kink_the_bias_vanishes() {
        let sf = SmoothedFunctional::abs(0.1).unwrap();
        let model = make_separable(F0Spec::Abs, 4, Some(sf)).unwrap();
        let at = |t: f64| {
            theoretical_overlays(&OverlayParams {
                model: &model,
                theta: &[t, -t, 2.0 * t, -3.0 * t],
                sigma_n: 0.05,
                s: 4,
                alpha: Some((1.0, 2.5)),
            })
            .unwrap()
        };
        let (near, far) = (at(5.0), at(20.0));
        // algebraic kernel tails: the bias falls off like (h/|θ|)^2
        assert!(near.bias.abs() < 1e-6 && far.bias.abs() < near.bias.abs() / 10.0, "{near:?} {far:?}");
        assert!(near.error_bound.is_finite() && near.kappa > 0.0);
    }

    #[test]
    fn square_kappa_closed_form() {
        let model = make_separable(F0Spec::Square, 3, None).unwrap();
        let theta = [1.0, -2.0, 0.5];
        let sigma: f64 = 0.3;
        let o = theoretical_overlays(&OverlayParams {
            model: &model,
            theta: &theta,
            sigma_n: sigma,
            s: 3,
            alpha: None,
        })
        .unwrap();
        // per-coordinate jets g' = 2θ_a, g'' = 2
        let k1: f64 = theta.iter().map(|t| (2.0 * t) * (2.0 * t)).sum::<f64>() * sigma.powi(2) / (9.0 / 2.0);
        let k2 = 3.0 * 4.0 * sigma.powi(4) / (9.0 / 2.0 * 2.0);
        assert!((o.kappa - k1 - k2).abs() < 1e-14);
        assert_eq!(o.bias, 0.0);
        assert_eq!(o.holder_norm, 0.0);
    }

    #[test]
    fn rate_scales_with_log_d() {
        let sf = SmoothedFunctional::abs(0.3).unwrap();
        let rate = |d: usize| {
            let model = make_separable(F0Spec::Abs, d, Some(sf.clone())).unwrap();
            let theta = vec![0.0; d];
            theoretical_overlays(&OverlayParams {
                model: &model,
                theta: &theta,
                sigma_n: 1.0,
                s: 3,
                alpha: Some((1.0, 2.0)),
            })
            .unwrap()
            .rate_value
            .unwrap()
        };
        let (a, b) = (rate(16), rate(256));
        assert!((a * a / (b * b) - 2.0).abs() < 1e-12);
    }
}
