//! Textual functional descriptions: `poly:<expr>`, `sep:abs`, `sep:pow:0.5`,
//! `sep:square`, `sep:sin`, `custom:exp`, with an optional `:h=<v>` suffix.

use std::fmt;

use super::{make_separable, parse_polynomial, Custom1d, F0Spec, FunctionalModel};
use crate::error::{HodseError, Result};
use crate::smoothing::{FrequencyProfile, SmoothBase, SmoothedFunctional};

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalSpec {
    Poly(String),
    Separable { f0: F0Spec, h: Option<f64> },
    Custom(Custom1d),
}

impl FunctionalSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| HodseError::input(format!("functional `{text}`: expected <kind>:<body>")))?;
        match kind {
            "poly" => {
                if rest.trim().is_empty() {
                    return Err(HodseError::input("poly: empty expression"));
                }
                Ok(FunctionalSpec::Poly(rest.to_string()))
            }
            "sep" => {
                let mut parts: Vec<&str> = rest.split(':').collect();
                let mut h = None;
                if let Some(last) = parts.last() {
                    if let Some(v) = last.strip_prefix("h=") {
                        h = Some(parse_positive(v, "h")?);
                        parts.pop();
                    }
                }
                let f0 = match parts.as_slice() {
                    ["abs"] => F0Spec::Abs,
                    ["square"] => F0Spec::Square,
                    ["sin"] => F0Spec::Sin,
                    ["pow", p] => F0Spec::Pow(parse_positive(p, "pow exponent")?),
                    _ => return Err(HodseError::input(format!("unknown separable functional `{rest}`"))),
                };
                if h.is_some() && !matches!(f0, F0Spec::Abs | F0Spec::Pow(_)) {
                    return Err(HodseError::input(format!("`{}` is smooth and takes no bandwidth", f0.label())));
                }
                Ok(FunctionalSpec::Separable { f0, h })
            }
            "custom" => Ok(FunctionalSpec::Custom(match rest {
                "exp" => Custom1d::Exp,
                "sin" => Custom1d::Sin,
                "xatan" => Custom1d::XAtanX,
                _ => return Err(HodseError::input(format!("unknown custom functional `{rest}`"))),
            })),
            _ => Err(HodseError::input(format!("unknown functional kind `{kind}`"))),
        }
    }

    /// Whether building needs a bandwidth.
    pub fn needs_smoothing(&self) -> bool {
        matches!(
            self,
            FunctionalSpec::Separable {
                f0: F0Spec::Abs | F0Spec::Pow(_),
                ..
            }
        )
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            FunctionalSpec::Separable { h, .. } => *h,
            _ => None,
        }
    }

    /// Builds the model over `R^d`; `h_default` is used when the text gives no bandwidth.
    pub fn build(&self, d: usize, h_default: Option<f64>, profile: &FrequencyProfile) -> Result<FunctionalModel> {
        match self {
            FunctionalSpec::Poly(expr) => Ok(FunctionalModel::Polynomial(parse_polynomial(expr, d)?)),
            FunctionalSpec::Custom(c) => {
                if d != 1 {
                    return Err(HodseError::input(format!("custom:{} is one-dimensional, data has d = {d}", c.label())));
                }
                Ok(FunctionalModel::Custom(*c))
            }
            FunctionalSpec::Separable { f0, h } => {
                let smoothing = match f0 {
                    F0Spec::Abs | F0Spec::Pow(_) => {
                        let h = h.or(h_default).ok_or_else(|| {
                            HodseError::input(format!("sep:{} needs a bandwidth", f0.label()))
                        })?;
                        let base = match f0 {
                            F0Spec::Pow(p) => SmoothBase::Pow(*p),
                            _ => SmoothBase::Abs,
                        };
                        Some(SmoothedFunctional::new(base, profile.clone(), h)?)
                    }
                    _ => None,
                };
                make_separable(f0.clone(), d, smoothing)
            }
        }
    }
}

impl fmt::Display for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalSpec::Poly(e) => write!(f, "poly:{e}"),
            FunctionalSpec::Separable { f0, h: Some(h) } => write!(f, "sep:{}:h={h}", f0.label()),
            FunctionalSpec::Separable { f0, h: None } => write!(f, "sep:{}", f0.label()),
            FunctionalSpec::Custom(c) => write!(f, "custom:{}", c.label()),
        }
    }
}

fn parse_positive(v: &str, what: &str) -> Result<f64> {
    match v.trim().parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(HodseError::input(format!("{what} must be a positive number, got `{v}`"))),
    }
}
