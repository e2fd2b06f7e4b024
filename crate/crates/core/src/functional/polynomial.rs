//! Polynomial functionals with exact derivative tensors.

use std::collections::BTreeMap;

use crate::error::{HodseError, Result};
use crate::tensor::DenseTensor;

/// One monomial `coef · Π θ_var^pow`, factors sorted by variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub factors: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn degree(&self) -> usize {
        self.factors.iter().map(|&(_, e)| e as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    d: usize,
    terms: Vec<Monomial>,
}

fn falling(e: u32, k: usize) -> f64 {
    (0..k).map(|i| (e as f64) - i as f64).product()
}

impl PolynomialModel {
    /// From a map of exponent vectors (length `d`) to coefficients.
    pub fn new(d: usize, coefficients: &BTreeMap<Vec<u32>, f64>) -> Result<Self> {
        if d == 0 {
            return Err(HodseError::input("polynomial dimension must be at least 1"));
        }
        let mut terms = Vec::new();
        for (exps, &coef) in coefficients {
            if exps.len() != d {
                return Err(HodseError::input(format!(
                    "exponent vector of length {} in a {d}-dimensional polynomial",
                    exps.len()
                )));
            }
            if !coef.is_finite() {
                return Err(HodseError::input("polynomial coefficients must be finite"));
            }
            if coef == 0.0 {
                continue;
            }
            let factors = exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(a, &e)| (a, e))
                .collect();
            terms.push(Monomial { coef, factors });
        }
        Ok(PolynomialModel { d, terms })
    }

    /// From sparse monomials; factors on the same variable are merged.
    pub fn from_monomials(d: usize, monomials: Vec<Monomial>) -> Result<Self> {
        let mut map: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for m in monomials {
            let mut e = vec![0u32; d];
            for (a, p) in m.factors {
                if a >= d {
                    return Err(HodseError::input(format!("variable index {a} out of range for d = {d}")));
                }
                e[a] += p;
            }
            *map.entry(e).or_insert(0.0) += m.coef;
        }
        Self::new(d, &map)
    }

    /// `Σ_a θ_a² / d`.
    pub fn squared_norm_over_d(d: usize) -> Self {
        let terms = (0..d)
            .map(|a| Monomial {
                coef: 1.0 / d as f64,
                factors: vec![(a, 2)],
            })
            .collect();
        PolynomialModel { d, terms }
    }

    /// `⟨c, θ⟩`.
    pub fn linear(c: &[f64]) -> Self {
        let terms = c
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(a, &v)| Monomial {
                coef: v,
                factors: vec![(a, 1)],
            })
            .collect();
        PolynomialModel { d: c.len(), terms }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.factors.iter().map(|&(a, e)| theta[a].powi(e as i32)).product::<f64>())
            .sum()
    }

    /// `∂^k f / ∂θ_{a_1} ... ∂θ_{a_k}` for a nondecreasing index tuple.
    pub fn partial(&self, theta: &[f64], sorted_idx: &[usize]) -> f64 {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for &a in sorted_idx {
            match counts.last_mut() {
                Some((v, c)) if *v == a => *c += 1,
                _ => counts.push((a, 1)),
            }
        }
        let mut total = 0.0;
        'terms: for t in &self.terms {
            let mut val = t.coef;
            for &(a, c) in &counts {
                match t.factors.binary_search_by_key(&a, |&(v, _)| v) {
                    Ok(pos) => {
                        let e = t.factors[pos].1;
                        if (e as usize) < c {
                            continue 'terms;
                        }
                        val *= falling(e, c);
                    }
                    Err(_) => continue 'terms,
                }
            }
            for &(a, e) in &t.factors {
                let c = counts
                    .binary_search_by_key(&a, |&(v, _)| v)
                    .map(|p| counts[p].1)
                    .unwrap_or(0);
                val *= theta[a].powi(e as i32 - c as i32);
            }
            total += val;
        }
        total
    }

    pub fn derivative_tensor(&self, theta: &[f64], k: usize) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(self.d, k)?;
        let mut idx = vec![0usize; k];
        let mut sorted = vec![0usize; k];
        for flat in 0..t.data().len() {
            t.unflatten_into(flat, &mut idx);
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            if sorted != idx {
                let canon = t.flat_index(&sorted);
                if canon < flat {
                    t.data_mut()[flat] = t.data()[canon];
                    continue;
                }
            }
            let v = self.partial(theta, &sorted);
            t.data_mut()[flat] = v;
        }
        Ok(t)
    }

    /// `f^{(k)}(θ)[v_1, ..., v_k]` by expanding each monomial at `θ + Σ t_l v_l`
    /// modulo `t_l²` and reading off the coefficient of `t_1 ⋯ t_k`.
    pub fn multilinear(&self, theta: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        let k = vectors.len();
        if k > 20 {
            return Err(HodseError::capacity("multilinear form order above 20"));
        }
        let full = (1usize << k) - 1;
        let mut total = 0.0;
        let mut poly = vec![0.0; 1 << k];
        let mut next = vec![0.0; 1 << k];
        for t in &self.terms {
            if t.degree() < k {
                continue;
            }
            poly.iter_mut().for_each(|v| *v = 0.0);
            poly[0] = t.coef;
            for &(a, e) in &t.factors {
                for _ in 0..e {
                    for s in 0..=full {
                        let mut acc = theta[a] * poly[s];
                        let mut rest = s;
                        while rest != 0 {
                            let l = rest.trailing_zeros() as usize;
                            acc += vectors[l][a] * poly[s & !(1 << l)];
                            rest &= rest - 1;
                        }
                        next[s] = acc;
                    }
                    std::mem::swap(&mut poly, &mut next);
                }
            }
            total += poly[full];
        }
        Ok(total)
    }
}

/// Parse `poly:` expressions such as `x^2`, `2*x1*x2 - 0.5*x3^3 + 1`.
/// `x` is an alias for `x1`; variables are 1-based.
pub fn parse_polynomial(expr: &str, d: usize) -> Result<PolynomialModel> {
    let cleaned: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() {
        return Err(HodseError::input("empty polynomial expression"));
    }
    let mut monomials = Vec::new();
    let mut terms: Vec<(f64, &str)> = Vec::new();
    let bytes = cleaned.as_bytes();
    let mut start = 0;
    let mut sign = 1.0;
    if bytes[0] == b'+' || bytes[0] == b'-' {
        sign = if bytes[0] == b'-' { -1.0 } else { 1.0 };
        start = 1;
    }
    let mut i = start;
    while i <= bytes.len() {
        let at_end = i == bytes.len();
        let split = !at_end
            && (bytes[i] == b'+' || bytes[i] == b'-')
            && i > start
            && !matches!(bytes[i - 1], b'e' | b'E' | b'^' | b'*');
        if at_end || split {
            terms.push((sign, &cleaned[start..i]));
            if !at_end {
                sign = if bytes[i] == b'-' { -1.0 } else { 1.0 };
            }
            start = i + 1;
        }
        i += 1;
    }
    for (sign, term) in terms {
        if term.is_empty() {
            return Err(HodseError::input(format!("malformed polynomial expression '{expr}'")));
        }
        let mut coef = sign;
        let mut factors = Vec::new();
        for factor in term.split('*') {
            if let Some(rest) = factor.strip_prefix('x') {
                let (var, pow) = match rest.split_once('^') {
                    Some((v, p)) => (v, p),
                    None => (rest, "1"),
                };
                let var: usize = if var.is_empty() {
                    1
                } else {
                    var.parse()
                        .map_err(|_| HodseError::input(format!("bad variable 'x{var}' in '{expr}'")))?
                };
                if var == 0 || var > d {
                    return Err(HodseError::input(format!("variable x{var} out of range 1..={d}")));
                }
                let pow: u32 = pow
                    .parse()
                    .map_err(|_| HodseError::input(format!("bad exponent '{pow}' in '{expr}'")))?;
                factors.push((var - 1, pow));
            } else {
                let v: f64 = factor
                    .parse()
                    .map_err(|_| HodseError::input(format!("bad factor '{factor}' in '{expr}'")))?;
                coef *= v;
            }
        }
        monomials.push(Monomial { coef, factors });
    }
    PolynomialModel::from_monomials(d, monomials)
}
