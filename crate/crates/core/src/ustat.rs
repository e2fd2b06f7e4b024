//! Completely degenerate U-statistics of centered samples.
//!
//! For centered rows `y_j = x_j - x̄`, the order-k statistic is the mean over
//! ordered k-tuples of distinct rows of `y_{j_1} ⊗ ... ⊗ y_{j_k}`.

use crate::error::{HodseError, Result};
use crate::numeric::{ln_falling_factorial, CompensatedSum};
use crate::tensor::{checked_len, DenseTensor, DENSE_BUDGET};

/// Tuples allowed in a brute-force enumeration.
pub const ENUMERATION_BUDGET: usize = 10_000_000;

/// n x d observation table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(HodseError::input("sample matrix must have n >= 1 and d >= 1"));
        }
        if values.len() != n * d {
            return Err(HodseError::input(format!(
                "sample matrix has {} values, expected {n} x {d}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(HodseError::input(format!(
                "non-finite sample at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(SampleMatrix { values, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(HodseError::input("ragged sample rows"));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    /// One-dimensional sample.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn column(&self, a: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.values[j * self.d + a]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredSample {
    /// Rows `x_j - x̄`.
    pub centered: SampleMatrix,
    /// Column means `x̄`.
    pub mean: Vec<f64>,
}

impl CenteredSample {
    pub fn n(&self) -> usize {
        self.centered.n
    }

    pub fn d(&self) -> usize {
        self.centered.d
    }
}

fn column_mean(sample: &SampleMatrix, a: usize) -> f64 {
    let s: CompensatedSum = (0..sample.n).map(|j| sample.values[j * sample.d + a]).collect();
    s.value() / sample.n as f64
}

/// Subtract column means. A second pass removes the rounding residue so the
/// centered columns sum to zero at the scale of the centered values.
pub fn center(sample: &SampleMatrix) -> Result<CenteredSample> {
    let (n, d) = (sample.n, sample.d);
    let mut mean = vec![0.0; d];
    let mut out = sample.values.clone();
    for a in 0..d {
        let m1 = column_mean(sample, a);
        for j in 0..n {
            out[j * d + a] -= m1;
        }
        let resid: CompensatedSum = (0..n).map(|j| out[j * d + a]).collect();
        let m2 = resid.value() / n as f64;
        for j in 0..n {
            out[j * d + a] -= m2;
        }
        mean[a] = m1 + m2;
    }
    Ok(CenteredSample {
        centered: SampleMatrix { values: out, n, d },
        mean,
    })
}

/// `e_1..e_m` of `values` by the streaming update `e_k += y_j e_{k-1}`.
pub fn elementary_symmetric(values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m > values.len() {
        return Err(HodseError::input(format!(
            "order {m} exceeds sample size {}",
            values.len()
        )));
    }
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for &y in values {
        for k in (1..=m).rev() {
            e[k] += y * e[k - 1];
        }
    }
    e.remove(0);
    Ok(e)
}

/// Mean over ordered distinct k-tuples of `prod y_{j_l}`, k = 1..m, for raw
/// (not necessarily centered) scalars.
pub fn distinct_tuple_mean_scalar(values: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = values.len();
    let e = elementary_symmetric(values, m)?;
    Ok(e
        .iter()
        .enumerate()
        .map(|(i, &ek)| {
            let k = i + 1;
            // k! e_k / (n)_k
            let log_ratio = statrs::function::factorial::ln_factorial(k as u64) - ln_falling_factorial(n, k);
            ek * log_ratio.exp()
        })
        .collect())
}

fn centering_tolerance(n: usize, scale: f64) -> f64 {
    10.0 * n as f64 * f64::EPSILON * scale
}

/// Degenerate U-statistics `ū^(1)..ū^(m)` of centered scalars.
pub fn degenerate_ustat_scalar(values: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = values.len();
    let scale = values.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let sum: CompensatedSum = values.iter().copied().collect();
    if sum.value().abs() > centering_tolerance(n, scale) {
        return Err(HodseError::contract(format!(
            "input is not centered: sum {:e} exceeds tolerance {:e}",
            sum.value(),
            centering_tolerance(n, scale)
        )));
    }
    distinct_tuple_mean_scalar(values, m)
}

/// A set partition of `0..k` with its Möbius weight `prod (-1)^{|B|-1} (|B|-1)!`.
#[derive(Debug, Clone)]
struct WeightedPartition {
    blocks: Vec<Vec<usize>>,
    weight: f64,
}

fn set_partitions(k: usize) -> Vec<WeightedPartition> {
    fn rec(i: usize, k: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<WeightedPartition>) {
        if i == k {
            let weight = blocks
                .iter()
                .map(|b| {
                    let s = b.len();
                    let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
                    sign * crate::numeric::factorial(s - 1)
                })
                .product();
            out.push(WeightedPartition {
                blocks: blocks.clone(),
                weight,
            });
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, k, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, k, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// Iterate nondecreasing index tuples of length k over 0..d.
fn for_each_sorted(d: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; k];
    loop {
        f(&idx);
        let mut p = k;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            if idx[p] + 1 < d {
                let v = idx[p] + 1;
                for slot in idx[p..].iter_mut() {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Write `value` at every permutation of the sorted index tuple `sorted`.
fn scatter_symmetric(t: &mut DenseTensor, sorted: &[usize], value: f64) {
    fn rec(t: &mut DenseTensor, rest: &mut Vec<usize>, cur: &mut Vec<usize>, value: f64) {
        if rest.is_empty() {
            t.set(cur, value);
            return;
        }
        for i in 0..rest.len() {
            if i > 0 && rest[i] == rest[i - 1] {
                continue;
            }
            let v = rest.remove(i);
            cur.push(v);
            rec(t, rest, cur, value);
            cur.pop();
            rest.insert(i, v);
        }
    }
    rec(t, &mut sorted.to_vec(), &mut Vec::with_capacity(sorted.len()), value);
}

/// Mean over ordered distinct k-tuples of rows of `y_{j_1} ⊗ ... ⊗ y_{j_k}`,
/// for rows that need not be centered.
pub fn distinct_tuple_mean_tensor(rows: &SampleMatrix, k: usize) -> Result<DenseTensor> {
    let (n, d) = (rows.n, rows.d);
    if k > n {
        return Err(HodseError::input(format!("order {k} exceeds sample size {n}")));
    }
    if checked_len(d, k).map_or(true, |l| l > DENSE_BUDGET) {
        return Err(HodseError::capacity(format!(
            "order-{k} tensor over R^{d} exceeds the dense budget of {DENSE_BUDGET} entries; \
             use the separable path"
        )));
    }
    if k == 0 {
        return Ok(DenseTensor::scalar(1.0));
    }
    // Block power sums P_b[a_1..a_b] = sum_j prod_l y_{j,a_l}, for b = 1..k.
    let mut power: Vec<DenseTensor> = Vec::with_capacity(k);
    for b in 1..=k {
        let mut t = DenseTensor::zeros(d, b)?;
        for_each_sorted(d, b, |idx| {
            let s: CompensatedSum = (0..n)
                .map(|j| {
                    let r = rows.row(j);
                    idx.iter().map(|&a| r[a]).product::<f64>()
                })
                .collect();
            scatter_symmetric(&mut t, idx, s.value());
        });
        power.push(t);
    }
    let partitions = set_partitions(k);
    let norm = (-ln_falling_factorial(n, k)).exp();
    let mut out = DenseTensor::zeros(d, k)?;
    let mut sub = Vec::with_capacity(k);
    for_each_sorted(d, k, |idx| {
        let mut acc = CompensatedSum::default();
        for p in &partitions {
            let mut prod = p.weight;
            for block in &p.blocks {
                sub.clear();
                sub.extend(block.iter().map(|&l| idx[l]));
                prod *= power[block.len() - 1].get(&sub);
            }
            acc.add(prod);
        }
        scatter_symmetric(&mut out, idx, acc.value() * norm);
    });
    Ok(out)
}

/// Dense degenerate U-statistic `ū^(k)` of a centered sample.
pub fn degenerate_ustat_tensor(centered: &CenteredSample, k: usize) -> Result<DenseTensor> {
    distinct_tuple_mean_tensor(&centered.centered, k)
}

/// Literal enumeration of ordered distinct k-tuples. Test oracle.
pub fn brute_force_tuple_mean(rows: &SampleMatrix, k: usize) -> Result<DenseTensor> {
    let (n, d) = (rows.n, rows.d);
    if k > n {
        return Err(HodseError::input(format!("order {k} exceeds sample size {n}")));
    }
    if checked_len(n, k).map_or(true, |l| l > ENUMERATION_BUDGET) {
        return Err(HodseError::capacity(format!(
            "{n}^{k} tuples exceed the enumeration budget of {ENUMERATION_BUDGET}"
        )));
    }
    let mut out = DenseTensor::zeros(d, k)?;
    let mut tuple = vec![0usize; k];
    let mut idx = vec![0usize; k];
    let total = checked_len(n, k).unwrap_or(0);
    let mut count = 0usize;
    for code in 0..total {
        let mut c = code;
        for slot in tuple.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        let distinct = (0..k).all(|i| (0..i).all(|l| tuple[i] != tuple[l]));
        if !distinct {
            continue;
        }
        count += 1;
        for flat in 0..out.data().len() {
            out.unflatten_into(flat, &mut idx);
            let v: f64 = idx.iter().zip(&tuple).map(|(&a, &j)| rows.row(j)[a]).product();
            out.data_mut()[flat] += v;
        }
    }
    out.scale(1.0 / count as f64);
    Ok(out)
}

pub fn brute_force_ustat(centered: &CenteredSample, k: usize) -> Result<DenseTensor> {
    brute_force_tuple_mean(&centered.centered, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingConstants {
    pub k: usize,
    pub n: usize,
    /// `n^k (n-k)! / n!`
    pub c_kn: f64,
    /// `log(n (n-1) ... (n-k+1))`
    pub falling_factorial_log: f64,
}

impl CountingConstants {
    /// `exp((k-1) k / n)`.
    pub fn upper_bound(&self) -> f64 {
        ((self.k as f64 - 1.0) * self.k as f64 / self.n as f64).exp()
    }
}

pub fn counting_constant(n: usize, k: usize) -> Result<CountingConstants> {
    if k == 0 || k > n {
        return Err(HodseError::input(format!("counting constant needs 1 <= k <= n, got k={k}, n={n}")));
    }
    let lf = ln_falling_factorial(n, k);
    let c = (k as f64 * (n as f64).ln() - lf).exp();
    let cc = CountingConstants {
        k,
        n,
        c_kn: c,
        falling_factorial_log: lf,
    };
    debug_assert!(c >= 1.0 - 1e-12 && c <= cc.upper_bound() * (1.0 + 1e-12));
    Ok(cc)
}

/// Degenerate U-statistics up to order `max_order`.
#[derive(Debug, Clone)]
pub struct UStatSet {
    pub max_order: usize,
    /// `per_coordinate[k-1][a] = ū_a^(k)`.
    pub per_coordinate: Vec<Vec<f64>>,
    /// `dense_tensors[k-1] = ū^(k)` when requested.
    pub dense_tensors: Option<Vec<DenseTensor>>,
}

impl UStatSet {
    pub fn compute(centered: &CenteredSample, max_order: usize, dense: bool) -> Result<Self> {
        let d = centered.d();
        let mut per_coordinate = vec![vec![0.0; d]; max_order];
        for a in 0..d {
            let col = centered.centered.column(a);
            let u = degenerate_ustat_scalar(&col, max_order)?;
            for (k, v) in u.into_iter().enumerate() {
                per_coordinate[k][a] = v;
            }
        }
        let dense_tensors = if dense {
            Some(
                (1..=max_order)
                    .map(|k| degenerate_ustat_tensor(centered, k))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(UStatSet {
            max_order,
            per_coordinate,
            dense_tensors,
        })
    }

    pub fn order(&self, k: usize) -> &[f64] {
        &self.per_coordinate[k - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subset_products(values: &[f64], k: usize) -> f64 {
        let n = values.len();
        (0u32..(1 << n))
            .filter(|mask| mask.count_ones() as usize == k)
            .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).product::<f64>())
            .sum()
    }

    #[test]
    fn center_examples() {
        let c = center(&SampleMatrix::from_column(&[5.0]).unwrap()).unwrap();
        assert_eq!(c.centered.values(), &[0.0]);
        assert_eq!(c.mean, vec![5.0]);
        let c = center(&SampleMatrix::from_column(&[1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(c.centered.values(), &[-1.0, 1.0]);
        assert_eq!(c.mean, vec![2.0]);
        let cc = center(&c.centered).unwrap();
        assert!(cc.mean[0].abs() < 1e-15);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(SampleMatrix::new(0, 1, vec![]).is_err());
        assert!(SampleMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn elementary_symmetric_examples() {
        for vals in [vec![-1.0, 0.0, 1.0], vec![-2.0, -1.0, 0.0, 3.0]] {
            let e = elementary_symmetric(&vals, 3).unwrap();
            for k in 1..=3 {
                assert!((e[k - 1] - subset_products(&vals, k)).abs() < 1e-12);
            }
        }
        assert_eq!(elementary_symmetric(&[-1.0, 0.0, 1.0], 3).unwrap(), vec![0.0, -1.0, 0.0]);
        assert_eq!(elementary_symmetric(&[-2.0, -1.0, 0.0, 3.0], 3).unwrap(), vec![0.0, -7.0, 6.0]);
        assert_eq!(elementary_symmetric(&[0.0; 4], 4).unwrap(), vec![0.0; 4]);
        assert!(elementary_symmetric(&[1.0], 2).is_err());
    }

    #[test]
    fn scalar_ustat_examples() {
        let u = degenerate_ustat_scalar(&[-1.0, 1.0], 2).unwrap();
        assert!((u[1] + 1.0).abs() < 1e-15);
        let u = degenerate_ustat_scalar(&[-1.0, 0.0, 1.0], 3).unwrap();
        assert!(u[0].abs() < 1e-15);
        assert!((u[1] + 1.0 / 3.0).abs() < 1e-15);
        assert!(u[2].abs() < 1e-15);
        let err = degenerate_ustat_scalar(&[1.0, 2.0], 2).unwrap_err();
        assert!(matches!(err, HodseError::Contract(_)));
        assert!(matches!(
            degenerate_ustat_scalar(&[0.0, 0.0], 3).unwrap_err(),
            HodseError::Input(_)
        ));
    }

    #[test]
    fn tensor_example_two_by_two() {
        let s = SampleMatrix::from_rows(&[vec![-1.0, -2.0], vec![1.0, 2.0]]).unwrap();
        let c = center(&s).unwrap();
        let t = degenerate_ustat_tensor(&c, 2).unwrap();
        assert_eq!(t.data(), &[-1.0, -2.0, -2.0, -4.0]);
        let b = brute_force_ustat(&c, 2).unwrap();
        assert_eq!(b.data(), t.data());
        let k1 = brute_force_ustat(&c, 1).unwrap();
        assert!(k1.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn tensor_budget() {
        let s = SampleMatrix::new(5, 200, vec![0.0; 1000]).unwrap();
        let c = center(&s).unwrap();
        assert!(matches!(degenerate_ustat_tensor(&c, 4).unwrap_err(), HodseError::Capacity(_)));
        let s = SampleMatrix::new(2000, 1, vec![0.0; 2000]).unwrap();
        let c = center(&s).unwrap();
        assert!(matches!(brute_force_ustat(&c, 3).unwrap_err(), HodseError::Capacity(_)));
    }

    #[test]
    fn partitions_count_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52];
        for k in 1..=5 {
            assert_eq!(set_partitions(k).len(), bell[k]);
        }
        // a single row has no distinct pairs, so the weights cancel
        for k in 2..=5 {
            let s: f64 = set_partitions(k).iter().map(|p| p.weight).sum();
            assert!(s.abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn counting_constant_examples() {
        for n in 1..50 {
            assert!((counting_constant(n, 1).unwrap().c_kn - 1.0).abs() < 1e-12);
        }
        let c = counting_constant(4, 2).unwrap();
        assert!((c.c_kn - 4.0 / 3.0).abs() < 1e-12);
        assert!((c.upper_bound() - 0.5_f64.exp()).abs() < 1e-12);
        for n in 1..=200 {
            for k in 1..=n {
                let c = counting_constant(n, k).unwrap();
                assert!(c.c_kn >= 1.0 - 1e-12);
                assert!(c.c_kn <= c.upper_bound() * (1.0 + 1e-12));
            }
        }
        assert!(counting_constant(3, 4).is_err());
    }

    #[test]
    fn constant_columns_give_zero() {
        let s = SampleMatrix::new(4, 2, vec![3.0; 8]).unwrap();
        let set = UStatSet::compute(&center(&s).unwrap(), 4, true).unwrap();
        for k in 1..=4 {
            assert!(set.order(k).iter().all(|&v| v == 0.0));
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
    }

    fn sample_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1usize..=10, 1usize..=3).prop_flat_map(|(n, d)| {
            (Just(n), Just(d), proptest::collection::vec(-1.0f64..1.0, n * d))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn scalar_matches_brute_force(vals in proptest::collection::vec(-1.0f64..1.0, 1..=10), k in 1usize..=5) {
            prop_assume!(k <= vals.len());
            let c = center(&SampleMatrix::from_column(&vals).unwrap()).unwrap();
            let y = c.centered.column(0);
            let fast = degenerate_ustat_scalar(&y, k).unwrap();
            let brute = brute_force_ustat(&c, k).unwrap();
            let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).powi(k as i32);
            prop_assert!((fast[k - 1] - brute.data()[0]).abs() <= 1e-10 * scale.max(brute.data()[0].abs()) + 1e-300);
            prop_assert!(fast[0].abs() <= 10.0 * vals.len() as f64 * f64::EPSILON);
        }

        #[test]
        fn tensor_matches_brute_force((n, d, vals) in sample_strategy(), k in 1usize..=3) {
            prop_assume!(k <= n);
            let c = center(&SampleMatrix::new(n, d, vals).unwrap()).unwrap();
            let fast = degenerate_ustat_tensor(&c, k).unwrap();
            let brute = brute_force_ustat(&c, k).unwrap();
            let scale = c.centered.max_abs().powi(k as i32);
            for (a, b) in fast.data().iter().zip(brute.data()) {
                prop_assert!((a - b).abs() <= 1e-10 * scale.max(b.abs()) + 1e-300);
            }
            prop_assert!(fast.symmetry_defect() == 0.0);
            let diag = fast.diagonal();
            for a in 0..d {
                let u = degenerate_ustat_scalar(&c.centered.column(a), k).unwrap();
                prop_assert!((diag[a] - u[k - 1]).abs() <= 1e-10 * scale + 1e-300);
            }
        }

        #[test]
        fn translation_scale_and_permutation((n, d, vals) in sample_strategy(), shift in -5.0f64..5.0, lambda in 0.2f64..3.0) {
            let m = n.min(4);
            let base = UStatSet::compute(&center(&SampleMatrix::new(n, d, vals.clone()).unwrap()).unwrap(), m, false).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let sh = UStatSet::compute(&center(&SampleMatrix::new(n, d, shifted).unwrap()).unwrap(), m, false).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * lambda).collect();
            let sc = UStatSet::compute(&center(&SampleMatrix::new(n, d, scaled).unwrap()).unwrap(), m, false).unwrap();
            let mut rows: Vec<Vec<f64>> = vals.chunks(d).map(|r| r.to_vec()).collect();
            rows.reverse();
            rows.rotate_left(n / 2);
            let pe = UStatSet::compute(&center(&SampleMatrix::from_rows(&rows).unwrap()).unwrap(), m, false).unwrap();
            for k in 2..=m {
                for a in 0..d {
                    let b = base.order(k)[a];
                    let tol = 1e-10 * (1.0 + shift.abs()).powi(k as i32);
                    prop_assert!((sh.order(k)[a] - b).abs() <= tol.max(1e-10 * b.abs()));
                    prop_assert!(rel_close(sc.order(k)[a], lambda.powi(k as i32) * b, 1e-10) || (sc.order(k)[a] - lambda.powi(k as i32) * b).abs() < 1e-14);
                    prop_assert!((pe.order(k)[a] - b).abs() <= 1e-12);
                }
            }
        }
    }
}
