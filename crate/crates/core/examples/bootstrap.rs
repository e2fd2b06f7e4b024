//! Resampling without replacement reproduces the degenerate expansion.

use hodse::estimator::{bootstrap_estimate, bootstrap_exhaustive, hodse_estimate};
use hodse::functional::{parse_polynomial, FunctionalModel};
use hodse::ustat::SampleMatrix;

fn main() -> hodse::Result<()> {
    let model = FunctionalModel::Polynomial(parse_polynomial("x1^3 - x1*x2", 2)?);
    let rows = vec![vec![0.1, 1.0], vec![0.9, -0.4], vec![-0.3, 0.2], vec![1.4, 0.7], vec![0.5, -1.1]];
    let s = SampleMatrix::from_rows(&rows)?;
    println!("estimate             {:.12}", hodse_estimate(&s, &model, 3)?.value);
    println!("exhaustive bootstrap {:.12}", bootstrap_exhaustive(&s, &model, 3)?.value);
    for draws in [100, 1000, 10_000] {
        println!("{draws:>6} draws         {:.12}", bootstrap_estimate(&s, &model, 3, draws, 9)?.value);
    }
    Ok(())
}
