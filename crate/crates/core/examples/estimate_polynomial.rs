//! Plug-in versus bias-corrected estimate of a cubic functional.

use hodse::estimator::{hodse_estimate, plug_in_estimate};
use hodse::functional::{parse_polynomial, FunctionalModel};
use hodse::simlab::{sample_noise, NoiseFamily, NoiseModel};
use hodse::ustat::SampleMatrix;

fn main() -> hodse::Result<()> {
    let theta = [0.5, -1.0, 2.0];
    let model = FunctionalModel::Polynomial(parse_polynomial("x1^3 + x1*x2*x3 - x3^2", 3)?);
    let noise = sample_noise(&NoiseModel::new(NoiseFamily::Gaussian, 0.3)?, 30, 3, 11)?;
    let vals = noise.values().iter().enumerate().map(|(i, e)| theta[i % 3] + e).collect();
    let samples = SampleMatrix::new(30, 3, vals)?;

    let est = hodse_estimate(&samples, &model, 3)?;
    println!("f(θ)      = {:.6}", model.eval(&theta)?);
    println!("plug-in   = {:.6}", plug_in_estimate(&samples, &model)?);
    println!("estimate  = {:.6} (path {})", est.value, est.path.label());
    for (k, t) in est.per_order_terms.iter().enumerate() {
        println!("  order {} term {t:+.6}", k + 2);
    }
    Ok(())
}
