//! Both sides of the one-dimensional remainder identity, and the remainder bound.

use hodse::estimator::{decompose, remainder_bound, verify_identity};
use hodse::functional::{Custom1d, FunctionalModel};
use hodse::quadrature::QuadSettings;
use hodse::ustat::SampleMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> hodse::Result<()> {
    let theta = 0.4;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(theta, 0.8).expect("valid normal");
    let xs: Vec<f64> = (0..20).map(|_| normal.sample(&mut rng)).collect();
    let samples = SampleMatrix::from_column(&xs)?;
    for f in [Custom1d::Exp, Custom1d::Sin, Custom1d::XAtanX] {
        let model = FunctionalModel::Custom(f);
        let chk = verify_identity(&model, theta, &samples, 4, &QuadSettings::default())?;
        println!(
            "{:<7} quadrature {:+.3e}  reconstruction {:+.3e}  residual {:.1e}",
            f.label(),
            chk.by_quadrature,
            chk.by_reconstruction,
            chk.residual
        );
    }
    let sin = FunctionalModel::Custom(Custom1d::Sin);
    let rem = decompose(&samples, &sin, 3, &[theta])?.remainder;
    let b = remainder_bound(&samples, &[theta], 3, 4.0, 1.0)?;
    println!("sin, m = 3: |Rem| = {:.3e} <= bound {:.3e}", rem.abs(), b.bound);
    Ok(())
}
