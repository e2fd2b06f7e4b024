//! Moment condition on the noise for a few families.

use hodse::simlab::{check_noise_condition, CheckMethod, NoiseFamily, NoiseModel};

fn main() -> hodse::Result<()> {
    let cases = [
        ("gaussian", CheckMethod::ClosedForm),
        ("rademacher", CheckMethod::Exhaustive),
        ("uniform", CheckMethod::MonteCarlo { draws: 20_000, seed: 5 }),
        ("student-t:5", CheckMethod::MonteCarlo { draws: 20_000, seed: 5 }),
    ];
    for (name, method) in cases {
        let model = NoiseModel::new(NoiseFamily::parse(name)?, 1.0)?;
        for c in check_noise_condition(&model, 6, 3, method, 1e-12)? {
            println!(
                "{name:<12} k = {}: moment {:>9.4} bound {:>9.4} {}",
                c.k,
                c.moment,
                c.bound,
                if c.pass { "ok" } else { "violated" }
            );
        }
    }
    Ok(())
}
