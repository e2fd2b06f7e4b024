//! The smoothed absolute value and its bias as the bandwidth shrinks.

use hodse::smoothing::{default_profile, kernel_moments, SmoothedFunctional};

fn main() -> hodse::Result<()> {
    let profile = default_profile();
    let mom = kernel_moments(&profile)?;
    println!("∫K = {:.12}, C1 = {:.4}", mom.integral, profile.c1());
    for h in [0.5, 0.1, 0.02] {
        let sf = SmoothedFunctional::abs(h)?;
        let mut worst = 0.0_f64;
        for i in -50..=50 {
            let x = i as f64 * 0.04;
            worst = worst.max((sf.eval(x)? - x.abs()).abs());
        }
        println!("h = {h:<5} max |f_h - |x|| = {worst:.5}, f_h(0) = {:.5}", sf.eval(0.0)?);
    }
    Ok(())
}
