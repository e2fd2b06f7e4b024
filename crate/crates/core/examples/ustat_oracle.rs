//! Fast degenerate U-statistics against literal tuple enumeration.

use hodse::ustat::{brute_force_ustat, center, degenerate_ustat_tensor, SampleMatrix};

fn main() -> hodse::Result<()> {
    let rows = vec![
        vec![0.3, -1.2],
        vec![1.1, 0.4],
        vec![-0.7, 0.9],
        vec![2.0, -0.1],
        vec![0.2, 0.5],
        vec![-1.4, 1.3],
    ];
    let c = center(&SampleMatrix::from_rows(&rows)?)?;
    for k in 1..=4 {
        let fast = degenerate_ustat_tensor(&c, k)?;
        let slow = brute_force_ustat(&c, k)?;
        let gap = fast.data().iter().zip(slow.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("k = {k}: ‖ū‖_HS = {:.6}, max gap {gap:.1e}", fast.hs_norm());
    }
    Ok(())
}
