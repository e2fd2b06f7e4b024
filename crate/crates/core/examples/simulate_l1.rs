//! A reduced-scale l1 risk experiment: plug-in against the corrected estimator.

use hodse::functional::FunctionalSpec;
use hodse::simlab::{run_experiment, ExperimentConfig};

fn main() -> hodse::Result<()> {
    for d in [64, 256] {
        let mut cfg = ExperimentConfig::new(FunctionalSpec::parse("sep:abs")?, 400, d, 40, 1);
        cfg.profile_q = 2;
        cfg.tuning_cap = 12;
        cfg.decompose = false;
        let rep = run_experiment(&cfg)?;
        println!("d = {d}");
        for line in rep.summary_lines() {
            println!("  {line}");
        }
    }
    Ok(())
}
