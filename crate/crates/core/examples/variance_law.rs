//! Empirical variance of each expansion term against its closed form.

use hodse::functional::FunctionalSpec;
use hodse::simlab::{run_experiment, EstimatorKind, ExperimentConfig, ThetaGenerator};

fn main() -> hodse::Result<()> {
    let mut cfg = ExperimentConfig::new(FunctionalSpec::parse("sep:sin")?, 50, 6, 20_000, 2);
    cfg.order = Some(3);
    cfg.theta = ThetaGenerator::Uniform(-1.0, 1.0);
    cfg.sigma_n = 0.2;
    cfg.estimators = vec![EstimatorKind::Hodse];
    let rep = run_experiment(&cfg)?;
    for o in &rep.per_order {
        println!(
            "k = {}: Var(S_k) {:.4e} ± {:.1e}, predicted {:.4e}",
            o.k, o.var_s_k.value, o.var_s_k.std_error, o.predicted_var_s_k
        );
    }
    Ok(())
}
