use std::fs;

use hodse::simlab::{resolve, EstimatorKind, ExperimentConfig};

fn load(name: &str) -> ExperimentConfig {
    let path = format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"));
    ExperimentConfig::parse(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_configs_parse_and_round_trip() {
    for entry in fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/configs")).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let cfg = load(&name);
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn l1_scenario_resolves_to_capped_tuning() {
    let cfg = load("abs_d1024.cfg");
    assert_eq!((cfg.n, cfg.d, cfg.replications), (740, 1024, 500));
    assert_eq!(cfg.estimators, vec![EstimatorKind::Plugin, EstimatorKind::Hodse]);
    let sc = resolve(&cfg).unwrap();
    assert_eq!(sc.m, 15);
    let tuning = sc.tuning.unwrap();
    assert!(tuning.capped);
    assert!((sc.h.unwrap() - tuning.h_theory).abs() < 1e-15);
}
