use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_hodse");
const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

fn hodse(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("HODSE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .parse()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn estimate_square_of_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "1\n3\n");
    let o = hodse(&["estimate", &data, "-f", "poly:x1^2", "-m", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!((field(&out, "value") - 3.0).abs() < 1e-12);
    assert_eq!(field(&out, "m"), 2.0);
    assert!(out.contains("path = "));
    assert!(out.contains("term[2] = "));
}

#[test]
fn linear_estimate_ignores_order() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "1,2\r\n3,-4\r\n0.5,1e-1\r\n2,2\r\n");
    let values: Vec<f64> = ["1", "2", "3"]
        .iter()
        .map(|m| field(&stdout(&hodse(&["estimate", &data, "-f", "poly:2*x1 - x2", "-m", m])), "value"))
        .collect();
    let expected = 2.0 * 6.5 / 4.0 - (2.0 - 4.0 + 0.1 + 2.0) / 4.0;
    for v in values {
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }
}

#[test]
fn estimate_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "0.1,0.2,0.3\n-0.2,0.4,0.1\n0.3,0.0,-0.5\n0.7,0.1,0.2\n");
    let out = dir.path().join("est.json");
    let o = hodse(&["estimate", &data, "-f", "sep:abs:h=0.5", "-m", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["m"], 3);
    assert_eq!(v["h"], 0.5);
    assert_eq!(v["per_order_terms"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.csv", "1\n2\n3\n");
    let bad = write(dir.path(), "bad.csv", "1\n2\nabc\n");

    let o = hodse(&["estimate", &bad, "-f", "poly:x1^2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = hodse(&["estimate", &good, "-f", "poly:x1^9", "--order", "5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n >= m"));

    assert_eq!(hodse(&["estimate", &good, "-f", "nonsense:1"]).status.code(), Some(2));
    assert_eq!(hodse(&["estimate", "/nonexistent/x.csv", "-f", "poly:x1"]).status.code(), Some(2));
    assert_eq!(hodse(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hodse(&["--help"]).status.code(), Some(0));
}

#[test]
fn kernel_table_properties() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = hodse(&["kernel", "-h", "1", "--grid", "-60:60:4801", "--orders", "1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,K_h,f0,f_h,d1,d2");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4801);
    let dx = rows[1][0] - rows[0][0];
    let integral: f64 = rows.windows(2).map(|w| 0.5 * (w[0][1] + w[1][1]) * dx).sum();
    assert!((integral - 1.0).abs() < 1e-4, "∫K = {integral}");
    for (a, b) in rows.iter().zip(rows.iter().rev()) {
        assert!((a[1] - b[1]).abs() < 1e-12);
    }
}

#[test]
fn kernel_bias_shrinks_with_bandwidth() {
    let mut prev = f64::INFINITY;
    for h in ["0.5", "0.1", "0.02"] {
        let o = hodse(&["kernel", "-h", h, "--grid", "-2:2:81", "--orders", "1"]);
        assert_eq!(o.status.code(), Some(0));
        let worst = stdout(&o)
            .lines()
            .skip(1)
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                (v[3] - v[2]).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < prev, "h = {h}: {worst} !< {prev}");
        prev = worst;
    }
}

#[test]
fn smoke_config_is_fast_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{CONFIGS}/smoke.cfg");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let t = Instant::now();
        let o = hodse(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
        assert!(t.elapsed().as_secs_f64() < 5.0);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("hodse"));
        reports.push((
            fs::read(out.join("report.json")).unwrap(),
            fs::read(out.join("replications.csv")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn simulate_thread_override_keeps_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.cfg",
        "schema_version = 1\nfunctional = sep:sin\nfunctional.order = 3\ntheta = uniform:-1,1\nsample.n = 20\n\
         sample.d = 5\nnoise.family = uniform\nnoise.sigma_n = 0.1\nreplications = 30\nseed = 4\n",
    );
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(BIN)
            .args(["simulate", &cfg, "--out", out.to_str().unwrap()])
            .env("HODSE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(out.join("report.json")).unwrap()
    };
    assert_eq!(run("1", "one"), run("3", "three"));
}

#[test]
fn config_schema_errors_list_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "schema_version = 1\nfunctional = sep:abs\nsample.n = oops\ncolour = red\n");
    let o = hodse(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["sample.n", "colour", "sample.d", "seed"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn validate_fast_and_fault() {
    let o = hodse(&["validate", "--fast"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
    assert!(!stdout(&o).contains("clt"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = hodse(&["validate", "--fast", "--inject-fault", "skip-centering", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL ustat-degeneracy")));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn full_validation_passes_on_reference_seed() {
    let o = hodse(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for suite in ["kernel", "variance", "clt"] {
        assert!(stdout(&o).contains(&format!("PASS {suite}")));
    }
}
