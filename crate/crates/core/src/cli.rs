//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::error::{HodseError, Result};
use crate::estimator::{bootstrap_estimate, hodse_estimate, plug_in_estimate, EstimateResult};
use crate::functional::{FunctionalModel, FunctionalSpec};
use crate::simlab::{run_experiment, ExperimentConfig};
use crate::smoothing::{default_profile, kernel_eval, tuning, FrequencyProfile, SmoothBase, SmoothedFunctional};
use crate::ustat::SampleMatrix;
use crate::validate::{run_validation, Fault, ValidateOptions, REFERENCE_SEED};

/// Exit code for a failed validation suite.
pub const EXIT_VALIDATION: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "hodse", version, about = "Unbiased estimation of smooth and non-smooth functionals")]
pub struct Cli {
    /// Worker threads for simulation fan-out.
    #[arg(long, global = true, env = "HODSE_THREADS")]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v, -vv).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate f(θ) from a headerless CSV of observations.
    #[command(disable_help_flag = true)]
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment described by a config file.
    #[command(disable_help_flag = true)]
    Simulate(SimulateArgs),
    /// Tabulate the kernel, f_h and its derivatives on a grid.
    #[command(disable_help_flag = true)]
    Kernel(KernelArgs),
    /// Run the built-in oracle suites.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Observations: one row per observation, one column per coordinate.
    pub data: PathBuf,
    /// Functional: poly:<expr>, sep:abs, sep:pow:<p>, sep:square, sep:sin, custom:exp.
    #[arg(short = 'f', long)]
    pub functional: String,
    /// Expansion order m (default: tuning rule capped at 24).
    #[arg(short = 'm', long = "order")]
    pub order: Option<usize>,
    /// Bandwidth for smoothed functionals (default: tuning rule).
    #[arg(short = 'h', long = "bandwidth")]
    pub bandwidth: Option<f64>,
    /// Frequency profile: default or flat:<q>.
    #[arg(long, default_value = "default")]
    pub profile: String,
    /// hodse, plugin or bootstrap.
    #[arg(long, default_value = "hodse")]
    pub method: String,
    /// Draws for the bootstrap method.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = REFERENCE_SEED)]
    pub seed: u64,
    /// Also write the record as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, action = ArgAction::Help)]
    pub help: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short = 'm', long = "order")]
    pub order: Option<usize>,
    #[arg(short = 'h', long = "bandwidth")]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Output directory for report.json and replications.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, action = ArgAction::Help)]
    pub help: Option<bool>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, default_value = "default")]
    pub profile: String,
    #[arg(short = 'h', long = "bandwidth", default_value_t = 1.0)]
    pub bandwidth: f64,
    /// Exponent p in (0, 1) for |x|^p; omit for |x|.
    #[arg(short = 'p', long)]
    pub p: Option<f64>,
    /// lo:hi:count
    #[arg(long, default_value = "-5:5:201", allow_hyphen_values = true)]
    pub grid: String,
    /// Derivative orders of f_h to tabulate.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub orders: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, action = ArgAction::Help)]
    pub help: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Only the sub-second suites.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, default_value_t = REFERENCE_SEED)]
    pub seed: u64,
    /// Inject a known defect: skip-centering.
    #[arg(long)]
    pub inject_fault: Option<String>,
    /// Write the results as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses a headerless numeric CSV (LF or CRLF); blank lines are skipped.
pub fn parse_csv(text: &str) -> Result<SampleMatrix> {
    let mut values = Vec::new();
    let mut d = None;
    let mut n = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut col = 1;
        let mut count = 0;
        for field in line.split(',') {
            let t = field.trim();
            let at = col + (field.len() - field.trim_start().len());
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(HodseError::Parse {
                        line: i + 1,
                        column: at,
                        message: format!("expected a finite number, got `{t}`"),
                    })
                }
            }
            col += field.chars().count() + 1;
            count += 1;
        }
        match d {
            None => d = Some(count),
            Some(d) if d != count => {
                return Err(HodseError::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("expected {d} fields, found {count}"),
                })
            }
            _ => {}
        }
        n += 1;
    }
    let d = d.ok_or_else(|| HodseError::input("data file has no rows"))?;
    SampleMatrix::new(n, d, values)
}

pub fn parse_profile(text: &str) -> Result<FrequencyProfile> {
    match text {
        "default" => Ok(default_profile()),
        _ => match text.strip_prefix("flat:").map(str::parse::<usize>) {
            Some(Ok(q)) if q >= 1 => FrequencyProfile::flat_top(q),
            _ => Err(HodseError::input(format!("profile must be `default` or `flat:<q>`, got `{text}`"))),
        },
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HodseError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HodseError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| HodseError::Io(format!("{}: {e}", path.display())))
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// `σ̂_n = max_a s_a / √n` from per-coordinate sample variances.
fn sigma_n_hat(s: &SampleMatrix) -> f64 {
    let n = s.n() as f64;
    (0..s.d())
        .map(|a| {
            let c = s.column(a);
            let mean = c.iter().sum::<f64>() / n;
            (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub functional: String,
    pub n: usize,
    pub d: usize,
    pub h: Option<f64>,
    pub plug_in: f64,
    pub result: EstimateResult,
}

impl EstimateRecord {
    pub fn to_json(&self) -> Value {
        json!({
            "functional": self.functional,
            "n": self.n,
            "d": self.d,
            "h": self.h.map_or(Value::Null, num),
            "m": self.result.m,
            "path": self.result.path.label(),
            "value": num(self.result.value),
            "plug_in": num(self.plug_in),
            "per_order_terms": self.result.per_order_terms.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "value = {}\nm = {}\nh = {}\npath = {}\nplug_in = {}\n",
            self.result.value,
            self.result.m,
            self.h.map_or("none".into(), |h| h.to_string()),
            self.result.path.label(),
            self.plug_in
        );
        for (i, t) in self.result.per_order_terms.iter().enumerate() {
            out.push_str(&format!("term[{}] = {t}\n", i + 2));
        }
        out
    }
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<EstimateRecord> {
    let samples = parse_csv(&read(&args.data)?)?;
    let spec = FunctionalSpec::parse(&args.functional)?;
    let (n, d) = (samples.n(), samples.d());
    let rule = if d >= 3 && n >= 2 {
        Some(tuning(d, sigma_n_hat(&samples).max(f64::MIN_POSITIVE), Some(24))?)
    } else {
        None
    };
    let h = if spec.needs_smoothing() {
        Some(
            args.bandwidth
                .or(spec.bandwidth())
                .or(rule.map(|r| r.h_theory))
                .ok_or_else(|| HodseError::input("give --bandwidth when d < 3"))?,
        )
    } else {
        None
    };
    let model = spec.build(d, h, &parse_profile(&args.profile)?)?;
    let m = match args.order {
        Some(m) => m,
        None => {
            let auto = match &model {
                FunctionalModel::Polynomial(p) => p.degree().max(1),
                _ => rule.map_or(23, |r| r.m()),
            };
            if auto > n {
                log::warn!("default order {auto} lowered to n = {n}");
            }
            auto.min(n).max(1)
        }
    };
    let result = match args.method.as_str() {
        "hodse" => hodse_estimate(&samples, &model, m)?,
        "bootstrap" => bootstrap_estimate(&samples, &model, m, args.draws, args.seed)?,
        "plugin" => {
            let v = plug_in_estimate(&samples, &model)?;
            EstimateResult {
                value: v,
                m: 1,
                base: v,
                per_order_terms: Vec::new(),
                path: crate::estimator::EstimatePath::Dense,
            }
        }
        other => return Err(HodseError::input(format!("unknown method `{other}`"))),
    };
    let record = EstimateRecord {
        functional: spec.to_string(),
        n,
        d,
        h,
        plug_in: plug_in_estimate(&samples, &model)?,
        result,
    };
    if let Some(out) = &args.out {
        write(out, &(serde_json::to_string_pretty(&record.to_json()).expect("json") + "\n"))?;
    }
    Ok(record)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(&read(path)?)
}

/// Runs the experiment and writes the JSON report and per-replication CSV.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<String>> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.order {
        cfg.order = Some(m);
    }
    if let Some(h) = args.bandwidth {
        cfg.bandwidth = Some(h);
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    let (json_path, csv_path) = match &args.out {
        Some(dir) => (dir.join("report.json"), dir.join("replications.csv")),
        None => (
            cfg.output_json.clone().unwrap_or_else(|| PathBuf::from("report.json")),
            cfg.output_csv.clone().unwrap_or_else(|| PathBuf::from("replications.csv")),
        ),
    };
    write(&json_path, &report.to_json_string())?;
    write(&csv_path, &report.to_csv())?;
    let mut lines = report.summary_lines();
    lines.push(format!("wrote {} and {}", json_path.display(), csv_path.display()));
    Ok(lines)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || HodseError::input(format!("grid must be lo:hi:count, got `{text}`"));
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(hi > lo) || count < 2 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

/// Kernel table: `x, K_h, f0, f_h, f_h^{(k)}...`; failed cells are NaN.
pub struct KernelTable {
    pub csv: String,
    pub failed_cells: usize,
}

pub fn cmd_kernel(args: &KernelArgs) -> Result<KernelTable> {
    let grid = parse_grid(&args.grid)?;
    let base = match args.p {
        None => SmoothBase::Abs,
        Some(p) => SmoothBase::Pow(p),
    };
    let sf = SmoothedFunctional::new(base, parse_profile(&args.profile)?, args.bandwidth)?;
    let top = args.orders.iter().copied().max().unwrap_or(0);
    if args.orders.iter().any(|k| *k == 0) {
        return Err(HodseError::input("derivative orders start at 1"));
    }
    let mut csv = String::from("x,K_h,f0,f_h");
    for k in &args.orders {
        csv.push_str(&format!(",d{k}"));
    }
    csv.push('\n');
    let mut failed = 0;
    fn cell(r: Result<f64>, failed: &mut usize) -> f64 {
        r.unwrap_or_else(|_| {
            *failed += 1;
            f64::NAN
        })
    }
    for &x in &grid {
        let h = sf.h;
        let k = cell(kernel_eval(&sf.profile, x / h, 0).map(|v| v / h), &mut failed);
        let fh = cell(sf.eval(x), &mut failed);
        let ders = if top > 0 {
            match sf.derivatives(x, top) {
                Ok(d) => d,
                Err(_) => {
                    failed += args.orders.len();
                    vec![f64::NAN; top]
                }
            }
        } else {
            Vec::new()
        };
        csv.push_str(&format!("{x},{k},{},{fh}", base.raw(x)));
        for &o in &args.orders {
            csv.push_str(&format!(",{}", ders[o - 1]));
        }
        csv.push('\n');
    }
    if failed > 0 {
        log::warn!("{failed} kernel table cells failed and were written as NaN");
    }
    if let Some(out) = &args.out {
        write(out, &csv)?;
    }
    Ok(KernelTable {
        csv,
        failed_cells: failed,
    })
}

/// Returns the rendered result lines and whether every suite passed.
pub fn cmd_validate(args: &ValidateArgs) -> Result<(Vec<String>, bool)> {
    let fault = match args.inject_fault.as_deref() {
        None => None,
        Some("skip-centering") => Some(Fault::SkipCentering),
        Some(other) => return Err(HodseError::input(format!("unknown fault `{other}`"))),
    };
    let results = run_validation(&ValidateOptions {
        fast: args.fast,
        fault,
        seed: args.seed,
    });
    let all = results.iter().all(|r| r.passed);
    if let Some(out) = &args.out {
        let mut root = Map::new();
        root.insert("passed".into(), json!(all));
        root.insert("suites".into(), Value::Array(results.iter().map(|r| r.to_json()).collect()));
        write(out, &(serde_json::to_string_pretty(&Value::Object(root)).expect("json") + "\n"))?;
    }
    let lines = results
        .iter()
        .map(|r| {
            format!(
                "{} {:<18} {:>7.3}s  {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.seconds,
                r.detail
            )
        })
        .collect();
    Ok((lines, all))
}

fn dispatch(cli: &Cli) -> Result<i32> {
    if let Some(t) = cli.threads {
        // a second global build in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match &cli.command {
        Command::Estimate(a) => {
            print!("{}", cmd_estimate(a)?.to_text());
            Ok(0)
        }
        Command::Simulate(a) => {
            for l in cmd_simulate(a)? {
                println!("{l}");
            }
            Ok(0)
        }
        Command::Kernel(a) => {
            let t = cmd_kernel(a)?;
            if a.out.is_none() {
                print!("{}", t.csv);
            }
            Ok(0)
        }
        Command::Validate(a) => {
            let (lines, ok) = cmd_validate(a)?;
            for l in lines {
                println!("{l}");
            }
            Ok(if ok { 0 } else { EXIT_VALIDATION })
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hodse: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_parsing() {
        let s = parse_csv("1,2\r\n3e-1, -4\n\n").unwrap();
        assert_eq!((s.n(), s.d()), (2, 2));
        assert_eq!(s.values(), &[1.0, 2.0, 0.3, -4.0]);
        match parse_csv("1,2\n3,x\n").unwrap_err() {
            HodseError::Parse { line, column, .. } => assert_eq!((line, column), (2, 3)),
            e => panic!("{e}"),
        }
        assert!(matches!(parse_csv("1,2\n3\n").unwrap_err(), HodseError::Parse { line: 2, .. }));
        assert!(parse_csv("nan\n").is_err());
        assert!(parse_csv("\n").is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_grid("1:0:5").is_err());
        assert!(parse_grid("0:1").is_err());
    }
}
