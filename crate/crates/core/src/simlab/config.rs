//! Experiment configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! schema_version = 1
//! functional = sep:abs
//! functional.profile = flat:2
//! tuning.cap = 16
//! theta = zeros
//! sample.n = 740
//! sample.d = 1024
//! noise.family = gaussian
//! noise.sigma_n = 1
//! estimators = plugin,hodse
//! replications = 500
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;

use super::noise::{NoiseFamily, NoiseModel};
use crate::error::{HodseError, Result};
use crate::functional::FunctionalSpec;
use crate::smoothing::{default_profile, FrequencyProfile};

pub const SCHEMA_VERSION: u32 = 1;

const KEYS: &[&str] = &[
    "schema_version",
    "functional",
    "functional.profile",
    "functional.order",
    "functional.bandwidth",
    "tuning.cap",
    "theta",
    "sample.n",
    "sample.d",
    "noise.family",
    "noise.sigma_n",
    "noise.scales",
    "noise.correlation",
    "estimators",
    "bootstrap.draws",
    "replications",
    "seed",
    "diagnostics.decompose",
    "output.json",
    "output.csv",
];

const REQUIRED: &[&str] = &[
    "schema_version",
    "functional",
    "sample.n",
    "sample.d",
    "noise.family",
    "noise.sigma_n",
    "replications",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaGenerator {
    Zeros,
    Constant(f64),
    Uniform(f64, f64),
    /// `k` coordinates of the given magnitude with random positions and signs.
    Sparse { k: usize, magnitude: f64 },
}

impl ThetaGenerator {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || HodseError::input(format!("theta generator `{text}` not understood"));
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        match (name, nums.as_slice()) {
            ("zeros", [""]) => Ok(ThetaGenerator::Zeros),
            ("constant", [c]) => Ok(ThetaGenerator::Constant(num(c)?)),
            ("uniform", [a, b]) => {
                let (a, b) = (num(a)?, num(b)?);
                if !(b > a) {
                    return Err(bad());
                }
                Ok(ThetaGenerator::Uniform(a, b))
            }
            ("sparse", [k, m]) => Ok(ThetaGenerator::Sparse {
                k: k.parse().map_err(|_| bad())?,
                magnitude: num(m)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ThetaGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaGenerator::Zeros => write!(f, "zeros"),
            ThetaGenerator::Constant(c) => write!(f, "constant:{c}"),
            ThetaGenerator::Uniform(a, b) => write!(f, "uniform:{a},{b}"),
            ThetaGenerator::Sparse { k, magnitude } => write!(f, "sparse:{k},{magnitude}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimatorKind {
    Plugin,
    Hodse,
    Bootstrap,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Hodse => "hodse",
            EstimatorKind::Bootstrap => "bootstrap",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "plugin" => Some(EstimatorKind::Plugin),
            "hodse" => Some(EstimatorKind::Hodse),
            "bootstrap" => Some(EstimatorKind::Bootstrap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationSpec {
    None,
    /// Equicorrelation `ρ` off the diagonal.
    Equi(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub functional: FunctionalSpec,
    /// Flat-top exponent `q` of the frequency profile.
    pub profile_q: usize,
    /// `None` selects the tuning rule.
    pub order: Option<usize>,
    pub bandwidth: Option<f64>,
    pub tuning_cap: usize,
    pub theta: ThetaGenerator,
    pub n: usize,
    pub d: usize,
    pub noise_family: NoiseFamily,
    pub sigma_n: f64,
    pub noise_scales: Option<Vec<f64>>,
    pub correlation: CorrelationSpec,
    pub estimators: Vec<EstimatorKind>,
    pub bootstrap_draws: usize,
    pub replications: usize,
    pub seed: u64,
    pub decompose: bool,
    pub output_json: Option<PathBuf>,
    pub output_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the scenario essentials.
    pub fn new(functional: FunctionalSpec, n: usize, d: usize, replications: usize, seed: u64) -> Self {
        ExperimentConfig {
            functional,
            profile_q: 1,
            order: None,
            bandwidth: None,
            tuning_cap: 24,
            theta: ThetaGenerator::Zeros,
            n,
            d,
            noise_family: NoiseFamily::Gaussian,
            sigma_n: 1.0,
            noise_scales: None,
            correlation: CorrelationSpec::None,
            estimators: vec![EstimatorKind::Plugin, EstimatorKind::Hodse],
            bootstrap_draws: 200,
            replications,
            seed,
            decompose: true,
            output_json: None,
            output_csv: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, String> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                let column = line.len() - line.trim_start().len() + 1;
                return Err(HodseError::Parse {
                    line: i + 1,
                    column,
                    message: format!("expected `key = value`, got `{body}`"),
                });
            };
            let key = k.trim().to_string();
            if raw.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(HodseError::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Self::from_entries(&raw)
    }

    /// Validates all entries at once and lists every offending key.
    pub fn from_entries(raw: &BTreeMap<String, String>) -> Result<Self> {
        let mut problems: Vec<String> = Vec::new();
        for k in raw.keys() {
            if !KEYS.contains(&k.as_str()) {
                problems.push(format!("{k}: unknown key"));
            }
        }
        for k in REQUIRED {
            if !raw.contains_key(*k) {
                problems.push(format!("{k}: missing"));
            }
        }
        let mut cfg = ExperimentConfig::new(FunctionalSpec::Poly("x1".into()), 0, 0, 0, 0);
        let mut field = |key: &str, f: &mut dyn FnMut(&str) -> std::result::Result<(), String>| {
            if let Some(v) = raw.get(key) {
                if let Err(e) = f(v) {
                    problems.push(format!("{key}: {e}"));
                }
            }
        };
        let uint = |v: &str| v.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{v}`"));
        let real = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("expected a number, got `{v}`"))
        };
        field("schema_version", &mut |v| match v.parse::<u32>() {
            Ok(SCHEMA_VERSION) => Ok(()),
            _ => Err(format!("unsupported version `{v}`, expected {SCHEMA_VERSION}")),
        });
        field("functional", &mut |v| {
            cfg.functional = FunctionalSpec::parse(v).map_err(|e| e.to_string())?;
            Ok(())
        });
        field("functional.profile", &mut |v| {
            cfg.profile_q = match v {
                "default" => 1,
                _ => match v.strip_prefix("flat:").map(str::parse::<usize>) {
                    Some(Ok(q)) if q >= 1 => q,
                    _ => return Err(format!("expected `default` or `flat:<q>`, got `{v}`")),
                },
            };
            Ok(())
        });
        field("functional.order", &mut |v| {
            cfg.order = match v {
                "auto" => None,
                _ => Some(uint(v)?).filter(|m| *m >= 1).map(Some).ok_or("order must be >= 1")?,
            };
            Ok(())
        });
        field("functional.bandwidth", &mut |v| {
            cfg.bandwidth = match v {
                "auto" => None,
                _ => Some(real(v)?).filter(|h| *h > 0.0).map(Some).ok_or("bandwidth must be > 0")?,
            };
            Ok(())
        });
        field("tuning.cap", &mut |v| {
            cfg.tuning_cap = uint(v)?;
            if cfg.tuning_cap < 3 {
                return Err("cap must be >= 3".into());
            }
            Ok(())
        });
        field("theta", &mut |v| {
            cfg.theta = ThetaGenerator::parse(v).map_err(|e| e.to_string())?;
            Ok(())
        });
        field("sample.n", &mut |v| {
            cfg.n = uint(v)?;
            if cfg.n < 2 {
                return Err("need n >= 2".into());
            }
            Ok(())
        });
        field("sample.d", &mut |v| {
            cfg.d = uint(v)?;
            if cfg.d < 1 {
                return Err("need d >= 1".into());
            }
            Ok(())
        });
        field("noise.family", &mut |v| {
            cfg.noise_family = NoiseFamily::parse(v).map_err(|e| e.to_string())?;
            Ok(())
        });
        field("noise.sigma_n", &mut |v| {
            cfg.sigma_n = real(v)?;
            if !(cfg.sigma_n > 0.0) {
                return Err("sigma_n must be > 0".into());
            }
            Ok(())
        });
        field("noise.scales", &mut |v| {
            let s: std::result::Result<Vec<f64>, String> = v.split(',').map(|x| real(x.trim())).collect();
            cfg.noise_scales = Some(s?);
            Ok(())
        });
        field("noise.correlation", &mut |v| {
            cfg.correlation = match v {
                "none" => CorrelationSpec::None,
                _ => match v.strip_prefix("equi:").map(real) {
                    Some(Ok(r)) if r > -1.0 && r < 1.0 => CorrelationSpec::Equi(r),
                    _ => return Err(format!("expected `none` or `equi:<rho>`, got `{v}`")),
                },
            };
            Ok(())
        });
        field("estimators", &mut |v| {
            let mut list = Vec::new();
            for item in v.split(',') {
                let e = EstimatorKind::parse(item).ok_or_else(|| format!("unknown estimator `{}`", item.trim()))?;
                if !list.contains(&e) {
                    list.push(e);
                }
            }
            list.sort();
            cfg.estimators = list;
            Ok(())
        });
        field("bootstrap.draws", &mut |v| {
            cfg.bootstrap_draws = uint(v)?;
            if cfg.bootstrap_draws == 0 {
                return Err("need at least one draw".into());
            }
            Ok(())
        });
        field("replications", &mut |v| {
            cfg.replications = uint(v)?;
            if cfg.replications == 0 {
                return Err("need at least one replication".into());
            }
            Ok(())
        });
        field("seed", &mut |v| {
            cfg.seed = v.parse::<u64>().map_err(|_| format!("expected an unsigned integer, got `{v}`"))?;
            Ok(())
        });
        field("diagnostics.decompose", &mut |v| {
            cfg.decompose = v.parse::<bool>().map_err(|_| format!("expected true or false, got `{v}`"))?;
            Ok(())
        });
        field("output.json", &mut |v| {
            cfg.output_json = Some(PathBuf::from(v));
            Ok(())
        });
        field("output.csv", &mut |v| {
            cfg.output_csv = Some(PathBuf::from(v));
            Ok(())
        });
        if problems.is_empty() {
            if let Err(e) = cfg.validate() {
                problems.push(e.to_string());
            }
        }
        if !problems.is_empty() {
            return Err(HodseError::input(format!("invalid config: {}", problems.join("; "))));
        }
        Ok(cfg)
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.noise_scales {
            if s.len() != self.d {
                return Err(HodseError::input(format!(
                    "noise.scales: {} values for d = {}",
                    s.len(),
                    self.d
                )));
            }
        }
        if self.estimators.is_empty() {
            return Err(HodseError::input("estimators: empty list"));
        }
        if self.replications == 0 {
            return Err(HodseError::input("replications: need at least one"));
        }
        self.noise_model()?;
        self.profile()?;
        Ok(())
    }

    pub fn profile(&self) -> Result<FrequencyProfile> {
        if self.profile_q == 1 {
            Ok(default_profile())
        } else {
            FrequencyProfile::flat_top(self.profile_q)
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let scale = match &self.noise_scales {
            Some(s) => s.clone(),
            None => vec![self.sigma_n],
        };
        let corr = match self.correlation {
            CorrelationSpec::None => None,
            CorrelationSpec::Equi(r) => Some(DMatrix::from_fn(self.d, self.d, |a, b| if a == b { 1.0 } else { r })),
        };
        NoiseModel::with_scales(self.noise_family, scale, corr)
    }

    /// Canonical `key = value` rendering; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            e.insert(k.to_string(), v);
        };
        put("schema_version", SCHEMA_VERSION.to_string());
        put("functional", self.functional.to_string());
        put(
            "functional.profile",
            if self.profile_q == 1 {
                "default".into()
            } else {
                format!("flat:{}", self.profile_q)
            },
        );
        put("functional.order", self.order.map_or("auto".into(), |m| m.to_string()));
        put("functional.bandwidth", self.bandwidth.map_or("auto".into(), |h| h.to_string()));
        put("tuning.cap", self.tuning_cap.to_string());
        put("theta", self.theta.to_string());
        put("sample.n", self.n.to_string());
        put("sample.d", self.d.to_string());
        put("noise.family", self.noise_family.to_string());
        put("noise.sigma_n", self.sigma_n.to_string());
        if let Some(s) = &self.noise_scales {
            put("noise.scales", s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        }
        put(
            "noise.correlation",
            match self.correlation {
                CorrelationSpec::None => "none".into(),
                CorrelationSpec::Equi(r) => format!("equi:{r}"),
            },
        );
        put(
            "estimators",
            self.estimators.iter().map(|e| e.label()).collect::<Vec<_>>().join(","),
        );
        put("bootstrap.draws", self.bootstrap_draws.to_string());
        put("replications", self.replications.to_string());
        put("seed", self.seed.to_string());
        put("diagnostics.decompose", self.decompose.to_string());
        if let Some(p) = &self.output_json {
            put("output.json", p.display().to_string());
        }
        if let Some(p) = &self.output_csv {
            put("output.csv", p.display().to_string());
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = "\
schema_version = 1
functional = sep:abs   # smoothed l1 norm
sample.n = 50
sample.d = 16
noise.family = gaussian
noise.sigma_n = 1
replications = 1
seed = 3
";

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(SMOKE).unwrap();
        assert_eq!((cfg.n, cfg.d, cfg.replications, cfg.seed), (50, 16, 1, 3));
        assert_eq!(cfg.estimators, vec![EstimatorKind::Plugin, EstimatorKind::Hodse]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn lists_every_offending_key() {
        let text = SMOKE.replace("sample.n = 50", "sample.n = many") + "colour = blue\n";
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("sample.n") && err.contains("colour"), "{err}");
        let err = ExperimentConfig::parse("schema_version = 2\n").unwrap_err().to_string();
        assert!(err.contains("schema_version") && err.contains("seed: missing"), "{err}");
        assert!(matches!(
            ExperimentConfig::parse("no equals sign").unwrap_err(),
            HodseError::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn theta_generators() {
        assert_eq!(ThetaGenerator::parse("uniform:-1,2").unwrap(), ThetaGenerator::Uniform(-1.0, 2.0));
        assert_eq!(
            ThetaGenerator::parse("sparse:3,2.5").unwrap(),
            ThetaGenerator::Sparse { k: 3, magnitude: 2.5 }
        );
        assert!(ThetaGenerator::parse("uniform:2,1").is_err());
        assert!(ThetaGenerator::parse("zeros:1").is_err());
    }
}
