//! Run configuration: `key=value` files overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use ionization::model::{resonance_info, PhysicalParams};

/// Keys accepted in configuration files and as `--flag` overrides.
pub const KEYS: &[&str] = &[
    "alpha0",
    "omega",
    "tmax",
    "step",
    "truncation",
    "output",
    "format",
    "seed_perturbation",
    "method",
    "stride",
    "samples",
    "alpha0_grid",
    "omega_grid",
];

pub const DEFAULT_STEP: f64 = 0.005;
pub const DEFAULT_TRUNCATION: usize = 256;
/// `method=auto` uses product integration up to this horizon and
/// convolution quadrature beyond it.
pub const AUTO_PRODUCT_HORIZON: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum)]
pub enum Subcommand {
    Charge,
    Survival,
    Mass,
    LaplaceCheck,
    Pole,
    Scan,
    Recon,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Charge => "charge",
            Subcommand::Survival => "survival",
            Subcommand::Mass => "mass",
            Subcommand::LaplaceCheck => "laplace-check",
            Subcommand::Pole => "pole",
            Subcommand::Scan => "scan",
            Subcommand::Recon => "recon",
        }
    }

    /// Subcommands that need a non-resonant frequency.
    pub fn is_spectral(self) -> bool {
        matches!(self, Subcommand::LaplaceCheck | Subcommand::Pole | Subcommand::Scan | Subcommand::Recon)
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Time stepper for the charge equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Product integration against the nu kernel, `t <= 20`.
    Product,
    /// BDF2 convolution quadrature of the log kernel, any horizon.
    Cq,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Product => "product",
            Method::Cq => "cq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey(String),
    Type { key: String, token: String, expected: &'static str },
    Range { key: String, token: String, reason: String },
    Syntax { line: usize, text: String },
    Io { path: PathBuf, message: String },
    /// `n omega` hits the binding energy.
    Resonance { omega: f64, n: u64 },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown key '{k}'"),
            ConfigError::Type { key, token, expected } => {
                write!(f, "{key}: cannot read '{token}' as {expected}")
            }
            ConfigError::Range { key, token, reason } => write!(f, "{key} = {token}: {reason}"),
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected key=value, found '{text}'"),
            ConfigError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            ConfigError::Resonance { omega, n } => write!(
                f,
                "omega = {omega} is resonant: {n} * omega = e^(2(log 2 - gamma)) = {}",
                ionization::model::binding_energy()
            ),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub alpha0: f64,
    pub omega: f64,
    pub tmax: f64,
    pub step: f64,
    pub truncation: usize,
    pub output: PathBuf,
    pub format: Format,
    /// Offset of the root finders' start from the seed, in units of `alpha0^2 (1 + i)`.
    pub seed_perturbation: f64,
    pub method: Method,
    /// Keep every `stride`-th time sample in series outputs.
    pub stride: usize,
    /// Number of evaluation times for `mass`.
    pub samples: usize,
    pub alpha0_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
}

impl RunConfig {
    pub fn params(&self) -> PhysicalParams {
        PhysicalParams { alpha0: self.alpha0, omega: self.omega, lambda_ref: 1.0 }
    }

    /// The configuration as sorted `key=value` pairs; feeding them back
    /// reproduces the run.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        m.insert("alpha0".into(), format!("{:?}", self.alpha0));
        m.insert("omega".into(), format!("{:?}", self.omega));
        m.insert("tmax".into(), format!("{:?}", self.tmax));
        m.insert("step".into(), format!("{:?}", self.step));
        m.insert("truncation".into(), self.truncation.to_string());
        m.insert("output".into(), self.output.display().to_string());
        m.insert("format".into(), self.format.extension().into());
        m.insert("seed_perturbation".into(), format!("{:?}", self.seed_perturbation));
        m.insert("method".into(), self.method.name().into());
        m.insert("stride".into(), self.stride.to_string());
        m.insert("samples".into(), self.samples.to_string());
        m.insert("alpha0_grid".into(), list(&self.alpha0_grid));
        m.insert("omega_grid".into(), list(&self.omega_grid));
        m
    }
}

/// Command-line interface. Every value flag overrides the same key of the
/// configuration file.
#[derive(Debug, Parser)]
#[command(name = "ionization", version, about = "Charge, survival and pole computations for a driven 2D point interaction")]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// File of key=value lines; '#' starts a comment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub tmax: Option<String>,
    /// Time step [default: 0.005].
    #[arg(long)]
    pub step: Option<String>,
    /// Strip or determinant truncation N [default: 256].
    #[arg(long)]
    pub truncation: Option<String>,
    /// Output path [default: <subcommand>.<format>].
    #[arg(long)]
    pub output: Option<String>,
    /// csv or json [default: csv].
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed_perturbation: Option<String>,
    /// auto, product or cq [default: auto, product up to tmax = 20].
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub stride: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    /// Comma-separated alpha0 values for scan.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0_grid: Option<String>,
    /// Comma-separated omega values for scan.
    #[arg(long)]
    pub omega_grid: Option<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs = [
            ("alpha0", &self.alpha0),
            ("omega", &self.omega),
            ("tmax", &self.tmax),
            ("step", &self.step),
            ("truncation", &self.truncation),
            ("output", &self.output),
            ("format", &self.format),
            ("seed_perturbation", &self.seed_perturbation),
            ("method", &self.method),
            ("stride", &self.stride),
            ("samples", &self.samples),
            ("alpha0_grid", &self.alpha0_grid),
            ("omega_grid", &self.omega_grid),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

/// Parse `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn read(path: &PathBuf) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.clone(), message: e.to_string() })
}

/// Pairs recorded under `"config"` in a run manifest.
pub fn pairs_from_manifest(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let bad = |m: &str| ConfigError::Syntax { line: 0, text: m.to_string() };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let obj = value.get("config").and_then(|c| c.as_object()).ok_or_else(|| bad("manifest has no config object"))?;
    let mut out = BTreeMap::new();
    for (k, v) in obj {
        if k == "subcommand" {
            continue;
        }
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let s = v.as_str().ok_or_else(|| bad(&format!("config.{k} is not a string")))?;
        out.insert(k.clone(), s.to_string());
    }
    Ok(out)
}

/// Build the run configuration from parsed flags. File values come first,
/// then a manifest, then flags.
pub fn parse_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut pairs = BTreeMap::new();
    if let Some(path) = &cli.config {
        pairs.extend(parse_pairs(&read(path)?)?);
    }
    if let Some(path) = &cli.from_manifest {
        pairs.extend(pairs_from_manifest(&read(path)?)?);
    }
    for (k, v) in cli.overrides() {
        pairs.insert(k.to_string(), v.clone());
    }
    resolve(cli.subcommand, &pairs)
}

/// Parse command-line arguments (including the program name) into a configuration.
pub fn parse_args<I, T>(args: I) -> Result<RunConfig, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(ParseFailure::Usage)?;
    parse_config(&cli).map_err(ParseFailure::Config)
}

#[derive(Debug)]
pub enum ParseFailure {
    Usage(clap::Error),
    Config(ConfigError),
}

fn value<T: FromStr>(
    pairs: &BTreeMap<String, String>,
    key: &str,
    default: T,
    expected: &'static str,
) -> Result<T, ConfigError> {
    match pairs.get(key) {
        None => Ok(default),
        Some(tok) => tok.parse().map_err(|_| ConfigError::Type { key: key.into(), token: tok.clone(), expected }),
    }
}

fn float_list(pairs: &BTreeMap<String, String>, key: &str, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    match pairs.get(key) {
        None => Ok(default),
        Some(tok) => tok
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| ConfigError::Type {
                    key: key.into(),
                    token: s.trim().into(),
                    expected: "a number",
                })
            })
            .collect(),
    }
}

fn range(key: &str, token: impl fmt::Display, reason: &str) -> ConfigError {
    ConfigError::Range { key: key.into(), token: token.to_string(), reason: reason.into() }
}

/// Apply defaults and range checks to raw pairs.
pub fn resolve(subcommand: Subcommand, pairs: &BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    for k in pairs.keys() {
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
    }
    let alpha0: f64 = value(pairs, "alpha0", 0.05, "a number")?;
    let omega: f64 = value(pairs, "omega", 2.0, "a number")?;
    let tmax: f64 = value(pairs, "tmax", 10.0, "a number")?;
    let step: f64 = value(pairs, "step", DEFAULT_STEP, "a number")?;
    let truncation: usize = value(pairs, "truncation", DEFAULT_TRUNCATION, "a non-negative integer")?;
    let seed_perturbation: f64 = value(pairs, "seed_perturbation", 0.0, "a number")?;
    let stride: usize = value(pairs, "stride", 1, "a non-negative integer")?;
    let samples: usize = value(pairs, "samples", 10, "a non-negative integer")?;
    let format = match pairs.get("format").map(String::as_str) {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(other) => return Err(range("format", other, "expected csv or json")),
    };
    let method = match pairs.get("method").map(String::as_str) {
        None | Some("auto") if tmax <= AUTO_PRODUCT_HORIZON => Method::Product,
        None | Some("auto") => Method::Cq,
        Some("product") => Method::Product,
        Some("cq") => Method::Cq,
        Some(other) => return Err(range("method", other, "expected auto, product or cq")),
    };
    let alpha0_grid = float_list(pairs, "alpha0_grid", vec![0.02, 0.05, 0.1])?;
    let omega_grid = float_list(pairs, "omega_grid", vec![2.0, 3.0, 5.0])?;
    let output = pairs
        .get("output")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("{}.{}", subcommand.name(), format.extension())));

    if !alpha0.is_finite() {
        return Err(range("alpha0", alpha0, "must be finite"));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(range("omega", omega, "must be positive"));
    }
    if !(tmax > 0.0) || !tmax.is_finite() {
        return Err(range("tmax", tmax, "must be positive"));
    }
    if !(step > 0.0) || !step.is_finite() || step > tmax {
        return Err(range("step", step, "must be positive and at most tmax"));
    }
    if method == Method::Product && step > ionization::charge::MAX_STEP {
        return Err(range("step", step, "exceeds the product-integration limit 0.02"));
    }
    if truncation < 8 || truncation > ionization::laplace::MAX_TRUNCATION {
        return Err(range("truncation", truncation, "must lie in 8..=2048"));
    }
    if stride == 0 {
        return Err(range("stride", stride, "must be at least 1"));
    }
    if subcommand == Subcommand::Mass && samples == 0 {
        return Err(range("samples", samples, "must be at least 1"));
    }
    if !seed_perturbation.is_finite() {
        return Err(range("seed_perturbation", seed_perturbation, "must be finite"));
    }
    if alpha0_grid.iter().any(|a| !a.is_finite()) {
        return Err(range("alpha0_grid", pairs["alpha0_grid"].clone(), "entries must be finite"));
    }
    if omega_grid.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(range("omega_grid", pairs["omega_grid"].clone(), "entries must be positive"));
    }
    if method == Method::Product && tmax > AUTO_PRODUCT_HORIZON {
        return Err(range("tmax", tmax, "product integration loses accuracy beyond t = 20; use method=cq"));
    }
    if subcommand == Subcommand::LaplaceCheck && tmax < 40.0 {
        return Err(range("tmax", tmax, "laplace-check transforms at Re p = 2 and needs tmax >= 40"));
    }
    if subcommand == Subcommand::Recon && tmax < 10.0 {
        return Err(range("tmax", tmax, "recon evaluates t = 10, 20, ... and needs tmax >= 10"));
    }

    if subcommand.is_spectral() {
        let omegas = if subcommand == Subcommand::Scan { omega_grid.clone() } else { vec![omega] };
        for w in omegas {
            let info = resonance_info(&PhysicalParams { alpha0, omega: w, lambda_ref: 1.0 });
            if info.resonant {
                return Err(ConfigError::Resonance { omega: w, n: info.nbar });
            }
        }
    }

    Ok(RunConfig {
        subcommand,
        alpha0,
        omega,
        tmax,
        step,
        truncation,
        output,
        format,
        seed_perturbation,
        method,
        stride,
        samples,
        alpha0_grid,
        omega_grid,
    })
}
