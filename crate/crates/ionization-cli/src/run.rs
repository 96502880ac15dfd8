//! Subcommand pipelines and the run manifest.

use std::cmp::Ordering;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ionization::charge::{solve_charge, solve_charge_cq, ChargeGrid};
use ionization::laplace::{functional_residual, numeric_laplace, solve_strip};
use ionization::model::{spectral_constants, Coupling, PhysicalParams, SpectralConstants};
use ionization::observables::{mass, survival_series, z_interaction};
use ionization::poles::{find_pole_from, pole_start, reconstruct_z, residues, PoleResult, TauGrid};
use ionization::specfun::Side;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ConfigError, Method, RunConfig, Subcommand};
use crate::output::{write_output, NonFiniteCell, Table};

/// Rings kept in the spectral reconstruction.
const RECON_RINGS: usize = 16;
/// Trapezoid nodes on the residue circle before doubling.
const RESIDUE_NODES: usize = 64;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(ionization::Error),
    NonFinite { subcommand: Subcommand, cell: NonFiniteCell },
    Io { path: PathBuf, error: std::io::Error },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "{e}"),
            RunError::NonFinite { subcommand, cell } => write!(
                f,
                "{subcommand}: non-finite {} = {} in row {}",
                cell.column, cell.value, cell.row
            ),
            RunError::Io { path, error } => write!(f, "{}: {error}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ionization::Error> for RunError {
    fn from(e: ionization::Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl RunError {
    /// 2 for configuration errors, 3 for numerical failures, 4 for resonance, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Resonance { .. }) => 4,
            RunError::Config(_) => 2,
            RunError::Numerical(ionization::Error::Resonance { .. }) => 4,
            RunError::Numerical(_) | RunError::NonFinite { .. } => 3,
            RunError::Io { .. } => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            RunError::Config(ConfigError::Resonance { .. }) | RunError::Numerical(ionization::Error::Resonance { .. }) => {
                "resonance"
            }
            RunError::Config(_) => "config",
            RunError::Numerical(_) => "numerical",
            RunError::NonFinite { .. } => "non-finite",
            RunError::Io { .. } => "io",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

/// Record of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub convergence: Value,
    pub output: PathBuf,
    pub digest: String,
    pub rows: usize,
    /// Messages that do not stop the run.
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> Value {
        let mut config = serde_json::Map::new();
        config.insert("subcommand".into(), Value::from(self.config.subcommand.name()));
        for (k, v) in self.config.to_pairs() {
            config.insert(k, Value::from(v));
        }
        json!({
            "config": config,
            "version": self.version,
            "wall_time_s": self.wall_time_s,
            "convergence": self.convergence,
            "outputs": [{ "path": self.output.display().to_string(), "digest": self.digest, "rows": self.rows }],
            "warnings": self.warnings,
        })
    }
}

/// `out.csv` becomes `out.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}

struct Product {
    table: Table,
    convergence: Value,
    warnings: Vec<String>,
}

fn constants(params: &PhysicalParams) -> SpectralConstants {
    // alpha(t) = alpha0 sin(omega t) vanishes at t = 0.
    spectral_constants(0.0).with_alpha0(params.alpha0)
}

fn solve(cfg: &RunConfig, t_end: f64) -> Result<ChargeGrid, RunError> {
    let params = cfg.params();
    let sc = constants(&params);
    Ok(match cfg.method {
        Method::Product => solve_charge(&params, &sc, t_end, cfg.step)?,
        Method::Cq => solve_charge_cq(Coupling::from(params), &sc, t_end, cfg.step)?,
    })
}

fn charge(cfg: &RunConfig) -> Result<Product, RunError> {
    let cg = solve(cfg, cfg.tmax)?;
    let mut table = Table::new(&["t", "re_q", "im_q", "abs_q"]);
    for j in (0..cg.len()).step_by(cfg.stride) {
        let q = cg.q[j];
        table.push(vec![cg.time(j), q.re, q.im, q.norm()]);
    }
    let convergence = json!({ "method": cfg.method.name(), "steps": cg.len() - 1, "t_end": cg.t_end() });
    Ok(Product { table, convergence, warnings: vec![] })
}

fn survival(cfg: &RunConfig) -> Result<Product, RunError> {
    let cg = solve(cfg, cfg.tmax)?;
    let sc = constants(&cfg.params());
    let s = survival_series(&cg, &sc, cfg.stride)?;
    let mut table = Table::new(&["t", "re_theta", "im_theta", "abs_theta", "abs_z1", "abs_z"]);
    for i in 0..s.len() {
        let th = s.theta[i];
        table.push(vec![s.times[i], th.re, th.im, th.norm(), s.z1[i].norm(), s.z[i].norm()]);
    }
    let convergence = json!({ "method": cfg.method.name(), "steps": cg.len() - 1 });
    Ok(Product { table, convergence, warnings: vec![] })
}

fn mass_run(cfg: &RunConfig) -> Result<Product, RunError> {
    let cg = solve(cfg, cfg.tmax)?;
    let sc = constants(&cfg.params());
    let k_max = (0.5 * std::f64::consts::PI / cg.step).sqrt();
    let last = cg.len() - 1;
    let mut table = Table::new(&["t", "mass", "mass_minus_one"]);
    for k in 1..=cfg.samples {
        let j = (last * k) / cfg.samples;
        let t = cg.time(j);
        let m = mass(t, &cg, &sc, k_max, 4096)?;
        table.push(vec![t, m, m - 1.0]);
    }
    let convergence = json!({ "method": cfg.method.name(), "steps": last, "k_max": k_max });
    Ok(Product { table, convergence, warnings: vec![] })
}

fn laplace_check(cfg: &RunConfig) -> Result<Product, RunError> {
    let params = cfg.params();
    let sc = constants(&params);
    let cg = solve(cfg, cfg.tmax)?;
    let points = [Complex64::new(2.0, 0.3), Complex64::new(2.5, 0.0), Complex64::new(3.0, 1.0)];
    let mut table = Table::new(&[
        "re_p",
        "im_p",
        "functional_residual",
        "re_qhat_strip",
        "im_qhat_strip",
        "re_qhat_numeric",
        "im_qhat_numeric",
        "tail_bound",
        "doubling_diff",
    ]);
    let mut truncations = Vec::new();
    for p in points {
        let residual = functional_residual(p, &cg, &params, &sc)?;
        let strip = solve_strip(p, cfg.truncation, &params, &sc, Side::Principal)?;
        let numeric = numeric_laplace(&cg.q, cg.step, p)?;
        let q = strip.get(0).expect("row 0 is always present");
        truncations.push(strip.truncation);
        table.push(vec![
            p.re,
            p.im,
            residual,
            q.re,
            q.im,
            numeric.value.re,
            numeric.value.im,
            numeric.tail_bound,
            strip.doubling_diff,
        ]);
    }
    let convergence = json!({ "method": cfg.method.name(), "steps": cg.len() - 1, "strip_truncations": truncations });
    Ok(Product { table, convergence, warnings: vec![] })
}

fn locate(params: &PhysicalParams, n: usize, perturbation: f64) -> Result<PoleResult, ionization::Error> {
    let sc = constants(params);
    let start = pole_start(params, &sc)?;
    let a2 = params.alpha0 * params.alpha0;
    find_pole_from(params, &sc, n, start + perturbation * a2 * Complex64::new(1.0, 1.0))
}

fn pole(cfg: &RunConfig) -> Result<Product, RunError> {
    let params = cfg.params();
    let sc = constants(&params);
    let pr = locate(&params, cfg.truncation, cfg.seed_perturbation)?;
    let rs = residues(&pr, &params, &sc, cfg.truncation, None, RESIDUE_NODES)?;
    let mut table = Table::new(&[
        "alpha0",
        "omega",
        "re_p0",
        "im_p0",
        "re_seed",
        "im_seed",
        "winding",
        "agree",
        "recursion_residual",
        "decay_constant",
    ]);
    table.push(vec![
        params.alpha0,
        params.omega,
        pr.p0.re,
        pr.p0.im,
        pr.seed.re,
        pr.seed.im,
        pr.winding as f64,
        pr.agree,
        rs.recursion_residual,
        rs.decay_constant,
    ]);
    let convergence = json!({
        "cf_root": [pr.cf_root.re, pr.cf_root.im],
        "det_root": [pr.det_root.re, pr.det_root.im],
        "truncation": pr.truncation,
        "residue_nodes": rs.nodes,
        "residue_radius": rs.radius,
    });
    Ok(Product { table, convergence, warnings: vec![] })
}

fn scan(cfg: &RunConfig) -> Result<Product, RunError> {
    let mut grid: Vec<(f64, f64)> =
        cfg.alpha0_grid.iter().flat_map(|&a| cfg.omega_grid.iter().map(move |&w| (a, w))).collect();
    grid.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    grid.dedup();
    let results: Vec<((f64, f64), Result<PoleResult, ionization::Error>)> = grid
        .par_iter()
        .map(|&(a, w)| {
            let params = PhysicalParams { alpha0: a, omega: w, lambda_ref: 1.0 };
            ((a, w), locate(&params, cfg.truncation, cfg.seed_perturbation))
        })
        .collect();
    let mut table = Table::new(&["alpha0", "omega", "re_p0", "im_p0", "winding", "agree", "found"]);
    let mut failures = Vec::new();
    for ((a, w), r) in results {
        match r {
            Ok(pr) => table.push(vec![a, w, pr.p0.re, pr.p0.im, pr.winding as f64, pr.agree, 1.0]),
            Err(e) => {
                failures.push(json!({ "alpha0": a, "omega": w, "reason": e.to_string() }));
                table.push(vec![a, w, 0.0, 0.0, 0.0, 0.0, 0.0]);
            }
        }
    }
    table.rows.sort_by(|x, y| match x[0].total_cmp(&y[0]) {
        Ordering::Equal => x[1].total_cmp(&y[1]),
        o => o,
    });
    let convergence = json!({ "points": grid.len(), "truncation": cfg.truncation, "not_found": failures });
    Ok(Product { table, convergence, warnings: vec![] })
}

fn recon(cfg: &RunConfig) -> Result<Product, RunError> {
    let params = cfg.params();
    let sc = constants(&params);
    let pr = locate(&params, cfg.truncation, cfg.seed_perturbation)?;
    let rs = residues(&pr, &params, &sc, cfg.truncation, None, RESIDUE_NODES)?;
    let cg = solve(cfg, cfg.tmax)?;
    let times: Vec<f64> = (1..)
        .map(|k| 10.0 * k as f64)
        .take_while(|t| *t <= cg.t_end() + 1e-9)
        .map(|t| cg.time((t / cg.step).round() as usize))
        .collect();
    let z = z_interaction(&times, &cg, &sc)?;
    let rings = RECON_RINGS.min(cfg.truncation);
    let mut table = Table::new(&[
        "t", "re_z", "im_z", "re_recon", "im_recon", "re_pole", "im_pole", "re_branch", "im_branch", "rel_diff",
    ]);
    let mut warnings = Vec::new();
    for (t, zt) in times.iter().zip(&z) {
        let rec = reconstruct_z(*t, &pr, &rs, &params, &sc, rings, &TauGrid::for_time(*t))?;
        if rec.ring_cut_insufficient() {
            warnings.push(format!(
                "t = {t}: outer rings carry {:.2}% of the reconstruction",
                100.0 * rec.last_ring_fraction
            ));
        }
        let v = rec.value;
        table.push(vec![
            *t,
            zt.re,
            zt.im,
            v.re,
            v.im,
            rec.pole_sum.re,
            rec.pole_sum.im,
            rec.branch_sum.re,
            rec.branch_sum.im,
            (v - zt).norm() / zt.norm(),
        ]);
    }
    let convergence = json!({
        "p0": [pr.p0.re, pr.p0.im],
        "agree": pr.agree,
        "winding": pr.winding,
        "recursion_residual": rs.recursion_residual,
        "rings": rings,
        "steps": cg.len() - 1,
    });
    Ok(Product { table, convergence, warnings })
}

/// Run the configured pipeline, write its output and manifest.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let product = match cfg.subcommand {
        Subcommand::Charge => charge(cfg)?,
        Subcommand::Survival => survival(cfg)?,
        Subcommand::Mass => mass_run(cfg)?,
        Subcommand::LaplaceCheck => laplace_check(cfg)?,
        Subcommand::Pole => pole(cfg)?,
        Subcommand::Scan => scan(cfg)?,
        Subcommand::Recon => recon(cfg)?,
    };
    product
        .table
        .check_finite()
        .map_err(|cell| RunError::NonFinite { subcommand: cfg.subcommand, cell })?;
    let digest = write_output(&product.table, cfg.format, &cfg.output)
        .map_err(|error| RunError::Io { path: cfg.output.clone(), error })?;
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        convergence: product.convergence,
        output: cfg.output.clone(),
        digest,
        rows: product.table.len(),
        warnings: product.warnings,
    };
    let path = manifest_path(&cfg.output);
    let text = serde_json::to_string_pretty(&manifest.to_json()).expect("manifest serialises") + "\n";
    std::fs::write(&path, text).map_err(|error| RunError::Io { path, error })?;
    Ok(manifest)
}
