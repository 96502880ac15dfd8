//! Volterra mu-functions and the tabulated antiderivative of the kernel.

use rayon::prelude::*;

use super::gamma::ln_gamma;
use super::quad::{integrate_pieces, QuadOptions};
use crate::error::{Error, Result};

/// Largest time a [`NuTable`] may reach; nu grows like `e^t`.
pub const NU_TABLE_LIMIT: f64 = 50.0;

/// Log of the integrand `t^(delta+s) s^beta / (Gamma(beta+1) Gamma(delta+s+1))`.
fn log_integrand(s: f64, lt: f64, beta: f64, delta: f64, lg_beta: f64) -> f64 {
    let x = delta + s + 1.0;
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut v = (delta + s) * lt - lg_beta - ln_gamma(x);
    if beta > 0.0 {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        v += beta * s.ln();
    }
    v
}

/// Volterra function `mu(t, beta, delta) = int_0^inf t^(delta+s) s^beta / (Gamma(beta+1) Gamma(delta+s+1)) ds`.
///
/// The s-axis is split at the integrand's mode and cut where the integrand
/// has dropped by `e^-60` relative to its peak.
pub fn volterra_mu(t: f64, beta: f64, delta: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain { func: "volterra_mu", arg: t });
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain { func: "volterra_mu", arg: beta });
    }
    if !(-1.0..=1.0).contains(&delta) {
        return Err(Error::Domain { func: "volterra_mu", arg: delta });
    }
    if t == 0.0 {
        if delta < 0.0 {
            return Err(Error::Domain { func: "volterra_mu", arg: t });
        }
        return Ok(0.0);
    }
    let lt = t.ln();
    let lg_beta = ln_gamma(beta + 1.0);
    let psi = |s: f64| log_integrand(s, lt, beta, delta, lg_beta);

    // Coarse scan for the mode and the cutoff.
    let step = 0.25;
    let mut s: f64 = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut mode = 0.0;
    loop {
        let v = psi(s.max(1e-12));
        if v > best {
            best = v;
            mode = s;
        }
        if s > mode + 2.0 && v < best - 60.0 {
            break;
        }
        s += step;
        if s > 5_000.0 {
            return Err(Error::Quadrature { estimate: f64::INFINITY, evals: 0 });
        }
    }
    let s_hi = s;
    let mut breaks = vec![0.0];
    if mode > 0.5 {
        breaks.push(mode);
    }
    breaks.push(s_hi);
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_evals: 200_000 };
    let r = integrate_pieces(|s: f64| psi(s).exp(), &breaks, opts)?;
    Ok(r.value)
}

/// The kernel `I(t) = mu(t, 0, -1)`, singular like `1/(t log^2 t)` at the origin.
pub fn volterra_i(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain { func: "volterra_i", arg: t });
    }
    volterra_mu(t, 0.0, -1.0)
}

/// `nu(t) = mu(t, 0, 0)`, the antiderivative of the kernel.
pub fn volterra_nu(t: f64) -> Result<f64> {
    volterra_mu(t, 0.0, 0.0)
}

/// Uniform samples of `nu` and of its running integral.
#[derive(Debug, Clone, PartialEq)]
pub struct NuTable {
    pub step: f64,
    /// `values[j] = nu(j * step)`.
    pub values: Vec<f64>,
    /// `cumulative[j] = int_0^{j step} nu = mu(j * step, 0, 1)`.
    pub cumulative: Vec<f64>,
}

impl NuTable {
    /// Number of panels covered.
    pub fn panels(&self) -> usize {
        self.values.len() - 1
    }
}

/// Tabulate `nu` and its integral on `count` panels of width `step`.
pub fn nu_table(step: f64, count: usize) -> Result<NuTable> {
    if !(step > 0.0) || count == 0 {
        return Err(Error::InvalidInput(format!("nu_table(step={step}, count={count})")));
    }
    let t_max = step * count as f64;
    if t_max > NU_TABLE_LIMIT * (1.0 + 1e-12) {
        return Err(Error::TableOverflow { t_max, limit: NU_TABLE_LIMIT });
    }
    let pairs: Result<Vec<(f64, f64)>> = (0..=count)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * step;
            Ok((volterra_mu(t, 0.0, 0.0)?, volterra_mu(t, 0.0, 1.0)?))
        })
        .collect();
    let (values, cumulative) = pairs?.into_iter().unzip();
    Ok(NuTable { step, values, cumulative })
}
