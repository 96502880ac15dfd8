use num_complex::Complex64;

use super::{check_finite, convolve, grid_count, kernel_weights, ChargeGrid, ChargeMethod};
use crate::error::{Error, Result};
use crate::model::{forcing_f, zeta, Coupling, PhysicalParams, SpectralConstants};
use crate::specfun::{nu_table, volterra_mu};

/// Terms of the Neumann series may not exceed this multiple of `sup|f|`.
const MAJORANT_LIMIT: f64 = 1e6;
const MAJORANT_TAIL: f64 = 1e-10;
const MAJORANT_TERMS: usize = 400;
const INCREMENT_TOL: f64 = 1e-10;

/// Bound on the Neumann series `sum_k (I *)^k` applied with `|zeta| <= zeta_t`.
///
/// The k-th term is dominated by `zeta_t^k mu(T, k - 1, 0) sup|f|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardMajorant {
    pub zeta_t: f64,
    /// Largest term `zeta_t^k mu(T, k - 1, 0)`.
    pub peak: f64,
    /// First `k` with a term below the tail tolerance.
    pub terms: usize,
}

/// Evaluate the majorant of the Picard series on `[0, t_end]`.
pub fn picard_majorant(params: &PhysicalParams, t_end: f64) -> Result<PicardMajorant> {
    let samples = 2000;
    let zeta_t = (0..=samples)
        .map(|j| zeta(t_end * j as f64 / samples as f64, params).norm())
        .fold(0.0, f64::max);
    let mut peak: f64 = 0.0;
    for k in 1..=MAJORANT_TERMS {
        let term = zeta_t.powi(k as i32) * volterra_mu(t_end, (k - 1) as f64, 0.0)?;
        peak = peak.max(term);
        if peak > MAJORANT_LIMIT {
            return Err(Error::ContractionViolated { bound: peak });
        }
        if term < MAJORANT_TAIL && k > 1 {
            return Ok(PicardMajorant { zeta_t, peak, terms: k });
        }
    }
    Err(Error::ContractionViolated { bound: peak })
}

/// Picard iteration `q <- f - I * (zeta q)` starting from `q = f`.
///
/// The window must admit a bounded Neumann majorant, checked first. The
/// convolution uses the same exact-moment weights as the marching solver.
pub fn solve_picard(
    params: &PhysicalParams,
    sc: &SpectralConstants,
    t_end: f64,
    h: f64,
    iterations: usize,
) -> Result<ChargeGrid> {
    if !(t_end > 0.0) || t_end > 2.0 {
        return Err(Error::InvalidInput(format!("Picard horizon {t_end} must lie in (0, 2]")));
    }
    if !(h > 0.0) || h > super::MAX_STEP {
        return Err(Error::StepTooLarge { step: h, limit: super::MAX_STEP });
    }
    let n = grid_count(t_end, h).max(1);
    let nu = nu_table(h, n)?;
    let f = forcing_f(h, n, sc, &nu)?;
    let grid = |q: Vec<Complex64>, iterations| ChargeGrid {
        coupling: Coupling::from(*params),
        sc: *sc,
        step: h,
        q,
        requested_t: t_end,
        method: ChargeMethod::Picard { iterations },
    };
    if iterations == 0 {
        return Ok(grid(f, 0));
    }
    picard_majorant(params, n as f64 * h)?;

    let kw = kernel_weights(h, n, &nu)?;
    let w: Vec<Complex64> = kw.combined().into_iter().map(Complex64::from).collect();
    let zeta: Vec<Complex64> = (0..=n).map(|j| zeta(j as f64 * h, params)).collect();
    let mut q = f.clone();
    let mut last = f64::INFINITY;
    for it in 1..=iterations {
        let g: Vec<Complex64> = q.iter().zip(&zeta).map(|(a, b)| a * b).collect();
        let conv = convolve(&w, &g, n + 1);
        let mut change: f64 = 0.0;
        for k in 0..=n {
            let edge = if k > 0 && k < n { kw.left[k] * g[0] } else { Complex64::new(0.0, 0.0) };
            let integral = if k == 0 { Complex64::new(0.0, 0.0) } else { conv[k] - edge };
            let next = check_finite(f[k] - integral, "solve_picard", k)?;
            change = change.max((next - q[k]).norm());
            q[k] = next;
        }
        last = change;
        if change < INCREMENT_TOL {
            return Ok(grid(q, it));
        }
    }
    Err(Error::NonConvergence { what: "Picard iteration", residual: last })
}
