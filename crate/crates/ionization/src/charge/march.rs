use num_complex::Complex64;

use super::{check_finite, grid_count, kernel_weights, ChargeGrid, ChargeMethod, OnlineConvolution};
use crate::error::{Error, Result};
use crate::model::{forcing_f, Coupling, PhysicalParams, SpectralConstants};
use crate::specfun::{nu_table, NuTable};

/// Largest step accepted by the product-integration solver.
pub const MAX_STEP: f64 = 0.02;
/// Largest accepted roundoff amplification `eps * nu(T)`.
///
/// The forcing and the history sum both grow like `nu(t) ~ e^t` and cancel,
/// so rounding errors of relative size `eps` reach `eps nu(T)` in `q`. This
/// caps the horizon near `T = 22`; longer runs belong to the log-kernel
/// solver.
pub const ROUNDOFF_LIMIT: f64 = 1e-6;

/// Product-integration solve for the monochromatic coupling.
pub fn solve_charge(params: &PhysicalParams, sc: &SpectralConstants, t_end: f64, h: f64) -> Result<ChargeGrid> {
    let n = checked_count(t_end, h)?;
    let nu = nu_table(h, n.max(1))?;
    solve_charge_with(Coupling::from(*params), sc, t_end, &nu)
}

/// Product-integration solve for any coupling, reusing a precomputed table.
///
/// The table step is the time step; `t_end` is snapped down to the grid.
/// At every step `zeta q` is linear on each past panel and the kernel is
/// integrated exactly, so the unknown enters through the diagonal weight
/// `1 + W0 zeta(t_n)` only.
pub fn solve_charge_with(coupling: Coupling, sc: &SpectralConstants, t_end: f64, nu: &NuTable) -> Result<ChargeGrid> {
    let h = nu.step;
    let n = checked_count(t_end, h)?;
    if nu.panels() < n {
        return Err(Error::TableCoverage { needed: n, available: nu.panels() });
    }
    let amplification = f64::EPSILON * nu.values[n];
    if amplification > ROUNDOFF_LIMIT {
        return Err(Error::Accuracy(format!(
            "roundoff amplification {amplification:e} at t = {}; use the convolution-quadrature solver",
            n as f64 * h
        )));
    }
    let kw = kernel_weights(h, n, nu)?;
    let f = forcing_f(h, n, sc, nu)?;
    let zeta: Vec<Complex64> = (0..=n).map(|j| coupling.zeta(j as f64 * h)).collect();
    let w: Vec<Complex64> = kw.combined().into_iter().map(Complex64::from).collect();
    let w0 = w[0];

    let mut q = vec![Complex64::new(0.0, 0.0); n + 1];
    let zq = OnlineConvolution::new(&w).run(n + 1, |m, history| {
        let qm = if m == 0 {
            f[0]
        } else {
            // The lag-m weight must not include the left hat of panel m.
            let edge = if m < n { kw.left[m] * zeta[0] * q[0] } else { Complex64::new(0.0, 0.0) };
            (f[m] - history + edge) / (1.0 + w0 * zeta[m])
        };
        q[m] = check_finite(qm, "solve_charge", m)?;
        Ok::<_, Error>(zeta[m] * q[m])
    })?;
    debug_assert_eq!(zq.len(), n + 1);
    Ok(ChargeGrid {
        coupling,
        sc: *sc,
        step: h,
        q,
        requested_t: t_end,
        method: ChargeMethod::ProductIntegration,
    })
}

fn checked_count(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step {h}")));
    }
    if h > MAX_STEP {
        return Err(Error::StepTooLarge { step: h, limit: MAX_STEP });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("horizon {t_end}")));
    }
    Ok(grid_count(t_end, h))
}
