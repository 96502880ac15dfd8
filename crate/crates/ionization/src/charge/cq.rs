use num_complex::Complex64;

use super::{check_finite, grid_count, ChargeGrid, ChargeMethod, OnlineConvolution};
use crate::error::{Error, Result};
use crate::model::{forcing_remainder, Coupling, SpectralConstants};

/// BDF2 convolution weights of the operator with symbol `log p`.
///
/// `log(delta(z)/h)` with `delta(z) = (1 - z)(3 - z)/2` expands to
/// `log(3/(2h)) - sum_j (1 + 3^-j) z^j / j`.
pub fn cq_weights(h: f64, n: usize) -> Vec<Complex64> {
    let mut w = Vec::with_capacity(n);
    if n == 0 {
        return w;
    }
    w.push(Complex64::from((1.5 / h).ln()));
    let mut third = 1.0;
    for j in 1..n {
        third /= 3.0;
        w.push(Complex64::from(-(1.0 + third) / j as f64));
    }
    w
}

/// Convolution-quadrature solve on `[0, t_end]` with step `h`.
///
/// Applying the inverse of the kernel turns the equation into
/// `D J q + zeta q = F` with `F = 4 pi (U(t) phi)(0)`. Writing
/// `q = C + p` leaves `D J p + zeta p = r - zeta C`, whose right side
/// vanishes at `t = 0`. The step must satisfy `log(3/(2h)) + Re zeta > 0`
/// with room to spare; strongly driven runs need `h` of order `1e-5`.
pub fn solve_charge_cq(coupling: Coupling, sc: &SpectralConstants, t_end: f64, h: f64) -> Result<ChargeGrid> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step {h}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("horizon {t_end}")));
    }
    let n = grid_count(t_end, h);
    let w = cq_weights(h, n + 1);
    let w0 = w[0];
    let c = Complex64::from(sc.c_alpha);
    let mut q = vec![Complex64::new(0.0, 0.0); n + 1];
    let shifted = OnlineConvolution::new(&w).run(n + 1, |m, history| {
        let t = m as f64 * h;
        let zeta = coupling.zeta(t);
        let diag = w0 + zeta;
        if diag.norm() < 1e-3 * w0.norm() {
            return Err(Error::StepTooLarge { step: h, limit: h * diag.norm() / w0.norm() });
        }
        let rhs = forcing_remainder(t, sc)? - zeta * c;
        let p = check_finite((rhs - history) / diag, "solve_charge_cq", m)?;
        q[m] = p + c;
        Ok(p)
    })?;
    debug_assert_eq!(shifted.len(), n + 1);
    Ok(ChargeGrid {
        coupling,
        sc: *sc,
        step: h,
        q,
        requested_t: t_end,
        method: ChargeMethod::ConvolutionQuadrature,
    })
}
