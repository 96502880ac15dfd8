use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::EULER_GAMMA;
use crate::error::{Error, Result};

/// Sine and cosine integrals `(Si(x), Ci(x))` for `x > 0`.
///
/// Power series below `x = 2`, otherwise the continued fraction for
/// `E1(ix)` evaluated with the modified Lentz method.
pub fn si_ci(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { func: "sici", arg: x });
    }
    const EPS: f64 = 1e-17;
    const TINY: f64 = 1e-300;
    if x > 2.0 {
        let mut b = Complex64::new(1.0, x);
        let mut c = Complex64::new(1.0 / TINY, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 2..1000 {
            let a = -((i - 1) as f64).powi(2);
            b += 2.0;
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < EPS {
                let h = Complex64::new(x.cos(), -x.sin()) * h;
                return Ok((FRAC_PI_2 + h.im, -h.re));
            }
        }
        return Err(Error::NonConvergence { what: "sici continued fraction", residual: f64::NAN });
    }
    // Series: Si = sum odd terms, Ci - gamma - log x = sum even terms.
    let mut si = x;
    let mut cin = 0.0;
    let mut term = x;
    let mut k = 1usize;
    loop {
        // term tracks (-1)^m x^(2m+1)/(2m+1)! for Si; derive Ci terms alongside.
        let t_even = -term * x / ((k + 1) as f64);
        cin += t_even / ((k + 1) as f64);
        term = t_even * x / ((k + 2) as f64);
        si += term / ((k + 2) as f64);
        k += 2;
        if term.abs() < EPS * si.abs().max(1e-300) && t_even.abs() < EPS * (cin.abs() + 1.0) {
            break;
        }
        if k > 200 {
            break;
        }
    }
    Ok((si, EULER_GAMMA + x.ln() + cin))
}

/// Shifted pair `(si, ci)` with `si(x) = Si(x) - pi/2`.
pub fn sici(x: f64) -> Result<(f64, f64)> {
    let (si_full, ci) = si_ci(x)?;
    Ok((si_full - FRAC_PI_2, ci))
}

/// `E1(ix) = -ci(x) + i si(x)` for `x > 0`.
pub fn e1_imag(x: f64) -> Result<Complex64> {
    let (si, ci) = sici(x)?;
    Ok(Complex64::new(-ci, si))
}
