use super::EULER_GAMMA;
use crate::error::{Error, Result};

/// Crossover between the power series and the integral representation.
pub const K0_SEAM: f64 = 2.0;

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { func: "bessel_k0", arg: x });
    }
    Ok(if x <= K0_SEAM { k0_series(x) } else { k0_scaled_integral(x) * (-x).exp() })
}

/// `K0(x) = -(log(x/2) + gamma) I0(x) + sum_k (x^2/4)^k H_k / (k!)^2`.
fn k0_series(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    let mut harmonic = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= y / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + tail
}

/// `e^x K0(x) = int_0^inf exp(-x (cosh u - 1)) du` by the trapezoid rule,
/// which converges geometrically for this analytic integrand.
fn k0_scaled_integral(x: f64) -> f64 {
    let h = 0.05;
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let u = k as f64 * h;
        let v = (-x * (u.cosh() - 1.0)).exp();
        sum += v;
        if v < 1e-18 {
            break;
        }
        k += 1;
    }
    sum * h
}
