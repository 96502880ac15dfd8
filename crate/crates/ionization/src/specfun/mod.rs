//! Special functions: Gamma, Volterra mu-functions, K0, sine/cosine
//! integrals and a branch-aware complex logarithm.

mod bessel;
mod gamma;
pub mod quad;
mod sici;
mod volterra;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use bessel::{bessel_k0, K0_SEAM};
pub use gamma::{gamma_fn, ln_gamma};
pub use sici::{e1_imag, si_ci, sici};
pub use volterra::{nu_table, volterra_i, volterra_mu, volterra_nu, NuTable, NU_TABLE_LIMIT};

/// Euler-Mascheroni constant, 0.57721566490153286061.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// Which side of the negative real axis a logarithm is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Side {
    #[default]
    Principal,
    Above,
    Below,
}

/// Complex logarithm with an explicit choice of side on the cut.
///
/// Off the negative real axis the side is ignored. On the axis `Above`
/// gives `+i pi`, `Below` gives `-i pi`, and `Principal` follows `Above`.
pub fn clog(p: Complex64, side: Side) -> Result<Complex64> {
    if p.re == 0.0 && p.im == 0.0 {
        return Err(Error::ComplexDomain { func: "clog", arg: p });
    }
    if p.im == 0.0 && p.re < 0.0 {
        let arg = match side {
            Side::Below => -PI,
            Side::Above | Side::Principal => PI,
        };
        return Ok(Complex64::new((-p.re).ln(), arg));
    }
    Ok(Complex64::new(p.norm().ln(), p.im.atan2(p.re)))
}
