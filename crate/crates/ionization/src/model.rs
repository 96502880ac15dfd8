//! Physical model: coupling, spectral constants, free evolution at the
//! origin and the regularised forcing of the charge equation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::charge::{convolve, kernel_weights};
use crate::error::{Error, Result};
use crate::specfun::{sici, NuTable, EULER_GAMMA};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `e^{2(log 2 - gamma)} = 4 e^{-2 gamma}`: the binding energy of the
/// unperturbed bound state and the modulus of `p_s`.
pub fn binding_energy() -> f64 {
    4.0 * (-2.0 * EULER_GAMMA).exp()
}

/// `4 pi beta0 = 2 gamma - 2 log 2 - i pi/2`.
pub fn four_pi_beta0() -> Complex64 {
    Complex64::new(2.0 * EULER_GAMMA - 2.0 * std::f64::consts::LN_2, -FRAC_PI_2)
}

/// Amplitude and frequency of the monochromatic coupling `alpha0 sin(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub alpha0: f64,
    pub omega: f64,
    /// Regularisation parameter of the Green's function, 1 by default.
    pub lambda_ref: f64,
}

impl PhysicalParams {
    pub fn new(alpha0: f64, omega: f64) -> Result<Self> {
        Self::with_lambda(alpha0, omega, 1.0)
    }

    pub fn with_lambda(alpha0: f64, omega: f64, lambda_ref: f64) -> Result<Self> {
        if !alpha0.is_finite() {
            return Err(Error::InvalidInput(format!("alpha0 = {alpha0}")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidInput(format!("omega = {omega} must be positive")));
        }
        if !(lambda_ref > 0.0) {
            return Err(Error::InvalidInput(format!("lambda_ref = {lambda_ref} must be positive")));
        }
        Ok(Self { alpha0, omega, lambda_ref })
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.alpha0 * (self.omega * t).sin()
    }
}

/// Constants derived from `alpha(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants {
    /// Eigenvalue of the frozen operator, `-4 exp(-4 pi alpha(0) - 2 gamma)`.
    pub lambda_alpha: f64,
    /// Normalisation of the bound state, `2 sqrt(-pi lambda_alpha)`.
    pub c_alpha: f64,
    /// Zero of `log p + 4 pi beta0`.
    pub p_s: Complex64,
    pub theta_1: f64,
    pub beta0: Complex64,
    pub beta_plus: Complex64,
    pub beta_minus: Complex64,
}

impl SpectralConstants {
    /// Attach the Fourier coefficients `beta_{+-1} = +-i alpha0/2`.
    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.beta_plus = Complex64::new(0.0, 0.5 * alpha0);
        self.beta_minus = -self.beta_plus;
        self
    }

    /// `|lambda_alpha|`, the frequency of the stationary charge.
    pub fn binding(&self) -> f64 {
        -self.lambda_alpha
    }
}

/// Derived constants for a coupling with value `alpha_at_zero` at `t = 0`.
pub fn spectral_constants(alpha_at_zero: f64) -> SpectralConstants {
    let lambda_alpha = -4.0 * (-4.0 * PI * alpha_at_zero - 2.0 * EULER_GAMMA).exp();
    let c_alpha = 2.0 * (-PI * lambda_alpha).sqrt();
    let theta_1 = (0.5f64.ln() + EULER_GAMMA) / (2.0 * PI);
    let beta0 = Complex64::new(EULER_GAMMA / (2.0 * PI) - std::f64::consts::LN_2 / (2.0 * PI), -0.125);
    SpectralConstants {
        lambda_alpha,
        c_alpha,
        p_s: Complex64::new(0.0, binding_energy()),
        theta_1,
        beta0,
        beta_plus: Complex64::new(0.0, 0.0),
        beta_minus: Complex64::new(0.0, 0.0),
    }
}

/// Time-dependent coupling strength `alpha(t)`.
#[derive(Clone)]
pub enum Coupling {
    Monochromatic(PhysicalParams),
    /// A user-supplied bounded Lipschitz coupling.
    General { alpha: Arc<dyn Fn(f64) -> f64 + Send + Sync>, lipschitz: f64 },
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Monochromatic(p) => f.debug_tuple("Monochromatic").field(p).finish(),
            Coupling::General { lipschitz, .. } => {
                f.debug_struct("General").field("lipschitz", lipschitz).finish_non_exhaustive()
            }
        }
    }
}

impl From<PhysicalParams> for Coupling {
    fn from(p: PhysicalParams) -> Self {
        Coupling::Monochromatic(p)
    }
}

impl Coupling {
    pub fn general(alpha: impl Fn(f64) -> f64 + Send + Sync + 'static, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::InvalidInput(format!("Lipschitz bound {lipschitz}")));
        }
        Ok(Coupling::General { alpha: Arc::new(alpha), lipschitz })
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match self {
            Coupling::Monochromatic(p) => p.alpha(t),
            Coupling::General { alpha, .. } => alpha(t),
        }
    }

    pub fn params(&self) -> Option<&PhysicalParams> {
        match self {
            Coupling::Monochromatic(p) => Some(p),
            Coupling::General { .. } => None,
        }
    }

    /// `zeta(t) = 4 pi (alpha(t) + theta_1 - i/8)`.
    pub fn zeta(&self, t: f64) -> Complex64 {
        zeta_of_alpha(self.alpha(t))
    }
}

fn zeta_of_alpha(alpha: f64) -> Complex64 {
    let theta_1 = (0.5f64.ln() + EULER_GAMMA) / (2.0 * PI);
    Complex64::new(4.0 * PI * (alpha + theta_1), -FRAC_PI_2)
}

/// `zeta(t) = 4 pi (alpha0 sin(omega t) + theta_1 - i/8)`.
pub fn zeta(t: f64, params: &PhysicalParams) -> Complex64 {
    zeta_of_alpha(params.alpha(t))
}

/// Free evolution of the bound state evaluated at the origin,
/// `(U(s) phi_alpha)(0) = -(C/4pi) e^{-i lambda s} (ci(-lambda s) - i si(-lambda s))`.
pub fn free_at_origin(s: f64, sc: &SpectralConstants) -> Result<Complex64> {
    if !(s > 0.0) {
        return Err(Error::Domain { func: "free_at_origin", arg: s });
    }
    let a = sc.binding();
    let (si, ci) = sici(a * s)?;
    let phase = Complex64::from_polar(1.0, a * s);
    Ok(-(sc.c_alpha / (4.0 * PI)) * phase * Complex64::new(ci, -si))
}

/// `r(s) = 4 pi (U(s) phi)(0) - C (-gamma - log s)`, bounded and continuous.
pub fn forcing_remainder(s: f64, sc: &SpectralConstants) -> Result<Complex64> {
    if s == 0.0 {
        return Ok(remainder_at_zero(sc));
    }
    let u = free_at_origin(s, sc)?;
    Ok(4.0 * PI * u - sc.c_alpha * (-EULER_GAMMA - s.ln()))
}

/// `r(0) = C (-log|lambda| - i pi/2)`.
pub fn remainder_at_zero(sc: &SpectralConstants) -> Complex64 {
    sc.c_alpha * Complex64::new(-sc.binding().ln(), -FRAC_PI_2)
}

/// Coefficient of the `s log s` term of the remainder, `-i C |lambda|`.
pub fn remainder_slog_coefficient(sc: &SpectralConstants) -> Complex64 {
    -I * sc.c_alpha * sc.binding()
}

/// Fourier transform of the bound state, `C / (2 pi (k^2 - lambda))`.
pub fn bound_state_ft(k: f64, sc: &SpectralConstants) -> f64 {
    sc.c_alpha / (2.0 * PI * (k * k - sc.lambda_alpha))
}

/// Forcing `f(t_j) = C + (I * r)(t_j)` on the grid `t_j = j * step`, `j = 0..=n`.
///
/// The `s log s` part of `r` is split off and convolved exactly:
/// `I * (s log s) = (1 - gamma) mu(t, 0, 1) - t`. The smooth rest is
/// integrated with the product-integration weights built from `nu`.
pub fn forcing_f(step: f64, n: usize, sc: &SpectralConstants, nu: &NuTable) -> Result<Vec<Complex64>> {
    if (nu.step - step).abs() > 1e-14 * step {
        return Err(Error::GridMismatch(format!("grid step {step} vs table step {}", nu.step)));
    }
    let kw = kernel_weights(step, n, nu)?;
    let w: Vec<Complex64> = kw.combined().into_iter().map(Complex64::from).collect();
    let c1 = remainder_slog_coefficient(sc);
    let smooth: Vec<Complex64> = (0..=n)
        .map(|j| {
            let t = j as f64 * step;
            let slog = if j == 0 { 0.0 } else { t * t.ln() };
            forcing_remainder(t, sc).map(|r| r - c1 * slog)
        })
        .collect::<Result<_>>()?;
    let conv = convolve(&w, &smooth, n + 1);
    let mut f = Vec::with_capacity(n + 1);
    for (k, ck) in conv.into_iter().enumerate() {
        let t = k as f64 * step;
        let edge = if k > 0 && k < n { kw.left[k] * smooth[0] } else { Complex64::new(0.0, 0.0) };
        let integral = if k == 0 { Complex64::new(0.0, 0.0) } else { ck - edge };
        let exact = c1 * ((1.0 - EULER_GAMMA) * nu.cumulative[k] - t);
        f.push(sc.c_alpha + integral + exact);
    }
    Ok(f)
}

/// Position of the frequency relative to the resonance set `N omega = E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceInfo {
    pub nbar: u64,
    pub pbar: Complex64,
    pub resonant: bool,
    /// `|pbar|`.
    pub margin: f64,
}

/// Locate the singular point `pbar = i(E - omega nbar)` in the strip.
pub fn resonance_info(params: &PhysicalParams) -> ResonanceInfo {
    let e = binding_energy();
    let ratio = e / params.omega;
    let nearest = ratio.round();
    let resonant = nearest >= 1.0 && (nearest * params.omega - e).abs() <= 1e-12;
    let nbar = if resonant { nearest as u64 } else { ratio.floor() as u64 };
    let pbar = if resonant {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, e - params.omega * nbar as f64)
    };
    ResonanceInfo { nbar, pbar, resonant, margin: pbar.norm() }
}

/// Reject resonant frequencies, naming the offending integer.
pub fn require_nonresonant(params: &PhysicalParams) -> Result<ResonanceInfo> {
    let info = resonance_info(params);
    if info.resonant {
        return Err(Error::Resonance { n: info.nbar, margin: info.margin });
    }
    Ok(info)
}
