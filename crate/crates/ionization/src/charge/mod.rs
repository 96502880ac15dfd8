//! Time-domain solvers for the charge equation
//! `q(t) + int_0^t I(t - s) zeta(s) q(s) ds = f(t)`.
//!
//! Three discretisations are provided:
//!
//! * [`solve_charge`]: product integration against exact kernel moments,
//!   piecewise-linear in `zeta q`. Needs a `nu` table, so `T <= 50`.
//! * [`solve_charge_cq`]: convolution quadrature of the inverted equation
//!   `D J q + zeta q = F`, where `J` has the logarithmic kernel `-gamma - log s`.
//!   No table is involved, so it reaches long times and very small steps.
//! * [`solve_picard`]: the Neumann series, as an independent reference on
//!   short windows.
//!
//! Both marching schemes accumulate their history with an FFT-based online
//! convolution.

mod conv;
mod cq;
mod march;
mod picard;
mod weights;

use num_complex::Complex64;

use crate::model::{Coupling, PhysicalParams, SpectralConstants};

pub use conv::{convolve, OnlineConvolution};
pub use cq::{cq_weights, solve_charge_cq};
pub use march::{solve_charge, solve_charge_with, MAX_STEP, ROUNDOFF_LIMIT};
pub use picard::{picard_majorant, solve_picard, PicardMajorant};
pub use weights::{kernel_weights, KernelWeights};

/// Discretisation that produced a [`ChargeGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeMethod {
    ProductIntegration,
    ConvolutionQuadrature,
    Picard { iterations: usize },
}

/// Charge samples `q(t_j)` on `t_j = j * step`.
#[derive(Debug, Clone)]
pub struct ChargeGrid {
    pub coupling: Coupling,
    pub sc: SpectralConstants,
    pub step: f64,
    pub q: Vec<Complex64>,
    /// Horizon requested by the caller before snapping down to the grid.
    pub requested_t: f64,
    pub method: ChargeMethod,
}

impl ChargeGrid {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.q.len()).map(|j| self.time(j)).collect()
    }

    /// Last grid time.
    pub fn t_end(&self) -> f64 {
        self.time(self.q.len().saturating_sub(1))
    }

    /// True when the requested horizon was not a multiple of the step.
    pub fn snapped(&self) -> bool {
        (self.requested_t - self.t_end()).abs() > 1e-9 * self.step
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.step;
        let j = x.round();
        if j < 0.0 || (x - j).abs() > 1e-6 || j as usize >= self.q.len() {
            return None;
        }
        Some(j as usize)
    }

    pub fn params(&self) -> Option<&PhysicalParams> {
        self.coupling.params()
    }

    /// `zeta(t_j)` for every grid point.
    pub fn zeta_samples(&self) -> Vec<Complex64> {
        (0..self.q.len()).map(|j| self.coupling.zeta(self.time(j))).collect()
    }

    /// Keep every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> ChargeGrid {
        let stride = stride.max(1);
        ChargeGrid {
            coupling: self.coupling.clone(),
            sc: self.sc,
            step: self.step * stride as f64,
            q: self.q.iter().step_by(stride).copied().collect(),
            requested_t: self.requested_t,
            method: self.method,
        }
    }
}

/// Number of whole steps of width `h` in `[0, t]`, snapping down.
pub(crate) fn grid_count(t: f64, h: f64) -> usize {
    (t / h * (1.0 + 1e-12)).floor() as usize
}

pub(crate) fn check_finite(q: Complex64, context: &'static str, index: usize) -> crate::Result<Complex64> {
    if q.re.is_finite() && q.im.is_finite() {
        Ok(q)
    } else {
        Err(crate::Error::NonFinite { context, index })
    }
}
