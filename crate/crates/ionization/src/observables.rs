//! Observables rebuilt from the charge: the survival amplitude
//! `Theta = Z1 + Z`, the mass `||psi(t)||` and the decay exponent of `|Theta|`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::charge::{convolve, ChargeGrid};
use crate::error::{Error, Result};
use crate::model::{bound_state_ft, forcing_remainder, SpectralConstants};
use crate::specfun::quad::{GL4_W, GL4_X};
use crate::specfun::{e1_imag, EULER_GAMMA};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest rho spacing in the mass quadrature, relative to `|lambda_alpha|`.
const MAX_RHO_SPACING: f64 = 0.02;

/// Free part of the survival amplitude, `Z1(t) = <phi, U(t) phi>`.
///
/// Closed form `1 - i a t e^{i a t} E1(i a t)` with `a = |lambda_alpha|`.
pub fn z1(t: f64, sc: &SpectralConstants) -> Result<Complex64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain { func: "z1", arg: t });
    }
    let x = sc.binding() * t;
    Ok(1.0 - I * x * Complex64::from_polar(1.0, x) * e1_imag(x)?)
}

/// Samples of `Theta(t) = Z1(t) + Z(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalSeries {
    pub times: Vec<f64>,
    pub z1: Vec<Complex64>,
    pub z: Vec<Complex64>,
    pub theta: Vec<Complex64>,
}

impl SurvivalSeries {
    /// Series with a prescribed amplitude and no split into parts.
    pub fn from_theta(times: Vec<f64>, theta: Vec<Complex64>) -> Self {
        let z1 = theta.clone();
        let z = vec![ZERO; theta.len()];
        Self { times, z1, z, theta }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

const WEIGHT_CHUNK: usize = 1 << 16;

/// Hat-function moments of `u(s) = (U(s) phi)(0)` on each panel `[mh, (m+1)h]`.
fn free_kernel_weights(h: f64, n: usize, sc: &SpectralConstants) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    // The log part is integrated in closed form on the first panels, where
    // Gauss points cannot see the singularity; the remainder is smooth.
    const EXACT_PANELS: usize = 8;
    let scale = 1.0 / (4.0 * PI);
    let panel = |m: usize| -> Result<(Complex64, Complex64)> {
        let a = m as f64 * h;
        let b = a + h;
        let (mut left, mut right) = (ZERO, ZERO);
        let exact = m < EXACT_PANELS;
        for k in 0..4 {
            let s = a + 0.5 * h * (1.0 + GL4_X[k]);
            let weight = 0.5 * h * GL4_W[k];
            let mut v = forcing_remainder(s, sc)?;
            if !exact {
                v += sc.c_alpha * (-EULER_GAMMA - s.ln());
            }
            let x = (s - a) / h;
            left += v * (weight * (1.0 - x));
            right += v * (weight * x);
        }
        if exact {
            let anti0 = |s: f64| if s == 0.0 { 0.0 } else { s * s.ln() - s };
            let anti1 = |s: f64| if s == 0.0 { 0.0 } else { 0.5 * s * s * s.ln() - 0.25 * s * s };
            let i0 = anti0(b) - anti0(a);
            let i1 = anti1(b) - anti1(a);
            left += sc.c_alpha * (-EULER_GAMMA * 0.5 * h - (b * i0 - i1) / h);
            right += sc.c_alpha * (-EULER_GAMMA * 0.5 * h - (i1 - a * i0) / h);
        }
        Ok((left * scale, right * scale))
    };
    // Chunked so long grids never hold a per-panel Result buffer.
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for start in (0..n).step_by(WEIGHT_CHUNK) {
        let chunk: Vec<(Complex64, Complex64)> =
            (start..(start + WEIGHT_CHUNK).min(n)).into_par_iter().map(panel).collect::<Result<_>>()?;
        for (l, r) in chunk {
            left.push(l);
            right.push(r);
        }
    }
    Ok((left, right))
}

/// `Z(t_k) = i int_0^{t_k} q(s) u(t_k - s) ds` at every grid point of `cg`.
///
/// `q` is taken piecewise linear and integrated against exact hat moments
/// of the free kernel; all grid points come from one FFT convolution.
pub fn z_on_grid(cg: &ChargeGrid, sc: &SpectralConstants) -> Result<Vec<Complex64>> {
    let n = cg.q.len().saturating_sub(1);
    if n == 0 {
        return Ok(vec![ZERO; cg.q.len()]);
    }
    let (left, right) = free_kernel_weights(cg.step, n, sc)?;
    let mut w = vec![ZERO; n + 1];
    for m in 0..n {
        w[m] += left[m];
        w[m + 1] += right[m];
    }
    drop(right);
    let mut z = convolve(&w, &cg.q, n + 1);
    drop(w);
    for (k, zk) in z.iter_mut().enumerate() {
        let value = match k {
            0 => ZERO,
            k if k < n => *zk - left[k] * cg.q[0],
            _ => *zk,
        };
        *zk = I * value;
    }
    Ok(z)
}

/// `Z` at the requested times, each of which must lie on the charge grid.
pub fn z_interaction(times: &[f64], cg: &ChargeGrid, sc: &SpectralConstants) -> Result<Vec<Complex64>> {
    let idx = grid_indices(times, cg)?;
    let last = idx.iter().copied().max().unwrap_or(0);
    let head = ChargeGrid { q: cg.q[..=last.min(cg.q.len() - 1)].to_vec(), ..cg.clone() };
    let z = z_on_grid(&head, sc)?;
    Ok(idx.into_iter().map(|j| z[j]).collect())
}

fn grid_indices(times: &[f64], cg: &ChargeGrid) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            cg.index_of(t)
                .ok_or_else(|| Error::GridMismatch(format!("t = {t} is not on the charge grid (step {})", cg.step)))
        })
        .collect()
}

/// Survival amplitude on every `stride`-th grid point.
pub fn survival_series(cg: &ChargeGrid, sc: &SpectralConstants, stride: usize) -> Result<SurvivalSeries> {
    let stride = stride.max(1);
    let z_all = z_on_grid(cg, sc)?;
    let mut out = SurvivalSeries { times: vec![], z1: vec![], z: vec![], theta: vec![] };
    for j in (0..cg.q.len()).step_by(stride) {
        let t = cg.time(j);
        let a = if j == 0 { Complex64::new(1.0, 0.0) } else { z1(t, sc)? };
        out.times.push(t);
        out.z1.push(a);
        out.z.push(z_all[j]);
        out.theta.push(a + z_all[j]);
    }
    Ok(out)
}

/// `||psi(t)||` from the radial Fourier representation.
///
/// With `rho = k^2`,
/// `psi^(t, k) = e^{-i rho t} [phi^(k) + (i/2pi) int_0^t e^{i rho s} q(s) ds]`
/// and `||psi||^2 = pi int_0^inf |psi^|^2 d rho`. The inner integral is
/// exact for piecewise-linear `q` and is evaluated for all `rho` at once by
/// an FFT. Beyond `rho = k_max^2` the tail `|q(t)|^2 / (4 pi k_max^2)` is
/// added analytically; the next term of the expansion, which involves
/// `q'(t)`, must stay below `1e-4`. `nk` is the minimum number of `rho`
/// samples below the cut.
pub fn mass(t: f64, cg: &ChargeGrid, sc: &SpectralConstants, k_max: f64, nk: usize) -> Result<f64> {
    let Some(radial) = RadialSamples::new(t, cg, sc, k_max, nk)? else {
        return Ok(1.0);
    };
    let inner: f64 = radial.fold(0.0, |acc, w, _, psi| acc + w * psi.norm_sqr());
    let tail = radial.q_end.norm_sqr() / (4.0 * PI * radial.rho_max);
    Ok((PI * inner + tail).sqrt())
}

/// `Theta(t) = <phi, psi(t)>` evaluated in Fourier space.
///
/// Independent of the split into `Z1 + Z`; used as a cross-check.
pub fn theta_fourier(t: f64, cg: &ChargeGrid, sc: &SpectralConstants, k_max: f64, nk: usize) -> Result<Complex64> {
    let Some(radial) = RadialSamples::new(t, cg, sc, k_max, nk)? else {
        return Ok(Complex64::new(1.0, 0.0));
    };
    let inner = radial.fold(ZERO, |acc, w, rho, psi| {
        acc + w * bound_state_ft(rho.sqrt(), sc) * Complex64::from_polar(1.0, -rho * t) * psi
    });
    let tail = sc.c_alpha * radial.q_end / (4.0 * PI * radial.rho_max);
    Ok(PI * inner + tail)
}

/// `psi^(t, rho)` without its phase `e^{-i rho t}` on a uniform `rho` grid.
struct RadialSamples<'a> {
    sc: &'a SpectralConstants,
    step: f64,
    n: usize,
    q0: Complex64,
    q_end: Complex64,
    rho_max: f64,
    d_rho: f64,
    count: usize,
    transform: Vec<Complex64>,
}

impl<'a> RadialSamples<'a> {
    /// `None` at `t = 0`, where `psi = phi`.
    fn new(t: f64, cg: &ChargeGrid, sc: &'a SpectralConstants, k_max: f64, nk: usize) -> Result<Option<Self>> {
        if !(t >= 0.0) {
            return Err(Error::Domain { func: "mass", arg: t });
        }
        let n = cg
            .index_of(t)
            .ok_or_else(|| Error::GridMismatch(format!("t = {t} is not on the charge grid")))?;
        if n == 0 {
            return Ok(None);
        }
        let h = cg.step;
        let rho_max = k_max * k_max;
        if !(k_max > 0.0) || rho_max > PI / h {
            return Err(Error::Accuracy(format!("k_max^2 = {rho_max} must lie in (0, pi/h = {}]", PI / h)));
        }
        let q_end = cg.q[n];
        // Next term of the large-rho expansion bounds the error of the tail.
        let tail_error = q_end.norm() * charge_derivative(cg, n).norm() / (2.0 * PI * PI * rho_max * rho_max);
        if tail_error > 1e-4 {
            return Err(Error::Accuracy(format!(
                "tail correction beyond k_max = {k_max} uncertain by {tail_error:e}"
            )));
        }
        // rho spacing 2 pi/(N h) must resolve oscillations of period 2 pi/t
        // and the width |lambda| of the bound-state profile.
        let mut size = (8 * (n + 1)).next_power_of_two();
        while 2.0 * PI / (size as f64 * h) > MAX_RHO_SPACING * sc.binding()
            || (rho_max / (2.0 * PI / (size as f64 * h))) < nk as f64
        {
            size *= 2;
        }
        let d_rho = 2.0 * PI / (size as f64 * h);
        let count = (rho_max / d_rho).floor() as usize;
        let mut transform = vec![ZERO; size];
        transform[..=n].copy_from_slice(&cg.q[..=n]);
        FftPlanner::new().plan_fft_inverse(size).process(&mut transform);
        transform.truncate(count + 1);
        Ok(Some(Self { sc, step: h, n, q0: cg.q[0], q_end, rho_max, d_rho, count, transform }))
    }

    /// Fold over `(quadrature weight, rho, psi^)`.
    fn fold<T>(&self, init: T, mut f: impl FnMut(T, f64, f64, Complex64) -> T) -> T {
        let mut acc = init;
        let h = self.step;
        for (l, s) in self.transform.iter().enumerate() {
            let rho = l as f64 * self.d_rho;
            let (e0, en, hat) = hat_transforms(rho, h);
            let edge = Complex64::from_polar(1.0, rho * self.n as f64 * h);
            let g = s * hat + self.q0 * (e0 - hat) + self.q_end * edge * (en - hat);
            let psi = bound_state_ft(rho.sqrt(), self.sc) + I * g / (2.0 * PI);
            acc = f(acc, gregory_weight(l, self.count) * self.d_rho, rho, psi);
        }
        acc
    }
}

/// Second-order difference quotient of `q` at grid index `j`.
fn charge_derivative(cg: &ChargeGrid, j: usize) -> Complex64 {
    let q = &cg.q;
    let h = cg.step;
    match (j, q.len()) {
        (_, len) if len < 3 => {
            if len == 2 {
                (q[1] - q[0]) / h
            } else {
                ZERO
            }
        }
        (0, _) => (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h),
        (j, len) if j + 1 == len => (3.0 * q[j] - 4.0 * q[j - 1] + q[j - 2]) / (2.0 * h),
        (j, _) => (q[j + 1] - q[j - 1]) / (2.0 * h),
    }
}

/// Transforms of the half hats at both ends and of an interior hat, for
/// the kernel `e^{i rho s}` and step `h`.
fn hat_transforms(rho: f64, h: f64) -> (Complex64, Complex64, Complex64) {
    let x = Complex64::new(0.0, rho);
    let xh = x * h;
    let hat = h * sinc2(0.5 * rho * h);
    if xh.norm() < 1e-3 {
        let e0 = h * (0.5 + xh / 6.0 + xh * xh / 24.0);
        let en = h * (0.5 - xh / 6.0 + xh * xh / 24.0);
        return (e0, en, Complex64::from(hat));
    }
    let e0 = -1.0 / x + (xh.exp() - 1.0) / (x * x * h);
    let en = 1.0 / x + ((-xh).exp() - 1.0) / (x * x * h);
    (e0, en, Complex64::from(hat))
}

fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// Trapezoid weights with third-order Gregory end corrections.
fn gregory_weight(l: usize, last: usize) -> f64 {
    const ENDS: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let from_end = last - l;
    if last < 6 {
        return if l == 0 || l == last { 0.5 } else { 1.0 };
    }
    if l < 3 {
        ENDS[l]
    } else if from_end < 3 {
        ENDS[from_end]
    } else {
        1.0
    }
}

/// Power-law fit `|Theta| ~ amplitude * t^exponent` to the envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    /// RMS residual in log-log coordinates.
    pub residual: f64,
    pub points: usize,
}

impl DecayFit {
    /// Value of the fitted envelope at `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * t.powf(self.exponent)
    }
}

/// Envelope of `|Theta|` by maxima over consecutive blocks of one period
/// `2 pi/|lambda_alpha|` inside `window`.
pub fn envelope(series: &SurvivalSeries, window: (f64, f64), period: f64) -> Vec<(f64, f64)> {
    let (t_min, t_max) = window;
    let mut out = Vec::new();
    let mut start = t_min;
    while start < t_max {
        let end = (start + period).min(t_max);
        if end - start >= 0.5 * period {
            let best = series
                .times
                .iter()
                .zip(&series.theta)
                .filter(|(t, _)| **t >= start && **t < end + if end >= t_max { 1e-12 } else { 0.0 })
                .map(|(t, th)| (*t, th.norm()))
                .fold(None, |acc: Option<(f64, f64)>, p| match acc {
                    Some(a) if a.1 >= p.1 => Some(a),
                    _ => Some(p),
                });
            if let Some(p) = best {
                if p.1 > 0.0 {
                    out.push(p);
                }
            }
        }
        start = end;
    }
    out
}

/// Fit the decay exponent of `|Theta|` on `window`.
///
/// The window must span a decade and the series must carry at least 20
/// samples per oscillation period.
pub fn decay_fit(series: &SurvivalSeries, window: (f64, f64), sc: &SpectralConstants) -> Result<DecayFit> {
    let (t_min, t_max) = window;
    if !(t_min > 0.0) || !(t_max >= 10.0 * t_min) {
        return Err(Error::InsufficientWindow { t_min, t_max });
    }
    let first = series.times.first().copied().unwrap_or(f64::INFINITY);
    let last = series.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    if first > t_min + 1e-9 || last < t_max - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "window {t_min}..{t_max} outside the series range {first}..{last}"
        )));
    }
    let period = 2.0 * PI / sc.binding();
    if series.times.len() >= 2 {
        let dt = (last - first) / (series.times.len() - 1) as f64;
        if dt > period / 20.0 {
            return Err(Error::InvalidInput(format!("sample spacing {dt} under-resolves the period {period}")));
        }
    }
    let env = envelope(series, window, period);
    if env.len() < 2 {
        return Err(Error::EmptyEnvelope);
    }
    let pts: Vec<(f64, f64)> = env.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - icept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(DecayFit { exponent: slope, amplitude: icept.exp(), window, residual, points: pts.len() })
}
