//! Ionization poles of the strip system in the left half-plane.
//!
//! A pole of `q^` is a point where the homogeneous system
//! `x_n + alpha0 h(p + i omega n)(x_{n+1} - x_{n-1}) = 0` has a decaying
//! solution. Two characterisations are used side by side: the matching of
//! the upward and downward continued fractions, and the zeros of the
//! truncated determinant. Pole sets are `i omega`-periodic, so results are
//! reported in the strip `0 <= Im p < omega`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::laplace::{h_fn, solve_strip, solve_strip_fixed, z2_hat};
use crate::model::{binding_energy, four_pi_beta0, require_nonresonant, PhysicalParams, SpectralConstants};
use crate::specfun::quad::{GL4_W, GL4_X};
use crate::specfun::{clog, Side};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Continued fractions stop once doubling the depth moves them by less than this.
pub const CF_TOL: f64 = 1e-12;
/// Deepest continued fraction evaluated.
pub const CF_MAX_DEPTH: usize = 512;
/// Step size at which secant and Newton iterations stop.
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 100;
/// Largest accepted distance between the two root finders.
pub const AGREEMENT_TOL: f64 = 1e-8;
/// Starting depth of the continued fractions in the root finders.
const CF_START: usize = 32;
/// Couplings up to this size use the second-order seed directly.
const CONTINUATION_START: f64 = 0.05;
const CONTINUATION_STEP: f64 = 0.0025;
/// Distance from a cut line at which horizontal contour edges are drawn.
const EDGE_OFFSET: f64 = 1e-9;

fn x_at(p: Complex64, params: &PhysicalParams) -> Result<Complex64> {
    Ok(params.alpha0 * h_fn(p, Side::Principal)?)
}

fn rho_depth(p: Complex64, params: &PhysicalParams, depth: usize) -> Result<Complex64> {
    let mut r = ZERO;
    for k in (0..=depth).rev() {
        let x = x_at(p + I * params.omega * k as f64, params)?;
        r = x / (1.0 + x * r);
    }
    Ok(r)
}

fn omega_depth(p: Complex64, params: &PhysicalParams, depth: usize) -> Result<Complex64> {
    let mut r = ZERO;
    for k in (1..=depth.max(1)).rev() {
        let x = x_at(p - I * params.omega * k as f64, params)?;
        r = -x / (1.0 - x * r);
    }
    Ok(r)
}

fn doubled(
    mut eval: impl FnMut(usize) -> Result<Complex64>,
    depth: usize,
    what: &'static str,
) -> Result<Complex64> {
    let mut k = depth.clamp(1, CF_MAX_DEPTH);
    let mut last = eval(k)?;
    while k < CF_MAX_DEPTH {
        k = (2 * k).min(CF_MAX_DEPTH);
        let next = eval(k)?;
        let change = (next - last).norm();
        if change < CF_TOL * next.norm().max(1.0) {
            return Ok(next);
        }
        if k == CF_MAX_DEPTH {
            return Err(Error::NonConvergence { what, residual: change });
        }
        last = next;
    }
    // Starting at the cap leaves nothing to compare against.
    Ok(last)
}

/// `rho(p) = alpha0 h(p) / (1 + alpha0 h(p) rho(p + i omega))`, evaluated
/// bottom-up from `depth` levels, doubling until stable.
///
/// The fraction contracts for moderate couplings; beyond `|alpha0| = 0.5`
/// convergence has not been validated.
pub fn rho_cf(p: Complex64, params: &PhysicalParams, depth: usize) -> Result<Complex64> {
    doubled(|k| rho_depth(p, params, k), depth, "rho continued fraction")
}

/// `Omega(p) = -alpha0 h(p - i omega) / (1 - alpha0 h(p - i omega) Omega(p - i omega))`.
pub fn omega_cf(p: Complex64, params: &PhysicalParams, depth: usize) -> Result<Complex64> {
    doubled(|k| omega_depth(p, params, k), depth, "Omega continued fraction")
}

/// `1/rho(p) - Omega(p)`, which vanishes at the poles.
pub fn pole_function(p: Complex64, params: &PhysicalParams, depth: usize) -> Result<Complex64> {
    let rho = rho_cf(p, params, depth)?;
    if rho.norm() == 0.0 {
        return Err(Error::SingularPoint(p));
    }
    Ok(1.0 / rho - omega_cf(p, params, depth)?)
}

/// Leading coefficient `z` in `p0 = p_s + alpha0^2 z + O(alpha0^3)`.
///
/// Both neighbours `p_s +- i omega` contribute:
/// `z = 4 pi^2 p_s [1/L(p_s + i omega) + 1/L(p_s - i omega)]` with
/// `L = log + 4 pi beta0`.
pub fn seed_coefficient(params: &PhysicalParams, sc: &SpectralConstants) -> Result<Complex64> {
    check_seed(params)?;
    let ps = sc.p_s;
    let up = clog(ps + I * params.omega, Side::Principal)? + four_pi_beta0();
    let down = clog(ps - I * params.omega, Side::Principal)? + four_pi_beta0();
    Ok(4.0 * PI * PI * ps * (1.0 / up + 1.0 / down))
}

/// The closed form that keeps only the downward neighbour, with half its
/// weight. Kept for comparison with [`seed_coefficient`].
pub fn seed_coefficient_truncated(params: &PhysicalParams) -> Result<Complex64> {
    check_seed(params)?;
    let e = binding_energy();
    let log_e = e.ln();
    let w = params.omega;
    if w < e {
        Ok(4.0 * PI * PI * e * I / ((e - w).ln() - log_e))
    } else {
        let l = (w - e).ln() - log_e;
        Ok(Complex64::new(-2.0 * PI.powi(3) * e, 2.0 * PI * PI * l * e) / (PI * PI + l * l))
    }
}

fn check_seed(params: &PhysicalParams) -> Result<()> {
    require_nonresonant(params)?;
    if params.omega == binding_energy() {
        return Err(Error::InvalidInput(format!("omega = {} sits on the branch boundary", params.omega)));
    }
    Ok(())
}

/// Second-order estimate of the pole, `p_s + alpha0^2 z`, moved into the strip.
pub fn pole_seed(params: &PhysicalParams, sc: &SpectralConstants) -> Result<Complex64> {
    let z = seed_coefficient(params, sc)?;
    Ok(into_strip(sc.p_s + params.alpha0 * params.alpha0 * z, params.omega))
}

fn into_strip(p: Complex64, omega: f64) -> Complex64 {
    let n = (p.im / omega).floor();
    Complex64::new(p.re, p.im - n * omega)
}

/// Logarithm and logarithmic derivative of the truncated determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    /// `log D_N(p)`, summed from principal logarithms of the minor ratios.
    pub log_det: Complex64,
    /// `D_N'(p) / D_N(p)`.
    pub log_derivative: Complex64,
}

/// Determinant of the truncated `I - L(p)` on rows `-n_trunc..=n_trunc`.
///
/// The three-term recurrence `D_k = D_{k-1} + e_k D_{k-2}` with
/// `e_k = alpha0^2 h_{k-1} h_k` is carried as the ratios `D_k / D_{k-1}`,
/// together with the derivative, so nothing overflows.
pub fn strip_determinant(p: Complex64, params: &PhysicalParams, n_trunc: usize) -> Result<LogDet> {
    let m = n_trunc as i64;
    let a2 = params.alpha0 * params.alpha0;
    let row = |n: i64| -> Result<(Complex64, Complex64)> {
        let z = p + I * params.omega * n as f64;
        let l = crate::laplace::log_shift(z, Side::Principal)?;
        if l.norm() < crate::laplace::SINGULAR_RADIUS {
            return Err(Error::SingularPoint(z));
        }
        let h = 2.0 * PI * I / l;
        Ok((h, -h / (l * z)))
    };
    let (mut h_prev, mut dh_prev) = row(-m)?;
    let mut ratio_prev = Complex64::new(1.0, 0.0);
    let (mut s_prev2, mut s_prev) = (ZERO, ZERO);
    let mut log_det = ZERO;
    for n in (-m + 1)..=m {
        let (h, dh) = row(n)?;
        let e = a2 * h_prev * h;
        let de = a2 * (dh_prev * h + h_prev * dh);
        let ratio = 1.0 + e / ratio_prev;
        if ratio.norm() == 0.0 {
            return Err(Error::SingularPoint(p));
        }
        let s = (s_prev + (de + e * s_prev2) / ratio_prev) / ratio;
        log_det += ratio.ln();
        s_prev2 = s_prev;
        s_prev = s;
        ratio_prev = ratio;
        h_prev = h;
        dh_prev = dh;
    }
    Ok(LogDet { log_det, log_derivative: s_prev })
}

/// Outcome of the pole search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleResult {
    pub p0: Complex64,
    pub seed: Complex64,
    /// Winding number of the determinant around the pole's rectangle.
    pub winding: i64,
    pub cf_root: Complex64,
    pub det_root: Complex64,
    /// `|cf_root - det_root|`.
    pub agree: f64,
    /// Truncation of the determinant.
    pub truncation: usize,
}

fn secant(
    mut f: impl FnMut(Complex64) -> Result<Complex64>,
    seed: Complex64,
    radius: f64,
) -> Result<Complex64> {
    let mut x0 = seed;
    let mut x1 = seed + 1e-3 * radius;
    let mut f0 = f(x0)?;
    let mut f1 = f(x1)?;
    for _ in 0..ROOT_MAX_ITER {
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        if (x2 - seed).norm() > radius {
            return Err(Error::NoRoot { seed, reason: format!("secant left the trust region at {x2}") });
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1)?;
        if (x1 - x0).norm() < ROOT_TOL {
            return Ok(x1);
        }
    }
    Err(Error::NoRoot { seed, reason: "secant iteration cap reached".into() })
}

fn newton_det(params: &PhysicalParams, n_trunc: usize, seed: Complex64, radius: f64) -> Result<Complex64> {
    let mut p = seed;
    for _ in 0..ROOT_MAX_ITER {
        let s = strip_determinant(p, params, n_trunc)?.log_derivative;
        if s.norm() == 0.0 {
            return Err(Error::NoRoot { seed, reason: "flat determinant".into() });
        }
        let step = -1.0 / s;
        p += step;
        if (p - seed).norm() > radius {
            return Err(Error::NoRoot { seed, reason: format!("Newton left the trust region at {p}") });
        }
        if step.norm() < ROOT_TOL {
            return Ok(p);
        }
    }
    Err(Error::NoRoot { seed, reason: "Newton iteration cap reached".into() })
}

fn trust_radius(alpha0: f64) -> f64 {
    10.0 * alpha0 * alpha0
}

/// Start point for the root finders at `alpha0`.
///
/// Up to `|alpha0| = 0.05` the second-order seed is used directly. Beyond
/// that the neglected `O(alpha0^3)` terms push the pole more than
/// `10 alpha0^2` away from it (about `19 alpha0^2` at `alpha0 = 0.1`,
/// `omega = 2`), so the root is continued from `0.05` in steps of at most
/// `0.0025` with linear prediction; each step keeps the trust region around
/// its predictor.
fn continuation_seed(params: &PhysicalParams, seed: Complex64) -> Result<Complex64> {
    let a = params.alpha0.abs();
    if a <= CONTINUATION_START {
        return Ok(seed);
    }
    let sign = params.alpha0.signum();
    let steps = ((a - CONTINUATION_START) / CONTINUATION_STEP).ceil() as usize;
    let at = |k: usize| sign * (CONTINUATION_START + (a - CONTINUATION_START) * k as f64 / steps as f64);
    let with_alpha = |alpha: f64| PhysicalParams::with_lambda(alpha, params.omega, params.lambda_ref);
    let sc = crate::model::spectral_constants(0.0);
    let first = with_alpha(at(0))?;
    let mut roots = vec![secant(|p| pole_function(p, &first, CF_START), pole_seed(&first, &sc)?, trust_radius(at(0)))?];
    for k in 1..=steps {
        let n = roots.len();
        let predicted = if n == 1 {
            // Shift by the seed's own motion until two roots are known.
            roots[0] + pole_seed(&with_alpha(at(1))?, &sc)? - pole_seed(&first, &sc)?
        } else {
            2.0 * roots[n - 1] - roots[n - 2]
        };
        if k == steps {
            return Ok(predicted);
        }
        let step = with_alpha(at(k))?;
        roots.push(secant(|p| pole_function(p, &step, CF_START), predicted, trust_radius(at(k)))?);
    }
    Ok(roots[roots.len() - 1])
}

/// Start point of the root finders: the seed, continued in `alpha0` when needed.
pub fn pole_start(params: &PhysicalParams, sc: &SpectralConstants) -> Result<Complex64> {
    continuation_seed(params, pole_seed(params, sc)?)
}

/// Locate the ionization pole from the seed with two independent finders.
///
/// The continued-fraction root uses a secant iteration on
/// `1/rho - Omega`; the determinant root uses Newton's method with the
/// exact logarithmic derivative of the truncation `n_trunc`. Both stay within
/// `10 alpha0^2` of their start point and must agree to `1e-8`. The pole is then
/// certified by the winding number of the determinant around
/// `[-Q, Re p0 / 2] x [0, omega]`.
pub fn find_pole(params: &PhysicalParams, sc: &SpectralConstants, n_trunc: usize) -> Result<PoleResult> {
    find_pole_from(params, sc, n_trunc, pole_start(params, sc)?)
}

/// [`find_pole`] from an explicit start point.
pub fn find_pole_from(
    params: &PhysicalParams,
    sc: &SpectralConstants,
    n_trunc: usize,
    start: Complex64,
) -> Result<PoleResult> {
    let seed = pole_seed(params, sc)?;
    if params.alpha0 == 0.0 {
        return Err(Error::NoRoot { seed, reason: "the decoupled system has no pole".into() });
    }
    let radius = trust_radius(params.alpha0);
    let cf_root = secant(|p| pole_function(p, params, CF_START), start, radius)?;
    let det_root = newton_det(params, n_trunc, start, radius)?;
    let agree = (cf_root - det_root).norm();
    if agree > AGREEMENT_TOL {
        return Err(Error::NoRoot { seed, reason: format!("root finders disagree by {agree:e}") });
    }
    let p0 = into_strip(cf_root, params.omega);
    if !(p0.re < 0.0) {
        return Err(Error::NoRoot { seed, reason: format!("root {p0} is not in the left half-plane") });
    }
    let rect = Rectangle::strip(params, 0.5 * p0.re);
    let winding = winding_count(params, &rect, winding_nodes(&rect, p0), n_trunc)?;
    Ok(PoleResult { p0, seed, winding, cf_root, det_root, agree, truncation: n_trunc })
}

/// Intervals per side for the certifying contour: at least 2048, and fine
/// enough that the spacing stays below a quarter of the pole's distance to
/// the nearest side.
fn winding_nodes(rect: &Rectangle, p0: Complex64) -> usize {
    let gap = (rect.re_max - p0.re).min(p0.re - rect.re_min).min(p0.im - rect.im_min).min(rect.im_max - p0.im);
    let longest = (rect.re_max - rect.re_min).max(rect.im_max - rect.im_min);
    let needed = (4.0 * longest / gap).ceil();
    if needed > 1e6 {
        return 1 << 20;
    }
    (needed as usize).max(2048).next_power_of_two()
}

/// Left abscissa beyond which `max_n |alpha0 h(p + i omega n)| < 1/2`.
///
/// `|log p + 4 pi beta0| >= log|p| - log E` exceeds `4 pi |alpha0|` once
/// `|p| > E e^{4 pi |alpha0|}`.
pub fn neumann_abscissa(params: &PhysicalParams) -> f64 {
    1.01 * binding_energy() * (4.0 * PI * params.alpha0.abs()).exp()
}

/// Axis-aligned contour, traversed counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rectangle {
    /// `[-Q, re_max] x [0, omega]` with `Q` from [`neumann_abscissa`].
    pub fn strip(params: &PhysicalParams, re_max: f64) -> Self {
        Self { re_min: -neumann_abscissa(params), re_max, im_min: 0.0, im_max: params.omega }
    }

    pub fn contains(&self, p: Complex64) -> bool {
        p.re > self.re_min && p.re < self.re_max && p.im > self.im_min && p.im < self.im_max
    }
}

/// Contour integrals of `D'/D / (2 pi i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub count: i64,
    /// Full contour.
    pub full: Complex64,
    /// Vertical sides only. For the untruncated system the horizontal sides
    /// cancel by periodicity; the difference measures truncation and cut effects.
    pub vertical: Complex64,
}

/// Winding number of the truncated determinant around `rect`, with `m`
/// trapezoid intervals per side.
///
/// Horizontal sides lying on cut lines are drawn `1e-9 omega` inside, so
/// they see the limit from the rectangle's interior.
pub fn winding(params: &PhysicalParams, rect: &Rectangle, m: usize, n_trunc: usize) -> Result<Winding> {
    if params.alpha0 == 0.0 {
        return Ok(Winding { count: 0, full: ZERO, vertical: ZERO });
    }
    if !(rect.re_min < rect.re_max && rect.im_min < rect.im_max) || m < 4 {
        return Err(Error::InvalidInput(format!("degenerate contour {rect:?} with {m} intervals")));
    }
    let off = EDGE_OFFSET * params.omega;
    let (y0, y1) = (rect.im_min + off, rect.im_max - off);
    let corners = [
        Complex64::new(rect.re_min, y0),
        Complex64::new(rect.re_max, y0),
        Complex64::new(rect.re_max, y1),
        Complex64::new(rect.re_min, y1),
    ];
    let sides: Vec<Complex64> = (0..4)
        .map(|k| {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            let legs: Vec<Result<Complex64>> = (0..=m)
                .into_par_iter()
                .map(|j| {
                    let p = a + (b - a) * (j as f64 / m as f64);
                    let s = strip_determinant(p, params, n_trunc)?.log_derivative;
                    if s.norm() * (b - a).norm() / m as f64 > 1.0 {
                        return Err(Error::ContourThroughZero(p));
                    }
                    let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                    Ok(w * s)
                })
                .collect();
            let mut sum = ZERO;
            for v in legs {
                sum += v?;
            }
            Ok(sum * (b - a) / m as f64)
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / (2.0 * PI * I);
    let full = scale * sides.iter().sum::<Complex64>();
    let vertical = scale * (sides[1] + sides[3]);
    let count = full.re.round();
    if (full - count).norm() > 0.2 {
        return Err(Error::NonIntegerWinding(full.re));
    }
    Ok(Winding { count: count as i64, full, vertical })
}

/// Rounded winding number, see [`winding`].
pub fn winding_count(params: &PhysicalParams, rect: &Rectangle, m: usize, n_trunc: usize) -> Result<i64> {
    Ok(winding(params, rect, m, n_trunc)?.count)
}

/// Residues of the strip solution at the pole.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueSet {
    pub p0: Complex64,
    pub radius: f64,
    /// Trapezoid nodes of the accepted evaluation.
    pub nodes: usize,
    pub truncation: usize,
    /// `R_n` for `n = -truncation..=truncation`.
    pub residues: Vec<Complex64>,
    /// `max_n |R_n + alpha0 h(p0 + i omega n)(R_{n+1} - R_{n-1})|`.
    pub recursion_residual: f64,
    /// `sup_{n != 0} |n R_n|`.
    pub decay_constant: f64,
}

impl ResidueSet {
    pub fn get(&self, n: i64) -> Option<Complex64> {
        let k = n + self.truncation as i64;
        if k < 0 || k as usize >= self.residues.len() {
            return None;
        }
        Some(self.residues[k as usize])
    }
}

/// Default residue contour radius, `min(0.1, Im p0, omega - Im p0) / 2`.
pub fn default_radius(p0: Complex64, omega: f64) -> f64 {
    0.1f64.min(p0.im).min(omega - p0.im) / 2.0
}

fn circle_residues(
    p0: Complex64,
    radius: f64,
    m: usize,
    n_trunc: usize,
    params: &PhysicalParams,
    sc: &SpectralConstants,
) -> Result<Vec<Complex64>> {
    let samples: Vec<Result<(Complex64, Vec<Complex64>)>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let u = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            let q = solve_strip_fixed(p0 + radius * u, n_trunc, params, sc, Side::Principal)?;
            Ok((u, q))
        })
        .collect();
    // (1/2 pi i) \oint f dp with dp = i r u dtheta.
    let mut out = vec![ZERO; 2 * n_trunc + 1];
    for s in samples {
        let (u, q) = s?;
        for (o, v) in out.iter_mut().zip(q) {
            *o += v * u;
        }
    }
    let scale = radius / m as f64;
    Ok(out.into_iter().map(|v| v * scale).collect())
}

/// Residues `R_n = (1/2 pi i) \oint q^_n(p) dp` on a circle around `p0`.
///
/// The trapezoid rule uses `m >= 64` nodes and is repeated with `2m`;
/// a change of `R_0` above `1e-6` means the circle is too close to another
/// singularity.
pub fn residues(
    pr: &PoleResult,
    params: &PhysicalParams,
    sc: &SpectralConstants,
    n_trunc: usize,
    radius: Option<f64>,
    m: usize,
) -> Result<ResidueSet> {
    let p0 = pr.p0;
    let radius = radius.unwrap_or_else(|| default_radius(p0, params.omega));
    if !(radius > 0.0) || p0.im - radius <= 0.0 || p0.im + radius >= params.omega {
        return Err(Error::InvalidInput(format!("circle of radius {radius} about {p0} leaves the strip")));
    }
    let m = m.max(64);
    let coarse = circle_residues(p0, radius, m, n_trunc, params, sc)?;
    let fine = circle_residues(p0, radius, 2 * m, n_trunc, params, sc)?;
    let change = (coarse[n_trunc] - fine[n_trunc]).norm();
    if change > 1e-6 {
        return Err(Error::ContourContamination(change));
    }
    let at = |k: i64| -> Complex64 {
        let i = k + n_trunc as i64;
        if i < 0 || i as usize >= fine.len() {
            ZERO
        } else {
            fine[i as usize]
        }
    };
    let m_i = n_trunc as i64;
    let mut recursion_residual: f64 = 0.0;
    let mut decay_constant: f64 = 0.0;
    for n in -m_i..=m_i {
        let x = x_at(p0 + I * params.omega * n as f64, params)?;
        recursion_residual = recursion_residual.max((at(n) + x * (at(n + 1) - at(n - 1))).norm());
        if n != 0 {
            decay_constant = decay_constant.max(n.unsigned_abs() as f64 * at(n).norm());
        }
    }
    Ok(ResidueSet {
        p0,
        radius,
        nodes: 2 * m,
        truncation: n_trunc,
        residues: fine,
        recursion_residual,
        decay_constant,
    })
}

/// Quadrature in `tau` for the branch-cut integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct TauGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TauGrid {
    /// Four-point Gauss panels on `[0, tau_max]`, geometrically graded
    /// towards the branch point with ratio `1/4` down to `1e-8 tau_max`.
    pub fn graded(tau_max: f64, uniform_panels: usize) -> Self {
        let mut breaks = vec![0.0];
        let first = tau_max / uniform_panels.max(1) as f64;
        let mut b = 1e-8 * tau_max;
        while b < first {
            breaks.push(b);
            b *= 4.0;
        }
        for k in 1..=uniform_panels.max(1) {
            breaks.push(first * k as f64);
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let (c, hw) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for k in 0..4 {
                nodes.push(c + hw * GL4_X[k]);
                weights.push(hw * GL4_W[k]);
            }
        }
        Self { nodes, weights }
    }

    /// Grid adapted to `e^{-tau t}`, reaching `tau = 28/t`.
    pub fn for_time(t: f64) -> Self {
        Self::graded(28.0 / t, 16)
    }
}

/// Pole and branch-cut parts of the inverse transform of `Z2^ q^`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZReconstruction {
    pub t: f64,
    /// `2 pi i sum_n Z2^(p_n) R_n e^{p_n t}`, `p_n = p0 + i omega n`.
    pub pole_sum: Complex64,
    /// `sum_n e^{i omega n t} \int e^{-tau t} [F^- - F^+](-tau + i omega n) dtau`.
    pub branch_sum: Complex64,
    /// `(pole_sum + branch_sum) / (2 pi i)`.
    pub value: Complex64,
    /// Share of `|value|` carried by the outermost rings.
    pub last_ring_fraction: f64,
}

impl ZReconstruction {
    /// Whether the outermost rings carry more than 1% of the value.
    pub fn ring_cut_insufficient(&self) -> bool {
        self.last_ring_fraction > 0.01
    }
}

/// Boundary values of `Z2^ q^` on the cut rings at one `tau`: entry
/// `n + n_cut` holds `F^-(-tau + i omega n) - F^+(-tau + i omega n)`.
pub fn branch_jumps(
    tau: f64,
    n_cut: usize,
    params: &PhysicalParams,
    sc: &SpectralConstants,
) -> Result<Vec<Complex64>> {
    if !(tau > 0.0) {
        return Err(Error::Domain { func: "branch_jumps", arg: tau });
    }
    let p = Complex64::new(-tau, 0.0);
    let start = 2 * n_cut.max(8);
    let above = solve_strip(p, start, params, sc, Side::Above)?;
    let below = solve_strip(p, start, params, sc, Side::Below)?;
    let mut out = Vec::with_capacity(2 * n_cut + 1);
    for n in -(n_cut as i64)..=n_cut as i64 {
        let z = p + I * params.omega * n as f64;
        let (za, zb) = if n == 0 {
            (z2_hat(z, sc, Side::Above)?, z2_hat(z, sc, Side::Below)?)
        } else {
            let v = z2_hat(z, sc, Side::Principal)?;
            (v, v)
        };
        let qa = above.get(n).ok_or(Error::SingularPoint(z))?;
        let qb = below.get(n).ok_or(Error::SingularPoint(z))?;
        out.push(zb * qb - za * qa);
    }
    Ok(out)
}

/// Reconstruct `Z(t)` from the pole residues and the cut integrals.
///
/// Deforming the Bromwich line to the left wraps every cut
/// `Im p = omega n, Re p < 0` from below to above, which is where the
/// orientation `F^- - F^+` comes from. Nodes with `e^{-tau t} < 1e-12` are
/// dropped.
pub fn reconstruct_z(
    t: f64,
    pr: &PoleResult,
    rs: &ResidueSet,
    params: &PhysicalParams,
    sc: &SpectralConstants,
    n_cut: usize,
    tau_grid: &TauGrid,
) -> Result<ZReconstruction> {
    if !(t >= 5.0) {
        return Err(Error::Domain { func: "reconstruct_z", arg: t });
    }
    if n_cut > rs.truncation {
        return Err(Error::InvalidInput(format!("n_cut {n_cut} exceeds the residue truncation {}", rs.truncation)));
    }
    let ring = |n: i64| I * params.omega * n as f64;
    let mut pole_terms = Vec::with_capacity(2 * n_cut + 1);
    for n in -(n_cut as i64)..=n_cut as i64 {
        let pn = pr.p0 + ring(n);
        let r = rs.get(n).unwrap_or(ZERO);
        pole_terms.push(2.0 * PI * I * z2_hat(pn, sc, Side::Principal)? * r * (pn * t).exp());
    }

    let kept: Vec<(f64, f64)> = tau_grid
        .nodes
        .iter()
        .zip(&tau_grid.weights)
        .filter(|(&tau, _)| (-tau * t).exp() >= 1e-12)
        .map(|(&a, &b)| (a, b))
        .collect();
    let jumps: Vec<Result<Vec<Complex64>>> =
        kept.par_iter().map(|&(tau, _)| branch_jumps(tau, n_cut, params, sc)).collect();
    let mut branch_terms = vec![ZERO; 2 * n_cut + 1];
    for ((tau, w), jump) in kept.iter().zip(jumps) {
        let weight = w * (-tau * t).exp();
        for (acc, j) in branch_terms.iter_mut().zip(jump?) {
            *acc += weight * j;
        }
    }
    for (k, acc) in branch_terms.iter_mut().enumerate() {
        *acc *= (ring(k as i64 - n_cut as i64) * t).exp();
    }

    let pole_sum: Complex64 = pole_terms.iter().sum();
    let branch_sum: Complex64 = branch_terms.iter().sum();
    let value = (pole_sum + branch_sum) / (2.0 * PI * I);
    let last_ring_fraction = if n_cut == 0 {
        0.0
    } else {
        let edge = [0, 2 * n_cut]
            .iter()
            .map(|&k| pole_terms[k] + branch_terms[k])
            .sum::<Complex64>()
            / (2.0 * PI * I);
        edge.norm() / value.norm().max(f64::MIN_POSITIVE)
    };
    Ok(ZReconstruction { t, pole_sum, branch_sum, value, last_ring_fraction })
}
