//! Laplace-domain engine.
//!
//! The transform of the charge satisfies
//! `q^(p) + alpha0 h(p) [q^(p + i omega) - q^(p - i omega)] = g^_0(p)` with
//! `h(p) = 2 pi i / (log p + 4 pi beta0)`. Writing `q^_n(p) = q^(p + i omega n)`
//! for `p` in the strip `0 <= Im p < omega` gives an infinite tridiagonal
//! system, truncated here with a zero closure and checked by doubling.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::charge::ChargeGrid;
use crate::error::{Error, Result};
use crate::model::{four_pi_beta0, require_nonresonant, PhysicalParams, SpectralConstants};
use crate::specfun::{clog, Side};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Distance below which a point is treated as a singularity.
pub const SINGULAR_RADIUS: f64 = 1e-10;
/// Largest truncation reached by doubling.
pub const MAX_TRUNCATION: usize = 2048;
/// Doubling tolerance for strip solutions.
pub const DOUBLING_TOL: f64 = 1e-8;

/// Side of a horizontal branch cut, for boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundarySide {
    Above,
    Below,
}

impl From<BoundarySide> for Side {
    fn from(s: BoundarySide) -> Side {
        match s {
            BoundarySide::Above => Side::Above,
            BoundarySide::Below => Side::Below,
        }
    }
}

fn nonzero(p: Complex64, func: &'static str) -> Result<()> {
    if p.norm() < SINGULAR_RADIUS {
        return Err(Error::ComplexDomain { func, arg: p });
    }
    Ok(())
}

/// `log p + 4 pi beta0`.
pub fn log_shift(p: Complex64, side: Side) -> Result<Complex64> {
    nonzero(p, "log_shift")?;
    Ok(clog(p, side)? + four_pi_beta0())
}

/// `h(p) = 2 pi i / (log p + 4 pi beta0)`.
pub fn h_fn(p: Complex64, side: Side) -> Result<Complex64> {
    let d = log_shift(p, side)?;
    if d.norm() < SINGULAR_RADIUS {
        return Err(Error::SingularPoint(p));
    }
    Ok(2.0 * PI * I / d)
}

/// `Z2^(p) = (i C / 4 pi) (log p - log|lambda| - i pi/2) / (p + i lambda)`.
///
/// The point `p = -i lambda` is removable; within `1e-4` of it the
/// numerator is replaced by its two-term Taylor expansion.
pub fn z2_hat(p: Complex64, sc: &SpectralConstants, side: Side) -> Result<Complex64> {
    nonzero(p, "z2_hat")?;
    let pre = I * sc.c_alpha / (4.0 * PI);
    let centre = Complex64::new(0.0, sc.binding());
    let d = p - centre;
    if d.norm() < 1e-4 {
        return Ok(pre * (1.0 / centre - d / (2.0 * centre * centre)));
    }
    let num = clog(p, side)? - Complex64::new(sc.binding().ln(), 0.5 * PI);
    Ok(pre * num / d)
}

/// `G^(p) = -4 pi i Z2^(p)`, the transform of `4 pi (U(t) phi)(0)`.
pub fn free_hat(p: Complex64, sc: &SpectralConstants, side: Side) -> Result<Complex64> {
    Ok(-4.0 * PI * I * z2_hat(p, sc, side)?)
}

/// Transform of the forcing, `f^(p) = -4 pi i Z2^(p) / log p`.
///
/// Singular at `p = 1`, reflecting the `e^t` growth of `f`.
pub fn f_hat(p: Complex64, sc: &SpectralConstants, side: Side) -> Result<Complex64> {
    let l = {
        nonzero(p, "f_hat")?;
        clog(p, side)?
    };
    if l.norm() < SINGULAR_RADIUS {
        return Err(Error::SingularPoint(p));
    }
    Ok(free_hat(p, sc, side)? / l)
}

/// `g^_n(p) = -4 pi i Z2^(p + i omega n) / (log(p + i omega n) + 4 pi beta0)`.
pub fn g_hat(p: Complex64, n: i64, sc: &SpectralConstants, params: &PhysicalParams, side: Side) -> Result<Complex64> {
    let shifted = p + I * params.omega * n as f64;
    let d = log_shift(shifted, side)?;
    if d.norm() < SINGULAR_RADIUS {
        return Err(Error::SingularPoint(shifted));
    }
    Ok(free_hat(shifted, sc, side)? / d)
}

/// Row data of the strip system at `p`, scaled by `log(p + i omega n) + 4 pi beta0`:
/// `d_n q_n + 2 pi i alpha0 (q_{n+1} - q_{n-1}) = G_n`.
struct StripRows {
    lo: i64,
    diag: Vec<Complex64>,
    rhs: Vec<Complex64>,
    coupling: Complex64,
}

impl StripRows {
    /// Rows `lo..=hi`; `side` applies to the row whose argument is `p` itself.
    fn new(
        p: Complex64,
        lo: i64,
        hi: i64,
        params: &PhysicalParams,
        sc: &SpectralConstants,
        side: Side,
    ) -> Result<Self> {
        let mut diag = Vec::with_capacity((hi - lo + 1) as usize);
        let mut rhs = Vec::with_capacity(diag.capacity());
        for n in lo..=hi {
            let shifted = p + I * params.omega * n as f64;
            let s = if n == 0 { side } else { Side::Principal };
            diag.push(log_shift(shifted, s)?);
            rhs.push(free_hat(shifted, sc, s)?);
        }
        Ok(Self { lo, diag, rhs, coupling: 2.0 * PI * I * params.alpha0 })
    }

    fn index(&self, n: i64) -> usize {
        (n - self.lo) as usize
    }
}

/// Solve a tridiagonal system by Gaussian elimination with partial pivoting.
///
/// `sub[i]` couples row `i` to `i - 1`, `sup[i]` couples row `i` to `i + 1`.
pub fn solve_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::InvalidInput("tridiagonal bands of unequal length".into()));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let scale = diag.iter().chain(sub).chain(sup).map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    // Row i of U holds (u0, u1, u2) on columns i, i+1, i+2.
    let mut u0 = diag.to_vec();
    let mut u1: Vec<Complex64> = (0..n).map(|i| if i + 1 < n { sup[i] } else { ZERO }).collect();
    let mut u2 = vec![ZERO; n];
    let mut b = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        let below = sub[i + 1];
        if below.norm() > u0[i].norm() {
            // Swap rows i and i+1.
            let (a0, a1, a2, ab) = (u0[i], u1[i], u2[i], b[i]);
            u0[i] = below;
            u1[i] = u0[i + 1];
            u2[i] = u1[i + 1];
            b[i] = b[i + 1];
            let m = a0 / u0[i];
            u0[i + 1] = a1 - m * u1[i];
            u1[i + 1] = a2 - m * u2[i];
            b[i + 1] = ab - m * b[i];
        } else {
            if u0[i].norm() < 1e-14 * scale {
                return Err(Error::SingularPoint(Complex64::new(i as f64, 0.0)));
            }
            let m = below / u0[i];
            u0[i + 1] -= m * u1[i];
            u1[i + 1] -= m * u2[i];
            b[i + 1] = b[i + 1] - m * b[i];
        }
    }
    if u0[n - 1].norm() < 1e-14 * scale {
        return Err(Error::SingularPoint(Complex64::new((n - 1) as f64, 0.0)));
    }
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        if i + 1 < n {
            v -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= u2[i] * x[i + 2];
        }
        x[i] = v / u0[i];
    }
    Ok(x)
}

/// Truncated solution of the strip system.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSolution {
    pub p: Complex64,
    /// Truncation: entries run over `n = -truncation..=truncation`.
    pub truncation: usize,
    pub qhat: Vec<Complex64>,
    pub converged: bool,
    /// Largest change of `q^_n`, `|n| <= truncation/4`, under the last doubling.
    pub doubling_diff: f64,
}

impl StripSolution {
    /// `q^_n(p)`, if `|n|` is within the truncation.
    pub fn get(&self, n: i64) -> Option<Complex64> {
        let k = n + self.truncation as i64;
        if k < 0 || k as usize >= self.qhat.len() {
            return None;
        }
        Some(self.qhat[k as usize])
    }
}

/// Solve the strip system at fixed truncation `n_trunc`.
pub fn solve_strip_fixed(
    p: Complex64,
    n_trunc: usize,
    params: &PhysicalParams,
    sc: &SpectralConstants,
    side: Side,
) -> Result<Vec<Complex64>> {
    let m = n_trunc as i64;
    let rows = StripRows::new(p, -m, m, params, sc, side)?;
    let len = rows.diag.len();
    let c = rows.coupling;
    let sub = vec![-c; len];
    let sup = vec![c; len];
    solve_tridiagonal(&sub, &rows.diag, &sup, &rows.rhs).map_err(|e| match e {
        Error::SingularPoint(_) => Error::SingularPoint(p),
        other => other,
    })
}

/// Solve the strip system, doubling the truncation from `n_start` until
/// entries with `|n| <= N/2` move by less than `1e-8` from `N` to `2N`.
pub fn solve_strip(
    p: Complex64,
    n_start: usize,
    params: &PhysicalParams,
    sc: &SpectralConstants,
    side: Side,
) -> Result<StripSolution> {
    if !(p.im >= 0.0 && p.im < params.omega) {
        return Err(Error::InvalidInput(format!("{p} is outside the strip 0 <= Im p < {}", params.omega)));
    }
    reject_singular(p, params)?;
    let mut n = n_start.max(16);
    let mut coarse = solve_strip_fixed(p, n, params, sc, side)?;
    loop {
        let fine = solve_strip_fixed(p, 2 * n, params, sc, side)?;
        // Rows near the closure move like 1/N under doubling; compare the
        // inner half, where the closure's influence has decayed geometrically.
        let half = n / 2;
        let diff = (n - half..=n + half).map(|k| (coarse[k] - fine[k + n]).norm()).fold(0.0, f64::max);
        if diff < DOUBLING_TOL {
            return Ok(StripSolution { p, truncation: 2 * n, qhat: fine, converged: true, doubling_diff: diff });
        }
        if 2 * n >= MAX_TRUNCATION {
            return Err(Error::NonConvergence { what: "strip truncation doubling", residual: diff });
        }
        n *= 2;
        coarse = fine;
    }
}

/// Reject `p` within `1e-10` of `0` or of the singular point `p_bar`.
fn reject_singular(p: Complex64, params: &PhysicalParams) -> Result<()> {
    nonzero(p, "solve_strip")?;
    let info = crate::model::resonance_info(params);
    if (p - info.pbar).norm() < SINGULAR_RADIUS {
        return Err(Error::SingularPoint(p));
    }
    Ok(())
}

/// Reduce `big_p` into the strip and return `(p, n)` with `big_p = p + i omega n`.
pub fn reduce_to_strip(big_p: Complex64, omega: f64) -> (Complex64, i64) {
    let n = (big_p.im / omega).floor();
    let p = Complex64::new(big_p.re, big_p.im - n * omega);
    // Guard against rounding just below the strip edge.
    if p.im >= omega {
        return (Complex64::new(big_p.re, p.im - omega), n as i64 + 1);
    }
    (p, n as i64)
}

/// `q^(P)` for arbitrary `P`, through the strip solution.
///
/// `side` selects the boundary value when `P` lies on a horizontal cut.
pub fn qhat_at(
    big_p: Complex64,
    params: &PhysicalParams,
    sc: &SpectralConstants,
    side: Side,
    n_start: usize,
) -> Result<Complex64> {
    let (p, n) = reduce_to_strip(big_p, params.omega);
    let need = 2 * n.unsigned_abs() as usize;
    let sol = solve_strip(p, n_start.max(need), params, sc, side)?;
    sol.get(n).ok_or_else(|| Error::InvalidInput(format!("index {n} beyond truncation")))
}

/// Boundary value `q^(-tau + i omega n +- i0)`.
pub fn qhat_boundary(
    tau: f64,
    n: i64,
    side: BoundarySide,
    params: &PhysicalParams,
    sc: &SpectralConstants,
    n_start: usize,
) -> Result<Complex64> {
    if !(tau > 0.0) {
        return Err(Error::Domain { func: "qhat_boundary", arg: tau });
    }
    let need = 2 * n.unsigned_abs() as usize;
    let sol = solve_strip(Complex64::new(-tau, 0.0), n_start.max(need), params, sc, side.into())?;
    sol.get(n).ok_or_else(|| Error::InvalidInput(format!("index {n} beyond truncation")))
}

/// Transform value with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Growth rate assumed for the tail bound.
pub const TAIL_GROWTH: f64 = 1.5;

/// Trapezoid transform `int_0^T e^{-pt} x(t) dt` of uniform samples, with the
/// tail bounded by `M e^{(nu - Re p) T} / (Re p - nu)`, `M = sup |x| e^{-nu t}`.
pub fn numeric_laplace(samples: &[Complex64], step: f64, p: Complex64) -> Result<LaplaceValue> {
    if p.re < 2.0 {
        return Err(Error::ComplexDomain { func: "numeric_laplace", arg: p });
    }
    if samples.len() < 2 || !(step > 0.0) {
        return Err(Error::InvalidInput("numeric_laplace needs at least two samples".into()));
    }
    let n = samples.len() - 1;
    let t_end = n as f64 * step;
    if ((TAIL_GROWTH - p.re) * t_end).exp() >= 1e-8 {
        return Err(Error::InsufficientWindow { t_min: 0.0, t_max: t_end });
    }
    let decay = (-p * step).exp();
    let mut phase = Complex64::new(1.0, 0.0);
    let mut sum = ZERO;
    let mut sup: f64 = 0.0;
    for (j, x) in samples.iter().enumerate() {
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        sum += w * phase * x;
        sup = sup.max(x.norm() * (-TAIL_GROWTH * j as f64 * step).exp());
        phase *= decay;
        if j % 1024 == 1023 {
            phase = (-p * ((j + 1) as f64 * step)).exp();
        }
    }
    let tail_bound = sup * ((TAIL_GROWTH - p.re) * t_end).exp() / (p.re - TAIL_GROWTH);
    Ok(LaplaceValue { value: sum * step, tail_bound })
}

/// Residual of the shifted functional equation for numerically transformed `q`.
pub fn functional_residual(p: Complex64, cg: &ChargeGrid, params: &PhysicalParams, sc: &SpectralConstants) -> Result<f64> {
    let shift = I * params.omega;
    let q0 = numeric_laplace(&cg.q, cg.step, p)?.value;
    let up = numeric_laplace(&cg.q, cg.step, p + shift)?.value;
    let down = numeric_laplace(&cg.q, cg.step, p - shift)?.value;
    let d = log_shift(p, Side::Principal)?;
    let forcing = g_hat(p, 0, sc, params, Side::Principal)?;
    Ok((q0 + 2.0 * PI * I * params.alpha0 / d * (up - down) - forcing).norm())
}

/// Representation `q^_0 = (H - 4 pi i Z2^) / (Q + log p)` near the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearZeroRep {
    pub q: Complex64,
    pub h: Complex64,
    /// `q^_0` from the direct strip solve.
    pub qhat0: Complex64,
    /// `|q^_0 (Q + log p) - (H - 4 pi i Z2^)|`.
    pub q0_check: f64,
}

/// Build `Q(p)` and `H(p)` from the two half-line auxiliary systems.
///
/// The `tau` system is homogeneous with `tau_0 = 1` injected at rows `+-1`;
/// the `R` system carries the forcing with row 0 removed. Both split into
/// independent `n >= 1` and `n <= -1` halves.
pub fn near_zero_rep(p: Complex64, params: &PhysicalParams, sc: &SpectralConstants, n_trunc: usize) -> Result<NearZeroRep> {
    require_nonresonant(params)?;
    if !(p.re > 0.0) || !(1e-8..=1e-2).contains(&p.norm()) {
        return Err(Error::ComplexDomain { func: "near_zero_rep", arg: p });
    }
    let n = n_trunc.max(16);
    let (mut q_prev, mut h_prev) = half_systems(p, n, params, sc)?;
    let mut size = n;
    let (q_cap, h_cap) = loop {
        let (q_new, h_new) = half_systems(p, 2 * size, params, sc)?;
        let diff = (q_new - q_prev).norm().max((h_new - h_prev).norm());
        if diff < DOUBLING_TOL {
            break (q_new, h_new);
        }
        if 2 * size >= MAX_TRUNCATION {
            return Err(Error::NonConvergence { what: "near-origin auxiliary systems", residual: diff });
        }
        size *= 2;
        q_prev = q_new;
        h_prev = h_new;
    };
    let strip = solve_strip(p, n, params, sc, Side::Principal)?;
    let qhat0 = strip.get(0).expect("row 0 is always present");
    let l = clog(p, Side::Principal)?;
    let target = h_cap + free_hat(p, sc, Side::Principal)?;
    Ok(NearZeroRep { q: q_cap, h: h_cap, qhat0, q0_check: (qhat0 * (q_cap + l) - target).norm() })
}

fn half_systems(p: Complex64, n: usize, params: &PhysicalParams, sc: &SpectralConstants) -> Result<(Complex64, Complex64)> {
    let c = 2.0 * PI * I * params.alpha0;
    let m = n as i64;
    let rows = StripRows::new(p, -m, m, params, sc, Side::Principal)?;
    // Upper half n = 1..=m, lower half n = -1..=-m ordered outward.
    let mut ends = [(ZERO, ZERO); 2];
    for (slot, sign) in [(0usize, 1i64), (1, -1)] {
        let idx: Vec<usize> = (1..=m).map(|k| rows.index(sign * k)).collect();
        let diag: Vec<Complex64> = idx.iter().map(|&i| rows.diag[i]).collect();
        // Outward neighbour coefficient is +c for the upper half, -c below.
        let out = if sign > 0 { c } else { -c };
        let sub = vec![-out; n];
        let sup = vec![out; n];
        let mut unit = vec![ZERO; n];
        unit[0] = out; // moves -(-out) * tau_0 to the right side
        let tau = solve_tridiagonal(&sub, &diag, &sup, &unit)?;
        let forced: Vec<Complex64> = idx.iter().map(|&i| rows.rhs[i]).collect();
        let r = solve_tridiagonal(&sub, &diag, &sup, &forced)?;
        ends[slot] = (tau[0], r[0]);
    }
    let (tau_up, r_up) = ends[0];
    let (tau_down, r_down) = ends[1];
    let q_cap = four_pi_beta0() + c * (tau_up - tau_down);
    let h_cap = -c * (r_up - r_down);
    Ok((q_cap, h_cap))
}
