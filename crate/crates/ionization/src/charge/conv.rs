//! FFT convolution helpers, including the online (causal) variant used by
//! the time-marching solvers.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Below this block size the history is accumulated directly.
const DIRECT_BLOCK: usize = 64;

/// Longest FFT used by [`convolve`]; longer products are split into blocks.
const MAX_FFT: usize = 1 << 22;

/// Linear convolution `c[k] = sum_j a[j] b[k - j]`, truncated to `len` outputs.
pub fn convolve(a: &[Complex64], b: &[Complex64], len: usize) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() || len == 0 {
        return vec![ZERO; len];
    }
    if a.len().min(b.len()) <= 32 {
        let mut c = vec![ZERO; len];
        for (i, ai) in a.iter().enumerate().take(len) {
            for (j, bj) in b.iter().enumerate().take(len - i) {
                c[i + j] += ai * bj;
            }
        }
        return c;
    }
    let a = &a[..a.len().min(len)];
    let b = &b[..b.len().min(len)];
    let size = (a.len() + b.len() - 1).next_power_of_two();
    if size > MAX_FFT {
        return convolve_blocked(a, b, len);
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa = vec![ZERO; size];
    let mut fb = vec![ZERO; size];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(len.min(size));
    fa.iter_mut().for_each(|x| *x *= scale);
    fa.resize(len, ZERO);
    fa
}

fn convolve_blocked(a: &[Complex64], b: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; len];
    accumulate_blocked(a, b, 0, &mut out, MAX_FFT);
    out
}

/// `out[k] += (a * b)[from + k]` by overlap-add over blocks of `fft_len / 2`,
/// so memory stays bounded for grids of tens of millions of points.
fn accumulate_blocked(a: &[Complex64], b: &[Complex64], from: usize, out: &mut [Complex64], fft_len: usize) {
    let block = fft_len / 2;
    let to = from + out.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let scale = 1.0 / fft_len as f64;
    let mut fa = vec![ZERO; fft_len];
    let mut fb = vec![ZERO; fft_len];
    for (j, bj) in b.chunks(block).enumerate() {
        let mut have_fb = false;
        for (i, ai) in a.chunks(block).enumerate() {
            let offset = (i + j) * block;
            let end = offset + ai.len() + bj.len() - 1;
            if end <= from || offset >= to {
                continue;
            }
            if !have_fb {
                fb.fill(ZERO);
                fb[..bj.len()].copy_from_slice(bj);
                fwd.process(&mut fb);
                have_fb = true;
            }
            fa.fill(ZERO);
            fa[..ai.len()].copy_from_slice(ai);
            fwd.process(&mut fa);
            for (x, y) in fa.iter_mut().zip(&fb) {
                *x *= y;
            }
            inv.process(&mut fa);
            for k in offset.max(from)..end.min(to) {
                out[k - from] += fa[k - offset] * scale;
            }
        }
    }
}

/// Causal convolution solver.
///
/// Produces `x[0..n]` where `x[m] = step(m, s[m])` and
/// `s[m] = sum_{j<m} w[m - j] x[j]`. The history sums are accumulated by
/// divide and conquer, each level using one cyclic FFT per block, for
/// `O(n log^2 n)` work in total.
pub struct OnlineConvolution<'w> {
    weights: &'w [Complex64],
    planner: FftPlanner<f64>,
    /// Spectra of `weights[0..L]` keyed by block length `L`.
    cache: HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>, Arc<[Complex64]>)>,
    /// Blocks longer than this go through bounded overlap-add.
    max_fft: usize,
}

impl<'w> OnlineConvolution<'w> {
    pub fn new(weights: &'w [Complex64]) -> Self {
        Self { weights, planner: FftPlanner::new(), cache: HashMap::new(), max_fft: MAX_FFT }
    }

    /// Run the recursion for `n` unknowns. `weights` must hold at least `n` lags.
    pub fn run<E, F>(&mut self, n: usize, mut step: F) -> Result<Vec<Complex64>, E>
    where
        F: FnMut(usize, Complex64) -> Result<Complex64, E>,
    {
        assert!(self.weights.len() >= n, "online convolution needs {n} weight lags");
        let mut x = vec![ZERO; n];
        let mut s = vec![ZERO; n];
        if n == 0 {
            return Ok(x);
        }
        let size = n.next_power_of_two();
        self.block(0, size, n, &mut x, &mut s, &mut step)?;
        Ok(x)
    }

    fn block<E, F>(
        &mut self,
        lo: usize,
        len: usize,
        n: usize,
        x: &mut [Complex64],
        s: &mut [Complex64],
        step: &mut F,
    ) -> Result<(), E>
    where
        F: FnMut(usize, Complex64) -> Result<Complex64, E>,
    {
        if lo >= n {
            return Ok(());
        }
        let hi = (lo + len).min(n);
        if len <= DIRECT_BLOCK {
            for m in lo..hi {
                let mut acc = s[m];
                for j in lo..m {
                    acc += self.weights[m - j] * x[j];
                }
                s[m] = acc;
                x[m] = step(m, acc)?;
            }
            return Ok(());
        }
        let half = len / 2;
        let mid = lo + half;
        self.block(lo, half, n, x, s, step)?;
        if mid >= n {
            return Ok(());
        }
        // Contribution of x[lo..mid] to s[mid..hi]. Lags run from 1 to len-1,
        // so a cyclic transform of length `len` leaves the wanted half unaliased.
        if len > self.max_fft {
            let lags = &self.weights[..(hi - lo).min(self.weights.len())];
            accumulate_blocked(&x[lo..mid], lags, half, &mut s[mid..hi], self.max_fft);
            return self.block(mid, half, n, x, s, step);
        }
        let (fwd, inv, spectrum) = self.spectrum(len);
        let mut buf = vec![ZERO; len];
        buf[..half].copy_from_slice(&x[lo..mid]);
        fwd.process(&mut buf);
        for (b, w) in buf.iter_mut().zip(spectrum.iter()) {
            *b *= w;
        }
        inv.process(&mut buf);
        let scale = 1.0 / len as f64;
        for m in mid..hi {
            s[m] += buf[m - lo] * scale;
        }
        self.block(mid, half, n, x, s, step)
    }

    fn spectrum(&mut self, len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>, Arc<[Complex64]>) {
        if !self.cache.contains_key(&len) {
            let fwd = self.planner.plan_fft_forward(len);
            let inv = self.planner.plan_fft_inverse(len);
            let mut w = vec![ZERO; len];
            let avail = self.weights.len().min(len);
            w[..avail].copy_from_slice(&self.weights[..avail]);
            fwd.process(&mut w);
            self.cache.insert(len, (fwd, inv, Arc::from(w)));
        }
        let (f, i, w) = &self.cache[&len];
        (f.clone(), i.clone(), w.clone())
    }
}
