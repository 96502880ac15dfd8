use crate::error::{Error, Result};
use crate::specfun::NuTable;

/// Exact panel moments of the kernel on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    pub step: f64,
    /// `w0[m] = int_{mh}^{(m+1)h} I(s) ds`.
    pub w0: Vec<f64>,
    /// `w1[m] = int_{mh}^{(m+1)h} s I(s) ds`.
    pub w1: Vec<f64>,
    /// Hat-function weight of the left node of each panel.
    pub left: Vec<f64>,
    /// Hat-function weight of the right node of each panel.
    pub right: Vec<f64>,
}

impl KernelWeights {
    /// Lag weights `W[j] = left[j] + right[j - 1]` for `j = 0..=n`.
    ///
    /// For a convolution ending at `t_k` with `k < n` the lag-`k` weight must
    /// drop `left[k]`, see [`KernelWeights::apply`].
    pub fn combined(&self) -> Vec<f64> {
        let n = self.w0.len();
        let mut w = vec![0.0; n + 1];
        for m in 0..n {
            w[m] += self.left[m];
            w[m + 1] += self.right[m];
        }
        w
    }

    /// Number of panels.
    pub fn len(&self) -> usize {
        self.w0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w0.is_empty()
    }

    /// `int_0^{t_k} I(t_k - s) g(s) ds` for piecewise-linear `g` sampled at `g[0..=k]`.
    pub fn apply<T>(&self, k: usize, g: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let mut acc = g[k] * 0.0;
        for m in 0..k {
            acc = acc + g[k - m] * self.left[m] + g[k - m - 1] * self.right[m];
        }
        acc
    }
}

/// Build the panel moments from a tabulated antiderivative.
///
/// `w1` follows by parts: `int s I(s) ds = [s nu(s) - int nu]`. The hat
/// weights are formed as `mean(nu) - nu(a)` and `nu(b) - mean(nu)` over the
/// panel, which avoids cancelling two large first moments.
pub fn kernel_weights(h: f64, n: usize, nu: &NuTable) -> Result<KernelWeights> {
    if (nu.step - h).abs() > 1e-14 * h {
        return Err(Error::GridMismatch(format!("step {h} vs table step {}", nu.step)));
    }
    if nu.panels() < n {
        return Err(Error::TableCoverage { needed: n, available: nu.panels() });
    }
    let mut w0 = Vec::with_capacity(n);
    let mut w1 = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for m in 0..n {
        let mean = (nu.cumulative[m + 1] - nu.cumulative[m]) / h;
        left.push(mean - nu.values[m]);
        right.push(nu.values[m + 1] - mean);
        let (a, b) = (m as f64 * h, (m + 1) as f64 * h);
        w0.push(nu.values[m + 1] - nu.values[m]);
        let upper = b * nu.values[m + 1] - nu.cumulative[m + 1];
        let lower = a * nu.values[m] - nu.cumulative[m];
        w1.push(upper - lower);
    }
    Ok(KernelWeights { step: h, w0, w1, left, right })
}
