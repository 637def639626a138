//! FFT plumbing shared by the spectral norm and the linear operators.
//!
//! Periodic grids diagonalize both the centered-difference Laplacian and the
//! continuous symbol in the DFT basis. Dirichlet grids use the discrete sine
//! basis, realized here through the classical odd-extension trick: extend the
//! interior values to an odd sequence of length `2 nx`, run a plain FFT,
//! apply the (index-symmetric) multiplier, transform back.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::field::Grid1D;
use crate::scalar::Scalar;

/// A forward/inverse FFT plan pair for one length.
pub(crate) struct FftPair<T: Scalar> {
    len: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> FftPair<T> {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn forward(&self, buf: &mut [Complex<T>]) {
        self.fwd.process(buf);
    }

    /// Inverse transform normalized by `1/len`, so `inverse(forward(x)) = x`.
    pub(crate) fn inverse(&self, buf: &mut [Complex<T>]) {
        self.inv.process(buf);
        let scale = T::one() / T::from_usize(self.len).unwrap();
        for v in buf.iter_mut() {
            *v = v.scale(scale);
        }
    }
}

impl<T: Scalar> std::fmt::Debug for FftPair<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

/// One-shot forward FFT for cold paths (norms, tests).
pub(crate) fn fft_forward<T: Scalar>(buf: &mut [Complex<T>]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Continuous wavenumber `xi_k = pi * k_signed / half_width` of DFT bin `k`
/// on a periodic grid (`k_signed` in `[-n/2, n/2]`).
pub(crate) fn periodic_wavenumber<T: Scalar>(grid: &Grid1D<T>, k: usize) -> T {
    let n = grid.nx();
    let signed = if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    };
    T::PI() * T::from_isize(signed).unwrap() / grid.half_width()
}

/// Eigenvalue of the centered-difference Laplacian on DFT bin `k`:
/// `-(4/dx^2) sin^2(pi k / n)`.
pub(crate) fn periodic_fd_eigenvalue<T: Scalar>(grid: &Grid1D<T>, k: usize) -> T {
    let dx = grid.dx();
    let s = (T::PI() * T::from_usize(k).unwrap() / T::from_usize(grid.nx()).unwrap()).sin();
    -T::from_f64_lossy(4.0) * s * s / (dx * dx)
}

/// Sine-mode index `m` carried by extension bin `k` (length `2 nx`).
fn dirichlet_mode(nx: usize, k: usize) -> usize {
    k.min(2 * nx - k)
}

/// Continuous eigenvalue of sine mode `m` on `[-L, L]`: `-(pi m / (2 L))^2`.
pub(crate) fn dirichlet_continuous_eigenvalue<T: Scalar>(grid: &Grid1D<T>, k: usize) -> T {
    let m = dirichlet_mode(grid.nx(), k);
    let xi = T::PI() * T::from_usize(m).unwrap() / (grid.half_width() + grid.half_width());
    -xi * xi
}

/// Centered-difference eigenvalue of sine mode carried by extension bin `k`:
/// `-(4/dx^2) sin^2(pi k / (2 nx))` (already symmetric in `k <-> 2nx - k`).
pub(crate) fn dirichlet_fd_eigenvalue<T: Scalar>(grid: &Grid1D<T>, k: usize) -> T {
    let dx = grid.dx();
    let s = (T::PI() * T::from_usize(k).unwrap() / T::from_usize(2 * grid.nx()).unwrap()).sin();
    -T::from_f64_lossy(4.0) * s * s / (dx * dx)
}

/// Apply a diagonal-in-sine-basis multiplier to Dirichlet node values
/// (`nx + 1` entries, boundaries zero). `multiplier(k)` receives the
/// extension bin index and must be symmetric under `k <-> 2nx - k`.
pub(crate) fn apply_dirichlet_multiplier<T: Scalar>(
    values: &mut [Complex<T>],
    plans: &FftPair<T>,
    multiplier: impl Fn(usize) -> Complex<T>,
) {
    let nx = values.len() - 1;
    let ext_len = 2 * nx;
    debug_assert_eq!(plans.len(), ext_len);
    let zero = Complex::new(T::zero(), T::zero());
    let mut ext = vec![zero; ext_len];
    for j in 1..nx {
        ext[j] = values[j];
        ext[ext_len - j] = -values[j];
    }
    plans.forward(&mut ext);
    for (k, v) in ext.iter_mut().enumerate() {
        *v *= multiplier(k);
    }
    plans.inverse(&mut ext);
    values[0] = zero;
    values[nx] = zero;
    values[1..nx].copy_from_slice(&ext[1..nx]);
}

/// Apply a diagonal-in-DFT-basis multiplier to periodic node values.
pub(crate) fn apply_periodic_multiplier<T: Scalar>(
    values: &mut [Complex<T>],
    plans: &FftPair<T>,
    multiplier: impl Fn(usize) -> Complex<T>,
) {
    debug_assert_eq!(plans.len(), values.len());
    plans.forward(values);
    for (k, v) in values.iter_mut().enumerate() {
        *v *= multiplier(k);
    }
    plans.inverse(values);
}
