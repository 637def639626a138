//! Discrete solution fields on a uniform 1-D grid, and the functionals the
//! schemes are judged by: charge, energy, grid norms.
//!
//! All quadrature is the rectangle rule with weight `dx`, matching the
//! discrete charge `dx * sum_j |u_j|^2` conserved by the symplectic schemes.
//! Gradients in the energy use the forward difference `(u[j+1] - u[j]) / dx`;
//! under Dirichlet conditions the stored boundary value is exactly zero, so
//! the last difference sees the zero ghost value automatically.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral;

/// Boundary condition tag for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet: field values at both end nodes are pinned to 0.
    Dirichlet,
    /// Periodic: node `nx` is identified with node 0.
    Periodic,
}

/// Uniform grid on `[-half_width, half_width]` with `nx` cells of width
/// `dx = 2 * half_width / nx`.
///
/// Dirichlet grids store `nx + 1` nodes (both boundaries); periodic grids
/// store `nx` nodes (the right boundary is the left one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    half_width: T,
    nx: usize,
    bc: BoundaryCondition,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(half_width: T, nx: usize, bc: BoundaryCondition) -> Result<Self> {
        if nx < 4 {
            return Err(Error::invalid(format!("grid needs nx >= 4, got {nx}")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::invalid("grid half-width must be positive and finite"));
        }
        Ok(Grid1D { half_width, nx, bc })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    /// Number of cells `nx`.
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Mesh width `dx = 2 * half_width / nx`.
    pub fn dx(&self) -> T {
        (self.half_width + self.half_width) / T::from_usize(self.nx).unwrap()
    }

    /// Number of stored nodes: `nx + 1` (Dirichlet) or `nx` (periodic).
    pub fn node_count(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => self.nx + 1,
            BoundaryCondition::Periodic => self.nx,
        }
    }

    /// Node coordinate `x_j = -half_width + j * dx`.
    pub fn x(&self, j: usize) -> T {
        -self.half_width + T::from_usize(j).unwrap() * self.dx()
    }
}

/// Complex field values on a grid at a given time.
///
/// The real and imaginary parts of `values()[j]` are the canonical
/// coordinates `p_j` and `q_j`; they are views into the stored complex
/// numbers, not copies.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    grid: Grid1D<T>,
    values: Vec<Complex<T>>,
    time: T,
}

impl<T: Scalar> FieldState<T> {
    /// Wrap explicit node values. Length must match the grid; Dirichlet
    /// boundary entries must be exactly zero; all entries must be finite.
    pub fn from_values(grid: Grid1D<T>, values: Vec<Complex<T>>, time: T) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid(format!(
                "field has {} values but the grid stores {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("field contains non-finite entries"));
        }
        if grid.bc() == BoundaryCondition::Dirichlet {
            let zero = Complex::new(T::zero(), T::zero());
            if values[0] != zero || values[values.len() - 1] != zero {
                return Err(Error::invalid(
                    "Dirichlet boundary values must be exactly zero",
                ));
            }
        }
        Ok(FieldState { grid, values, time })
    }

    /// The zero field at time 0.
    pub fn zero(grid: Grid1D<T>) -> Self {
        let values = vec![Complex::new(T::zero(), T::zero()); grid.node_count()];
        FieldState {
            grid,
            values,
            time: T::zero(),
        }
    }

    /// Sample a closed-form profile pointwise at the nodes (no cell
    /// averaging). Dirichlet boundary nodes are pinned to exactly zero.
    pub fn from_profile(grid: Grid1D<T>, profile: impl Fn(T) -> Complex<T>) -> Self {
        let mut values: Vec<Complex<T>> =
            (0..grid.node_count()).map(|j| profile(grid.x(j))).collect();
        if grid.bc() == BoundaryCondition::Dirichlet {
            let zero = Complex::new(T::zero(), T::zero());
            values[0] = zero;
            let last = values.len() - 1;
            values[last] = zero;
        }
        FieldState {
            grid,
            values,
            time: T::zero(),
        }
    }

    /// Gaussian hump `exp(-a x^2)`.
    pub fn gaussian(grid: Grid1D<T>, a: T) -> Self {
        Self::from_profile(grid, |x| Complex::new((-a * x * x).exp(), T::zero()))
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Real part `p_j`.
    pub fn p(&self, j: usize) -> T {
        self.values[j].re
    }

    /// Imaginary part `q_j`.
    pub fn q(&self, j: usize) -> T {
        self.values[j].im
    }

    pub(crate) fn set_time(&mut self, t: T) {
        self.time = t;
    }

    pub(crate) fn with_values(&self, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        FieldState {
            grid: self.grid,
            values,
            time: self.time,
        }
    }

    /// Discrete charge `Q = dx * sum_j |u_j|^2`.
    pub fn charge(&self) -> T {
        let sum: T = self.values.iter().map(|v| v.norm_sqr()).sum();
        self.grid.dx() * sum
    }

    /// Discrete l2 norm `sqrt(Q)`.
    pub fn l2_norm(&self) -> T {
        self.charge().sqrt()
    }

    /// Discrete energy functionals for nonlinearity power `sigma` (1 or 2):
    /// kinetic `-H1 = (dx/2) * sum |d+ u|^2`, potential
    /// `H2 = dx/(2 sigma + 2) * sum |u|^(2 sigma + 2)`, and
    /// `H = -H1 - H2` as an exact algebraic identity of the discretization.
    pub fn energy(&self, sigma: u32) -> Result<Functionals<T>> {
        check_sigma(sigma)?;
        let dx = self.grid.dx();
        let half = T::from_f64_lossy(0.5);
        let n = self.values.len();
        let mut grad_sq = T::zero();
        match self.grid.bc() {
            BoundaryCondition::Dirichlet => {
                for j in 0..n - 1 {
                    grad_sq += ((self.values[j + 1] - self.values[j]) / dx).norm_sqr();
                }
            }
            BoundaryCondition::Periodic => {
                for j in 0..n {
                    let next = self.values[(j + 1) % n];
                    grad_sq += ((next - self.values[j]) / dx).norm_sqr();
                }
            }
        }
        let kinetic = half * dx * grad_sq;

        let power = sigma + 1; // |u|^(2 sigma + 2) = (|u|^2)^(sigma + 1)
        let mut pot_sum = T::zero();
        for v in &self.values {
            pot_sum += v.norm_sqr().powi(power as i32);
        }
        let potential = dx * pot_sum / T::from_u32(2 * sigma + 2).unwrap();

        Ok(Functionals {
            charge: self.charge(),
            h: kinetic - potential,
            h1: -kinetic,
            h2: potential,
        })
    }

    /// Sobolev-type spectral norm
    /// `( sum_k (1 + xi_k^2)^s |u_hat_k|^2 )^(1/2)` on a periodic grid, with
    /// Fourier coefficients normalized so that `s = 0` recovers the l2 norm.
    ///
    /// Defined on the periodic torus only; Dirichlet grids are rejected.
    pub fn hs_norm(&self, s: T) -> Result<T> {
        if self.grid.bc() != BoundaryCondition::Periodic {
            return Err(Error::Unsupported(
                "hs_norm is a spectral norm defined on periodic grids only".into(),
            ));
        }
        if s < T::zero() {
            return Err(Error::invalid("hs_norm requires s >= 0"));
        }
        let n = self.values.len();
        let mut hat = self.values.clone();
        spectral::fft_forward(&mut hat);
        // |u_hat_k|^2 normalized by dx/n so that s = 0 matches dx*sum|u|^2.
        let weight = self.grid.dx() / T::from_usize(n).unwrap();
        let mut acc = T::zero();
        for (k, coeff) in hat.iter().enumerate() {
            let xi = spectral::periodic_wavenumber(&self.grid, k);
            acc += (T::one() + xi * xi).powf(s) * coeff.norm_sqr() * weight;
        }
        Ok(acc.sqrt())
    }

    /// Write a `t,x,re,im,abs` CSV snapshot of the field.
    pub fn write_snapshot_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "t,x,re,im,abs")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.time,
                self.grid.x(j),
                v.re,
                v.im,
                v.norm()
            )?;
        }
        Ok(())
    }
}

/// Discrete invariants of a field: charge `Q`, energy `H`, and the two
/// Hamiltonians `H1 = -1/2 int |grad u|^2`, `H2 = 1/(2s+2) int |u|^(2s+2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals<T> {
    pub charge: T,
    pub h: T,
    pub h1: T,
    pub h2: T,
}

/// l2 distance `( dx * sum_j |a_j - b_j|^2 )^(1/2)` between fields on the
/// same grid.
pub fn l2_error<T: Scalar>(a: &FieldState<T>, b: &FieldState<T>) -> Result<T> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(
            "l2_error requires both fields on the same grid".into(),
        ));
    }
    let sum: T = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (*x - *y).norm_sqr())
        .sum();
    Ok((a.grid().dx() * sum).sqrt())
}

pub(crate) fn check_sigma(sigma: u32) -> Result<()> {
    if sigma == 1 || sigma == 2 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "nonlinearity power sigma must be 1 or 2, got {sigma}"
        )))
    }
}
