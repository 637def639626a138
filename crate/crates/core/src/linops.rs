//! Linear operators of the problem: the discrete Laplacian, implicit solves
//! `(I - alpha * Lap)^{-1}`, the Cayley propagator of the midpoint rule, the
//! exact linear flow `exp(i tau Lap)`, and a brute-force oscillatory-kernel
//! oracle for cross-checking the linear flow.
//!
//! Two spectral symbols coexist on purpose. The centered-difference
//! eigenvalues `-(4/dx^2) sin^2(.)` belong to the matrix the midpoint scheme
//! actually inverts; the continuous symbol `-xi^2` realizes the exact
//! semigroup of the dispersive subproblem. Both are exposed and selectable
//! wherever a spectral propagator is applied.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, FieldState, Grid1D};
use crate::scalar::Scalar;
use crate::spectral::{self, FftPair};

/// How the Laplacian is realized on a given grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianRep {
    /// Homogeneous Dirichlet: tridiagonal `(1, -2, 1)/dx^2` stencil on the
    /// interior nodes, implicit solves by complex Thomas elimination.
    TridiagonalDirichlet,
    /// Periodic: circulant stencil, implicit solves by DFT division.
    SpectralPeriodic,
}

/// Which eigenvalue family a spectral propagator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralSymbol {
    /// Eigenvalues of the centered-difference matrix.
    FiniteDifference,
    /// The continuous symbol `-xi^2` on the spectral grid.
    Continuous,
}

/// Centered-difference Laplacian on a [`Grid1D`], with FFT plans for the
/// spectral paths built once at construction.
#[derive(Debug)]
pub struct DiscreteLaplacian<T: Scalar> {
    grid: Grid1D<T>,
    plans: FftPair<T>,
}

impl<T: Scalar> DiscreteLaplacian<T> {
    pub fn new(grid: Grid1D<T>) -> Self {
        let plan_len = match grid.bc() {
            BoundaryCondition::Dirichlet => 2 * grid.nx(),
            BoundaryCondition::Periodic => grid.nx(),
        };
        DiscreteLaplacian {
            grid,
            plans: FftPair::new(plan_len),
        }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn representation(&self) -> LaplacianRep {
        match self.grid.bc() {
            BoundaryCondition::Dirichlet => LaplacianRep::TridiagonalDirichlet,
            BoundaryCondition::Periodic => LaplacianRep::SpectralPeriodic,
        }
    }

    fn check_grid(&self, f: &FieldState<T>) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "field does not live on the operator's grid".into(),
            ));
        }
        Ok(())
    }

    /// Apply the stencil: interior nodes get
    /// `(u[j+1] - 2 u[j] + u[j-1]) / dx^2`; Dirichlet boundary nodes get 0.
    pub fn apply(&self, f: &FieldState<T>) -> Result<FieldState<T>> {
        self.check_grid(f)?;
        let dx = self.grid.dx();
        let inv_dx2 = T::one() / (dx * dx);
        let u = f.values();
        let n = u.len();
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; n];
        match self.grid.bc() {
            BoundaryCondition::Dirichlet => {
                let two = T::from_f64_lossy(2.0);
                for j in 1..n - 1 {
                    out[j] = (u[j + 1] - u[j].scale(two) + u[j - 1]).scale(inv_dx2);
                }
            }
            BoundaryCondition::Periodic => {
                let two = T::from_f64_lossy(2.0);
                for j in 0..n {
                    let up = u[(j + 1) % n];
                    let um = u[(j + n - 1) % n];
                    out[j] = (up - u[j].scale(two) + um).scale(inv_dx2);
                }
            }
        }
        Ok(f.with_values(out))
    }

    /// Solve `(I - alpha * Lap) v = rhs`.
    ///
    /// Dirichlet grids use complex Thomas elimination without pivoting: for
    /// the purely imaginary `alpha` arising from the schemes the matrix is
    /// strictly diagonally dominant in modulus, so elimination is stable. A
    /// residual guard verifies `|(I - alpha Lap) v - rhs| <= 1e-12 |rhs|`
    /// afterwards. Periodic grids divide in the DFT basis (exact for the
    /// circulant stencil).
    pub fn solve_implicit(&self, rhs: &FieldState<T>, alpha: Complex<T>) -> Result<FieldState<T>> {
        self.check_grid(rhs)?;
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::invalid("implicit solve needs finite alpha"));
        }
        if alpha == Complex::new(T::zero(), T::zero()) {
            return Ok(rhs.clone());
        }
        let v = match self.grid.bc() {
            BoundaryCondition::Dirichlet => self.solve_dirichlet(rhs, alpha),
            BoundaryCondition::Periodic => self.solve_periodic(rhs, alpha),
        };
        self.residual_guard(&v, rhs, alpha)?;
        Ok(v)
    }

    fn solve_dirichlet(&self, rhs: &FieldState<T>, alpha: Complex<T>) -> FieldState<T> {
        let dx = self.grid.dx();
        let a = alpha / (dx * dx);
        let two = T::from_f64_lossy(2.0);
        let one = Complex::new(T::one(), T::zero());
        let diag = one + a.scale(two);
        let off = -a;

        let u = rhs.values();
        let n = u.len();
        let m = n - 2; // interior unknowns
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; n];
        if m == 0 {
            return rhs.with_values(out);
        }
        // Thomas forward sweep with constant diagonals.
        let mut c_prime = vec![zero; m];
        let mut d_prime = vec![zero; m];
        c_prime[0] = off / diag;
        d_prime[0] = u[1] / diag;
        for i in 1..m {
            let denom = diag - off * c_prime[i - 1];
            c_prime[i] = off / denom;
            d_prime[i] = (u[i + 1] - off * d_prime[i - 1]) / denom;
        }
        // Back substitution.
        out[m] = d_prime[m - 1];
        for i in (0..m - 1).rev() {
            out[i + 1] = d_prime[i] - c_prime[i] * out[i + 2];
        }
        rhs.with_values(out)
    }

    fn solve_periodic(&self, rhs: &FieldState<T>, alpha: Complex<T>) -> FieldState<T> {
        let one = Complex::new(T::one(), T::zero());
        let mut vals = rhs.values().to_vec();
        spectral::apply_periodic_multiplier(&mut vals, &self.plans, |k| {
            let lambda = spectral::periodic_fd_eigenvalue(&self.grid, k);
            one / (one - alpha.scale(lambda))
        });
        rhs.with_values(vals)
    }

    fn residual_guard(
        &self,
        v: &FieldState<T>,
        rhs: &FieldState<T>,
        alpha: Complex<T>,
    ) -> Result<()> {
        let lap_v = self.apply(v)?;
        let mut res = T::zero();
        let mut scale = T::zero();
        for ((vi, li), ri) in v.values().iter().zip(lap_v.values()).zip(rhs.values()) {
            res += (*vi - alpha * *li - *ri).norm_sqr();
            scale += ri.norm_sqr();
        }
        let tol = T::from_f64_lossy(1e-12);
        if res.sqrt() > tol * T::max(scale.sqrt(), T::one()) {
            return Err(Error::Numerical(format!(
                "implicit solve residual {:e} exceeds {:e} * |rhs|",
                res.sqrt().to_f64_lossy(),
                tol.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// Exact flow `exp(i tau Lap)` of the dispersive subproblem, diagonal in
    /// the DFT basis (periodic) or the discrete sine basis (Dirichlet), with
    /// the eigenvalue family chosen by `symbol`. `tau` is a Brownian
    /// increment and may be negative. Unitary: every mode is multiplied by a
    /// unit-modulus factor.
    pub fn semigroup_step(
        &self,
        f: &FieldState<T>,
        tau: T,
        symbol: SpectralSymbol,
    ) -> Result<FieldState<T>> {
        self.check_grid(f)?;
        if !tau.is_finite() {
            return Err(Error::invalid("semigroup step needs finite tau"));
        }
        let mut vals = f.values().to_vec();
        match self.grid.bc() {
            BoundaryCondition::Periodic => {
                spectral::apply_periodic_multiplier(&mut vals, &self.plans, |k| {
                    let lambda = match symbol {
                        SpectralSymbol::FiniteDifference => {
                            spectral::periodic_fd_eigenvalue(&self.grid, k)
                        }
                        SpectralSymbol::Continuous => {
                            let xi = spectral::periodic_wavenumber(&self.grid, k);
                            -xi * xi
                        }
                    };
                    Complex::from_polar(T::one(), tau * lambda)
                });
            }
            BoundaryCondition::Dirichlet => {
                spectral::apply_dirichlet_multiplier(&mut vals, &self.plans, |k| {
                    let lambda = match symbol {
                        SpectralSymbol::FiniteDifference => {
                            spectral::dirichlet_fd_eigenvalue(&self.grid, k)
                        }
                        SpectralSymbol::Continuous => {
                            spectral::dirichlet_continuous_eigenvalue(&self.grid, k)
                        }
                    };
                    Complex::from_polar(T::one(), tau * lambda)
                });
            }
        }
        Ok(f.with_values(vals))
    }
}

/// The two operators of one midpoint linear step for increment `dw`:
/// the implicit factor `T = (I - i (dw/2) Lap)^{-1}` and the Cayley
/// propagator `S = T (I + i (dw/2) Lap)`.
///
/// `S` is the Cayley transform of a skew-Hermitian operator and therefore
/// unitary on the discrete l2 inner product; `|T| <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct CayleyPair<'a, T: Scalar> {
    lap: &'a DiscreteLaplacian<T>,
    half_dw: T,
}

impl<'a, T: Scalar> CayleyPair<'a, T> {
    pub fn new(lap: &'a DiscreteLaplacian<T>, dw: T) -> Self {
        CayleyPair {
            lap,
            half_dw: dw * T::from_f64_lossy(0.5),
        }
    }

    /// The half increment `dw / 2`.
    pub fn half_increment(&self) -> T {
        self.half_dw
    }

    /// Apply the implicit factor `T = (I - i (dw/2) Lap)^{-1}`.
    pub fn implicit_factor(&self, f: &FieldState<T>) -> Result<FieldState<T>> {
        self.lap
            .solve_implicit(f, Complex::new(T::zero(), self.half_dw))
    }

    /// Apply the Cayley propagator `S`.
    pub fn step(&self, f: &FieldState<T>) -> Result<FieldState<T>> {
        let lap_f = self.lap.apply(f)?;
        let i_half = Complex::new(T::zero(), self.half_dw);
        let rhs_vals: Vec<Complex<T>> = f
            .values()
            .iter()
            .zip(lap_f.values())
            .map(|(u, l)| *u + i_half * *l)
            .collect();
        self.implicit_factor(&f.with_values(rhs_vals))
    }
}

/// Brute-force quadrature of the free propagator kernel
///
/// ```text
/// (S phi)(x) = (4 pi i tau)^(-1/2) * int exp(i |x - y|^2 / (4 tau)) phi(y) dy
/// ```
///
/// with the principal branch of the complex square root and the rectangle
/// rule over the grid nodes. O(n^2) and quadrature-limited: a reference
/// fixture for small grids, not a production propagator. `tau = 0` is
/// rejected (the identity is not representable by the kernel).
pub fn kernel_oracle<T: Scalar>(phi: &FieldState<T>, tau: T) -> Result<FieldState<T>> {
    if tau == T::zero() || !tau.is_finite() {
        return Err(Error::invalid(
            "kernel oracle needs a finite nonzero tau (tau = 0 is the identity)",
        ));
    }
    let grid = *phi.grid();
    let dx = grid.dx();
    let four = T::from_f64_lossy(4.0);
    let prefactor = Complex::new(T::zero(), four * T::PI() * tau)
        .sqrt()
        .inv()
        .scale(dx);
    let inv_4tau = (four * tau).recip();
    let n = phi.values().len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let xj = grid.x(j);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (l, value) in phi.values().iter().enumerate() {
            let d = xj - grid.x(l);
            acc += Complex::from_polar(T::one(), d * d * inv_4tau) * *value;
        }
        out.push(prefactor * acc);
    }
    if grid.bc() == BoundaryCondition::Dirichlet {
        let zero = Complex::new(T::zero(), T::zero());
        out[0] = zero;
        out[n - 1] = zero;
    }
    Ok(phi.with_values(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type C64 = Complex<f64>;

    fn dirichlet_grid(nx: usize) -> Grid1D<f64> {
        Grid1D::new(2.0, nx, BoundaryCondition::Dirichlet).unwrap()
    }

    fn periodic_grid(nx: usize) -> Grid1D<f64> {
        Grid1D::new(2.0, nx, BoundaryCondition::Periodic).unwrap()
    }

    #[test]
    fn laplacian_annihilates_affine_fields() {
        let g = dirichlet_grid(32);
        let lap = DiscreteLaplacian::new(g);
        let f = FieldState::from_profile(g, |x| C64::new(1.3 * x + 0.4, -0.2 * x));
        let out = lap.apply(&f).unwrap();
        // Away from the (clamped) boundary the second difference of an
        // affine profile vanishes.
        for j in 2..g.nx() - 1 {
            assert!(out.values()[j].norm() < 1e-12, "node {j}: {}", out.values()[j]);
        }
    }

    #[test]
    fn laplacian_is_exact_on_quadratics() {
        let g = dirichlet_grid(64);
        let lap = DiscreteLaplacian::new(g);
        let f = FieldState::from_profile(g, |x| C64::new(x * x, 0.0));
        let out = lap.apply(&f).unwrap();
        for j in 2..g.nx() - 1 {
            assert_relative_eq!(out.values()[j].re, 2.0, epsilon = 1e-10);
            assert!(out.values()[j].im.abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_mode_is_eigenvector_with_fd_eigenvalue() {
        let g = periodic_grid(24);
        let lap = DiscreteLaplacian::new(g);
        let m = 5usize;
        let xi = std::f64::consts::PI * m as f64 / g.half_width();
        let f = FieldState::from_profile(g, |x| C64::new((xi * x).cos(), (xi * x).sin()));
        let out = lap.apply(&f).unwrap();
        let dx = g.dx();
        let lambda = -4.0 / (dx * dx) * (xi * dx / 2.0).sin().powi(2);
        for (o, u) in out.values().iter().zip(f.values()) {
            let expected = u.scale(lambda);
            assert_relative_eq!(o.re, expected.re, epsilon = 1e-9);
            assert_relative_eq!(o.im, expected.im, epsilon = 1e-9);
        }
    }

    #[test]
    fn implicit_solve_with_zero_alpha_is_identity() {
        let g = dirichlet_grid(16);
        let lap = DiscreteLaplacian::new(g);
        let f = FieldState::gaussian(g, 1.0);
        let v = lap.solve_implicit(&f, C64::new(0.0, 0.0)).unwrap();
        assert_eq!(v.values(), f.values());
    }

    #[test]
    fn implicit_solve_satisfies_equation() {
        for grid in [dirichlet_grid(20), periodic_grid(20)] {
            let lap = DiscreteLaplacian::new(grid);
            let f = FieldState::from_profile(grid, |x| C64::new((2.0 * x).sin(), x.cos()));
            let alpha = C64::new(0.0, 0.037);
            let v = lap.solve_implicit(&f, alpha).unwrap();
            let lap_v = lap.apply(&v).unwrap();
            for ((vi, li), ri) in v.values().iter().zip(lap_v.values()).zip(f.values()) {
                let res = vi - alpha * li - ri;
                assert!(res.norm() < 1e-12, "residual {res}");
            }
        }
    }

    #[test]
    fn implicit_solve_rejects_non_finite_alpha() {
        let g = dirichlet_grid(8);
        let lap = DiscreteLaplacian::new(g);
        let f = FieldState::gaussian(g, 1.0);
        assert!(lap.solve_implicit(&f, C64::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn cayley_with_zero_increment_is_identity() {
        let g = dirichlet_grid(16);
        let lap = DiscreteLaplacian::new(g);
        let f = FieldState::gaussian(g, 2.0);
        let out = CayleyPair::new(&lap, 0.0).step(&f).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn cayley_preserves_charge() {
        for grid in [dirichlet_grid(40), periodic_grid(40)] {
            let lap = DiscreteLaplacian::new(grid);
            let f = FieldState::from_profile(grid, |x| C64::new((-x * x).exp(), 0.3 * x.sin()));
            let out = CayleyPair::new(&lap, 0.123).step(&f).unwrap();
            assert_relative_eq!(out.charge(), f.charge(), max_relative = 1e-12);
        }
    }

    #[test]
    fn cayley_multiplier_on_periodic_mode() {
        let g = periodic_grid(32);
        let lap = DiscreteLaplacian::new(g);
        let m = 3usize;
        let xi = std::f64::consts::PI * m as f64 / g.half_width();
        let f = FieldState::from_profile(g, |x| C64::new((xi * x).cos(), (xi * x).sin()));
        let dw = 0.2;
        let out = CayleyPair::new(&lap, dw).step(&f).unwrap();
        let dx = g.dx();
        let lambda = -4.0 / (dx * dx) * (xi * dx / 2.0).sin().powi(2);
        let mult = (C64::new(1.0, 0.0) + C64::new(0.0, dw / 2.0 * lambda))
            / (C64::new(1.0, 0.0) - C64::new(0.0, dw / 2.0 * lambda));
        assert_relative_eq!(mult.norm(), 1.0, epsilon = 1e-14);
        for (o, u) in out.values().iter().zip(f.values()) {
            let expected = u * mult;
            assert_relative_eq!(o.re, expected.re, epsilon = 1e-10);
            assert_relative_eq!(o.im, expected.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn cayley_inverse_composes_to_identity() {
        let g = dirichlet_grid(24);
        let lap = DiscreteLaplacian::new(g);
        let f = FieldState::from_profile(g, |x| C64::new((1.5 * x).sin(), (-x * x).exp()));
        let dw = 0.31;
        let fwd = CayleyPair::new(&lap, dw).step(&f).unwrap();
        let back = CayleyPair::new(&lap, -dw).step(&fwd).unwrap();
        let mut err: f64 = 0.0;
        for (a, b) in back.values().iter().zip(f.values()) {
            err = err.max((a - b).norm());
        }
        assert!(err < 1e-12 * f.l2_norm().max(1.0), "round trip error {err}");
    }

    #[test]
    fn cayley_matches_exponential_to_third_order() {
        // Scalar Richardson check: per mode, the Cayley multiplier equals the
        // exponential one up to O(tau^3). Fitted slope of the defect >= 2.9.
        let lambda = -37.0;
        let defects: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let tau = 1e-2 / 2f64.powi(k);
                let half = C64::new(0.0, tau * lambda / 2.0);
                let cayley = (C64::new(1.0, 0.0) + half) / (C64::new(1.0, 0.0) - half);
                let exact = C64::from_polar(1.0, tau * lambda);
                (tau, (cayley - exact).norm())
            })
            .collect();
        let slope = fit_log_slope(&defects);
        assert!(slope >= 2.9, "Richardson slope {slope} below 2.9");
    }

    fn fit_log_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(x, y) in points {
            let (lx, ly) = (x.ln(), y.ln());
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn semigroup_zero_tau_is_identity() {
        for grid in [dirichlet_grid(16), periodic_grid(16)] {
            let lap = DiscreteLaplacian::new(grid);
            let f = FieldState::gaussian(grid, 1.0);
            for symbol in [SpectralSymbol::FiniteDifference, SpectralSymbol::Continuous] {
                let out = lap.semigroup_step(&f, 0.0, symbol).unwrap();
                for (a, b) in out.values().iter().zip(f.values()) {
                    assert!((a - b).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn semigroup_has_group_property() {
        for grid in [dirichlet_grid(32), periodic_grid(32)] {
            let lap = DiscreteLaplacian::new(grid);
            let f = FieldState::from_profile(grid, |x| C64::new((-2.0 * x * x).exp(), 0.1 * x));
            let (t1, t2) = (0.07, -0.031);
            for symbol in [SpectralSymbol::FiniteDifference, SpectralSymbol::Continuous] {
                let two_steps = lap
                    .semigroup_step(&lap.semigroup_step(&f, t1, symbol).unwrap(), t2, symbol)
                    .unwrap();
                let one_step = lap.semigroup_step(&f, t1 + t2, symbol).unwrap();
                let mut err: f64 = 0.0;
                for (a, b) in two_steps.values().iter().zip(one_step.values()) {
                    err = err.max((a - b).norm());
                }
                assert!(err < 1e-12, "group property violated by {err}");
            }
        }
    }

    #[test]
    fn semigroup_preserves_charge() {
        for grid in [dirichlet_grid(48), periodic_grid(48)] {
            let lap = DiscreteLaplacian::new(grid);
            let f = FieldState::from_profile(grid, |x| C64::new((-x * x).exp(), (2.0 * x).cos()));
            for symbol in [SpectralSymbol::FiniteDifference, SpectralSymbol::Continuous] {
                let out = lap.semigroup_step(&f, 0.17, symbol).unwrap();
                assert_relative_eq!(out.charge(), f.charge(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn kernel_oracle_rejects_zero_tau() {
        let g = dirichlet_grid(8);
        let f = FieldState::gaussian(g, 1.0);
        assert!(kernel_oracle(&f, 0.0).is_err());
    }
}
