//! Time steppers for `i du + Lap u o dW + |u|^(2 sigma) u dt = 0`.
//!
//! Three one-step maps share a grid and a [`SchemeConfig`]:
//!
//! * **midpoint** — the implicit midpoint rule. The linear part becomes the
//!   unitary Cayley propagator, the nonlinear part is resolved by Picard
//!   iteration on the half step `w = (u_n + u_{n+1}) / 2`:
//!   `(I - i (dW/2) Lap) w = u_n + i (dt/2) g_R(w)`. Conserves the discrete
//!   charge and the symplectic form.
//! * **lie_splitting** — exact pointwise phase rotation
//!   `u -> exp(i dt theta_R |u|^(2 sigma)) u` composed with the exact
//!   spectral flow `exp(i dW Lap)`; order of the two substeps is a flag.
//!   Fully explicit, conserves charge and the symplectic form.
//! * **euler_maruyama** — the explicit comparator
//!   `u_{n+1} = u_n + i dW Lap u_n + i dt g(u_n)`. Not symplectic, does not
//!   conserve charge; used as a negative control.
//!
//! Each stepper has a companion tangent map (its linearization along a step)
//! so that symplectic 2-forms can be evaluated on propagated perturbations.
//!
//! The optional truncation multiplies the nonlinearity by a smooth norm
//! cutoff `theta_R` (identically 1 inside radius `R`, 0 beyond `2R`), which
//! keeps the effective nonlinearity Lipschitz. With `R` well above the
//! trajectory's norm the truncated and plain schemes coincide.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{check_sigma, BoundaryCondition, FieldState, Grid1D};
use crate::linops::{DiscreteLaplacian, SpectralSymbol};
use crate::scalar::Scalar;

/// Scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Midpoint,
    LieSplitting,
    EulerMaruyama,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Midpoint => "midpoint",
            Scheme::LieSplitting => "lie_splitting",
            Scheme::EulerMaruyama => "euler_maruyama",
        }
    }
}

/// Order of the two splitting substeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplittingOrder {
    /// Phase rotation first, then the spectral flow (the default).
    NonlinearFirst,
    /// Spectral flow first, then the phase rotation.
    LinearFirst,
}

/// Norm used by the truncation cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationNorm {
    L2,
    /// Spectral `H^1` norm; periodic grids only.
    H1Spectral,
}

/// Smooth norm cutoff: `theta_R(u) = theta(norm(u) / R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig<T> {
    pub radius: T,
    pub norm: TruncationNorm,
}

/// Numerical parameters of a one-step map.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig<T> {
    pub scheme: Scheme,
    /// Nonlinearity power, 1 or 2.
    pub sigma: u32,
    /// Time step.
    pub dt: T,
    /// Fixed-point tolerance for the implicit solves.
    pub fp_tol: T,
    /// Sweep budget for the fixed-point iteration.
    pub fp_max_iter: usize,
    pub truncation: Option<TruncationConfig<T>>,
    pub splitting_order: SplittingOrder,
    /// Eigenvalue family for the splitting's spectral flow. The midpoint
    /// scheme always uses the centered-difference matrix it inverts.
    pub splitting_symbol: SpectralSymbol,
    /// Test hook: with `false` the nonlinear term is dropped entirely and
    /// every scheme degenerates to its linear part.
    pub nonlinearity_enabled: bool,
}

impl<T: Scalar> SchemeConfig<T> {
    pub fn new(scheme: Scheme, dt: T) -> Self {
        SchemeConfig {
            scheme,
            sigma: 1,
            dt,
            fp_tol: T::from_f64_lossy(1e-12),
            fp_max_iter: 100,
            truncation: None,
            splitting_order: SplittingOrder::NonlinearFirst,
            splitting_symbol: SpectralSymbol::Continuous,
            nonlinearity_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_sigma(self.sigma)?;
        if !(self.dt >= T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be nonnegative and finite"));
        }
        if !(self.fp_tol > T::zero()) {
            return Err(Error::invalid("fixed-point tolerance must be positive"));
        }
        if self.fp_max_iter == 0 {
            return Err(Error::invalid("fixed-point iteration budget must be >= 1"));
        }
        if let Some(trunc) = &self.truncation {
            if !(trunc.radius > T::zero()) {
                return Err(Error::invalid("truncation radius must be positive"));
            }
        }
        Ok(())
    }
}

/// A real-linear perturbation field propagated by the linearized schemes.
///
/// Stored as complex node values; the real and imaginary parts are the
/// `(xi_p, xi_q)` components. The maps acting on it mix `xi` and its
/// conjugate, so it transforms real-linearly, not complex-linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField<T> {
    grid: Grid1D<T>,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> TangentField<T> {
    pub fn from_values(grid: Grid1D<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid("tangent length does not match grid"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("tangent contains non-finite entries"));
        }
        if grid.bc() == BoundaryCondition::Dirichlet {
            let zero = Complex::new(T::zero(), T::zero());
            if values[0] != zero || values[values.len() - 1] != zero {
                return Err(Error::invalid("Dirichlet tangents vanish on the boundary"));
            }
        }
        Ok(TangentField { grid, values })
    }

    pub fn zero(grid: Grid1D<T>) -> Self {
        TangentField {
            values: vec![Complex::new(T::zero(), T::zero()); grid.node_count()],
            grid,
        }
    }

    /// Sample a profile pointwise; Dirichlet boundaries pinned to zero.
    pub fn from_profile(grid: Grid1D<T>, profile: impl Fn(T) -> Complex<T>) -> Self {
        let f = FieldState::from_profile(grid, profile);
        TangentField {
            grid,
            values: f.values().to_vec(),
        }
    }

    /// Deterministic pseudo-random tangent with entries in `[-1, 1]^2`,
    /// Dirichlet boundaries zero.
    pub fn seeded_random(grid: Grid1D<T>, seed: u64) -> Self {
        use rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x7461_6e67_656e_7421);
        let mut unit = || {
            let x = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            T::from_f64_lossy(2.0 * x - 1.0)
        };
        let mut values: Vec<Complex<T>> = (0..grid.node_count())
            .map(|_| Complex::new(unit(), unit()))
            .collect();
        if grid.bc() == BoundaryCondition::Dirichlet {
            let zero = Complex::new(T::zero(), T::zero());
            values[0] = zero;
            let last = values.len() - 1;
            values[last] = zero;
        }
        TangentField { grid, values }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// `xi_p` component at node `j`.
    pub fn p(&self, j: usize) -> T {
        self.values[j].re
    }

    /// `xi_q` component at node `j`.
    pub fn q(&self, j: usize) -> T {
        self.values[j].im
    }

    pub fn l2_norm(&self) -> T {
        let sum: T = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.dx() * sum).sqrt()
    }

    fn with_values(&self, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        TangentField {
            grid: self.grid,
            values,
        }
    }
}

/// Pointwise nonlinearity `g(u) = |u|^(2 sigma) u`.
pub fn nonlinearity<T: Scalar>(u: &FieldState<T>, sigma: u32) -> Result<FieldState<T>> {
    check_sigma(sigma)?;
    let vals = u
        .values()
        .iter()
        .map(|v| v.scale(v.norm_sqr().powi(sigma as i32)))
        .collect();
    Ok(u.with_values(vals))
}

/// Real-linear directional derivative of `g` at `u`:
/// `Dg(u)[xi] = (sigma+1) |u|^(2 sigma) xi + sigma |u|^(2 sigma - 2) u^2 conj(xi)`.
pub fn nonlinearity_jacobian<T: Scalar>(
    u: &FieldState<T>,
    sigma: u32,
    xi: &TangentField<T>,
) -> Result<TangentField<T>> {
    check_sigma(sigma)?;
    if u.grid() != xi.grid() {
        return Err(Error::GridMismatch(
            "state and tangent live on different grids".into(),
        ));
    }
    let vals = u
        .values()
        .iter()
        .zip(xi.values())
        .map(|(uj, xj)| jacobian_at(*uj, *xj, sigma))
        .collect();
    Ok(xi.with_values(vals))
}

fn jacobian_at<T: Scalar>(u: Complex<T>, xi: Complex<T>, sigma: u32) -> Complex<T> {
    let s = T::from_u32(sigma).unwrap();
    let mod2 = u.norm_sqr();
    let a = xi.scale((s + T::one()) * mod2.powi(sigma as i32));
    let b = (u * u * xi.conj()).scale(s * mod2.powi(sigma as i32 - 1));
    a + b
}

/// Smooth cutoff profile: 1 on `[0, 1]`, 0 on `[2, inf)`, and the bump blend
/// `psi(2 - r) / (psi(2 - r) + psi(r - 1))` with `psi(s) = exp(-1/s)` for
/// `s > 0` (else 0) in between. Smooth and monotone.
pub fn bump_cutoff<T: Scalar>(r: T) -> T {
    let one = T::one();
    let two = one + one;
    if r <= one {
        one
    } else if r >= two {
        T::zero()
    } else {
        let psi = |s: T| if s > T::zero() { (-s.recip()).exp() } else { T::zero() };
        let upper = psi(two - r);
        upper / (upper + psi(r - one))
    }
}

/// One-step integrator: a [`SchemeConfig`] bound to a grid, with the
/// discrete Laplacian (and its FFT plans) built once.
#[derive(Debug)]
pub struct Integrator<T: Scalar> {
    cfg: SchemeConfig<T>,
    lap: DiscreteLaplacian<T>,
}

impl<T: Scalar> Integrator<T> {
    pub fn new(grid: Grid1D<T>, cfg: SchemeConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if let Some(trunc) = &cfg.truncation {
            if trunc.norm == TruncationNorm::H1Spectral
                && grid.bc() == BoundaryCondition::Dirichlet
            {
                return Err(Error::invalid(
                    "the H1 spectral truncation norm needs a periodic grid; use l2 on Dirichlet",
                ));
            }
        }
        Ok(Integrator {
            cfg,
            lap: DiscreteLaplacian::new(grid),
        })
    }

    pub fn config(&self) -> &SchemeConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid1D<T> {
        self.lap.grid()
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian<T> {
        &self.lap
    }

    /// Advance one step with the configured scheme. Returns the new state and
    /// the number of fixed-point sweeps spent (0 for the explicit schemes).
    pub fn step(&self, u: &FieldState<T>, dwn: T) -> Result<(FieldState<T>, usize)> {
        match self.cfg.scheme {
            Scheme::Midpoint => self.midpoint_step(u, dwn),
            Scheme::LieSplitting => Ok((self.splitting_step(u, dwn)?, 0)),
            Scheme::EulerMaruyama => Ok((self.euler_maruyama_step(u, dwn)?, 0)),
        }
    }

    /// Tangent map of the configured scheme along the step `(u, u_next)`.
    pub fn tangent_step(
        &self,
        u: &FieldState<T>,
        u_next: &FieldState<T>,
        dwn: T,
        xi: &TangentField<T>,
    ) -> Result<TangentField<T>> {
        match self.cfg.scheme {
            Scheme::Midpoint => Ok(self.midpoint_tangent_step(u, u_next, dwn, xi)?.0),
            Scheme::LieSplitting => self.splitting_tangent_step(u, dwn, xi),
            Scheme::EulerMaruyama => self.euler_maruyama_tangent_step(u, dwn, xi),
        }
    }

    /// Cutoff factor `theta_R(u)`; 1 when truncation is disabled.
    pub fn truncation_factor(&self, u: &FieldState<T>) -> Result<T> {
        match &self.cfg.truncation {
            None => Ok(T::one()),
            Some(trunc) => {
                let norm = match trunc.norm {
                    TruncationNorm::L2 => u.l2_norm(),
                    TruncationNorm::H1Spectral => u.hs_norm(T::one())?,
                };
                Ok(bump_cutoff(norm / trunc.radius))
            }
        }
    }

    /// `theta_R(u) * g(u)`, or zero when the nonlinearity is disabled.
    fn effective_nonlinearity(&self, u: &FieldState<T>) -> Result<Option<(T, FieldState<T>)>> {
        if !self.cfg.nonlinearity_enabled {
            return Ok(None);
        }
        let theta = self.truncation_factor(u)?;
        Ok(Some((theta, nonlinearity(u, self.cfg.sigma)?)))
    }

    /// Implicit midpoint step. Picard iteration on the half step `w`:
    /// `(I - i (dW/2) Lap) w_(k+1) = u + i (dt/2) theta_R(w_k) g(w_k)`,
    /// starting from `w_0 = u`, stopping when successive sweeps differ by
    /// less than `fp_tol * max(1, |u|)` in l2, plus two polishing sweeps to
    /// push the iterate onto the fixed point's roundoff floor. Returns
    /// `u_next = 2 w - u` and the sweep count.
    pub fn midpoint_step(&self, u: &FieldState<T>, dwn: T) -> Result<(FieldState<T>, usize)> {
        let (w, sweeps) = self.midpoint_half_step(u, dwn)?;
        let two = T::from_f64_lossy(2.0);
        let vals = w
            .values()
            .iter()
            .zip(u.values())
            .map(|(wj, uj)| wj.scale(two) - *uj)
            .collect();
        let mut next = u.with_values(vals);
        next.set_time(u.time() + self.cfg.dt);
        Ok((next, sweeps))
    }

    fn midpoint_half_step(&self, u: &FieldState<T>, dwn: T) -> Result<(FieldState<T>, usize)> {
        let alpha = Complex::new(T::zero(), dwn * T::from_f64_lossy(0.5));
        let i_half_dt = Complex::new(T::zero(), self.cfg.dt * T::from_f64_lossy(0.5));
        let tol = self.cfg.fp_tol * T::max(T::one(), u.l2_norm());

        let sweep = |w: &FieldState<T>| -> Result<FieldState<T>> {
            let rhs = match self.effective_nonlinearity(w)? {
                None => u.clone(),
                Some((theta, g)) => {
                    let vals = u
                        .values()
                        .iter()
                        .zip(g.values())
                        .map(|(uj, gj)| *uj + i_half_dt.scale(theta) * *gj)
                        .collect();
                    u.with_values(vals)
                }
            };
            self.lap.solve_implicit(&rhs, alpha)
        };

        let mut w = u.clone();
        let mut sweeps = 0usize;
        loop {
            let w_new = sweep(&w)?;
            sweeps += 1;
            let diff = iter_distance(&w, &w_new);
            w = w_new;
            if diff <= tol {
                break;
            }
            if sweeps >= self.cfg.fp_max_iter {
                return Err(Error::ConvergenceFailure {
                    iterations: sweeps,
                    residual: diff.to_f64_lossy(),
                    tolerance: tol.to_f64_lossy(),
                });
            }
        }
        // Two polishing sweeps: contraction is O(dt), so these land the
        // iterate at the fixed point's machine floor and keep the charge
        // drift at roundoff level.
        for _ in 0..2 {
            w = sweep(&w)?;
            sweeps += 1;
        }
        Ok((w, sweeps))
    }

    /// l2 residual of the midpoint relation
    /// `i (u' - u)/dt + (dW/dt) Lap w + theta_R g(w)` at `w = (u + u')/2`.
    pub fn midpoint_residual(
        &self,
        u: &FieldState<T>,
        u_next: &FieldState<T>,
        dwn: T,
    ) -> Result<T> {
        let half = T::from_f64_lossy(0.5);
        let w_vals: Vec<Complex<T>> = u
            .values()
            .iter()
            .zip(u_next.values())
            .map(|(a, b)| (*a + *b).scale(half))
            .collect();
        let w = u.with_values(w_vals);
        let lap_w = self.lap.apply(&w)?;
        let g_term = self.effective_nonlinearity(&w)?;
        let inv_dt = self.cfg.dt.recip();
        let i_unit = Complex::new(T::zero(), T::one());
        let mut acc = T::zero();
        for j in 0..w.values().len() {
            let mut r = i_unit * (u_next.values()[j] - u.values()[j]).scale(inv_dt)
                + lap_w.values()[j].scale(dwn * inv_dt);
            if let Some((theta, g)) = &g_term {
                r += g.values()[j].scale(*theta);
            }
            acc += r.norm_sqr();
        }
        Ok((self.grid().dx() * acc).sqrt())
    }

    /// Lie splitting step: pointwise phase rotation by
    /// `dt * theta_R(u) * |u_j|^(2 sigma)` and the exact spectral flow over
    /// `tau = dW`, in the configured order. Fully explicit.
    pub fn splitting_step(&self, u: &FieldState<T>, dwn: T) -> Result<FieldState<T>> {
        let mut out = match self.cfg.splitting_order {
            SplittingOrder::NonlinearFirst => {
                let rotated = self.phase_rotation(u)?;
                self.semigroup(&rotated, dwn)?
            }
            SplittingOrder::LinearFirst => {
                let flowed = self.semigroup(u, dwn)?;
                self.phase_rotation(&flowed)?
            }
        };
        out.set_time(u.time() + self.cfg.dt);
        Ok(out)
    }

    fn semigroup(&self, u: &FieldState<T>, tau: T) -> Result<FieldState<T>> {
        if tau == T::zero() {
            return Ok(u.clone());
        }
        self.lap.semigroup_step(u, tau, self.cfg.splitting_symbol)
    }

    /// Modulus-preserving nonlinear substep `u -> exp(i dt theta |u|^(2s)) u`.
    fn phase_rotation(&self, u: &FieldState<T>) -> Result<FieldState<T>> {
        if !self.cfg.nonlinearity_enabled {
            return Ok(u.clone());
        }
        let theta = self.truncation_factor(u)?;
        let rate = self.cfg.dt * theta;
        let sigma = self.cfg.sigma as i32;
        let vals = u
            .values()
            .iter()
            .map(|v| *v * Complex::from_polar(T::one(), rate * v.norm_sqr().powi(sigma)))
            .collect();
        Ok(u.with_values(vals))
    }

    /// Explicit Euler-Maruyama step
    /// `u_next = u + i dW Lap u + i dt theta_R(u) g(u)`.
    pub fn euler_maruyama_step(&self, u: &FieldState<T>, dwn: T) -> Result<FieldState<T>> {
        let lap_u = self.lap.apply(u)?;
        let g_term = self.effective_nonlinearity(u)?;
        let i_dw = Complex::new(T::zero(), dwn);
        let i_dt = Complex::new(T::zero(), self.cfg.dt);
        let vals = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, uj)| {
                let mut v = *uj + i_dw * lap_u.values()[j];
                if let Some((theta, g)) = &g_term {
                    v += i_dt.scale(*theta) * g.values()[j];
                }
                v
            })
            .collect();
        let mut next = u.with_values(vals);
        next.set_time(u.time() + self.cfg.dt);
        Ok(next)
    }

    /// Linearization of the midpoint step along `(u, u_next)`: solves
    /// `(I - i (dW/2) Lap) eta - i (dt/2) theta Dg(w)[eta] = xi` for the
    /// half-step tangent by the same Picard/polish strategy, then returns
    /// `xi_next = 2 eta - xi` with the sweep count.
    ///
    /// The cutoff factor `theta_R(w)` is treated as frozen, which is the
    /// exact linearization whenever the cutoff is inactive (`theta = 1`).
    pub fn midpoint_tangent_step(
        &self,
        u: &FieldState<T>,
        u_next: &FieldState<T>,
        dwn: T,
        xi: &TangentField<T>,
    ) -> Result<(TangentField<T>, usize)> {
        let half = T::from_f64_lossy(0.5);
        let w_vals: Vec<Complex<T>> = u
            .values()
            .iter()
            .zip(u_next.values())
            .map(|(a, b)| (*a + *b).scale(half))
            .collect();
        let w = u.with_values(w_vals);
        let theta = if self.cfg.nonlinearity_enabled {
            self.truncation_factor(&w)?
        } else {
            T::zero()
        };

        let alpha = Complex::new(T::zero(), dwn * half);
        let i_half_dt = Complex::new(T::zero(), self.cfg.dt * half).scale(theta);
        let tol = self.cfg.fp_tol * T::max(T::one(), xi.l2_norm());

        let sweep = |eta: &TangentField<T>| -> Result<TangentField<T>> {
            let rhs_vals: Vec<Complex<T>> = if self.cfg.nonlinearity_enabled {
                let dg = nonlinearity_jacobian(&w, self.cfg.sigma, eta)?;
                xi.values()
                    .iter()
                    .zip(dg.values())
                    .map(|(x, d)| *x + i_half_dt * *d)
                    .collect()
            } else {
                xi.values().to_vec()
            };
            let rhs = FieldState::from_values(*u.grid(), rhs_vals, u.time())?;
            let solved = self.lap.solve_implicit(&rhs, alpha)?;
            Ok(eta.with_values(solved.values().to_vec()))
        };

        let mut eta = xi.clone();
        let mut sweeps = 0usize;
        loop {
            let eta_new = sweep(&eta)?;
            sweeps += 1;
            let diff = tangent_distance(&eta, &eta_new);
            eta = eta_new;
            if diff <= tol {
                break;
            }
            if sweeps >= self.cfg.fp_max_iter {
                return Err(Error::ConvergenceFailure {
                    iterations: sweeps,
                    residual: diff.to_f64_lossy(),
                    tolerance: tol.to_f64_lossy(),
                });
            }
        }
        for _ in 0..2 {
            eta = sweep(&eta)?;
            sweeps += 1;
        }

        let two = T::from_f64_lossy(2.0);
        let vals = eta
            .values()
            .iter()
            .zip(xi.values())
            .map(|(e, x)| e.scale(two) - *x)
            .collect();
        Ok((xi.with_values(vals), sweeps))
    }

    /// Linearization of the splitting step at `u`: the derivative of the
    /// phase rotation (a real-linear map mixing `xi` and `conj(xi)`)
    /// composed with the spectral flow, in the configured substep order.
    pub fn splitting_tangent_step(
        &self,
        u: &FieldState<T>,
        dwn: T,
        xi: &TangentField<T>,
    ) -> Result<TangentField<T>> {
        match self.cfg.splitting_order {
            SplittingOrder::NonlinearFirst => {
                let rotated = self.phase_rotation_tangent(u, xi)?;
                self.semigroup_tangent(&rotated, dwn)
            }
            SplittingOrder::LinearFirst => {
                let flowed_state = self.semigroup(u, dwn)?;
                let flowed_tangent = self.semigroup_tangent(xi, dwn)?;
                self.phase_rotation_tangent(&flowed_state, &flowed_tangent)
            }
        }
    }

    fn semigroup_tangent(&self, xi: &TangentField<T>, tau: T) -> Result<TangentField<T>> {
        let carrier = FieldState::from_values(*xi.grid(), xi.values().to_vec(), T::zero())?;
        let flowed = self.semigroup(&carrier, tau)?;
        Ok(xi.with_values(flowed.values().to_vec()))
    }

    /// Derivative of `u -> exp(i dt theta |u|^(2s)) u` at `u`, with the
    /// cutoff factor frozen:
    /// `xi -> exp(i phi) (xi + i dt theta s |u|^(2s-2) (conj(u) xi + u conj(xi)) u)`.
    fn phase_rotation_tangent(
        &self,
        u: &FieldState<T>,
        xi: &TangentField<T>,
    ) -> Result<TangentField<T>> {
        if !self.cfg.nonlinearity_enabled {
            return Ok(xi.clone());
        }
        let theta = self.truncation_factor(u)?;
        let rate = self.cfg.dt * theta;
        let s = T::from_u32(self.cfg.sigma).unwrap();
        let sigma = self.cfg.sigma as i32;
        let vals = u
            .values()
            .iter()
            .zip(xi.values())
            .map(|(uj, xj)| {
                let mod2 = uj.norm_sqr();
                let phase = Complex::from_polar(T::one(), rate * mod2.powi(sigma));
                let pairing = uj.conj() * *xj + *uj * xj.conj();
                let correction =
                    (Complex::new(T::zero(), rate * s * mod2.powi(sigma - 1)) * pairing) * *uj;
                phase * (*xj + correction)
            })
            .collect();
        Ok(xi.with_values(vals))
    }

    /// Linearization of the Euler-Maruyama step at `u`:
    /// `xi_next = xi + i dW Lap xi + i dt theta Dg(u)[xi]`.
    pub fn euler_maruyama_tangent_step(
        &self,
        u: &FieldState<T>,
        dwn: T,
        xi: &TangentField<T>,
    ) -> Result<TangentField<T>> {
        let carrier = FieldState::from_values(*xi.grid(), xi.values().to_vec(), T::zero())?;
        let lap_xi = self.lap.apply(&carrier)?;
        let i_dw = Complex::new(T::zero(), dwn);
        let g_part = if self.cfg.nonlinearity_enabled {
            let theta = self.truncation_factor(u)?;
            let dg = nonlinearity_jacobian(u, self.cfg.sigma, xi)?;
            Some((Complex::new(T::zero(), self.cfg.dt * theta), dg))
        } else {
            None
        };
        let vals = xi
            .values()
            .iter()
            .enumerate()
            .map(|(j, xj)| {
                let mut v = *xj + i_dw * lap_xi.values()[j];
                if let Some((i_dt, dg)) = &g_part {
                    v += *i_dt * dg.values()[j];
                }
                v
            })
            .collect();
        Ok(xi.with_values(vals))
    }
}

fn iter_distance<T: Scalar>(a: &FieldState<T>, b: &FieldState<T>) -> T {
    let sum: T = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (*x - *y).norm_sqr())
        .sum();
    (a.grid().dx() * sum).sqrt()
}

fn tangent_distance<T: Scalar>(a: &TangentField<T>, b: &TangentField<T>) -> T {
    let sum: T = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (*x - *y).norm_sqr())
        .sum();
    (a.grid().dx() * sum).sqrt()
}
