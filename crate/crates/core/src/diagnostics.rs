//! Structural observables: charge drift, energy trace, the global symplectic
//! 2-form, and the local multi-symplectic residual of the midpoint full
//! discretization.
//!
//! The 2-forms are made computable by evaluating them on explicit pairs of
//! propagated tangent fields: a formal wedge `a ^ M b` becomes the
//! antisymmetrized bilinear form `a(xi)' M b(eta) - a(eta)' M b(xi)`.
//!
//! In the 4-component state `z = (p, q, v, w)` (with `v, w` the forward
//! differences of `p, q`), the midpoint full discretization satisfies the
//! discrete conservation law
//!
//! ```text
//! d_t+ (omega_j^n) + d_x+ (kappa_j^(n+1/2)) * dW/dt = 0
//! ```
//!
//! per interior node, where `omega` pairs with `M+` at integer levels and
//! `kappa` pairs neighbouring half-level z-vectors with `K-`. The residual of
//! this identity is the module's headline diagnostic: at the midpoint
//! scheme's solution it vanishes to solver tolerance, while a non-symplectic
//! stepper leaves an O(1)-per-dt defect.
//!
//! Sign convention: `dx * sum_j omega_j = -(global symplectic form)`, i.e.
//! the local temporal form carries a factor -1 against
//! [`symplectic_form`]'s `dp ^ dq` orientation.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, FieldState, Grid1D};
use crate::integrators::{Scheme, TangentField};
use crate::scalar::Scalar;

/// Temporal structure matrix `M` (skew).
pub fn matrix_m<T: Scalar>() -> [[T; 4]; 4] {
    let o = T::zero();
    let l = T::one();
    [[o, -l, o, o], [l, o, o, o], [o, o, o, o], [o, o, o, o]]
}

/// Spatial structure matrix `K` (skew); `K = K+ + K-`.
pub fn matrix_k<T: Scalar>() -> [[T; 4]; 4] {
    let o = T::zero();
    let l = T::one();
    [[o, o, l, o], [o, o, o, l], [-l, o, o, o], [o, -l, o, o]]
}

/// Upper part `K+` of the spatial splitting.
pub fn matrix_k_plus<T: Scalar>() -> [[T; 4]; 4] {
    let o = T::zero();
    let l = T::one();
    [[o, o, l, o], [o, o, o, l], [o, o, o, o], [o, o, o, o]]
}

/// Lower part `K-` of the spatial splitting.
pub fn matrix_k_minus<T: Scalar>() -> [[T; 4]; 4] {
    let o = T::zero();
    let l = T::one();
    [[o, o, o, o], [o, o, o, o], [-l, o, o, o], [o, -l, o, o]]
}

/// Temporal pairing matrix `M+` (`M = M+ - M+'`).
pub fn matrix_m_plus<T: Scalar>() -> [[T; 4]; 4] {
    let o = T::zero();
    [[o, -T::one(), o, o], [o, o, o, o], [o, o, o, o], [o, o, o, o]]
}

/// Global discrete symplectic form
/// `dx * sum_j (xi_p eta_q - xi_q eta_p)` of two tangent fields.
pub fn symplectic_form<T: Scalar>(xi: &TangentField<T>, eta: &TangentField<T>) -> Result<T> {
    if xi.grid() != eta.grid() {
        return Err(Error::GridMismatch(
            "symplectic form needs both tangents on one grid".into(),
        ));
    }
    let sum: T = xi
        .values()
        .iter()
        .zip(eta.values())
        .map(|(x, e)| x.re * e.im - x.im * e.re)
        .sum();
    Ok(xi.grid().dx() * sum)
}

/// z-space tangent data of one tangent field over one step: 4-vectors
/// `(p, q, v, w)` per node at the two integer levels and the half level,
/// with `v, w` the forward differences of the same level's `p, q`.
#[derive(Debug, Clone)]
pub struct StepTangent<T> {
    grid: Grid1D<T>,
    prev: Vec<[T; 4]>,
    next: Vec<[T; 4]>,
    half: Vec<[T; 4]>,
}

impl<T: Scalar> StepTangent<T> {
    /// Build the z-tangent data from a tangent field at `t_n` and its
    /// propagated image at `t_{n+1}`.
    pub fn new(xi_prev: &TangentField<T>, xi_next: &TangentField<T>) -> Result<Self> {
        if xi_prev.grid() != xi_next.grid() {
            return Err(Error::GridMismatch(
                "tangent levels live on different grids".into(),
            ));
        }
        let grid = *xi_prev.grid();
        let half = T::from_f64_lossy(0.5);
        let half_vals: Vec<Complex<T>> = xi_prev
            .values()
            .iter()
            .zip(xi_next.values())
            .map(|(a, b)| (*a + *b).scale(half))
            .collect();
        Ok(StepTangent {
            grid,
            prev: z_components(&grid, xi_prev.values()),
            next: z_components(&grid, xi_next.values()),
            half: z_components(&grid, &half_vals),
        })
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    /// z 4-vector at `t_n`, node `j`.
    pub fn z_prev(&self, j: usize) -> [T; 4] {
        self.prev[j]
    }

    /// z 4-vector at `t_{n+1}`, node `j`.
    pub fn z_next(&self, j: usize) -> [T; 4] {
        self.next[j]
    }

    /// z 4-vector at the half level, node `j`.
    pub fn z_half(&self, j: usize) -> [T; 4] {
        self.half[j]
    }

    fn node_count(&self) -> usize {
        self.prev.len()
    }
}

fn z_components<T: Scalar>(grid: &Grid1D<T>, vals: &[Complex<T>]) -> Vec<[T; 4]> {
    let n = vals.len();
    let inv_dx = grid.dx().recip();
    (0..n)
        .map(|j| {
            let (p, q) = (vals[j].re, vals[j].im);
            let neighbor = match grid.bc() {
                BoundaryCondition::Periodic => Some(vals[(j + 1) % n]),
                BoundaryCondition::Dirichlet => {
                    if j + 1 < n {
                        Some(vals[j + 1])
                    } else {
                        None // last node: forward difference not used
                    }
                }
            };
            match neighbor {
                Some(nb) => [p, q, (nb.re - p) * inv_dx, (nb.im - q) * inv_dx],
                None => [p, q, T::zero(), T::zero()],
            }
        })
        .collect()
}

fn pair<T: Scalar>(a: [T; 4], m: &[[T; 4]; 4], b: [T; 4]) -> T {
    let mut acc = T::zero();
    for (row, mr) in m.iter().enumerate() {
        for (col, entry) in mr.iter().enumerate() {
            if *entry != T::zero() {
                acc += a[row] * *entry * b[col];
            }
        }
    }
    acc
}

/// Local 2-forms at node `j` for a step-tangent pair: the temporal form
/// `omega_j^n = xi_j' M+ eta_j - eta_j' M+ xi_j` (evaluated at `t_n`) and the
/// spatial form
/// `kappa_j^(n+1/2) = xi_(j-1)' K- eta_j - eta_(j-1)' K- xi_j` at the half
/// level. Requires `j >= 1` for the spatial form's left neighbour.
pub fn ms_local_forms<T: Scalar>(
    xi: &StepTangent<T>,
    eta: &StepTangent<T>,
    j: usize,
) -> Result<(T, T)> {
    if xi.grid() != eta.grid() {
        return Err(Error::GridMismatch(
            "step tangents live on different grids".into(),
        ));
    }
    if j == 0 || j >= xi.node_count() {
        return Err(Error::invalid(format!(
            "ms_local_forms needs 1 <= j < {}, got {j}",
            xi.node_count()
        )));
    }
    let m_plus = matrix_m_plus();
    let k_minus = matrix_k_minus();
    let omega = pair(xi.z_prev(j), &m_plus, eta.z_prev(j)) //
        - pair(eta.z_prev(j), &m_plus, xi.z_prev(j));
    let kappa = pair(xi.z_half(j - 1), &k_minus, eta.z_half(j))
        - pair(eta.z_half(j - 1), &k_minus, xi.z_half(j));
    Ok((omega, kappa))
}

fn omega_at<T: Scalar>(z_xi: [T; 4], z_eta: [T; 4]) -> T {
    let m_plus = matrix_m_plus();
    pair(z_xi, &m_plus, z_eta) - pair(z_eta, &m_plus, z_xi)
}

fn kappa_at<T: Scalar>(xi: &StepTangent<T>, eta: &StepTangent<T>, j: usize) -> T {
    let k_minus = matrix_k_minus();
    pair(xi.z_half(j - 1), &k_minus, eta.z_half(j)) - pair(eta.z_half(j - 1), &k_minus, xi.z_half(j))
}

/// Per-node residual of the discrete multi-symplectic conservation law over
/// one step,
/// `r_j = (omega_j^(n+1) - omega_j^n)/dt + (kappa_(j+1) - kappa_j)/dx * dW/dt`,
/// on the interior nodes `j = 1 .. nx-2`. No scheme check: this is the raw
/// functional, usable as a negative control on non-symplectic tangents.
pub fn ms_residual_unchecked<T: Scalar>(
    xi: &StepTangent<T>,
    eta: &StepTangent<T>,
    dwn: T,
    dt: T,
) -> Result<Vec<T>> {
    if xi.grid() != eta.grid() {
        return Err(Error::GridMismatch(
            "step tangents live on different grids".into(),
        ));
    }
    let grid = xi.grid();
    let nx = grid.nx();
    if nx < 3 {
        return Err(Error::invalid("residual needs at least 3 interior nodes"));
    }
    let inv_dt = dt.recip();
    let inv_dx = grid.dx().recip();
    let noise_rate = dwn * inv_dt;
    let mut out = Vec::with_capacity(nx.saturating_sub(2));
    for j in 1..=nx - 2 {
        let d_omega = (omega_at(xi.z_next(j), eta.z_next(j)) - omega_at(xi.z_prev(j), eta.z_prev(j)))
            * inv_dt;
        let d_kappa = (kappa_at(xi, eta, j + 1) - kappa_at(xi, eta, j)) * inv_dx;
        out.push(d_omega + d_kappa * noise_rate);
    }
    Ok(out)
}

/// Scheme-aware wrapper around [`ms_residual_unchecked`]: the conservation
/// law is a property of the midpoint full discretization, so any other
/// scheme is rejected.
pub fn ms_residual<T: Scalar>(
    scheme: Scheme,
    xi: &StepTangent<T>,
    eta: &StepTangent<T>,
    dwn: T,
    dt: T,
) -> Result<Vec<T>> {
    if scheme != Scheme::Midpoint {
        return Err(Error::Unsupported(format!(
            "the multi-symplectic conservation law holds for the midpoint full \
             discretization only; scheme `{}` does not satisfy it",
            scheme.name()
        )));
    }
    ms_residual_unchecked(xi, eta, dwn, dt)
}

/// Largest interior residual magnitude, with non-finite entries mapped to
/// infinity.
pub fn max_abs_residual<T: Scalar>(residuals: &[T]) -> T {
    residuals.iter().fold(T::zero(), |acc, r| {
        if r.is_finite() {
            T::max(acc, r.abs())
        } else {
            T::infinity()
        }
    })
}

/// Per-step structural record.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub step: usize,
    pub time: T,
    pub charge: T,
    /// `err(n) = Q(u^n) - Q(u^0)`; exactly zero at `n = 0`.
    pub charge_error: T,
    pub energy: T,
    /// Global 2-form of the tracked tangent pair, when tracking is on.
    pub omega: Option<T>,
    /// Max interior multi-symplectic residual of the step, when tracked.
    pub ms_residual: Option<T>,
}

/// Inputs assembled by a trajectory driver for one record.
pub struct StepRecordInputs<'a, T: Scalar> {
    pub step: usize,
    pub state: &'a FieldState<T>,
    /// `Q(u^0)`, computed once by the same charge routine.
    pub initial_charge: T,
    pub sigma: u32,
    /// Tangent pair at this time level, for the 2-form column.
    pub tangent_pair: Option<(&'a TangentField<T>, &'a TangentField<T>)>,
    /// Max multi-symplectic residual over the step ending here.
    pub ms_residual: Option<T>,
}

/// Fill one diagnostics record: charge, charge error, energy, and the
/// optional structure columns.
pub fn record_step<T: Scalar>(inputs: StepRecordInputs<'_, T>) -> Result<DiagnosticsRecord<T>> {
    let charge = inputs.state.charge();
    let energy = inputs.state.energy(inputs.sigma)?;
    let omega = match inputs.tangent_pair {
        Some((xi, eta)) => Some(symplectic_form(xi, eta)?),
        None => None,
    };
    Ok(DiagnosticsRecord {
        step: inputs.step,
        time: inputs.state.time(),
        charge,
        charge_error: charge - inputs.initial_charge,
        energy: energy.h,
        omega,
        ms_residual: inputs.ms_residual,
    })
}

/// Write records as CSV with columns `n,t,q,err,h,omega,ms_residual`;
/// disabled diagnostics leave their field empty.
pub fn write_diagnostics_csv<T: Scalar>(
    records: &[DiagnosticsRecord<T>],
    w: &mut impl std::io::Write,
) -> Result<()> {
    writeln!(w, "n,t,q,err,h,omega,ms_residual")?;
    for r in records {
        let omega = r.omega.map(|v| v.to_string()).unwrap_or_default();
        let ms = r.ms_residual.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.step, r.time, r.charge, r.charge_error, r.energy, omega, ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type C64 = Complex<f64>;

    fn grid() -> Grid1D<f64> {
        Grid1D::new(3.0, 24, BoundaryCondition::Dirichlet).unwrap()
    }

    #[test]
    fn structure_matrices_satisfy_their_identities() {
        let m = matrix_m::<f64>();
        let k = matrix_k::<f64>();
        let kp = matrix_k_plus::<f64>();
        let km = matrix_k_minus::<f64>();
        let mp = matrix_m_plus::<f64>();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(m[r][c], -m[c][r], "M must be skew");
                assert_eq!(k[r][c], -k[c][r], "K must be skew");
                assert_eq!(k[r][c], kp[r][c] + km[r][c], "K = K+ + K-");
                assert_eq!(m[r][c], mp[r][c] - mp[c][r], "M = M+ - M+'");
            }
        }
    }

    #[test]
    fn symplectic_form_is_antisymmetric() {
        let g = grid();
        let xi = TangentField::seeded_random(g, 3);
        assert_eq!(symplectic_form(&xi, &xi).unwrap(), 0.0);
        let eta = TangentField::seeded_random(g, 4);
        let ab = symplectic_form(&xi, &eta).unwrap();
        let ba = symplectic_form(&eta, &xi).unwrap();
        assert_relative_eq!(ab, -ba, max_relative = 1e-13);
    }

    #[test]
    fn symplectic_form_single_node_pairing() {
        let g = grid();
        let mut xi_vals = vec![C64::new(0.0, 0.0); g.node_count()];
        let mut eta_vals = xi_vals.clone();
        xi_vals[7] = C64::new(1.0, 0.0);
        eta_vals[7] = C64::new(0.0, 1.0);
        let xi = TangentField::from_values(g, xi_vals).unwrap();
        let eta = TangentField::from_values(g, eta_vals).unwrap();
        assert_eq!(symplectic_form(&xi, &eta).unwrap(), g.dx());
    }

    #[test]
    fn symplectic_form_scales_exactly_by_powers_of_two() {
        let g = grid();
        let xi = TangentField::seeded_random(g, 5);
        let eta = TangentField::seeded_random(g, 6);
        let base = symplectic_form(&xi, &eta).unwrap();
        let doubled = TangentField::from_values(
            g,
            xi.values().iter().map(|v| v.scale(2.0)).collect(),
        )
        .unwrap();
        assert_eq!(symplectic_form(&doubled, &eta).unwrap(), 2.0 * base);
        // Generic scaling holds to roundoff.
        let scaled = TangentField::from_values(
            g,
            eta.values().iter().map(|v| v.scale(0.3)).collect(),
        )
        .unwrap();
        assert_relative_eq!(
            symplectic_form(&xi, &scaled).unwrap(),
            0.3 * base,
            max_relative = 1e-13
        );
    }

    #[test]
    fn symplectic_form_rejects_grid_mismatch() {
        let a = TangentField::seeded_random(grid(), 1);
        let other = Grid1D::new(3.0, 32, BoundaryCondition::Dirichlet).unwrap();
        let b = TangentField::seeded_random(other, 1);
        assert!(symplectic_form(&a, &b).is_err());
    }

    #[test]
    fn local_forms_vanish_on_equal_tangents() {
        let g = grid();
        let xi = TangentField::seeded_random(g, 8);
        let st = StepTangent::new(&xi, &xi).unwrap();
        for j in 1..g.nx() - 1 {
            let (omega, kappa) = ms_local_forms(&st, &st, j).unwrap();
            assert_eq!((omega, kappa), (0.0, 0.0));
        }
    }

    #[test]
    fn local_omega_matches_direct_matrix_evaluation() {
        // Oracle: evaluate xi' M+ eta - eta' M+ xi with explicit loops over
        // the full 4x4 matrix, no shortcuts.
        let g = grid();
        let xi = TangentField::seeded_random(g, 10);
        let eta = TangentField::seeded_random(g, 11);
        let st_xi = StepTangent::new(&xi, &xi).unwrap();
        let st_eta = StepTangent::new(&eta, &eta).unwrap();
        let mp = matrix_m_plus::<f64>();
        for j in 1..g.nx() - 1 {
            let (omega, _) = ms_local_forms(&st_xi, &st_eta, j).unwrap();
            let (a, b) = (st_xi.z_prev(j), st_eta.z_prev(j));
            let mut direct = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    direct += a[r] * mp[r][c] * b[c] - b[r] * mp[r][c] * a[c];
                }
            }
            assert_relative_eq!(omega, direct, max_relative = 1e-14);
            // Single M+ entry (0,1) = -1: omega = -(xi_p eta_q - xi_q eta_p).
            let expected = -(a[0] * b[1] - a[1] * b[0]);
            assert_relative_eq!(omega, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn local_forms_reject_out_of_range_nodes() {
        let g = grid();
        let xi = TangentField::seeded_random(g, 12);
        let st = StepTangent::new(&xi, &xi).unwrap();
        assert!(ms_local_forms(&st, &st, 0).is_err());
        assert!(ms_local_forms(&st, &st, g.node_count()).is_err());
    }

    #[test]
    fn residual_of_zero_tangents_is_zero() {
        let g = grid();
        let zero = TangentField::zero(g);
        let st = StepTangent::new(&zero, &zero).unwrap();
        let res = ms_residual(Scheme::Midpoint, &st, &st, 0.01, 0.001).unwrap();
        assert!(res.iter().all(|r| *r == 0.0));
        assert_eq!(res.len(), g.nx() - 2);
    }

    #[test]
    fn residual_rejects_non_midpoint_schemes() {
        let g = grid();
        let xi = TangentField::seeded_random(g, 13);
        let st = StepTangent::new(&xi, &xi).unwrap();
        for scheme in [Scheme::LieSplitting, Scheme::EulerMaruyama] {
            assert!(matches!(
                ms_residual(scheme, &st, &st, 0.01, 0.001),
                Err(Error::Unsupported(_))
            ));
        }
    }

    #[test]
    fn global_form_is_minus_sum_of_local_forms() {
        let g = grid();
        let xi = TangentField::seeded_random(g, 20);
        let eta = TangentField::seeded_random(g, 21);
        let st_xi = StepTangent::new(&xi, &xi).unwrap();
        let st_eta = StepTangent::new(&eta, &eta).unwrap();
        let mut local_sum = 0.0;
        for j in 0..g.node_count() {
            local_sum += omega_at(st_xi.z_prev(j), st_eta.z_prev(j));
        }
        let global = symplectic_form(&xi, &eta).unwrap();
        assert_relative_eq!(g.dx() * local_sum, -global, max_relative = 1e-12);
    }

    #[test]
    fn record_step_starts_with_exact_zero_error() {
        let g = grid();
        let u = FieldState::gaussian(g, 1.5);
        let q0 = u.charge();
        let rec = record_step(StepRecordInputs {
            step: 0,
            state: &u,
            initial_charge: q0,
            sigma: 1,
            tangent_pair: None,
            ms_residual: None,
        })
        .unwrap();
        assert_eq!(rec.charge_error, 0.0);
        assert_eq!(rec.omega, None);
    }

    #[test]
    fn diagnostics_csv_leaves_disabled_columns_empty() {
        let rec = DiagnosticsRecord {
            step: 3,
            time: 0.25f64,
            charge: 1.0,
            charge_error: 0.0,
            energy: -0.5,
            omega: Some(0.125),
            ms_residual: None,
        };
        let mut buf = Vec::new();
        write_diagnostics_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,t,q,err,h,omega,ms_residual\n"));
        assert!(text.contains("3,0.25,1,0,-0.5,0.125,\n"));
    }
}
