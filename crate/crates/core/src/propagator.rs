//! Exact time-ordered propagation `U(t, 0)` on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::schedule::{HamiltonianSchedule, PrecessingSpinParams};

/// Cumulative propagators are re-orthonormalized after this many steps.
pub const REUNITARIZE_EVERY: usize = 1000;

/// One-step exponential integrators. Both apply a single Hermitian
/// exponential per step, so every step is unitary by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `exp(−i·H(t_k + Δ/2)·Δ)`; second order.
    Midpoint,
    /// Two-point Gauss–Legendre Magnus step with the commutator term; fourth order.
    #[default]
    Magnus4,
}

/// `U(t_k, t_0)` sampled on `grid`.
#[derive(Debug, Clone)]
pub struct UnitaryTrace {
    pub grid: Vec<f64>,
    pub cumulative: Vec<CMatrix>,
    pub step_count: usize,
    pub unitarity_defect: f64,
}

impl UnitaryTrace {
    pub fn duration(&self) -> f64 {
        self.grid[self.step_count] - self.grid[0]
    }

    pub fn terminal(&self) -> &CMatrix {
        &self.cumulative[self.step_count]
    }

    /// `U(t_j, t_0) · U(t_k, t_0)`-style composition: `later` must start at
    /// this trace's final time.
    pub fn compose(&self, later: &UnitaryTrace) -> Result<CMatrix> {
        let end = self.grid[self.step_count];
        if (later.grid[0] - end).abs() > 1e-12 * (1.0 + end.abs()) {
            return Err(Error::GridMismatch(format!(
                "second trace starts at {}, first ends at {end}",
                later.grid[0]
            )));
        }
        Ok(later.terminal() * self.terminal())
    }
}

/// `exp(−i·H·dt)` by spectral decomposition.
pub fn step_unitary(h_mid: &CMatrix, dt: f64) -> Result<CMatrix> {
    if !dt.is_finite() {
        return Err(Error::param("dt", format!("must be finite, got {dt}")));
    }
    linalg::expm_hermitian(h_mid, dt)
}

/// Effective Hermitian generator for one step over `[t, t + dt]`.
fn step_generator(schedule: &HamiltonianSchedule, t: f64, dt: f64, integrator: Integrator) -> CMatrix {
    match integrator {
        Integrator::Midpoint => schedule.at(t + 0.5 * dt),
        Integrator::Magnus4 => {
            let offset = 3f64.sqrt() / 6.0;
            let h1 = schedule.at(t + (0.5 - offset) * dt);
            let h2 = schedule.at(t + (0.5 + offset) * dt);
            let comm = &h2 * &h1 - &h1 * &h2;
            // Ω = −iΔ(H1+H2)/2 − (√3/12)Δ²[H2,H1] = −iΔ·H_eff
            (&h1 + &h2) * c(0.5, 0.0) - comm * c(0.0, 3f64.sqrt() / 12.0 * dt)
        }
    }
}

/// Propagate over the whole schedule with the default integrator.
pub fn evolve(schedule: &HamiltonianSchedule, steps: usize) -> Result<UnitaryTrace> {
    evolve_with(schedule, steps, Integrator::default())
}

pub fn evolve_with(
    schedule: &HamiltonianSchedule,
    steps: usize,
    integrator: Integrator,
) -> Result<UnitaryTrace> {
    evolve_interval(schedule, 0.0, schedule.duration(), steps, integrator)
}

/// Propagate over `[t0, t1]`, returning `U(t_k, t0)`.
pub fn evolve_interval(
    schedule: &HamiltonianSchedule,
    t0: f64,
    t1: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<UnitaryTrace> {
    if steps == 0 {
        return Err(Error::param("steps", "must be ≥ 1"));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::param("interval", format!("[{t0}, {t1}] is empty")));
    }
    let n = schedule.dimension();
    let span = t1 - t0;
    let dt = span / steps as f64;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { t1 } else { t0 + span * k as f64 / steps as f64 })
        .collect();

    let mut cumulative = Vec::with_capacity(steps + 1);
    let mut u = CMatrix::identity(n, n);
    cumulative.push(u.clone());
    let mut defect = 0.0_f64;
    for (k, &t) in grid[..steps].iter().enumerate() {
        let generator = step_generator(schedule, t, dt, integrator);
        u = step_unitary(&generator, dt)? * u;
        if (k + 1) % REUNITARIZE_EVERY == 0 {
            u = linalg::orthonormalize_columns(&u);
        }
        defect = defect.max(linalg::unitarity_defect(&u));
        cumulative.push(u.clone());
    }
    Ok(UnitaryTrace {
        grid,
        cumulative,
        step_count: steps,
        unitarity_defect: defect,
    })
}

/// `U(t_k, 0)·ψ₀` for a unit-norm `ψ₀`.
pub fn apply_state(trace: &UnitaryTrace, k: usize, initial_state: &CVector) -> Result<CVector> {
    if k > trace.step_count {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: trace.step_count + 1,
        });
    }
    let u = &trace.cumulative[k];
    if initial_state.len() != u.ncols() {
        return Err(Error::Shape(format!(
            "state has length {}, propagator is {}x{}",
            initial_state.len(),
            u.nrows(),
            u.ncols()
        )));
    }
    let norm = initial_state.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::param("initial_state", format!("norm {norm} is not 1")));
    }
    Ok(u * initial_state)
}

type Mat2 = [[num_complex::Complex64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `exp(−i t a·σ) = cos(|a|t)·I − i sin(|a|t)·(â·σ)`.
fn su2_exp(a: [f64; 3], t: f64) -> Mat2 {
    let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if norm == 0.0 {
        return [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    }
    let (s, co) = (norm * t).sin_cos();
    let [x, y, z] = a.map(|v| v / norm);
    // −i s (x σx + y σy + z σz)
    [
        [c(co, -s * z), c(-s * y, -s * x)],
        [c(s * y, -s * x), c(co, s * z)],
    ]
}

/// Closed-form propagator of the precessing spin.
///
/// In the frame co-rotating with the field, the Hamiltonian is static:
/// `U(t) = exp(−iωtσz/2)·exp(−i·H_rot·t)` with
/// `H_rot = (ω0/2)(sinθ σx + cosθ σz) − (ω/2)σz`.
pub fn rotating_frame_oracle(params: &PrecessingSpinParams, t: f64) -> Result<CMatrix> {
    params.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be ≥ 0, got {t}")));
    }
    let frame = su2_exp([0.0, 0.0, 0.5 * params.omega], t);
    let (s, co) = params.theta.sin_cos();
    let h_rot = [
        0.5 * params.omega0 * s,
        0.0,
        0.5 * params.omega0 * co - 0.5 * params.omega,
    ];
    let u = mat2_mul(&frame, &su2_exp(h_rot, t));
    Ok(CMatrix::from_row_slice(2, 2, &[u[0][0], u[0][1], u[1][0], u[1][1]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, pauli_x, pauli_z};
    use crate::schedule::make_precessing_spin;
    use std::f64::consts::PI;

    fn diag(a: num_complex::Complex64, b: num_complex::Complex64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[a, c(0.0, 0.0), c(0.0, 0.0), b])
    }

    #[test]
    fn zero_generator_is_identity() {
        let u = step_unitary(&CMatrix::zeros(2, 2), 1.0).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn diagonal_step_closed_form() {
        let u = step_unitary(&(pauli_z() * c(0.5, 0.0)), PI).unwrap();
        assert!(max_abs(&(u - diag(c(0.0, -1.0), c(0.0, 1.0)))) < 1e-15);
    }

    #[test]
    fn x_rotation_step_closed_form() {
        let u = step_unitary(&(pauli_x() * c(PI / 2.0, 0.0)), 1.0).unwrap();
        let expected = pauli_x() * c(0.0, -1.0);
        assert!(max_abs(&(&u - expected)) < 1e-15);
        assert!(linalg::unitarity_defect(&u) < 1e-12);
        let out = &u * CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((out[1] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn constant_schedule_is_exact_for_any_step_count() {
        let s = HamiltonianSchedule::constant(pauli_z() * c(0.5, 0.0), PI).unwrap();
        for k in [1, 7, 100] {
            for integrator in [Integrator::Midpoint, Integrator::Magnus4] {
                let tr = evolve_with(&s, k, integrator).unwrap();
                assert!(max_abs(&(tr.terminal() - diag(c(0.0, -1.0), c(0.0, 1.0)))) < 1e-12);
            }
        }
    }

    #[test]
    fn zero_schedule_stays_identity() {
        let s = HamiltonianSchedule::constant(CMatrix::zeros(3, 3), 2.0).unwrap();
        let tr = evolve(&s, 50).unwrap();
        assert_eq!(tr.cumulative.len(), 51);
        assert!(tr.cumulative.iter().all(|u| *u == CMatrix::identity(3, 3)));
    }

    #[test]
    fn apply_state_contract() {
        let s = HamiltonianSchedule::constant(pauli_z() * c(0.5, 0.0), PI).unwrap();
        let tr = evolve(&s, 10).unwrap();
        let psi = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(apply_state(&tr, 0, &psi).unwrap(), psi);
        let out = apply_state(&tr, 10, &psi).unwrap();
        assert!((out[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!(matches!(
            apply_state(&tr, 11, &psi),
            Err(Error::IndexOutOfRange { .. })
        ));
        let unnormalized = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(apply_state(&tr, 3, &unnormalized).is_err());
    }

    #[test]
    fn oracle_static_and_initial_cases() {
        let p = PrecessingSpinParams::new(1.0, 0.3, 0.0);
        let t = 2.7;
        let u = rotating_frame_oracle(&p, t).unwrap();
        // θ = 0: the frame rotation and H_rot combine to exp(−i (ω0/2) t σz)
        let expected = diag(
            num_complex::Complex64::from_polar(1.0, -0.5 * t),
            num_complex::Complex64::from_polar(1.0, 0.5 * t),
        );
        assert!(max_abs(&(u - expected)) < 1e-14);
        let u0 = rotating_frame_oracle(&PrecessingSpinParams::new(1.0, 0.3, 1.0), 0.0).unwrap();
        assert!(max_abs(&(u0 - CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn oracle_satisfies_schroedinger_equation() {
        let p = PrecessingSpinParams::new(1.0, 0.02, 1.1);
        let spin = make_precessing_spin(p).unwrap();
        let h = 1e-5;
        for j in 0..50 {
            let t = 1.0 + (spin.duration() - 2.0) * (j as f64 * 0.618_033_988_7).fract();
            let du = (rotating_frame_oracle(&p, t + h).unwrap()
                - rotating_frame_oracle(&p, t - h).unwrap())
                * c(1.0 / (2.0 * h), 0.0);
            let residual = du * linalg::I - spin.at(t) * rotating_frame_oracle(&p, t).unwrap();
            assert!(max_abs(&residual) <= 1e-6, "residual {} at t={t}", max_abs(&residual));
        }
    }

    #[test]
    fn periodic_reunitarization_keeps_defect_small() {
        let spin = make_precessing_spin(PrecessingSpinParams::new(1.0, 0.1, 0.7)).unwrap();
        let tr = evolve(&spin, 5 * REUNITARIZE_EVERY + 17).unwrap();
        assert!(tr.unitarity_defect <= 1e-10);
    }
}
