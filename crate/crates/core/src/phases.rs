//! Dynamical and geometric phase bookkeeping along a [`SpectralFlow`].
//!
//! Geometric phases are built from link arguments (discrete Pancharatnam
//! connection), `γ(t_{k+1}) = γ(t_k) − arg⟨n(t_k)|n(t_{k+1})⟩`, never from a
//! finite-difference `⟨n|ṅ⟩`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigenflow::{Gauge, SpectralFlow, ZERO_OVERLAP};
use crate::error::{Error, Result};
use crate::linalg::wrap_phase;

/// Angles within this distance of ±π are flagged as sitting on the branch cut.
pub const BRANCH_TOL: f64 = 1e-6;

/// Principal-value phase in (−π, π] with a branch-cut flag.
///
/// Values within [`BRANCH_TOL`] of the cut are reported on the `+π` side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerryPhase {
    pub value: f64,
    pub on_branch: bool,
}

impl BerryPhase {
    pub fn from_angle(angle: f64) -> Self {
        let mut value = wrap_phase(angle);
        let on_branch = PI - value.abs() < BRANCH_TOL;
        if on_branch && value < 0.0 {
            value += 2.0 * PI;
        }
        Self { value, on_branch }
    }
}

/// Accumulated phases of one level, `δ_n(t_k)` and `γ_n(t_k)`, in radians.
#[derive(Debug, Clone)]
pub struct PhaseLedger {
    pub level: usize,
    pub grid: Vec<f64>,
    pub dynamical: Vec<f64>,
    pub geometric: Vec<f64>,
    pub gauge: Gauge,
}

impl PhaseLedger {
    pub fn terminal_dynamical(&self) -> f64 {
        *self.dynamical.last().expect("non-empty ledger")
    }

    pub fn terminal_geometric(&self) -> f64 {
        *self.geometric.last().expect("non-empty ledger")
    }
}

/// `δ_n(t_k) = −∫₀^{t_k} E_n dt′` by the trapezoid rule.
pub fn dynamical_phase(flow: &SpectralFlow, n: usize) -> Result<Vec<f64>> {
    flow.check_level(n)?;
    let mut out = Vec::with_capacity(flow.grid.len());
    let mut acc = 0.0;
    out.push(acc);
    for k in 0..flow.steps() {
        let dt = flow.grid[k + 1] - flow.grid[k];
        acc -= 0.5 * (flow.energy(k, n) + flow.energy(k + 1, n)) * dt;
        out.push(acc);
    }
    Ok(out)
}

fn checked_link(flow: &SpectralFlow, n: usize, k: usize) -> Result<Complex64> {
    let link = flow.link(n, k);
    if link.norm() < ZERO_OVERLAP {
        return Err(Error::Gauge(format!(
            "level {n}: zero overlap between t = {} and t = {}",
            flow.grid[k],
            flow.grid[k + 1]
        )));
    }
    Ok(link)
}

/// Open-path geometric phase with `γ_n(t_0) = 0`. Gauge dependent: zero in
/// the parallel gauge, linear up to `γ_n(c)` in the periodic gauge.
pub fn geometric_phase_open(flow: &SpectralFlow, n: usize) -> Result<Vec<f64>> {
    flow.check_level(n)?;
    let mut out = Vec::with_capacity(flow.grid.len());
    let mut acc = 0.0;
    out.push(acc);
    for k in 0..flow.steps() {
        acc -= checked_link(flow, n, k)?.arg();
        out.push(acc);
    }
    Ok(out)
}

/// Gauge-invariant cyclic Berry phase
/// `γ_n(c) = −arg[⟨n_0|n_1⟩⟨n_1|n_2⟩⋯⟨n_{K−1}|n_0⟩]`.
///
/// The loop closes on `|n(t_0)⟩` itself, so any per-node phase redefinition
/// cancels exactly.
pub fn berry_phase_cyclic(flow: &SpectralFlow, n: usize) -> Result<BerryPhase> {
    flow.check_level(n)?;
    if !flow.cyclic {
        return Err(Error::Precondition(
            "cyclic Berry phase needs a cyclic schedule".into(),
        ));
    }
    let steps = flow.steps();
    let mut product = Complex64::new(1.0, 0.0);
    for k in 0..steps - 1 {
        let link = checked_link(flow, n, k)?;
        product *= link / link.norm();
    }
    let closing = flow.vector(steps - 1, n).dotc(&flow.vector(0, n));
    if closing.norm() < ZERO_OVERLAP {
        return Err(Error::Gauge(format!("level {n}: closing overlap vanishes")));
    }
    product *= closing / closing.norm();
    Ok(BerryPhase::from_angle(-product.arg()))
}

/// Both phase sequences of level `n`, tagged with the flow's gauge.
pub fn phase_ledger(flow: &SpectralFlow, n: usize) -> Result<PhaseLedger> {
    Ok(PhaseLedger {
        level: n,
        grid: flow.grid.clone(),
        dynamical: dynamical_phase(flow, n)?,
        geometric: geometric_phase_open(flow, n)?,
        gauge: flow.gauge,
    })
}
