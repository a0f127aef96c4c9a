//! Adiabatic approximant, the standard adiabatic condition and the
//! τ-scaling study of the approximation remainder.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenflow::{self, Gauge, SpectralFlow};
use crate::error::{Error, Result};
use crate::linalg::{wrap_phase, CVector};
use crate::phases::{self, PhaseLedger};
use crate::propagator::{self, Integrator, UnitaryTrace};
use crate::schedule::{self, HamiltonianSchedule, PrecessingSpinParams};

/// Smallest step count accepted for an adiabatic run.
pub const MIN_RUN_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticRunConfig {
    /// Adiabatic time scale τ = 1/ε (cycle period for the spin family).
    pub tau: f64,
    pub steps: usize,
    pub level: usize,
    pub include_geometric: bool,
}

impl AdiabaticRunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param("tau", format!("must be > 0, got {}", self.tau)));
        }
        if self.steps < MIN_RUN_STEPS {
            return Err(Error::param(
                "steps",
                format!("need ≥ {MIN_RUN_STEPS}, got {}", self.steps),
            ));
        }
        Ok(())
    }
}

/// Terminal-time comparison of the exact state with the approximant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproximationErrorReport {
    /// Remainder `‖ψ_exact(T) − ψ_approx(T)‖`, in [0, 2]. This is the
    /// `O(1/τ)` term of the adiabatic theorem.
    pub infidelity: f64,
    /// `1 − |⟨ψ_exact|ψ_approx⟩|`: population leakage only, blind to phase,
    /// and `O(1/τ²)` for smooth gapped schedules.
    pub overlap_defect: f64,
    /// `arg⟨ψ_exact|ψ_approx⟩` in (−π, π].
    pub phase_gap: f64,
    pub tau: f64,
}

/// Adiabaticity measure `max_{t, m≠n} |⟨n|∂H/∂t|m⟩| / |E_n − E_m|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub max_ratio: f64,
    pub argmax_time: f64,
    /// Per-node maximum over `m ≠ n`.
    pub series: Vec<f64>,
}

fn check_same_grid(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    let same = a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    if same {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{what}: grids differ ({} vs {} nodes)",
            a.len(),
            b.len()
        )))
    }
}

/// `|ψ(t_k)⟩ ≈ e^{iδ_n(t_k)}·e^{iγ_n(t_k)}·|n(t_k)⟩`; the geometric factor is
/// dropped when `include_geometric` is false.
pub fn adiabatic_approximant(
    flow: &SpectralFlow,
    ledger: &PhaseLedger,
    include_geometric: bool,
) -> Result<Vec<CVector>> {
    check_same_grid(&flow.grid, &ledger.grid, "flow vs ledger")?;
    flow.check_level(ledger.level)?;
    if flow.gauge != ledger.gauge {
        return Err(Error::GaugeMismatch(format!(
            "flow is {:?}, ledger is {:?}",
            flow.gauge, ledger.gauge
        )));
    }
    Ok((0..flow.grid.len())
        .map(|k| {
            let mut phase = ledger.dynamical[k];
            if include_geometric {
                phase += ledger.geometric[k];
            }
            flow.vector(k, ledger.level) * Complex64::from_polar(1.0, phase)
        })
        .collect())
}

/// Evaluate the standard adiabatic condition for level `n` along `flow`.
///
/// `∂H/∂t` comes from central differences with step equal to the grid
/// spacing; the squared denominator is kept exactly as written (ħ = 1).
pub fn adiabatic_condition(
    flow: &SpectralFlow,
    schedule: &HamiltonianSchedule,
    n: usize,
) -> Result<ConditionReport> {
    flow.check_level(n)?;
    let h = flow.grid[1] - flow.grid[0];
    let dim = flow.dimension();
    let mut series = Vec::with_capacity(flow.grid.len());
    for (k, &t) in flow.grid.iter().enumerate() {
        let dh = schedule.derivative(t, h);
        let vn = flow.vector(k, n);
        let mut worst = 0.0_f64;
        for m in (0..dim).filter(|&m| m != n) {
            let gap = flow.energy(k, n) - flow.energy(k, m);
            if gap == 0.0 {
                return Err(Error::Degeneracy { time: t, gap: 0.0, tol: 0.0 });
            }
            let element = vn.dotc(&(&dh * flow.vector(k, m))).norm();
            worst = worst.max(element / (gap * gap));
        }
        series.push(worst);
    }
    let (argmax, max_ratio) = series
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(ConditionReport {
        max_ratio,
        argmax_time: flow.grid[argmax],
        series,
    })
}

/// Compare `U(T)|n(0)⟩` against the approximant at the final node.
/// `approximant[0]` must be `|n(0)⟩`.
pub fn approximation_error(
    exact_trace: &UnitaryTrace,
    approximant: &[CVector],
    tau: f64,
) -> Result<ApproximationErrorReport> {
    if approximant.len() != exact_trace.grid.len() {
        return Err(Error::GridMismatch(format!(
            "approximant has {} states, trace has {} nodes",
            approximant.len(),
            exact_trace.grid.len()
        )));
    }
    let exact = exact_trace.terminal() * &approximant[0];
    let approx = approximant.last().expect("non-empty");
    let overlap = exact.dotc(approx);
    Ok(ApproximationErrorReport {
        infidelity: (&exact - approx).norm(),
        overlap_defect: 1.0 - overlap.norm(),
        phase_gap: wrap_phase(overlap.arg()),
        tau,
    })
}

/// Everything produced by one adiabatic run, kept so that callers can feed
/// the same trace and flow into the consistency checks.
#[derive(Debug, Clone)]
pub struct AdiabaticRun {
    pub schedule: HamiltonianSchedule,
    pub trace: UnitaryTrace,
    /// Flow in the requested gauge.
    pub flow: SpectralFlow,
    pub ledger: PhaseLedger,
    pub approximant: Vec<CVector>,
    pub error: ApproximationErrorReport,
    pub condition: ConditionReport,
}

/// Re-gauge a raw flow.
pub fn apply_gauge(raw: &SpectralFlow, gauge: Gauge) -> Result<SpectralFlow> {
    match gauge {
        Gauge::Raw => Ok(raw.clone()),
        Gauge::Parallel => eigenflow::fix_gauge_parallel(raw),
        Gauge::Periodic => eigenflow::fix_gauge_periodic(raw),
    }
}

/// Propagate, track, gauge-fix and compare for one schedule.
pub fn run_adiabatic(
    schedule: &HamiltonianSchedule,
    config: &AdiabaticRunConfig,
    gauge: Gauge,
    integrator: Integrator,
) -> Result<AdiabaticRun> {
    config.validate()?;
    let raw = eigenflow::track_flow(schedule, config.steps, None)?;
    raw.check_level(config.level)?;
    let flow = apply_gauge(&raw, gauge)?;
    let trace = propagator::evolve_with(schedule, config.steps, integrator)?;
    let ledger = phases::phase_ledger(&flow, config.level)?;
    let approximant = adiabatic_approximant(&flow, &ledger, config.include_geometric)?;
    let error = approximation_error(&trace, &approximant, config.tau)?;
    let condition = adiabatic_condition(&flow, schedule, config.level)?;
    Ok(AdiabaticRun {
        schedule: schedule.clone(),
        trace,
        flow,
        ledger,
        approximant,
        error,
        condition,
    })
}

/// Realize adiabatic time scale τ: the spin family gets `ω = 2π/τ`, any
/// other schedule is time-dilated, `s(t) = H(t/τ)`.
pub fn schedule_for_tau(base: &HamiltonianSchedule, tau: f64) -> Result<HamiltonianSchedule> {
    match base.precessing_params() {
        Some(p) => schedule::make_precessing_spin(PrecessingSpinParams {
            omega: 2.0 * PI / tau,
            ..p
        }),
        None => base.time_dilated(tau),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepsRule {
    Fixed(usize),
    /// `max(min, ceil(density · duration))`.
    PerUnitTime { density: f64, min: usize },
}

impl StepsRule {
    pub fn steps_for(&self, duration: f64) -> usize {
        match *self {
            StepsRule::Fixed(k) => k,
            StepsRule::PerUnitTime { density, min } => ((density * duration).ceil() as usize).max(min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub steps_rule: StepsRule,
    /// `None` selects the highest level.
    pub level: Option<usize>,
    pub gauge: Gauge,
    pub include_geometric: bool,
    pub integrator: Integrator,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            steps_rule: StepsRule::Fixed(8000),
            level: None,
            gauge: Gauge::Parallel,
            include_geometric: true,
            integrator: Integrator::default(),
        }
    }
}

/// One row of the τ-scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub tau: f64,
    /// `2π/duration`: the precession rate for the spin family.
    pub omega: f64,
    pub condition_eq5: f64,
    pub infidelity: f64,
    pub overlap_defect: f64,
    pub phase_gap: f64,
    pub infidelity_times_tau: f64,
}

impl ScalingRow {
    pub fn from_run(run: &AdiabaticRun, tau: f64) -> Self {
        Self {
            tau,
            omega: 2.0 * PI / run.schedule.duration(),
            condition_eq5: run.condition.max_ratio,
            infidelity: run.error.infidelity,
            overlap_defect: run.error.overlap_defect,
            phase_gap: run.error.phase_gap,
            infidelity_times_tau: run.error.infidelity * tau,
        }
    }
}

pub(crate) fn check_tau_list(tau_list: &[f64]) -> Result<()> {
    if tau_list.len() < 3 {
        return Err(Error::param(
            "tau_list",
            format!("need ≥ 3 values, got {}", tau_list.len()),
        ));
    }
    if tau_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::param("tau_list", "values must be finite and > 0"));
    }
    if tau_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("tau_list", "values must increase strictly"));
    }
    Ok(())
}

/// Run one adiabatic comparison per τ. Rows may be computed in parallel;
/// their order always follows `tau_list`.
pub fn tau_runs(
    base: &HamiltonianSchedule,
    tau_list: &[f64],
    options: &StudyOptions,
) -> Result<Vec<AdiabaticRun>> {
    check_tau_list(tau_list)?;
    let level = options.level.unwrap_or(base.dimension() - 1);
    tau_list
        .par_iter()
        .map(|&tau| {
            let schedule = schedule_for_tau(base, tau)?;
            let config = AdiabaticRunConfig {
                tau,
                steps: options.steps_rule.steps_for(schedule.duration()),
                level,
                include_geometric: options.include_geometric,
            };
            run_adiabatic(&schedule, &config, options.gauge, options.integrator)
        })
        .collect()
}

/// τ-scaling table of the approximation remainder.
pub fn tau_scaling_study(
    base: &HamiltonianSchedule,
    tau_list: &[f64],
    options: &StudyOptions,
) -> Result<Vec<ScalingRow>> {
    let runs = tau_runs(base, tau_list, options)?;
    Ok(runs
        .iter()
        .zip(tau_list)
        .map(|(run, &tau)| ScalingRow::from_run(run, tau))
        .collect())
}
