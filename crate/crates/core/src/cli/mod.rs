//! Configuration loading, experiment dispatch and report emission.

mod config;
mod report;

use std::collections::BTreeMap;
use std::time::Instant;

pub use config::{load_config, Experiment, ExperimentConfig, OutputConfig, OutputFormat, DEFAULT_STEPS};
pub use report::{
    emit_csv, format_value, matrix_rows, parse_csv, CsvTable, ExperimentReport, MatrixRows, SweepRow,
    SWEEP_COLUMNS,
};

use crate::adiabatic::{self, AdiabaticRun, AdiabaticRunConfig, StepsRule, StudyOptions};
use crate::consistency::{self, MsMode};
use crate::eigenflow;
use crate::error::{Error, Result};
use crate::linalg::wrap_phase;
use crate::phases;
use crate::propagator;
use crate::schedule::HamiltonianSchedule;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Default)]
struct Collected {
    scalars: BTreeMap<String, f64>,
    flags: BTreeMap<String, bool>,
    rows: Vec<SweepRow>,
    matrices: BTreeMap<String, MatrixRows>,
}

impl Collected {
    fn put(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.to_owned(), value);
    }
}

/// Run one experiment. Identical configs give identical reports apart from
/// `wall_time_s`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let experiment = config.experiment()?;
    let schedule = config.validate()?;
    let level = config.level_for(&schedule);
    let out = match experiment {
        Experiment::Evolve => run_evolve(config, &schedule)?,
        Experiment::Phases => run_phases(config, &schedule, level)?,
        Experiment::CheckAdiabatic => run_check_adiabatic(config, &schedule, level)?,
        Experiment::MsTest => run_ms_test(config, &schedule, level)?,
        Experiment::BerryTest => run_berry_test(config, &schedule, level)?,
        Experiment::Sweep => run_sweep(config, &schedule, level)?,
    };
    let report = ExperimentReport {
        tool_version: TOOL_VERSION.to_owned(),
        experiment,
        config: config.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        scalars: out.scalars,
        flags: out.flags,
        rows: out.rows,
        matrices: out.matrices,
    };
    report.check_finite()?;
    Ok(report)
}

fn run_evolve(config: &ExperimentConfig, schedule: &HamiltonianSchedule) -> Result<Collected> {
    let trace = propagator::evolve_with(schedule, config.steps, config.integrator)?;
    let mut out = Collected::default();
    out.put("duration", trace.duration());
    out.put("unitarity_defect", trace.unitarity_defect);
    let u = trace.terminal();
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            out.put(&format!("terminal_unitary_{i}_{j}_re"), u[(i, j)].re);
            out.put(&format!("terminal_unitary_{i}_{j}_im"), u[(i, j)].im);
        }
    }
    out.matrices.insert("terminal_unitary".into(), matrix_rows(u));
    Ok(out)
}

fn run_phases(config: &ExperimentConfig, schedule: &HamiltonianSchedule, level: usize) -> Result<Collected> {
    let raw = eigenflow::track_flow(schedule, config.steps, None)?;
    let flow = adiabatic::apply_gauge(&raw, config.gauge)?;
    let ledger = phases::phase_ledger(&flow, level)?;
    let mut out = Collected::default();
    out.put("level", level as f64);
    out.put("min_gap", flow.min_gap);
    out.put("dynamical_total", ledger.terminal_dynamical());
    out.put("geometric_total", ledger.terminal_geometric());
    let closure = flow.vector(0, level).dotc(&flow.vector(flow.steps(), level));
    out.put("terminal_overlap_re", closure.re);
    out.put("terminal_overlap_im", closure.im);
    if flow.cyclic {
        let gamma = phases::berry_phase_cyclic(&flow, level)?;
        out.put("gamma_c", gamma.value);
        out.flags.insert("gamma_c_on_branch".into(), gamma.on_branch);
    }
    out.flags.insert("cyclic".into(), flow.cyclic);
    Ok(out)
}

/// Single run with τ equal to the schedule's own duration.
fn native_run(config: &ExperimentConfig, schedule: &HamiltonianSchedule, level: usize) -> Result<AdiabaticRun> {
    let run_config = AdiabaticRunConfig {
        tau: schedule.duration(),
        steps: config.steps,
        level,
        include_geometric: config.include_geometric,
    };
    adiabatic::run_adiabatic(schedule, &run_config, config.gauge, config.integrator)
}

fn put_error_scalars(out: &mut Collected, run: &AdiabaticRun) {
    out.put("condition_eq5", run.condition.max_ratio);
    out.put("condition_argmax_time", run.condition.argmax_time);
    out.put("infidelity", run.error.infidelity);
    out.put("overlap_defect", run.error.overlap_defect);
    out.put("phase_gap", run.error.phase_gap);
    out.put("tau", run.error.tau);
}

fn run_check_adiabatic(
    config: &ExperimentConfig,
    schedule: &HamiltonianSchedule,
    level: usize,
) -> Result<Collected> {
    let run = native_run(config, schedule, level)?;
    let mut out = Collected::default();
    put_error_scalars(&mut out, &run);
    Ok(out)
}

fn run_ms_test(config: &ExperimentConfig, schedule: &HamiltonianSchedule, level: usize) -> Result<Collected> {
    let run = native_run(config, schedule, level)?;
    let dual = consistency::build_dual(schedule, &run.trace, &run.flow)?;
    let k = consistency::ms_consistency_functional(&dual, &run.flow, &run.ledger, level, MsMode::Approximants)?;
    let k_exact = consistency::ms_consistency_functional(&dual, &run.flow, &run.ledger, level, MsMode::Exact)?;
    let mut out = Collected::default();
    out.put("condition_eq5", run.condition.max_ratio);
    out.put("k_re", k.re);
    out.put("k_im", k.im);
    out.put("k_abs_minus_one", (k - 1.0).norm());
    out.put("k_exact_re", k_exact.re);
    out.put("k_exact_im", k_exact.im);
    out.put("dual_hermiticity_defect", dual.hermiticity_defect);
    out.put("dual_spectrum_defect", dual.spectrum_defect);
    out.put("tau", run.error.tau);
    Ok(out)
}

fn run_berry_test(config: &ExperimentConfig, schedule: &HamiltonianSchedule, level: usize) -> Result<Collected> {
    let run = native_run(config, schedule, level)?;
    let gamma = phases::berry_phase_cyclic(&run.flow, level)?;
    let report = consistency::berry_retention_test(&run.trace, &run.flow, &run.ledger, level, gamma)?;
    let periodic = eigenflow::fix_gauge_periodic(&run.flow)?;
    let periodic_ledger = phases::phase_ledger(&periodic, level)?;
    let spurious = consistency::double_count_demo(&run.flow, &periodic_ledger, level)?;

    let mut out = Collected::default();
    out.put("r19", report.berry_residual_correct);
    out.put("r22", report.berry_residual_doublecount);
    out.put("gamma_c", report.gamma_c);
    out.put("phi_exact", report.phi_exact);
    out.put("dynamical_total", report.dynamical_total);
    out.put("overlap_defect", report.overlap_defect);
    out.put("tau", report.tau);
    out.put("double_count_phase", spurious.arg());
    out.put("double_count_discrepancy", wrap_phase(report.phi_exact - spurious.arg()));
    out.flags.insert("on_branch".into(), report.on_branch);
    Ok(out)
}

fn run_sweep(config: &ExperimentConfig, schedule: &HamiltonianSchedule, level: usize) -> Result<Collected> {
    if !schedule.is_cyclic() {
        return Err(Error::Precondition("sweep needs a cyclic schedule".into()));
    }
    let tau_list = config
        .tau_list
        .as_deref()
        .ok_or_else(|| Error::param("tau_list", "required by the sweep experiment"))?;
    let options = StudyOptions {
        steps_rule: StepsRule::Fixed(config.steps),
        level: Some(level),
        gauge: config.gauge,
        include_geometric: config.include_geometric,
        integrator: config.integrator,
    };
    let runs = adiabatic::tau_runs(schedule, tau_list, &options)?;
    let mut out = Collected::default();
    for (run, &tau) in runs.iter().zip(tau_list) {
        let scaling = adiabatic::ScalingRow::from_run(run, tau);
        let gamma = phases::berry_phase_cyclic(&run.flow, level)?;
        let retention = consistency::retention_report(&run.trace, &run.flow, &run.ledger, level, gamma)?;
        out.rows.push(SweepRow {
            tau,
            omega: scaling.omega,
            condition_eq5: scaling.condition_eq5,
            infidelity: scaling.infidelity,
            phase_gap: scaling.phase_gap,
            infidelity_times_tau: scaling.infidelity_times_tau,
            gamma_c: gamma.value,
            r19: retention.berry_residual_correct,
            r22: retention.berry_residual_doublecount,
        });
    }
    Ok(out)
}

/// Serialized report body in the requested format.
pub fn render(report: &ExperimentReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => emit_csv(report),
        OutputFormat::Json => report.to_json(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleDescriptor;
    use std::f64::consts::PI;

    fn constant_half_sigma_z() -> ScheduleDescriptor {
        let m = vec![[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]];
        ScheduleDescriptor::Sampled {
            times: vec![0.0, PI],
            matrices: vec![m.clone(), m],
            cyclic: true,
        }
    }

    #[test]
    fn evolve_constant_gives_diagonal_unitary() {
        let mut cfg = ExperimentConfig::new(Experiment::Evolve, constant_half_sigma_z());
        cfg.steps = 100;
        let report = run(&cfg).unwrap();
        let u = &report.matrices["terminal_unitary"];
        let expect = [[[0.0, -1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    assert!((u[i][j][p] - expect[i][j][p]).abs() < 1e-12);
                }
            }
        }
        let back = ExperimentReport::from_json(&render(&report, OutputFormat::Json)).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn phases_constant_report() {
        let cfg = ExperimentConfig::new(Experiment::Phases, constant_half_sigma_z());
        let report = run(&cfg).unwrap();
        assert!((report.scalar("dynamical_total").unwrap() + PI / 2.0).abs() < 1e-12);
        assert_eq!(report.scalar("gamma_c"), Some(0.0));
        assert_eq!(report.scalar("level"), Some(1.0));
    }

    #[test]
    fn missing_experiment_is_a_validation_error() {
        let mut cfg = ExperimentConfig::new(Experiment::Evolve, constant_half_sigma_z());
        cfg.experiment = None;
        assert_eq!(run(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn sweep_rejects_non_cyclic_schedules() {
        let mut cfg = ExperimentConfig::new(
            Experiment::Sweep,
            ScheduleDescriptor::Sampled {
                times: vec![0.0, 1.0],
                matrices: vec![
                    vec![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]],
                    vec![[1.0, 0.0], [0.3, 0.0], [0.3, 0.0], [-1.0, 0.0]],
                ],
                cyclic: false,
            },
        );
        cfg.tau_list = Some(vec![1.0, 2.0, 3.0]);
        cfg.steps = 200;
        assert!(matches!(run(&cfg), Err(Error::Precondition(_))));
    }
}
