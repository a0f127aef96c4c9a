//! Hamiltonian schedules `H(t)` on `[0, T]`.
//!
//! A schedule is immutable once built and is evaluated through a closed set of
//! evaluators (analytic precessing spin, constant, piecewise-linear samples,
//! plus energy-shift and time-dilation wrappers). Units: ħ = 1.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};

/// Max-entry tolerance on `H(0) − H(T)` for a schedule to count as cyclic.
pub const CYCLIC_TOL: f64 = 1e-10;

/// Spin-1/2 in a field of fixed magnitude precessing on a cone about z.
///
/// `H(t) = (omega0/2)·[sinθ cos(ωt) σx + sinθ sin(ωt) σy + cosθ σz]` on
/// `[0, 2π/ω]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecessingSpinParams {
    pub omega0: f64,
    pub omega: f64,
    pub theta: f64,
}

impl PrecessingSpinParams {
    pub fn new(omega0: f64, omega: f64, theta: f64) -> Self {
        Self {
            omega0,
            omega,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::param("omega0", format!("must be > 0, got {}", self.omega0)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::param("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !(self.theta.is_finite() && (0.0..=PI).contains(&self.theta)) {
            return Err(Error::param(
                "theta",
                format!("must lie in [0, π], got {}", self.theta),
            ));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn hamiltonian(&self, t: f64) -> CMatrix {
        let (s, co) = self.theta.sin_cos();
        let phi = self.omega * t;
        let half = 0.5 * self.omega0;
        let z = half * co;
        let off = Complex64::from_polar(half * s, phi);
        CMatrix::from_row_slice(2, 2, &[c(z, 0.0), off.conj(), off, c(-z, 0.0)])
    }

    /// Analytic `∂H/∂t`.
    pub fn derivative(&self, t: f64) -> CMatrix {
        let s = self.theta.sin();
        let phi = self.omega * t;
        // d/dt [ (ω0/2) sinθ e^{iωt} ] = i ω (ω0/2) sinθ e^{iωt}
        let off = Complex64::from_polar(0.5 * self.omega0 * s * self.omega, phi) * linalg::I;
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), off.conj(), off, c(0.0, 0.0)])
    }
}

#[derive(Debug, Clone)]
enum Evaluator {
    PrecessingSpin(PrecessingSpinParams),
    Constant(CMatrix),
    Sampled {
        times: Vec<f64>,
        matrices: Vec<CMatrix>,
    },
    Shifted {
        inner: Box<Evaluator>,
        shift: f64,
    },
    /// `H(t) = inner(t / factor)`.
    Dilated {
        inner: Box<Evaluator>,
        factor: f64,
    },
}

impl Evaluator {
    fn eval(&self, t: f64) -> CMatrix {
        match self {
            Evaluator::PrecessingSpin(p) => p.hamiltonian(t),
            Evaluator::Constant(h) => h.clone(),
            Evaluator::Sampled { times, matrices } => interpolate(times, matrices, t),
            Evaluator::Shifted { inner, shift } => {
                let mut h = inner.eval(t);
                let n = h.nrows();
                for i in 0..n {
                    h[(i, i)] += c(*shift, 0.0);
                }
                h
            }
            Evaluator::Dilated { inner, factor } => inner.eval(t / factor),
        }
    }

    fn analytic_derivative(&self, t: f64) -> Option<CMatrix> {
        match self {
            Evaluator::PrecessingSpin(p) => Some(p.derivative(t)),
            Evaluator::Constant(h) => Some(CMatrix::zeros(h.nrows(), h.ncols())),
            Evaluator::Sampled { .. } => None,
            Evaluator::Shifted { inner, .. } => inner.analytic_derivative(t),
            Evaluator::Dilated { inner, factor } => inner
                .analytic_derivative(t / factor)
                .map(|d| d * c(1.0 / factor, 0.0)),
        }
    }
}

fn interpolate(times: &[f64], matrices: &[CMatrix], t: f64) -> CMatrix {
    let last = times.len() - 1;
    if t <= times[0] {
        return matrices[0].clone();
    }
    if t >= times[last] {
        return matrices[last].clone();
    }
    let i = times.partition_point(|&x| x <= t).saturating_sub(1).min(last - 1);
    let s = (t - times[i]) / (times[i + 1] - times[i]);
    &matrices[i] * c(1.0 - s, 0.0) + &matrices[i + 1] * c(s, 0.0)
}

/// A time-parameterized Hermitian family on `[0, duration]`.
#[derive(Debug, Clone)]
pub struct HamiltonianSchedule {
    dimension: usize,
    duration: f64,
    evaluator: Evaluator,
    cyclic: bool,
    family_tag: String,
    params: BTreeMap<String, f64>,
}

impl HamiltonianSchedule {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn family_tag(&self) -> &str {
        &self.family_tag
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Parameters of the analytic spin family, if this schedule is one
    /// (energy shifts and dilations are not).
    pub fn precessing_params(&self) -> Option<PrecessingSpinParams> {
        match &self.evaluator {
            Evaluator::PrecessingSpin(p) => Some(*p),
            _ => None,
        }
    }

    /// `H(t)`; `t` outside `[0, T]` is clamped for sampled schedules.
    pub fn at(&self, t: f64) -> CMatrix {
        self.evaluator.eval(t)
    }

    /// `∂H/∂t` by finite differences with step `h`.
    ///
    /// Central differences in the interior, second-order one-sided stencils
    /// within `h` of either end.
    pub fn derivative(&self, t: f64, h: f64) -> CMatrix {
        let inv = c(1.0 / (2.0 * h), 0.0);
        if t - h >= 0.0 && t + h <= self.duration {
            (self.at(t + h) - self.at(t - h)) * inv
        } else if t - h < 0.0 {
            (self.at(t) * c(-3.0, 0.0) + self.at(t + h) * c(4.0, 0.0) - self.at(t + 2.0 * h)) * inv
        } else {
            (self.at(t) * c(3.0, 0.0) - self.at(t - h) * c(4.0, 0.0) + self.at(t - 2.0 * h)) * inv
        }
    }

    /// `∂H/∂t` in closed form where the family provides one.
    pub fn analytic_derivative(&self, t: f64) -> Option<CMatrix> {
        self.evaluator.analytic_derivative(t)
    }

    /// Constant Hamiltonian on `[0, duration]` (trivially cyclic).
    pub fn constant(h: CMatrix, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::Shape(format!("{}x{} matrix", h.nrows(), h.ncols())));
        }
        if !linalg::is_hermitian(&h) {
            return Err(Error::NotHermitian {
                time: 0.0,
                defect: linalg::hermiticity_defect(&h),
            });
        }
        Ok(Self {
            dimension: h.nrows(),
            duration,
            evaluator: Evaluator::Constant(h),
            cyclic: true,
            family_tag: "constant".into(),
            params: BTreeMap::new(),
        })
    }

    /// `H(t) + shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut params = self.params.clone();
        *params.entry("energy_shift".into()).or_insert(0.0) += shift;
        Self {
            dimension: self.dimension,
            duration: self.duration,
            evaluator: Evaluator::Shifted {
                inner: Box::new(self.evaluator.clone()),
                shift,
            },
            cyclic: self.cyclic,
            family_tag: self.family_tag.clone(),
            params,
        }
    }

    /// `s(t) = H(t / factor)` on `[0, factor·T]`.
    pub fn time_dilated(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::param("tau", format!("dilation must be > 0, got {factor}")));
        }
        let mut params = self.params.clone();
        *params.entry("dilation".into()).or_insert(1.0) *= factor;
        Ok(Self {
            dimension: self.dimension,
            duration: self.duration * factor,
            evaluator: Evaluator::Dilated {
                inner: Box::new(self.evaluator.clone()),
                factor,
            },
            cyclic: self.cyclic,
            family_tag: self.family_tag.clone(),
            params,
        })
    }

    /// Sampled schedule that skips the per-sample Hermiticity check.
    ///
    /// Only ordering and shapes are validated. Meant for inspecting suspect
    /// data with [`validate_schedule`]; propagating such a schedule fails in
    /// the eigen kernel.
    pub fn from_samples_unchecked(samples: Vec<(f64, CMatrix)>) -> Result<Self> {
        let (times, matrices) = check_samples(samples)?;
        let duration = *times.last().expect("≥ 2 samples");
        let dimension = matrices[0].nrows();
        Ok(Self {
            dimension,
            duration,
            evaluator: Evaluator::Sampled { times, matrices },
            cyclic: false,
            family_tag: "sampled".into(),
            params: BTreeMap::new(),
        })
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if duration.is_finite() && duration > 0.0 {
        Ok(())
    } else {
        Err(Error::param("duration", format!("must be > 0, got {duration}")))
    }
}

fn check_samples(samples: Vec<(f64, CMatrix)>) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    if samples.len() < 2 {
        return Err(Error::param(
            "samples",
            format!("need at least 2 samples, got {}", samples.len()),
        ));
    }
    if samples[0].0 != 0.0 {
        return Err(Error::Ordering(format!("first time is {}, expected 0", samples[0].0)));
    }
    for (k, w) in samples.windows(2).enumerate() {
        if !(w[1].0.is_finite() && w[1].0 > w[0].0) {
            return Err(Error::Ordering(format!(
                "times[{}] = {} does not exceed times[{}] = {}",
                k + 1,
                w[1].0,
                k,
                w[0].0
            )));
        }
    }
    let n = samples[0].1.nrows();
    for (t, m) in &samples {
        if n == 0 || m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape(format!(
                "sample at t = {t} is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(samples.into_iter().unzip())
}

/// Build the analytic precessing-spin schedule on one period.
pub fn make_precessing_spin(params: PrecessingSpinParams) -> Result<HamiltonianSchedule> {
    params.validate()?;
    let duration = params.period();
    let defect = linalg::max_abs(&(params.hamiltonian(0.0) - params.hamiltonian(duration)));
    debug_assert!(defect <= CYCLIC_TOL);
    let params_map = BTreeMap::from([
        ("omega0".to_string(), params.omega0),
        ("omega".to_string(), params.omega),
        ("theta".to_string(), params.theta),
    ]);
    Ok(HamiltonianSchedule {
        dimension: 2,
        duration,
        evaluator: Evaluator::PrecessingSpin(params),
        cyclic: defect <= CYCLIC_TOL,
        family_tag: "precessing_spin".into(),
        params: params_map,
    })
}

/// Build a schedule from `(time, matrix)` samples with piecewise-linear
/// interpolation. The cyclic flag is set only if `cyclic_hint` is given and
/// the endpoint matrices agree.
pub fn make_sampled_schedule(
    samples: Vec<(f64, CMatrix)>,
    cyclic_hint: bool,
) -> Result<HamiltonianSchedule> {
    let (times, matrices) = check_samples(samples)?;
    for (t, m) in times.iter().zip(&matrices) {
        if !linalg::is_hermitian(m) {
            return Err(Error::NotHermitian {
                time: *t,
                defect: linalg::hermiticity_defect(m),
            });
        }
    }
    let duration = *times.last().expect("≥ 2 samples");
    let endpoint_gap = linalg::max_abs(&(&matrices[0] - matrices.last().expect("≥ 2 samples")));
    let dimension = matrices[0].nrows();
    let params = BTreeMap::from([("samples".to_string(), times.len() as f64)]);
    Ok(HamiltonianSchedule {
        dimension,
        duration,
        evaluator: Evaluator::Sampled { times, matrices },
        cyclic: cyclic_hint && endpoint_gap <= CYCLIC_TOL,
        family_tag: "sampled".into(),
        params,
    })
}

/// Max Hermiticity defect over a uniform grid of `grid_size` points.
pub fn validate_schedule(schedule: &HamiltonianSchedule, grid_size: usize) -> f64 {
    let n = grid_size.max(2);
    (0..n)
        .map(|k| schedule.duration * k as f64 / (n - 1) as f64)
        .map(|t| linalg::hermiticity_defect(&schedule.at(t)))
        .fold(0.0, f64::max)
}

/// JSON schedule descriptor.
///
/// ```json
/// {"family": "precessing_spin", "omega0": 1.0, "omega": 0.02, "theta": 1.0472}
/// {"family": "sampled", "times": [0, 1], "matrices": [[[0.5,0],[0,0],[0,0],[-0.5,0]], ...], "cyclic": false}
/// ```
///
/// Sampled matrices are flat row-major lists of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleDescriptor {
    PrecessingSpin {
        omega0: f64,
        omega: f64,
        theta: f64,
    },
    Sampled {
        times: Vec<f64>,
        matrices: Vec<Vec<[f64; 2]>>,
        #[serde(default)]
        cyclic: bool,
    },
}

impl ScheduleDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<HamiltonianSchedule> {
        match self {
            ScheduleDescriptor::PrecessingSpin {
                omega0,
                omega,
                theta,
            } => make_precessing_spin(PrecessingSpinParams::new(*omega0, *omega, *theta)),
            ScheduleDescriptor::Sampled {
                times,
                matrices,
                cyclic,
            } => {
                if times.len() != matrices.len() {
                    return Err(Error::Shape(format!(
                        "{} times but {} matrices",
                        times.len(),
                        matrices.len()
                    )));
                }
                let samples = times
                    .iter()
                    .zip(matrices)
                    .map(|(&t, flat)| Ok((t, matrix_from_pairs(flat)?)))
                    .collect::<Result<Vec<_>>>()?;
                make_sampled_schedule(samples, *cyclic)
            }
        }
    }
}

/// Row-major `[re, im]` pairs → square matrix.
pub fn matrix_from_pairs(flat: &[[f64; 2]]) -> Result<CMatrix> {
    let n = (flat.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != flat.len() {
        return Err(Error::Shape(format!(
            "matrix has {} entries, not a perfect square",
            flat.len()
        )));
    }
    if flat.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::param("matrices", "non-finite entry"));
    }
    Ok(CMatrix::from_row_iterator(
        n,
        n,
        flat.iter().map(|&[re, im]| c(re, im)),
    ))
}

/// Square matrix → row-major `[re, im]` pairs.
pub fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}
