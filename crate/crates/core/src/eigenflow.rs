//! Instantaneous eigenvectors of `H(t)` followed continuously along a grid,
//! with explicit gauge (phase) conventions.
//!
//! Three gauges are exposed and none is picked implicitly:
//!
//! * **raw**: each vector normalized so its largest entry is real positive;
//! * **parallel**: consecutive overlaps `⟨n(t_k)|n(t_{k+1})⟩` real positive,
//!   i.e. the discrete `⟨n|ṅ⟩ = 0` condition. For a cyclic schedule the
//!   holonomy then shows up in `⟨n(t_0)|n(t_K)⟩ = e^{iγ(c)}`;
//! * **periodic**: single-valued, `|n(t_K)⟩ = |n(t_0)⟩`, with the holonomy
//!   spread uniformly over the links, so that `γ` has to be carried as an
//!   explicit factor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::phases::BerryPhase;
use crate::schedule::HamiltonianSchedule;

/// Two candidate overlaps closer than this make level assignment ambiguous.
pub const AMBIGUITY_TOL: f64 = 1e-3;
/// Minimum `|⟨n(t_k)|n(t_{k+1})⟩|` for tracking to count as continuous.
pub const CONTINUITY_MIN: f64 = 0.99;
/// Overlaps below this are treated as zero by gauge fixing.
pub const ZERO_OVERLAP: f64 = 1e-8;
/// Default gap tolerance relative to the spectral range.
pub const DEFAULT_GAP_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Raw,
    #[default]
    Parallel,
    Periodic,
}

/// Tracked instantaneous spectrum on a uniform grid.
#[derive(Debug, Clone)]
pub struct SpectralFlow {
    pub grid: Vec<f64>,
    /// `energies[k][n]`: level `n` at `t_k` (ascending at `t_0`, then tracked).
    pub energies: Vec<Vec<f64>>,
    /// `vectors[k]`: column `n` is `|n(t_k)⟩`.
    pub vectors: Vec<CMatrix>,
    pub gauge: Gauge,
    pub min_gap: f64,
    /// Whether the source schedule was cyclic.
    pub cyclic: bool,
}

impl SpectralFlow {
    pub fn dimension(&self) -> usize {
        self.vectors[0].ncols()
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn check_level(&self, n: usize) -> Result<()> {
        if n < self.dimension() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: n,
                len: self.dimension(),
            })
        }
    }

    pub fn vector(&self, k: usize, n: usize) -> CVector {
        self.vectors[k].column(n).into_owned()
    }

    pub fn energy(&self, k: usize, n: usize) -> f64 {
        self.energies[k][n]
    }

    /// `⟨n(t_k)|n(t_{k+1})⟩`.
    pub fn link(&self, n: usize, k: usize) -> Complex64 {
        self.vectors[k].column(n).dotc(&self.vectors[k + 1].column(n))
    }

    /// Multiply `|n(t_k)⟩` by `e^{iφ_k}` for every node. The result is tagged
    /// raw, since an arbitrary twist breaks any gauge condition.
    pub fn with_phase_twist(&self, n: usize, phases: &[f64]) -> Result<SpectralFlow> {
        self.check_level(n)?;
        if phases.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} phases for {} nodes",
                phases.len(),
                self.grid.len()
            )));
        }
        let mut out = self.clone();
        for (v, &phi) in out.vectors.iter_mut().zip(phases) {
            let f = Complex64::from_polar(1.0, phi);
            v.column_mut(n).iter_mut().for_each(|z| *z *= f);
        }
        out.gauge = Gauge::Raw;
        Ok(out)
    }
}

/// Ascending energies and phase-normalized orthonormal eigenvectors.
pub fn instantaneous_eigensystem(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    linalg::eigh(h)
}

fn min_adjacent_gap(sorted: &[f64]) -> f64 {
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Follow every level of `schedule` over `steps` uniform intervals.
///
/// Level `n` at `t_{k+1}` is the eigenvector with the largest overlap
/// modulus against level `n` at `t_k`. `gap_tol` defaults to
/// `1e-6 × spectral range`.
pub fn track_flow(
    schedule: &HamiltonianSchedule,
    steps: usize,
    gap_tol: Option<f64>,
) -> Result<SpectralFlow> {
    if steps < 2 {
        return Err(Error::param("steps", format!("need ≥ 2, got {steps}")));
    }
    let duration = schedule.duration();
    let grid: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { duration } else { duration * k as f64 / steps as f64 })
        .collect();
    let systems = grid
        .iter()
        .map(|&t| instantaneous_eigensystem(&schedule.at(t)))
        .collect::<Result<Vec<_>>>()?;

    let range = systems
        .iter()
        .map(|(e, _)| e[e.len() - 1] - e[0])
        .fold(0.0, f64::max);
    let tol = gap_tol.unwrap_or(DEFAULT_GAP_RTOL * range);
    let (worst_k, min_gap) = systems
        .iter()
        .enumerate()
        .map(|(k, (e, _))| (k, min_adjacent_gap(e)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if min_gap < tol {
        return Err(Error::Degeneracy {
            time: grid[worst_k],
            gap: min_gap,
            tol,
        });
    }

    let n = schedule.dimension();
    let mut energies = Vec::with_capacity(steps + 1);
    let mut vectors = Vec::with_capacity(steps + 1);
    energies.push(systems[0].0.clone());
    vectors.push(systems[0].1.clone());

    for k in 0..steps {
        let prev = &vectors[k];
        let (e_next, v_next) = &systems[k + 1];
        let overlaps = prev.adjoint() * v_next;
        let mut assignment = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        for level in 0..n {
            let mut ranked: Vec<(usize, f64)> =
                (0..n).map(|m| (m, overlaps[(level, m)].norm())).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            let (best, best_mag) = ranked[0];
            if n > 1 && best_mag - ranked[1].1 < AMBIGUITY_TOL {
                return Err(Error::Tracking {
                    time: grid[k + 1],
                    reason: format!(
                        "level {level}: overlaps {best_mag:.6} and {:.6} are indistinguishable",
                        ranked[1].1
                    ),
                });
            }
            if best_mag < CONTINUITY_MIN {
                return Err(Error::Tracking {
                    time: grid[k + 1],
                    reason: format!(
                        "level {level}: best overlap {best_mag:.6} below {CONTINUITY_MIN}; refine the grid"
                    ),
                });
            }
            if taken[best] {
                return Err(Error::Tracking {
                    time: grid[k + 1],
                    reason: format!("two levels map onto eigenvector {best}"),
                });
            }
            taken[best] = true;
            assignment[level] = best;
        }

        let mut e_tracked = Vec::with_capacity(n);
        let mut v_tracked = CMatrix::zeros(n, n);
        for (level, &m) in assignment.iter().enumerate() {
            e_tracked.push(e_next[m]);
            v_tracked.set_column(level, &v_next.column(m));
        }
        // tracked levels swapping order between nodes means the gap closed in between
        let e_prev = &energies[k];
        for a in 0..n {
            for b in a + 1..n {
                let before = e_prev[b] - e_prev[a];
                let after = e_tracked[b] - e_tracked[a];
                if before * after < 0.0 {
                    return Err(Error::Degeneracy {
                        time: 0.5 * (grid[k] + grid[k + 1]),
                        gap: before.abs().min(after.abs()),
                        tol,
                    });
                }
            }
        }
        energies.push(e_tracked);
        vectors.push(v_tracked);
    }

    Ok(SpectralFlow {
        grid,
        energies,
        vectors,
        gauge: Gauge::Raw,
        min_gap,
        cyclic: schedule.is_cyclic(),
    })
}

/// Rephase every level so consecutive overlaps are real and positive.
/// `|n(t_0)⟩` is left unchanged.
pub fn fix_gauge_parallel(flow: &SpectralFlow) -> Result<SpectralFlow> {
    let mut out = flow.clone();
    let n = flow.dimension();
    for level in 0..n {
        for k in 0..flow.steps() {
            let link = out.link(level, k);
            let mag = link.norm();
            if mag < ZERO_OVERLAP {
                return Err(Error::Gauge(format!(
                    "level {level}: zero overlap between t = {} and t = {}",
                    flow.grid[k],
                    flow.grid[k + 1]
                )));
            }
            let rot = link.conj() / mag;
            out.vectors[k + 1]
                .column_mut(level)
                .iter_mut()
                .for_each(|z| *z *= rot);
        }
    }
    out.gauge = Gauge::Parallel;
    Ok(out)
}

/// Single-valued gauge: parallel transport followed by
/// `|n(t_k)⟩ ← e^{−ikγ(c)/K}|n(t_k)⟩`, so that `|n(t_K)⟩ = |n(t_0)⟩` and every
/// link carries the same phase `arg⟨n(t_k)|n(t_{k+1})⟩ = −γ(c)/K`.
pub fn fix_gauge_periodic(flow: &SpectralFlow) -> Result<SpectralFlow> {
    if !flow.cyclic {
        return Err(Error::Precondition(
            "periodic gauge requires a cyclic schedule".into(),
        ));
    }
    let mut out = fix_gauge_parallel(flow)?;
    let steps = flow.steps();
    for level in 0..flow.dimension() {
        let closure = out.vector(0, level).dotc(&out.vector(steps, level));
        if closure.norm() < CONTINUITY_MIN {
            return Err(Error::Gauge(format!(
                "level {level}: endpoint vectors differ (|⟨n(0)|n(T)⟩| = {:.6})",
                closure.norm()
            )));
        }
        let holonomy = BerryPhase::from_angle(closure.arg()).value;
        for k in 1..=steps {
            let f = Complex64::from_polar(1.0, -(k as f64) * holonomy / steps as f64);
            out.vectors[k]
                .column_mut(level)
                .iter_mut()
                .for_each(|z| *z *= f);
        }
    }
    out.gauge = Gauge::Periodic;
    Ok(out)
}
