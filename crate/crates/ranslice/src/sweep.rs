//! Grid exploration: Pareto frontiers, constrained optima and alpha sweeps.

use std::cmp::Ordering;
use std::collections::HashMap;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ranslice_core::noma::{noma_lr_kpis, noma_paoi_kpis};
use ranslice_core::oma::{oma_lr_kpis, oma_paoi_kpis, oma_throughput};
use ranslice_core::{validate, Formulas, KpiMode, KpiResult, Percentile, Scheme, SystemConfig};

/// One evaluated configuration in the (throughput, timeliness) plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub s1: f64,
    /// 90th percentile of the timeliness PMF (L90 or Delta90).
    pub tau: Percentile,
    pub ps2: f64,
    pub config: SystemConfig,
    pub scheme: Scheme,
}

/// How far past `K` the coded block size is searched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NRange {
    /// `K ..= ceil(K / (1 - e) + 6 sqrt(K e))` with `e` the broadband loss
    /// per slot: `eps1` under OMA, `1 - (1 - alpha)(1 - eps1)` under NOMA.
    Auto,
    /// `K ..= K + extra`.
    Extra(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k: (u32, u32),
    pub n_range: NRange,
    pub t_int: Vec<u32>,
    pub q: Vec<u32>,
    pub eps1: f64,
    pub eps2: f64,
    pub scheme: Scheme,
    pub mode: KpiMode,
    pub formulas: Formulas,
    /// Lower bound on `ps2` for a point to count as feasible.
    pub min_ps2: Option<f64>,
}

impl SweepGrid {
    /// The evaluation grid: `K` in 2..=64, `T_int` in 1..=64, `Q` in {1, 4},
    /// `eps1 = 0.1`, `eps2 = 0.05`. The `ps2 >= 0.9` side constraint is on
    /// for OMA latency-reliability only.
    pub fn standard(scheme: Scheme, mode: KpiMode) -> Self {
        let min_ps2 = (scheme == Scheme::Oma && mode == KpiMode::Lr).then_some(0.9);
        Self {
            k: (2, 64),
            n_range: NRange::Auto,
            t_int: (1..=64).collect(),
            q: vec![1, 4],
            eps1: 0.1,
            eps2: 0.05,
            scheme,
            mode,
            formulas: Formulas::Consistent,
            min_ps2,
        }
    }

    fn n_values(&self, k: u32, alpha: f64) -> std::ops::RangeInclusive<u32> {
        let top = match self.n_range {
            NRange::Extra(extra) => k + extra,
            NRange::Auto => {
                let e = match self.scheme {
                    Scheme::Oma => self.eps1,
                    Scheme::Noma => 1.0 - (1.0 - alpha) * (1.0 - self.eps1),
                };
                let kf = k as f64;
                (kf / (1.0 - e) + 6.0 * (kf * e).sqrt()).ceil() as u32
            }
        };
        k..=top.max(k)
    }

    /// Queue sizes that differ after validation (PAoI and NOMA fix `Q = 1`).
    fn effective_q(&self) -> Vec<u32> {
        if self.scheme == Scheme::Noma || self.mode == KpiMode::Paoi {
            vec![1]
        } else {
            let mut q = self.q.clone();
            q.sort_unstable();
            q.dedup();
            q
        }
    }

    fn effective_t(&self) -> Vec<u32> {
        if self.scheme == Scheme::Noma {
            vec![1]
        } else {
            let mut t = self.t_int.clone();
            t.sort_unstable();
            t.dedup();
            t
        }
    }

    fn config(&self, k: u32, n: u32, t_int: u32, q: u32, alpha: f64) -> SystemConfig {
        SystemConfig {
            k,
            n,
            t_int,
            q,
            alpha,
            eps1: self.eps1,
            eps2: self.eps2,
        }
    }
}

/// A point dropped from the grid and the reason.
#[derive(Clone, Debug, PartialEq)]
pub struct Skipped {
    pub config: SystemConfig,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridEvaluation {
    /// Sorted by configuration key.
    pub points: Vec<ParetoPoint>,
    pub skipped: Vec<Skipped>,
}

fn kpis(cfg: &SystemConfig, grid: &SweepGrid) -> Result<KpiResult, String> {
    let checked = validate(cfg, grid.scheme, grid.mode).map_err(|e| e.to_string())?;
    let cfg = checked.config();
    match (grid.scheme, grid.mode) {
        (Scheme::Oma, KpiMode::Lr) => oma_lr_kpis(cfg).map_err(|e| e.to_string()),
        (Scheme::Oma, KpiMode::Paoi) => Ok(oma_paoi_kpis(cfg)),
        (Scheme::Noma, KpiMode::Lr) => noma_lr_kpis(cfg, grid.formulas).map_err(|e| e.to_string()),
        (Scheme::Noma, KpiMode::Paoi) => {
            noma_paoi_kpis(cfg, grid.formulas).map_err(|e| e.to_string())
        }
    }
}

/// Evaluate every grid point at one `alpha`.
///
/// Under OMA the intermittent KPIs depend only on `(T_int, Q)` and the
/// broadband throughput only on `(K, N, T_int)`, so each half is computed
/// once and combined.
pub fn evaluate_grid(grid: &SweepGrid, alpha: f64) -> GridEvaluation {
    let ks: Vec<u32> = (grid.k.0..=grid.k.1).collect();
    let mut eval = match grid.scheme {
        Scheme::Oma => evaluate_oma(grid, alpha, &ks),
        Scheme::Noma => evaluate_noma(grid, alpha, &ks),
    };
    eval.points.sort_by_key(|p| p.config.key());
    eval.skipped.sort_by_key(|s| s.config.key());
    for s in &eval.skipped {
        debug!("skipped {:?}: {}", s.config.key(), s.reason);
    }
    eval
}

fn evaluate_oma(grid: &SweepGrid, alpha: f64, ks: &[u32]) -> GridEvaluation {
    let ts = grid.effective_t();
    let qs = grid.effective_q();
    let pairs: Vec<(u32, u32)> = ts
        .iter()
        .flat_map(|&t| qs.iter().map(move |&q| (t, q)))
        .collect();
    // Intermittent side, keyed by (T_int, Q); K and N are placeholders.
    let intermittent: HashMap<(u32, u32), Result<(Percentile, f64), String>> = pairs
        .par_iter()
        .map(|&(t, q)| {
            let cfg = grid.config(1, 1, t, q, alpha);
            let r = kpis(&cfg, grid).map(|r| (r.percentile90, r.ps2));
            ((t, q), r)
        })
        .collect();

    let blocks: Vec<(u32, u32)> = ks
        .iter()
        .flat_map(|&k| grid.n_values(k, alpha).map(move |n| (k, n)))
        .collect();
    let mut eval = GridEvaluation::default();
    for &(k, n) in &blocks {
        for &t in &ts {
            let s1 = oma_throughput(&grid.config(k, n, t, 1, alpha)).s1;
            for &q in &qs {
                let config = grid.config(k, n, t, q, alpha);
                match &intermittent[&(t, q)] {
                    Ok((tau, ps2)) => eval.points.push(ParetoPoint {
                        s1,
                        tau: *tau,
                        ps2: *ps2,
                        config,
                        scheme: Scheme::Oma,
                    }),
                    Err(reason) => eval.skipped.push(Skipped {
                        config,
                        reason: reason.clone(),
                    }),
                }
            }
        }
    }
    eval
}

fn evaluate_noma(grid: &SweepGrid, alpha: f64, ks: &[u32]) -> GridEvaluation {
    let blocks: Vec<(u32, u32)> = ks
        .iter()
        .flat_map(|&k| grid.n_values(k, alpha).map(move |n| (k, n)))
        .collect();
    let results: Vec<Result<ParetoPoint, Skipped>> = blocks
        .par_iter()
        .map(|&(k, n)| {
            let config = grid.config(k, n, 1, 1, alpha);
            kpis(&config, grid)
                .map(|r| ParetoPoint {
                    s1: r.s1,
                    tau: r.percentile90,
                    ps2: r.ps2,
                    config,
                    scheme: Scheme::Noma,
                })
                .map_err(|reason| Skipped { config, reason })
        })
        .collect();
    let mut eval = GridEvaluation::default();
    for r in results {
        match r {
            Ok(p) => eval.points.push(p),
            Err(s) => eval.skipped.push(s),
        }
    }
    eval
}

/// True if `b` strictly dominates `a`: higher throughput and lower `tau`.
pub fn dominates(b: &ParetoPoint, a: &ParetoPoint) -> bool {
    b.s1 > a.s1 && b.tau < a.tau
}

/// Points not strictly dominated by any other, sorted by `s1` ascending.
/// Among points with identical `(s1, tau)` only the smallest configuration
/// key is kept.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<&ParetoPoint> = points.iter().collect();
    // Descending s1; within equal s1 the order does not affect domination.
    sorted.sort_by(|a, b| b.s1.total_cmp(&a.s1));
    let mut keep = Vec::new();
    // Smallest tau among points with strictly larger s1 than the current group.
    let mut best_above: Option<Percentile> = None;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].s1 == sorted[i].s1 {
            j += 1;
        }
        let group = &sorted[i..j];
        for p in group {
            if best_above.is_none_or(|b| b >= p.tau) {
                keep.push(**p);
            }
        }
        let group_min = group.iter().map(|p| p.tau).min();
        best_above = match (best_above, group_min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        i = j;
    }
    keep.sort_by(|a, b| {
        a.s1.total_cmp(&b.s1)
            .then(a.tau.cmp(&b.tau))
            .then(a.config.key().cmp(&b.config.key()))
    });
    keep.dedup_by(|later, earlier| later.s1 == earlier.s1 && later.tau == earlier.tau);
    keep
}

/// Better candidate for the constrained optimum: lower `tau`, then higher
/// `s1`, then smaller configuration key.
fn rank(a: &ParetoPoint, b: &ParetoPoint) -> Ordering {
    a.tau
        .cmp(&b.tau)
        .then(b.s1.total_cmp(&a.s1))
        .then(a.config.key().cmp(&b.config.key()))
}

/// Best point of an evaluated grid under `s1 >= s1_min` (and the grid's
/// `ps2` bound); `None` when nothing qualifies.
pub fn best_feasible(
    points: &[ParetoPoint],
    s1_min: f64,
    min_ps2: Option<f64>,
) -> Option<ParetoPoint> {
    points
        .iter()
        .filter(|p| p.s1 >= s1_min && min_ps2.is_none_or(|m| p.ps2 >= m))
        .min_by(|a, b| rank(a, b))
        .copied()
}

/// Configuration minimizing `tau` subject to `s1 >= s1_min`.
pub fn optimal_config(grid: &SweepGrid, alpha: f64, s1_min: f64) -> Option<ParetoPoint> {
    best_feasible(&evaluate_grid(grid, alpha).points, s1_min, grid.min_ps2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `None` when the constraint cannot be met.
    pub optimum: Option<ParetoPoint>,
}

pub fn alpha_sweep(grid: &SweepGrid, alphas: &[f64], s1_min: f64) -> Vec<AlphaRow> {
    alphas
        .iter()
        .map(|&alpha| AlphaRow {
            alpha,
            optimum: optimal_config(grid, alpha, s1_min),
        })
        .collect()
}

/// `count` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Smallest `alpha` of a sweep at which no configuration is feasible,
/// provided every larger `alpha` is infeasible as well.
pub fn infeasibility_onset(rows: &[AlphaRow]) -> Option<f64> {
    let last_feasible = rows.iter().rposition(|r| r.optimum.is_some());
    match last_feasible {
        Some(i) => rows.get(i + 1).map(|r| r.alpha),
        None => rows.first().map(|r| r.alpha),
    }
}
