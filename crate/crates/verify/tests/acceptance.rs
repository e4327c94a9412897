//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Every criterion is evaluated even when an earlier one fails.

use std::process::{Command, ExitCode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ranslice::sweep::{
    alpha_sweep, evaluate_grid, infeasibility_onset, log_grid, optimal_config, pareto_frontier,
    AlphaRow, SweepGrid,
};
use ranslice_core::noma::{frame_law, noma_lr_kpis};
use ranslice_core::oma::queue_chain;
use ranslice_core::probcore::percentile;
use ranslice_core::simulator::{simulate, SimConfig, Z99};
use ranslice_core::{analyze, validate, Formulas, KpiMode, Percentile, Pmf, Scheme, SystemConfig};
use ranslice_verify::{ranslice_binary, Tally, Verdict};

const ALPHA: f64 = 0.01;
const S1_MIN: f64 = 0.75;

fn cfg(k: u32, n: u32, t_int: u32, q: u32, alpha: f64, eps1: f64, eps2: f64) -> SystemConfig {
    SystemConfig {
        k,
        n,
        t_int,
        q,
        alpha,
        eps1,
        eps2,
    }
}

fn is_distribution(p: &Pmf) -> bool {
    p.mass().iter().all(|&m| m >= 0.0) && (p.finite_mass() + p.deficit() - 1.0).abs() <= 1e-9
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pmfs = 0usize;
    let mut families = 0usize;
    let mut bad = Vec::new();
    for _ in 0..200 {
        let k = rng.gen_range(1..40);
        let c = cfg(
            k,
            k + rng.gen_range(0..20),
            rng.gen_range(1..20),
            rng.gen_range(1..=8),
            rng.gen_range(0.0..0.3),
            rng.gen_range(0.0..0.5),
            rng.gen_range(0.0..0.5),
        );
        for scheme in [Scheme::Oma, Scheme::Noma] {
            for mode in [KpiMode::Lr, KpiMode::Paoi] {
                let Ok(checked) = validate(&c, scheme, mode) else {
                    continue;
                };
                let r = analyze(&checked, Formulas::Consistent).expect("analysis");
                pmfs += 1;
                if !is_distribution(&r.timeliness) {
                    bad.push(format!("{scheme} {mode} {:?}", c.key()));
                }
            }
        }
        if validate(&c, Scheme::Noma, KpiMode::Lr).is_ok() {
            let law = frame_law(&c, Formulas::Consistent).expect("frame law");
            families += 1;
            if !is_distribution(&law.pf) {
                bad.push(format!("P_F {:?}", c.key()));
            }
            let conditional = law
                .pc_given_d
                .iter()
                .chain(&law.pr_given_f)
                .chain(&law.pz_given_d);
            for p in conditional.flatten() {
                families += 1;
                if (p.finite_mass() - 1.0).abs() > 1e-9 || p.mass().iter().any(|&m| m < 0.0) {
                    bad.push(format!("conditional family {:?}", c.key()));
                }
            }
        }
    }
    Verdict::new(
        bad.is_empty(),
        format!(
            "{pmfs} KPI PMFs and {families} frame-law PMFs checked, {} violations {:?}",
            bad.len(),
            bad.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut jobs = Vec::new();
    for q in [1, 4] {
        for t in [2, 4, 8, 13] {
            for alpha in [1e-3, 1e-2, 5e-2] {
                jobs.push(cfg(4, 6, t, q, alpha, 0.1, 0.05));
            }
        }
    }
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|c| {
            let model = queue_chain(c).expect("queue chain");
            let back = model.transition.left_mul(&model.pi0);
            let residual = back
                .iter()
                .zip(&model.pi0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let checked = validate(c, Scheme::Oma, KpiMode::Lr).expect("valid");
            let r = simulate(&SimConfig::new(&checked, 1_000_000, 11).expect("sim config"));
            let mut worst: f64 = 0.0;
            for (n, pi) in model.pi_n.iter().enumerate() {
                let samples: u64 = r.counts.occupancy[n].iter().sum();
                for (s, &p) in pi.iter().enumerate() {
                    let binomial = (p * (1.0 - p) / samples as f64).sqrt();
                    let se = r.occupancy_std_error(n, s).max(binomial);
                    let z = (r.queue_occupancy_hist[n][s] - p).abs() / se.max(f64::MIN_POSITIVE);
                    worst = worst.max(z);
                }
            }
            (residual, worst)
        })
        .collect();
    let residual = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let z = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Verdict::new(
        residual <= 1e-12 && z <= 3.0,
        format!(
            "{} configurations, largest residual {residual:.1e}, largest occupancy z {z:.2}",
            jobs.len()
        ),
    )
}

/// ps1, ps2 and p_T(0) of a NOMA frame by listing all 4^N per-slot outcomes:
/// intermittent heard, intermittent erased, broadband received, broadband erased.
fn enumerate_noma(c: &SystemConfig) -> (f64, f64, f64) {
    let n = c.n as usize;
    let probs = [
        c.alpha * (1.0 - c.eps2),
        c.alpha * c.eps2,
        (1.0 - c.alpha) * (1.0 - c.eps1),
        (1.0 - c.alpha) * c.eps1,
    ];
    let (mut ps1, mut recovered, mut immediate) = (0.0, 0.0, 0.0);
    for code in 0..4usize.pow(c.n) {
        let mut digits = code;
        let mut prob = 1.0;
        let mut broadband = 0;
        let mut decoded = false;
        let (mut held, mut late) = (0.0, 0.0);
        for _ in 0..n {
            let outcome = digits % 4;
            digits /= 4;
            prob *= probs[outcome];
            match outcome {
                0 if decoded => late += 1.0,
                0 => held += 1.0,
                2 => {
                    broadband += 1;
                    decoded |= broadband == c.k;
                }
                _ => {}
            }
        }
        if decoded {
            ps1 += prob;
            recovered += prob * (held + late);
            immediate += prob * late;
        }
    }
    let generated = n as f64 * c.alpha;
    (ps1, recovered / generated, immediate / generated)
}

fn criterion_3() -> Verdict {
    let mut grid = Vec::new();
    for n in 2..=6 {
        for k in 1..n {
            for alpha in [0.2, 0.5] {
                for eps1 in [0.0, 0.1] {
                    for eps2 in [0.0, 0.1] {
                        grid.push(cfg(k, n, 1, 1, alpha, eps1, eps2));
                    }
                }
            }
        }
    }
    // The load condition p1 + p2 <= 1 admits none of these points, so the
    // analytic functions are compared on the whole grid without validation.
    let admitted = grid
        .iter()
        .filter(|c| validate(c, Scheme::Noma, KpiMode::Lr).is_ok())
        .count();
    let mut worst: f64 = 0.0;
    for c in &grid {
        let (ps1, ps2, zero) = enumerate_noma(c);
        let r = noma_lr_kpis(c, Formulas::Consistent).expect("analysis");
        worst = worst
            .max((r.ps1 - ps1).abs())
            .max((r.ps2 - ps2).abs())
            .max((r.timeliness.prob(0) - zero).abs());
    }
    Verdict::new(
        worst <= 1e-10,
        format!(
            "{} configurations ({admitted} satisfy p1 + p2 <= 1), largest gap {worst:.1e}",
            grid.len()
        ),
    )
}

#[derive(Clone, Copy)]
struct McJob {
    config: SystemConfig,
    scheme: Scheme,
    mode: KpiMode,
}

fn criterion_4() -> Verdict {
    let mut jobs = Vec::new();
    for n in [6, 8] {
        for alpha in [0.01, 0.05] {
            for t in [5, 13] {
                for (q, mode) in [(1, KpiMode::Paoi), (1, KpiMode::Lr), (4, KpiMode::Lr)] {
                    jobs.push(McJob {
                        config: cfg(4, n, t, q, alpha, 0.1, 0.05),
                        scheme: Scheme::Oma,
                        mode,
                    });
                }
            }
            // NOMA has no intermittent period.
            for mode in [KpiMode::Lr, KpiMode::Paoi] {
                jobs.push(McJob {
                    config: cfg(4, n, 1, 1, alpha, 0.1, 0.05),
                    scheme: Scheme::Noma,
                    mode,
                });
            }
        }
    }

    let outcomes: Vec<(McJob, f64, f64)> = jobs
        .par_iter()
        .map(|job| {
            let checked = validate(&job.config, job.scheme, job.mode).expect("valid");
            let a = analyze(&checked, Formulas::Consistent).expect("analysis");
            let r = simulate(&SimConfig::new(&checked, 1_000_000, 3).expect("sim config"));
            let empirical = match job.mode {
                KpiMode::Lr => &r.latency_hist,
                KpiMode::Paoi => &r.paoi_hist,
            };
            let tvd = a.timeliness.total_variation(empirical);
            let z = (a.s1 - r.s1_hat).abs() / (r.ci_halfwidth.s1 / Z99);
            (*job, tvd, z)
        })
        .collect();

    let percentile_jobs: Vec<&McJob> = jobs.iter().filter(|j| j.mode == KpiMode::Paoi).collect();
    let percentile_gaps: Vec<(McJob, i64)> = percentile_jobs
        .par_iter()
        .map(|job| {
            let checked = validate(&job.config, job.scheme, job.mode).expect("valid");
            let a = analyze(&checked, Formulas::Consistent).expect("analysis");
            let r = simulate(&SimConfig::new(&checked, 10_000_000, 5).expect("sim config"));
            let gap = match (a.percentile90, percentile(&r.paoi_hist, 0.9)) {
                (Percentile::Finite(x), Percentile::Finite(y)) => (x - y).abs(),
                _ => i64::MAX,
            };
            (**job, gap)
        })
        .collect();

    let mut failures = Vec::new();
    for (job, tvd, z) in &outcomes {
        if *tvd >= 0.02 {
            failures.push(format!(
                "{} {} N={} T={} Q={} a={} TVD {tvd:.4}",
                job.scheme,
                job.mode,
                job.config.n,
                job.config.t_int,
                job.config.q,
                job.config.alpha
            ));
        }
        if *z > 3.0 {
            failures.push(format!(
                "{} {} N={} T={} Q={} a={} s1 z {z:.2}",
                job.scheme,
                job.mode,
                job.config.n,
                job.config.t_int,
                job.config.q,
                job.config.alpha
            ));
        }
    }
    for (job, gap) in &percentile_gaps {
        let slack = match job.scheme {
            Scheme::Oma => 1,
            Scheme::Noma => 2,
        };
        if *gap > slack {
            failures.push(format!(
                "{} N={} T={} a={} Delta90 gap {gap}",
                job.scheme, job.config.n, job.config.t_int, job.config.alpha
            ));
        }
    }
    let max_tvd = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    let max_z = outcomes.iter().map(|o| o.2).fold(0.0, f64::max);
    Verdict::new(
        failures.is_empty(),
        format!(
            "{} runs at 1e6 slots (largest TVD {max_tvd:.4}, largest s1 z {max_z:.2}), \
             {} percentile runs at 1e7 slots; failures: {failures:?}",
            outcomes.len(),
            percentile_gaps.len()
        ),
    )
}

fn criterion_5() -> Verdict {
    let grid = SweepGrid::standard(Scheme::Oma, KpiMode::Lr);
    let Some(best) = optimal_config(&grid, ALPHA, S1_MIN) else {
        return Verdict::new(false, "no feasible configuration");
    };
    let c = best.config;
    // K and N should also maximize throughput among blocks at the chosen period.
    let points = evaluate_grid(&grid, ALPHA).points;
    let top = points
        .iter()
        .filter(|p| p.config.t_int == c.t_int)
        .max_by(|a, b| a.s1.total_cmp(&b.s1))
        .expect("points at chosen period");
    let pass = (c.k, c.n, c.t_int) == (64, 77, 13) && (top.config.k, top.config.n) == (64, 77);
    Verdict::new(
        pass,
        format!(
            "optimum K={} N={} T_int={} Q={} (s1 {:.4}, ps2 {:.4}, L90 {}); \
             throughput argmax at that period K={} N={}",
            c.k, c.n, c.t_int, c.q, best.s1, best.ps2, best.tau, top.config.k, top.config.n
        ),
    )
}

fn frontier_max_s1(grid: &SweepGrid) -> f64 {
    pareto_frontier(&evaluate_grid(grid, ALPHA).points)
        .iter()
        .filter(|p| p.tau.is_finite())
        .map(|p| p.s1)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_6() -> Verdict {
    let oma = frontier_max_s1(&SweepGrid::standard(Scheme::Oma, KpiMode::Paoi));
    let noma_grid = SweepGrid::standard(Scheme::Noma, KpiMode::Paoi);
    let noma_frontier = pareto_frontier(&evaluate_grid(&noma_grid, ALPHA).points);
    let noma = noma_frontier
        .iter()
        .filter(|p| p.tau.is_finite())
        .map(|p| p.s1)
        .fold(f64::NEG_INFINITY, f64::max);
    let delta90 = noma_frontier
        .iter()
        .filter_map(|p| p.tau.finite())
        .max()
        .unwrap_or(i64::MIN);
    let lr = |q: u32| {
        let mut grid = SweepGrid::standard(Scheme::Oma, KpiMode::Lr);
        grid.q = vec![q];
        frontier_max_s1(&grid)
    };
    let (lr1, lr4) = (lr(1), lr(4));
    let parts = [
        (
            "OMA PAoI max s1",
            (0.77..=0.83).contains(&oma),
            format!("{oma:.4}"),
        ),
        (
            "NOMA PAoI max s1",
            (0.77..=0.83).contains(&noma),
            format!("{noma:.4}"),
        ),
        (
            "NOMA max Delta90",
            (280..=340).contains(&delta90),
            delta90.to_string(),
        ),
        (
            "OMA LR Q=1 max s1",
            (0.55..=0.65).contains(&lr1),
            format!("{lr1:.4}"),
        ),
        ("OMA LR Q=4 max s1", lr4 >= 0.77, format!("{lr4:.4}")),
    ];
    let detail = parts
        .iter()
        .map(|(name, ok, v)| format!("{name} {v} [{}]", if *ok { "ok" } else { "out of range" }))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(parts.iter().all(|p| p.1), detail)
}

fn sweep_rows(scheme: Scheme, alphas: &[f64]) -> Vec<AlphaRow> {
    alpha_sweep(&SweepGrid::standard(scheme, KpiMode::Lr), alphas, S1_MIN)
}

fn criterion_7(alphas: &[f64], oma: &[AlphaRow], noma: &[AlphaRow]) -> Verdict {
    let step = (alphas[1] / alphas[0]).log10();
    let judge = |rows: &[AlphaRow], target: f64| {
        let onset = infeasibility_onset(rows);
        let ok = onset.is_some_and(|a| (a / target).log10().abs() <= step + 1e-12);
        (onset, ok)
    };
    let (oma_onset, oma_ok) = judge(oma, 0.076);
    let (noma_onset, noma_ok) = judge(noma, 0.032);
    Verdict::new(
        oma_ok && noma_ok,
        format!(
            "{} log-spaced alphas (step {step:.3} decades); OMA onset {oma_onset:?} vs 0.076 [{}], \
             NOMA onset {noma_onset:?} vs 0.032 [{}]",
            alphas.len(),
            if oma_ok { "ok" } else { "off" },
            if noma_ok { "ok" } else { "off" },
        ),
    )
}

fn criterion_8(oma: &[AlphaRow]) -> Verdict {
    let blocks: Vec<(u32, u32)> = oma
        .iter()
        .filter_map(|r| r.optimum.map(|p| (p.config.k, p.config.n)))
        .collect();
    let invariant = !blocks.is_empty() && blocks.iter().all(|b| *b == blocks[0]);
    Verdict::new(
        invariant,
        format!(
            "{} feasible alphas, optimal (K, N) {:?}",
            blocks.len(),
            blocks.iter().collect::<std::collections::BTreeSet<_>>()
        ),
    )
}

fn criterion_9() -> Verdict {
    let Some(bin) = ranslice_binary() else {
        return Verdict::new(
            false,
            "ranslice binary not found next to the test executable",
        );
    };
    let common = [
        "--K", "4", "--N", "6", "--Tint", "5", "--alpha", "0.05", "--scheme", "oma", "--mode",
        "paoi",
    ];
    let simulate = || {
        Command::new(&bin)
            .args([
                "--seed",
                "7",
                "--format",
                "csv",
                "simulate",
                "--n-slots",
                "200000",
            ])
            .args(common)
            .output()
            .expect("run simulate")
    };
    let (a, b) = (simulate(), simulate());
    let identical = a.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout;

    let corrupted = Command::new(&bin)
        .args(["validate", "--n-slots", "200000", "--corrupt", "ps2"])
        .args(common)
        .output()
        .expect("run validate");
    let stderr = String::from_utf8_lossy(&corrupted.stderr);
    let caught = corrupted.status.code() == Some(2) && stderr.contains("FAIL ps2");
    Verdict::new(
        identical && caught,
        format!(
            "simulate output identical across runs: {identical} ({} bytes); \
             corrupted validate exit {:?}, stderr {:?}",
            a.stdout.len(),
            corrupted.status.code(),
            stderr.trim()
        ),
    )
}

fn main() -> ExitCode {
    let mut tally = Tally::default();
    tally.run(1, criterion_1);
    tally.run(2, criterion_2);
    tally.run(3, criterion_3);
    tally.run(4, criterion_4);
    tally.run(5, criterion_5);
    tally.run(6, criterion_6);

    let alphas = log_grid(1e-4, 1e-1, 20);
    let oma = sweep_rows(Scheme::Oma, &alphas);
    let noma = sweep_rows(Scheme::Noma, &alphas);
    tally.run(7, || criterion_7(&alphas, &oma, &noma));
    tally.run(8, || criterion_8(&oma));
    tally.run(9, criterion_9);

    let failed = tally.failed();
    if failed.is_empty() {
        println!("acceptance: all criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        ExitCode::FAILURE
    }
}
