//! Side-by-side evaluation of the closed forms as originally written and the
//! forms this crate computes, for configurations where they disagree.

use alloc::vec::Vec;

use serde::Serialize;

use crate::config::{Scheme, SystemConfig};
use crate::noma::{frame_law, latency_measure, NomaError};
use crate::oma::{generation_vectors, queue_chain, OmaError, MAX_QUEUE};
use crate::probcore::{binomial, ln_factorial};
use crate::Formulas;

/// One quantity evaluated both ways.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub item: &'static str,
    pub printed: f64,
    pub corrected: f64,
}

impl Discrepancy {
    pub fn gap(&self) -> f64 {
        (self.printed - self.corrected).abs()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AuditError {
    #[error(transparent)]
    Oma(#[from] OmaError),
    #[error(transparent)]
    Noma(#[from] NomaError),
}

/// Largest enumeration the literal drop-indicator check will attempt.
const ENUMERATION_LIMIT: f64 = 2e6;

pub fn audit(cfg: &SystemConfig, scheme: Scheme) -> Result<Vec<Discrepancy>, AuditError> {
    match scheme {
        Scheme::Oma => audit_oma(cfg),
        Scheme::Noma => audit_noma(cfg),
    }
}

fn audit_oma(cfg: &SystemConfig) -> Result<Vec<Discrepancy>, AuditError> {
    let (t, q_cap) = (cfg.t_int as i64, cfg.q as i64);
    let mut out = Vec::new();

    // Transition rows as written: the diagonal-minus-one band plus the
    // saturation column, which leaves the empty-to-empty move out.
    let mut worst = 0.0f64;
    for qi in 0..=q_cap {
        let mut sum = 0.0;
        for qj in 0..=q_cap {
            if qj == q_cap - 1 {
                sum += (q_cap - qi..=t)
                    .map(|m| binomial(m, t, cfg.alpha))
                    .sum::<f64>();
            } else if qi <= qj + 1 && qj + 1 < q_cap {
                sum += binomial(qj - qi + 1, t, cfg.alpha);
            }
        }
        if (sum - 1.0).abs() > worst.abs() {
            worst = sum - 1.0;
        }
    }
    out.push(Discrepancy {
        item: "queue transition row sum (worst row)",
        printed: 1.0 + worst,
        corrected: 1.0,
    });

    if cfg.q <= MAX_QUEUE
        && libm::pow((cfg.t_int + 1) as f64, (cfg.q + 1) as f64) * cfg.t_int as f64
            <= ENUMERATION_LIMIT
    {
        let model = queue_chain(cfg)?;
        let mut printed = 0.0;
        for n in 1..=cfg.t_int {
            for (q, &w) in model.pi_n[(n - 1) as usize].iter().enumerate() {
                for l in 1..=q as u32 + 1 {
                    for v in generation_vectors(cfg.t_int, n, q as u32, l) {
                        if v.printed_membership(cfg.q) {
                            printed += w * v.probability(cfg.t_int, cfg.alpha) * (1.0 - cfg.eps2)
                                / cfg.t_int as f64;
                        }
                    }
                }
            }
        }
        let corrected = crate::oma::latency_measure(cfg)?.total();
        out.push(Discrepancy {
            item: "intermittent success probability via drop indicator",
            printed,
            corrected,
        });
    }
    Ok(out)
}

fn audit_noma(cfg: &SystemConfig) -> Result<Vec<Discrepancy>, AuditError> {
    let consistent = frame_law(cfg, Formulas::Consistent)?;
    let printed = frame_law(cfg, Formulas::Printed)?;
    let per_packet = latency_measure(cfg, &consistent).total();
    let (k, n) = (cfg.k as i64, cfg.n as i64);
    let mut out = Vec::new();

    out.push(Discrepancy {
        item: "intermittent success: frame-level versus per-packet",
        printed: consistent.pf_n,
        corrected: per_packet,
    });
    out.push(Discrepancy {
        item: "frame event probability: broadband category without collisions",
        printed: printed.pf_n,
        corrected: consistent.pf_n,
    });

    // Later receptions as written: a binomial over the whole frame divided
    // by the frame event probability.
    let later: f64 = (0..=n).map(|r| binomial(r, n, cfg.p2())).sum();
    out.push(Discrepancy {
        item: "later-reception law total mass",
        printed: if consistent.pf_n > 0.0 {
            later / consistent.pf_n
        } else {
            f64::INFINITY
        },
        corrected: 1.0,
    });

    let lf = |x: i64| ln_factorial(x as u64);
    let mut worst_last = 1.0;
    let mut worst_prev = 1.0;
    for d in (k + 1)..=n {
        for c in 1..=(d - k) {
            let total: f64 = (1..=(d - c))
                .map(|t| c as f64 * libm::exp(lf(d - t) + lf(d - c) - lf(d - 1) - lf(d - t - c)))
                .sum();
            if (total - 1.0).abs() > (worst_last - 1.0f64).abs() {
                worst_last = total;
            }
            if c >= 2 {
                for tl in 1..(d - 1) {
                    let width = d - tl - 1;
                    if width > 0 {
                        let total = (d - tl) as f64 * (c - 1) as f64 / width as f64;
                        if (total - 1.0).abs() > (worst_prev - 1.0f64).abs() {
                            worst_prev = total;
                        }
                    }
                }
            }
        }
    }
    out.push(Discrepancy {
        item: "last-packet delay law total mass (worst case)",
        printed: worst_last,
        corrected: 1.0,
    });
    out.push(Discrepancy {
        item: "earlier-packet delay law total mass (worst case)",
        printed: worst_prev,
        corrected: 1.0,
    });

    // Last-event probability as written, with the mean per-slot event
    // probability p2 after the first event.
    let p2 = cfg.p2();
    let mut worst = (0.0f64, 0.0f64);
    for d in (k + 1) as usize..=n as usize {
        let pd = consistent.pd.prob(d as i64);
        if pd <= 0.0 {
            continue;
        }
        let mut value = 0.0;
        for f in (k + 1) as usize..d {
            let (di, fi) = (d as i64, f as i64);
            for r in 1..=(di - fi) {
                value += consistent.pf.prob(fi)
                    * p2
                    * libm::exp(
                        lf(di - fi - 1) + lf(n - fi - r + 1) - lf(di - fi - r + 1) - lf(n - fi - 1),
                    )
                    / pd;
            }
        }
        let exact = consistent.pl[d];
        if (value - exact).abs() > (worst.0 - worst.1).abs() {
            worst = (value, exact);
        }
    }
    out.push(Discrepancy {
        item: "last-event probability (worst slot)",
        printed: worst.0,
        corrected: worst.1,
    });
    Ok(out)
}
