//! Non-orthogonal slicing with successive interference cancellation.
//!
//! Both users share every slot. An intermittent transmission destroys the
//! broadband packet of its slot; the intermittent packet itself is stored by
//! the receiver and recovered once the broadband frame has been decoded.

mod frame;

pub use frame::{
    batch_packet_delay, frame_law, last_packet_delay, previous_packet_delay, NomaFrameLaw,
};

use thiserror::Error;

use crate::config::{KpiResult, SystemConfig, Throughput};
use crate::probcore::{
    binomial, percentile, with_overflow, LnFactorials, Pmf, PmfError, SubPmf, MAX_TAIL_SUPPORT,
    TAIL_TOLERANCE,
};
use crate::Formulas;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NomaError {
    #[error("{family} family does not normalize at index {index} (total {total})")]
    NonNormalizable {
        family: &'static str,
        index: usize,
        total: f64,
    },
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

/// Broadband throughput: `K` of the slots free of intermittent traffic must
/// be received.
pub fn noma_throughput(cfg: &SystemConfig) -> Throughput {
    let (k, n) = (cfg.k as i64, cfg.n as i64);
    let mut ps1 = 0.0;
    for r2 in 0..=(n - k) {
        let free = n - r2;
        let inner: f64 = (k..=free).map(|r1| binomial(r1, free, cfg.p1())).sum();
        ps1 += binomial(r2, n, cfg.alpha) * inner;
    }
    let ps1 = ps1.min(1.0);
    Throughput {
        s1: k as f64 / n as f64 * ps1,
        ps1,
    }
}

/// Latency measure per generated intermittent packet; totals the packet
/// success probability.
///
/// Expected decoded packets per frame at each delay, divided by the expected
/// `N alpha` generated packets. Packets recovered after the broadband frame
/// decodes have delay zero; a batch released at the `K`-th broadband success
/// in slot `d` has its members spread uniformly over delays `1..d-1`.
pub fn latency_measure(cfg: &SystemConfig, law: &NomaFrameLaw) -> SubPmf {
    let (k, n) = (cfg.k as i64, cfg.n as i64);
    let t = LnFactorials::new(cfg.n as usize + 1);
    let (b, p2) = (law.b, law.p2);
    let survive = 1.0 - cfg.eps2;
    // p2^c / alpha written as (1 - eps2) p2^(c - 1) so that alpha = 0 is fine.
    let per_alpha = |a: i64, c: i64, m: i64| -> f64 {
        if a < 0 || c < 1 || a + c > m {
            return 0.0;
        }
        let rest = (1.0 - b - p2).max(0.0);
        libm::exp(
            t.get(m) - t.get(a) - t.get(c) - t.get(m - a - c)
                + crate::probcore::ln_pow(b, a)
                + crate::probcore::ln_pow(p2, c - 1)
                + crate::probcore::ln_pow(rest, m - a - c),
        ) * survive
    };
    let mut measure = SubPmf::new();
    let mut immediate = 0.0;
    for d in (k + 1)..=n {
        let du = d as usize;
        let clear: f64 = (k..d).map(|r1| t.mult2(r1, 0, d - 1, b, p2)).sum();
        immediate += survive * (clear + law.cumulative[du - 1]);
        let released: f64 = (1..=(d - k))
            .map(|c| c as f64 * per_alpha(k - 1, c, d - 1) * b)
            .sum();
        if released > 0.0 {
            let each = released / (d - 1) as f64 / n as f64;
            for lag in 1..d {
                measure.add(lag, each);
            }
        }
    }
    measure.add(0, immediate / n as f64);
    measure
}

pub fn noma_lr_kpis(cfg: &SystemConfig, formulas: Formulas) -> Result<KpiResult, NomaError> {
    let Throughput { s1, ps1 } = noma_throughput(cfg);
    let law = frame_law(cfg, formulas)?;
    let measure = latency_measure(cfg, &law);
    let (ps2, timeliness) = match formulas {
        Formulas::Consistent => {
            let ps2 = measure.total().min(1.0);
            (ps2, measure.with_deficit()?)
        }
        Formulas::Printed => {
            let ps2 = law.pf_n;
            let shape = measure.normalize().map(|p| p.into_sub());
            let timeliness = match shape {
                Ok(s) => s.scaled(ps2).with_deficit()?,
                Err(_) => Pmf::lost(),
            };
            (ps2, timeliness)
        }
    };
    let percentile90 = percentile(&timeliness, 0.9);
    Ok(KpiResult {
        s1,
        ps1,
        ps2,
        timeliness,
        percentile90,
        xi: None,
    })
}

/// Age of the freshest packet at an event in slot `d`, weighted by the
/// event frequency at `d`.
fn freshest_delay(law: &NomaFrameLaw, d: usize) -> SubPmf {
    let mut out = SubPmf::new();
    let later = law.event_rate[d] - law.direct[d] - law.batch[d].iter().sum::<f64>();
    out.add(0, law.direct[d] + later.max(0.0));
    for (c, &w) in law.batch[d].iter().enumerate().skip(1) {
        if w > 0.0 {
            out.add_scaled(&last_packet_delay(d as u32, c as u32).into_sub(), w, 0);
        }
    }
    out
}

pub fn noma_paoi_kpis(cfg: &SystemConfig, formulas: Formulas) -> Result<KpiResult, NomaError> {
    let lr = noma_lr_kpis(cfg, formulas)?;
    let law = frame_law(cfg, formulas)?;
    let timeliness = paoi(cfg, &law)?;
    let percentile90 = percentile(&timeliness, 0.9);
    Ok(KpiResult {
        timeliness,
        percentile90,
        ..lr
    })
}

/// Peak age at each decoding event: age of the previous event's freshest
/// packet plus the gap between the two events.
pub fn paoi(cfg: &SystemConfig, law: &NomaFrameLaw) -> Result<Pmf, NomaError> {
    if law.events_per_frame <= 0.0 {
        return Ok(Pmf::lost());
    }
    let n = cfg.n as usize;
    let mut within = SubPmf::new();
    let mut to_frame_end = SubPmf::new();
    for d in (cfg.k as usize + 1)..=n {
        if law.event_rate[d] <= 0.0 {
            continue;
        }
        let fresh = freshest_delay(law, d);
        let rest = (n - d) as i64;
        if rest > 0 && law.p2 > 0.0 {
            let gap = SubPmf::from_parts(1, frame::within_frame_gap(law.p2, rest));
            within.add_scaled(&fresh.convolve(&gap), 1.0, 0);
        }
        to_frame_end.add_scaled(&fresh, law.pl[d], rest);
    }
    let first = law.pf.clone().into_sub();
    let across = to_frame_end.convolve(&first);
    let (across, overflow) = if law.pf_n >= 1.0 {
        (across, 0.0)
    } else {
        across.geometric_repeat_capped(n as i64, 1.0 - law.pf_n, TAIL_TOLERANCE, MAX_TAIL_SUPPORT)
    };
    within.add_scaled(&across, 1.0, 0);
    Ok(with_overflow(within, overflow)?)
}
