use alloc::vec;
use alloc::vec::Vec;

use crate::config::SystemConfig;
use crate::probcore::{ln_pow, LnFactorials, Pmf, SubPmf};
use crate::Formulas;

use super::NomaError;

/// Slack allowed between two independent evaluations of the same frame
/// probability before the reading is declared inconsistent.
const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Per-frame law of intermittent decoding events.
///
/// Every slot falls in one of three categories: a broadband packet received
/// without collision (probability `b`), an intermittent packet received
/// (probability `p2`, recoverable by SIC once the frame decodes), or neither.
/// The frame becomes decodable at the `K`-th broadband success; a decoding
/// event is a slot at which at least one intermittent packet is recovered.
///
/// Vectors indexed by a slot are indexed directly by the 1-based slot number
/// (length `N + 1`, entry 0 unused); entries below `K + 1` are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct NomaFrameLaw {
    pub k: u32,
    pub n: u32,
    /// Broadband-success category probability.
    pub b: f64,
    /// Intermittent-success category probability.
    pub p2: f64,
    /// First decoding event `F`; deficit is the chance of no event.
    pub pf: Pmf,
    /// `P_F(N)`: at least one decoding event in the frame.
    pub pf_n: f64,
    /// `P_F(f)` for `f = 0..=N`.
    pub cumulative: Vec<f64>,
    /// Slot `D` of a decoding event, weighted by event frequency.
    pub pd: Pmf,
    /// Mean number of decoding events per frame.
    pub events_per_frame: f64,
    /// Unnormalized event frequency at slot `d`.
    pub event_rate: Vec<f64>,
    /// `Pr[F = d]` with the first event consisting of a single packet
    /// that arrived after the broadband frame had decoded.
    pub direct: Vec<f64>,
    /// `batch[d][c]`: `Pr[F = d]` with `c` stored packets released by SIC at
    /// the `K`-th broadband success.
    pub batch: Vec<Vec<f64>>,
    /// Number of packets `C` decoded at the first event, given `F = d`.
    pub pc_given_d: Vec<Option<Pmf>>,
    /// Receptions `R` after the first event, given `F = f`.
    pub pr_given_f: Vec<Option<Pmf>>,
    /// Probability that an event at slot `d` is the last in its frame.
    pub pl: Vec<f64>,
    /// Gap `Z` to the next event in the same frame, given one exists.
    pub pz_given_d: Vec<Option<Pmf>>,
}

/// Broadband-success category probability under the selected formulas.
pub(crate) fn broadband_category(cfg: &SystemConfig, formulas: Formulas) -> f64 {
    match formulas {
        Formulas::Consistent => (1.0 - cfg.alpha) * cfg.p1(),
        Formulas::Printed => cfg.p1(),
    }
}

pub fn frame_law(cfg: &SystemConfig, formulas: Formulas) -> Result<NomaFrameLaw, NomaError> {
    let (k, n) = (cfg.k as i64, cfg.n as i64);
    let b = broadband_category(cfg, formulas);
    let p2 = cfg.p2();
    let t = LnFactorials::new(cfg.n as usize + 1);
    let len = cfg.n as usize + 1;

    // Mult((r1, 0); m, (b, p2)) summed over r1 >= K.
    let no_intermittent_after_block =
        |m: i64| -> f64 { (k..=m).map(|r1| t.mult2(r1, 0, m, b, p2)).sum() };
    // Literal cumulative law: at least K broadband and one intermittent
    // success among the first f slots.
    let literal_cumulative = |f: i64| -> f64 {
        let at_least_k: f64 = (k..=f).map(|r1| t.binomial(r1, f, b)).sum();
        (at_least_k - no_intermittent_after_block(f)).max(0.0)
    };

    let mut direct = vec![0.0; len];
    let mut batch = vec![Vec::new(); len];
    let mut pf_mass = vec![0.0; len];
    for d in (k + 1)..=n {
        let du = d as usize;
        direct[du] = no_intermittent_after_block(d - 1) * p2;
        batch[du] = (0..=(d - k))
            .map(|c| {
                if c == 0 {
                    0.0
                } else {
                    t.mult2(k - 1, c, d - 1, b, p2) * b
                }
            })
            .collect();
        pf_mass[du] = direct[du] + batch[du].iter().sum::<f64>();
        let literal = literal_cumulative(d) - literal_cumulative(d - 1);
        if (literal - pf_mass[du]).abs() > IDENTITY_TOLERANCE {
            return Err(NomaError::NonNormalizable {
                family: "first decoding event",
                index: du,
                total: literal,
            });
        }
    }
    let mut cumulative = vec![0.0; len];
    for f in 1..len {
        cumulative[f] = cumulative[f - 1] + pf_mass[f];
    }
    let pf_n = cumulative[len - 1];
    if pf_n > 1.0 + IDENTITY_TOLERANCE {
        return Err(NomaError::NonNormalizable {
            family: "first decoding event",
            index: len - 1,
            total: pf_n,
        });
    }
    let first = (k + 1) as usize;
    let pf = Pmf::new(
        first as i64,
        pf_mass[first.min(len)..].to_vec(),
        (1.0 - pf_n).max(0.0),
    )?;

    let mut pc_given_d = vec![None; len];
    for d in first..len {
        if pf_mass[d] <= 0.0 {
            continue;
        }
        let mut mass = batch[d][1..].to_vec();
        mass[0] += direct[d];
        let pmf = SubPmf::from_parts(1, mass).scaled(1.0 / pf_mass[d]);
        pc_given_d[d] = Some(checked_normal(pmf, "batch size given first event", d)?);
    }

    let mut pr_given_f = vec![None; len];
    for (f, slot) in pr_given_f.iter_mut().enumerate().skip(first) {
        let rest = n - f as i64;
        let mass = (0..=rest).map(|r| t.binomial(r, rest, p2)).collect();
        *slot = Some(checked_normal(
            SubPmf::from_parts(0, mass),
            "later receptions",
            f,
        )?);
    }

    let mut event_rate = vec![0.0; len];
    for d in first..len {
        event_rate[d] = pf_mass[d] + p2 * cumulative[d - 1];
    }
    let events_per_frame: f64 = event_rate.iter().sum();
    let pd = if events_per_frame > 0.0 {
        SubPmf::from_parts(first as i64, event_rate[first..].to_vec()).normalize()?
    } else {
        Pmf::lost()
    };

    let mut pl = vec![0.0; len];
    let mut pz_given_d = vec![None; len];
    for d in first..len {
        let rest = n - d as i64;
        pl[d] = libm::exp(ln_pow(1.0 - p2, rest));
        if rest > 0 && p2 > 0.0 {
            let mass = within_frame_gap(p2, rest);
            let total: f64 = mass.iter().sum();
            let pmf = SubPmf::from_parts(1, mass).scaled(1.0 / total);
            pz_given_d[d] = Some(checked_normal(pmf, "gap within frame", d)?);
        }
    }

    Ok(NomaFrameLaw {
        k: cfg.k,
        n: cfg.n,
        b,
        p2,
        pf,
        pf_n,
        cumulative,
        pd,
        events_per_frame,
        event_rate,
        direct,
        batch,
        pc_given_d,
        pr_given_f,
        pl,
        pz_given_d,
    })
}

/// `(1 - p2)^(z-1) p2` for `z = 1..=rest`; totals `1 - (1 - p2)^rest`.
pub(crate) fn within_frame_gap(p2: f64, rest: i64) -> Vec<f64> {
    (1..=rest)
        .map(|z| libm::exp(ln_pow(1.0 - p2, z - 1)) * p2)
        .collect()
}

fn checked_normal(m: SubPmf, family: &'static str, index: usize) -> Result<Pmf, NomaError> {
    let total = m.total();
    if (total - 1.0).abs() > crate::probcore::NORMALIZATION_TOLERANCE {
        return Err(NomaError::NonNormalizable {
            family,
            index,
            total,
        });
    }
    Ok(Pmf::new(m.offset(), m.mass().to_vec(), 0.0)?)
}

/// Delay of the most recent of `c` packets released together at slot `d`.
///
/// The `c` receptions occupy a uniformly random subset of slots `1..d-1`;
/// the freshest sits at `d - t` with the other `c - 1` before it.
pub fn last_packet_delay(d: u32, c: u32) -> Pmf {
    assert!(c >= 1 && c < d, "need 1 <= c < d");
    let (d, c) = (d as i64, c as i64);
    let t = LnFactorials::new(d as usize);
    let denom = t.ln_choose(d - 1, c);
    let mass = (1..=(d - c))
        .map(|lag| libm::exp(t.ln_choose(d - lag - 1, c - 1) - denom))
        .collect();
    SubPmf::from_parts(1, mass)
        .normalize()
        .expect("nonempty support")
}

/// Delay of each earlier packet given the freshest one waited `last` slots:
/// uniform over `last + 1..=d - 1`.
pub fn previous_packet_delay(d: u32, last: u32) -> Pmf {
    assert!(last + 1 < d, "no room for an earlier packet");
    let width = (d - 1 - last) as usize;
    Pmf::new(last as i64 + 1, vec![1.0 / width as f64; width], 0.0).expect("uniform")
}

/// Delay of a packet picked uniformly from a batch of `c` released at `d`.
pub fn batch_packet_delay(d: u32, c: u32) -> Pmf {
    let last = last_packet_delay(d, c);
    if c == 1 {
        return last;
    }
    let mut mix = last.clone().into_sub().scaled(1.0 / c as f64);
    let share = (c - 1) as f64 / c as f64;
    for (lag, w) in last.iter() {
        if w > 0.0 && lag + 1 < d as i64 {
            mix.add_scaled(
                &previous_packet_delay(d, lag as u32).into_sub(),
                w * share,
                0,
            );
        }
    }
    mix.normalize().expect("nonempty support")
}
