//! Orthogonal slicing: every `T_int`-th slot is reserved for the intermittent
//! user, the others carry broadband frames of `N` coded packets.

mod queue;
mod tagged;

pub use queue::{queue_chain, QueueModel};
pub use tagged::{generation_vectors, transmission_law, Fate, GenerationVector};

use thiserror::Error;

use crate::config::{KpiResult, SystemConfig, Throughput};
use crate::probcore::{
    binomial_tail, percentile, with_overflow, MarkovError, PmfError, SubPmf, MAX_TAIL_SUPPORT,
    TAIL_TOLERANCE,
};

/// Largest queue the latency analysis accepts.
pub const MAX_QUEUE: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OmaError {
    #[error("configuration too large: Q = {q} exceeds the supported maximum {max}")]
    ConfigTooLarge { q: u32, max: u32 },
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

/// Broadband throughput. Reads only `K`, `N`, `T_int` and `eps1`.
pub fn oma_throughput(cfg: &SystemConfig) -> Throughput {
    throughput_of(cfg.k, cfg.n, cfg.t_int, cfg.eps1)
}

pub(crate) fn throughput_of(k: u32, n: u32, t_int: u32, eps1: f64) -> Throughput {
    let ps1 = binomial_tail(k as i64, n as i64, 1.0 - eps1);
    let s1 = ps1 * (t_int - 1) as f64 * k as f64 / (t_int as f64 * n as f64);
    Throughput { s1, ps1 }
}

/// Latency measure of the intermittent user, `ps2` in total.
///
/// Generation phase `n` is uniform over the window; the occupancy found by
/// the new packet is the steady state `n - 1` slots after a transmission.
pub fn latency_measure(cfg: &SystemConfig) -> Result<SubPmf, OmaError> {
    if cfg.q > MAX_QUEUE {
        return Err(OmaError::ConfigTooLarge {
            q: cfg.q,
            max: MAX_QUEUE,
        });
    }
    let model = queue_chain(cfg)?;
    let t = cfg.t_int;
    let mut measure = SubPmf::new();
    let scale = (1.0 - cfg.eps2) / t as f64;
    for n in 1..=t {
        let occupancy = &model.pi_n[(n - 1) as usize];
        // A full buffer loses its oldest packet to the newcomer.
        let mut by_ahead = occupancy[..cfg.q as usize].to_vec();
        by_ahead[cfg.q as usize - 1] += occupancy[cfg.q as usize];
        for (ahead, &w) in by_ahead.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let law = transmission_law(t, cfg.q, n, ahead as u32, cfg.alpha);
            for (i, &p) in law.iter().enumerate() {
                let latency = (i as i64 + 1) * t as i64 - n as i64;
                measure.add(latency, w * p * scale);
            }
        }
    }
    Ok(measure)
}

/// Same measure as [`latency_measure`], obtained by listing every arrival
/// vector and replaying the queue with an explicit buffer. Exponential in
/// `Q`; intended as a cross-check on small systems.
pub fn latency_by_enumeration(cfg: &SystemConfig) -> Result<SubPmf, OmaError> {
    if cfg.q > MAX_QUEUE {
        return Err(OmaError::ConfigTooLarge {
            q: cfg.q,
            max: MAX_QUEUE,
        });
    }
    let model = queue_chain(cfg)?;
    let t = cfg.t_int;
    let mut measure = SubPmf::new();
    for n in 1..=t {
        for (q, &w) in model.pi_n[(n - 1) as usize].iter().enumerate() {
            let ahead = (q as u32).min(cfg.q - 1);
            for l in 1..=ahead + 1 {
                for v in generation_vectors(t, n, ahead, l) {
                    if v.fate(cfg.q) == Fate::Transmitted(l) {
                        let latency = l as i64 * t as i64 - n as i64;
                        let p = v.probability(t, cfg.alpha);
                        measure.add(latency, w * p * (1.0 - cfg.eps2) / t as f64);
                    }
                }
            }
        }
    }
    Ok(measure)
}

pub fn oma_lr_kpis(cfg: &SystemConfig) -> Result<KpiResult, OmaError> {
    let Throughput { s1, ps1 } = oma_throughput(cfg);
    let measure = latency_measure(cfg)?;
    let ps2 = measure.total().min(1.0);
    let timeliness = measure.with_deficit()?;
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

/// `1 - (1 - alpha)^T` without cancellation for small `alpha`.
fn busy_probability(alpha: f64, t_int: u32) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    -libm::expm1(t_int as f64 * libm::log1p(-alpha))
}

/// Delay from generation of the freshest packet to the reserved slot,
/// given that the window produced at least one packet.
pub fn preemptive_delay(alpha: f64, t_int: u32) -> SubPmf {
    let busy = busy_probability(alpha, t_int);
    if busy == 0.0 {
        // Limit alpha -> 0: the lone arrival is uniform over the window.
        return SubPmf::from_parts(0, alloc::vec![1.0 / t_int as f64; t_int as usize]);
    }
    let mass = (0..t_int)
        .map(|t| alpha * libm::pow(1.0 - alpha, t as f64) / busy)
        .collect();
    SubPmf::from_parts(0, mass)
}

pub fn oma_paoi_kpis(cfg: &SystemConfig) -> KpiResult {
    let Throughput { s1, ps1 } = oma_throughput(cfg);
    let t = cfg.t_int;
    let busy = busy_probability(cfg.alpha, t);
    let xi = busy * (1.0 - cfg.eps2);
    let ps2 = if cfg.alpha == 0.0 {
        1.0 - cfg.eps2
    } else {
        (1.0 - cfg.eps2) * busy / (t as f64 * cfg.alpha)
    };
    let timeliness = if xi > 0.0 {
        let first = preemptive_delay(cfg.alpha, t).scaled(xi).shifted(t as i64);
        let (measure, overflow) = if xi >= 1.0 {
            (first, 0.0)
        } else {
            first.geometric_repeat_capped(t as i64, 1.0 - xi, TAIL_TOLERANCE, MAX_TAIL_SUPPORT)
        };
        with_overflow(measure, overflow)
            .expect("geometric series of a nonzero measure has positive mass")
    } else {
        crate::probcore::Pmf::lost()
    };
    let percentile90 = percentile(&timeliness, 0.9);
    KpiResult {
        s1,
        ps1,
        ps2,
        timeliness,
        percentile90,
        xi: Some(xi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t_int: u32, q: u32, alpha: f64) -> SystemConfig {
        SystemConfig {
            k: 4,
            n: 6,
            t_int,
            q,
            alpha,
            eps1: 0.1,
            eps2: 0.05,
        }
    }

    #[test]
    fn throughput_trivial() {
        let c = SystemConfig {
            k: 2,
            n: 2,
            t_int: 2,
            eps1: 0.0,
            ..cfg(2, 1, 0.3)
        };
        assert_eq!(oma_throughput(&c).s1, 0.5);
    }

    #[test]
    fn throughput_ignores_intermittent_fields() {
        let a = oma_throughput(&cfg(7, 1, 0.01));
        let b = oma_throughput(&SystemConfig {
            eps2: 0.7,
            ..cfg(7, 6, 0.9)
        });
        assert_eq!(a, b);
    }

    #[test]
    fn unit_queue_latency_by_hand() {
        let (t, a) = (5u32, 0.1f64);
        let r = oma_lr_kpis(&cfg(t, 1, a)).unwrap();
        // Packet generated at phase n survives iff no later arrival before the slot.
        for n in 1..=t {
            let expect = (1.0 - a).powi((t - n) as i32) * 0.95 / t as f64;
            assert!((r.timeliness.prob((t - n) as i64) - expect).abs() < 1e-15);
        }
        assert_eq!(r.timeliness.max_value(), Some(t as i64 - 1));
        assert!((r.ps2 + r.timeliness.deficit() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dp_matches_enumeration() {
        for (t, q, a) in [
            (3, 2, 0.3),
            (4, 3, 0.2),
            (2, 4, 0.5),
            (5, 1, 0.05),
            (3, 3, 0.9),
        ] {
            let c = cfg(t, q, a);
            let dp = latency_measure(&c).unwrap();
            let en = latency_by_enumeration(&c).unwrap();
            for v in 0..(t * (q + 1)) as i64 {
                assert!((dp.get(v) - en.get(v)).abs() < 1e-13, "{t} {q} {a} at {v}");
            }
        }
    }

    #[test]
    fn rejects_large_queue() {
        assert_eq!(
            oma_lr_kpis(&cfg(5, 9, 0.1)).unwrap_err(),
            OmaError::ConfigTooLarge { q: 9, max: 8 }
        );
    }

    #[test]
    fn idle_user_never_loses() {
        let r = oma_lr_kpis(&cfg(6, 4, 0.0)).unwrap();
        assert!((r.ps2 - 0.95).abs() < 1e-15);
        assert!(r.percentile90.is_finite());
    }

    #[test]
    fn paoi_degenerate_period_is_geometric() {
        let c = SystemConfig {
            eps2: 0.0,
            ..cfg(1, 1, 0.5)
        };
        let r = oma_paoi_kpis(&c);
        for (v, p) in [(1, 0.5), (2, 0.25), (3, 0.125)] {
            assert!((r.timeliness.prob(v) - p).abs() < 1e-15);
        }
        assert!((r.timeliness.finite_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn paoi_support_shape() {
        let c = cfg(13, 1, 0.01);
        let r = oma_paoi_kpis(&c);
        assert!(r.timeliness.offset() >= 13);
        assert!((r.timeliness.finite_mass() - 1.0).abs() < 1e-9);
        let xi = r.xi.unwrap();
        let expect = (1.0 - 0.99f64.powi(13)) * 0.95;
        assert!((xi - expect).abs() < 1e-15);
    }
}
