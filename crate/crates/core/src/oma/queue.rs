use alloc::vec;
use alloc::vec::Vec;

use crate::config::SystemConfig;
use crate::probcore::{binomial, steady_state, TransitionMatrix};

use super::OmaError;

/// Intermittent-user queue chain observed at the reserved slots.
///
/// States are queue occupancies `0..=Q`. Within a window the `T_int`
/// arrivals (including the one in the reserved slot itself) are admitted
/// with drop-oldest overflow before the head packet is transmitted, so the
/// post-transmission occupancy never reaches `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueueModel {
    /// Post-transmission occupancy transitions from one window to the next.
    pub transition: TransitionMatrix,
    /// Steady state immediately after a transmission.
    pub pi0: Vec<f64>,
    /// `pi_n[n]`: steady state `n` slots after a transmission, `n < T_int`.
    pub pi_n: Vec<Vec<f64>>,
    at_opportunity: Vec<f64>,
}

impl QueueModel {
    /// Occupancy seen by the transmission opportunity, after the window's
    /// arrivals and before the head packet leaves.
    pub fn at_opportunity(&self) -> &[f64] {
        &self.at_opportunity
    }

    /// Occupancy averaged over the slots of a window, as sampled at the end of
    /// every slot.
    pub fn slot_average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.pi0.len()];
        for pi in &self.pi_n {
            for (a, p) in avg.iter_mut().zip(pi) {
                *a += p / self.pi_n.len() as f64;
            }
        }
        avg
    }
}

/// Occupancy after `slots` arrival slots starting from `start`, capped at `q_cap`.
pub(crate) fn advance(start: &[f64], slots: u32, alpha: f64, q_cap: u32) -> Vec<f64> {
    let q_cap = q_cap as usize;
    let n = slots as i64;
    let mut out = vec![0.0; q_cap + 1];
    for (s, &w) in start.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for q in s..q_cap {
            out[q] += w * binomial((q - s) as i64, n, alpha);
        }
        // Saturation: at least Q - s arrivals.
        let below: f64 = (0..(q_cap - s) as i64).map(|m| binomial(m, n, alpha)).sum();
        out[q_cap] += w * (1.0 - below).max(0.0);
    }
    out
}

pub fn queue_chain(cfg: &SystemConfig) -> Result<QueueModel, OmaError> {
    let q_cap = cfg.q as usize;
    let t = cfg.t_int as i64;
    let arrivals: Vec<f64> = (0..=t).map(|a| binomial(a, t, cfg.alpha)).collect();
    let rows = (0..=q_cap)
        .map(|i| {
            let mut row = vec![0.0; q_cap + 1];
            for (a, &p) in arrivals.iter().enumerate() {
                let j = (i + a).min(q_cap).saturating_sub(1);
                row[j] += p;
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
            row
        })
        .collect();
    let transition = TransitionMatrix::new(rows)?;
    let pi0 = steady_state(&transition)?;
    let pi_n = (0..cfg.t_int)
        .map(|n| advance(&pi0, n, cfg.alpha, cfg.q))
        .collect();
    let at_opportunity = advance(&pi0, cfg.t_int, cfg.alpha, cfg.q);
    Ok(QueueModel {
        transition,
        pi0,
        pi_n,
        at_opportunity,
    })
}
