//! Fate of a tagged intermittent packet inside the drop-oldest queue.
//!
//! A packet generated `n` slots after the last reserved slot (`n = T_int`
//! is the reserved slot itself) joins behind `ahead` older packets. In each
//! following window, new arrivals queue up behind it; whenever the buffer
//! overflows the oldest packets go first, so the tagged packet is pushed out
//! once every packet ahead of it has been dropped. Each reserved slot removes
//! the head of the queue.

use alloc::vec;
use alloc::vec::Vec;

use crate::probcore::binomial;

/// Arrival counts per window as seen by a tagged packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationVector {
    /// `g[0]`: arrivals after the tagged packet within its own window;
    /// `g[i]`: arrivals during the `i+1`-th window.
    pub g: Vec<u32>,
    /// Window in which the tagged packet is supposed to transmit.
    pub l: u32,
    /// Generation phase within the window, `1..=T_int`.
    pub n: u32,
    /// Packets ahead of the tagged one at generation.
    pub q: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fate {
    /// Sent at the given transmission opportunity (1-based).
    Transmitted(u32),
    /// Pushed out of the queue during the given window.
    Dropped(u32),
    /// Still queued after the last window in the vector.
    Pending,
}

impl GenerationVector {
    /// Whether the arrival counts respect the per-window limits.
    pub fn is_admissible(&self, t_int: u32) -> bool {
        self.g.len() == self.l as usize
            && self.n >= 1
            && self.n <= t_int
            && self
                .g
                .iter()
                .enumerate()
                .all(|(i, &g)| g <= if i == 0 { t_int - self.n } else { t_int })
    }

    /// Probability of the arrival counts, windows independent.
    pub fn probability(&self, t_int: u32, alpha: f64) -> f64 {
        self.g
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let slots = if i == 0 { t_int - self.n } else { t_int };
                binomial(g as i64, slots as i64, alpha)
            })
            .product()
    }

    /// Replay the queue window by window, literally, with an explicit buffer.
    pub fn fate(&self, q_cap: u32) -> Fate {
        // Buffer of labels, oldest first; 0 marks the tagged packet.
        let mut buffer: Vec<u32> = (1..=self.q).collect();
        buffer.push(0);
        while buffer.len() > q_cap as usize {
            buffer.remove(0);
        }
        if !buffer.contains(&0) {
            return Fate::Dropped(1);
        }
        for (w, &g) in self.g.iter().enumerate() {
            for _ in 0..g {
                buffer.push(u32::MAX);
                if buffer.len() > q_cap as usize {
                    let dropped = buffer.remove(0);
                    if dropped == 0 {
                        return Fate::Dropped(w as u32 + 1);
                    }
                }
            }
            if buffer.remove(0) == 0 {
                return Fate::Transmitted(w as u32 + 1);
            }
        }
        Fate::Pending
    }

    /// Drop-counting indicator in its printed form: one iff the overflow
    /// accumulated over the first `k` windows plus the `k` transmissions
    /// exactly use up the `q + 1` positions. It ignores the room freed by
    /// earlier transmissions, so it is kept only for comparison.
    pub fn printed_indicator(&self, q_cap: u32, k: u32) -> bool {
        let (q, q_cap) = (self.q as i64, q_cap as i64);
        let mut cum = 0i64;
        let mut acc = 0i64;
        for &g in self.g.iter().take(k as usize) {
            cum += g as i64;
            acc += (q + 1 - q_cap + cum).max(0);
        }
        acc + k as i64 - (q + 1) == 0
    }

    /// Membership test built on [`Self::printed_indicator`].
    pub fn printed_membership(&self, q_cap: u32) -> bool {
        let first = (1..self.l)
            .filter(|&k| self.printed_indicator(q_cap, k))
            .count() as i64;
        let last = self.printed_indicator(q_cap, self.l) as i64;
        last - first == 1
    }
}

/// Every arrival vector of `l` windows for phase `n`, first window first.
pub fn generation_vectors(t_int: u32, n: u32, q: u32, l: u32) -> Vec<GenerationVector> {
    let mut out = Vec::new();
    let mut g = vec![0u32; l as usize];
    loop {
        out.push(GenerationVector {
            g: g.clone(),
            l,
            n,
            q,
        });
        let mut i = 0;
        loop {
            if i == g.len() {
                return out;
            }
            let cap = if i == 0 { t_int - n } else { t_int };
            if g[i] < cap {
                g[i] += 1;
                break;
            }
            g[i] = 0;
            i += 1;
        }
    }
}

/// Probability that the tagged packet is transmitted at opportunity
/// `l = 1, 2, ...` (index `l - 1`). The shortfall from one is the drop
/// probability.
pub fn transmission_law(t_int: u32, q_cap: u32, phase: u32, ahead: u32, alpha: f64) -> Vec<f64> {
    let q_cap = q_cap as usize;
    let first: Vec<f64> = (0..=t_int - phase)
        .map(|g| binomial(g as i64, (t_int - phase) as i64, alpha))
        .collect();
    let later: Vec<f64> = (0..=t_int)
        .map(|g| binomial(g as i64, t_int as i64, alpha))
        .collect();

    // state[p][b]: p packets ahead, b behind.
    let mut state = vec![vec![0.0; q_cap]; q_cap];
    state[ahead as usize][0] = 1.0;
    let mut law = Vec::with_capacity(ahead as usize + 1);
    for window in 0..=ahead {
        let arrivals = if window == 0 { &first } else { &later };
        let mut next = vec![vec![0.0; q_cap]; q_cap];
        let mut sent = 0.0;
        for p in 0..q_cap {
            for b in 0..q_cap {
                let w = state[p][b];
                if w == 0.0 {
                    continue;
                }
                for (g, &pg) in arrivals.iter().enumerate() {
                    let total = p + 1 + b + g;
                    let drops = total.saturating_sub(q_cap);
                    if drops > p {
                        continue;
                    }
                    let (p2, b2) = (p - drops, (b + g).min(q_cap - 1));
                    if p2 == 0 {
                        sent += w * pg;
                    } else {
                        next[p2 - 1][b2] += w * pg;
                    }
                }
            }
        }
        law.push(sent);
        state = next;
    }
    law
}
