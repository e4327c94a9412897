//! Slot-level Monte Carlo realization of both slicing schemes.
//!
//! Three independent ChaCha8 streams drive the run: intermittent arrivals,
//! intermittent erasures and broadband erasures. Each stream is advanced
//! exactly once per slot whether or not the draw is used, so two runs with
//! the same seed see the same channel regardless of scheme or parameters.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Checked, KpiMode, Scheme, SystemConfig};
use crate::probcore::Pmf;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489;

/// Number of batches used for batch-means error bars on occupancy.
pub const OCCUPANCY_BATCHES: usize = 20;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

const STREAM_ARRIVALS: u64 = 1;
const STREAM_INTERMITTENT_ERASURE: u64 = 2;
const STREAM_BROADBAND_ERASURE: u64 = 3;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replica `index` derived from a base seed.
pub fn replica_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed.wrapping_mul(4).wrapping_add(tag)))
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("run length {n_slots} must exceed the warmup {warmup_slots}")]
    TooShort { n_slots: u64, warmup_slots: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub cfg: SystemConfig,
    pub scheme: Scheme,
    pub mode: KpiMode,
    pub n_slots: u64,
    pub seed: u64,
    pub warmup_slots: u64,
    /// Record a per-event trace.
    pub trace: bool,
}

/// Default number of discarded initial slots.
pub fn default_warmup(cfg: &SystemConfig, scheme: Scheme) -> u64 {
    match scheme {
        Scheme::Oma => 10 * cfg.t_int as u64 * (cfg.q as u64 + 1),
        Scheme::Noma => 10 * cfg.n as u64,
    }
}

impl SimConfig {
    pub fn new(checked: &Checked, n_slots: u64, seed: u64) -> Result<Self, SimError> {
        let warmup = default_warmup(checked.config(), checked.scheme());
        Self::with_warmup(checked, n_slots, seed, warmup)
    }

    pub fn with_warmup(
        checked: &Checked,
        n_slots: u64,
        seed: u64,
        warmup_slots: u64,
    ) -> Result<Self, SimError> {
        if n_slots <= warmup_slots {
            return Err(SimError::TooShort {
                n_slots,
                warmup_slots,
            });
        }
        Ok(Self {
            cfg: *checked.config(),
            scheme: checked.scheme(),
            mode: checked.mode(),
            n_slots,
            seed,
            warmup_slots,
            trace: false,
        })
    }

    pub fn measured_slots(&self) -> u64 {
        self.n_slots - self.warmup_slots
    }
}

/// Integer-valued sample counts plus a count of infinite outcomes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub lost: u64,
}

impl Histogram {
    pub fn record(&mut self, value: u64) {
        let i = value as usize;
        if i >= self.counts.len() {
            self.counts.resize(i + 1, 0);
        }
        self.counts[i] += 1;
    }

    pub fn record_lost(&mut self) {
        self.lost += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.lost
    }

    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.lost += other.lost;
    }

    /// Empirical PMF; lost samples become the deficit.
    pub fn to_pmf(&self) -> Pmf {
        let total = self.total();
        if total == 0 {
            return Pmf::lost();
        }
        let t = total as f64;
        let mass = self
            .counts
            .iter()
            .map(|&c| c as f64 / t)
            .collect::<Vec<_>>();
        let deficit = self.lost as f64 / t;
        // Rounding of the quotients stays far below the tolerance.
        Pmf::new(0, mass, deficit).expect("counts form a distribution")
    }
}

/// Fate of every intermittent packet generated after the warmup.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketLedger {
    pub generated: u64,
    pub decoded: u64,
    pub dropped: u64,
    pub channel_lost: u64,
    pub frame_lost: u64,
    pub in_flight: u64,
}

impl PacketLedger {
    pub fn balanced(&self) -> bool {
        self.generated
            == self.decoded + self.dropped + self.channel_lost + self.frame_lost + self.in_flight
    }

    pub fn resolved(&self) -> u64 {
        self.generated - self.in_flight
    }

    fn merge(&mut self, o: &PacketLedger) {
        self.generated += o.generated;
        self.decoded += o.decoded;
        self.dropped += o.dropped;
        self.channel_lost += o.channel_lost;
        self.frame_lost += o.frame_lost;
        self.in_flight += o.in_flight;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    Arrival,
    Drop,
    Transmit,
    Decode,
    Erasure,
    FrameEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub slot: u64,
    pub kind: TraceKind,
    /// 1 for broadband, 2 for intermittent.
    pub user: u8,
    /// Kind-specific outcome: latency of a decode, queue length after an
    /// arrival, 1/0 for frame decoded or not, and so on.
    pub outcome: i64,
}

/// Raw counters of one or more runs; everything else is derived.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimCounts {
    pub measured_slots: u64,
    pub frames: u64,
    pub decoded_frames: u64,
    /// Frames with at least one intermittent packet recovered (NOMA).
    pub frames_with_event: u64,
    pub ledger: PacketLedger,
    pub latency: Histogram,
    pub paoi: Histogram,
    /// `occupancy[n][q]`: slots whose end found `q` packets queued, `n`
    /// slots after the last reserved slot (OMA only).
    pub occupancy: Vec<Vec<u64>>,
    /// Same counts split into consecutive batches of the run.
    pub occupancy_batches: Vec<Vec<Vec<u64>>>,
}

impl SimCounts {
    fn merge(&mut self, o: &SimCounts) {
        self.measured_slots += o.measured_slots;
        self.frames += o.frames;
        self.decoded_frames += o.decoded_frames;
        self.frames_with_event += o.frames_with_event;
        self.ledger.merge(&o.ledger);
        self.latency.merge(&o.latency);
        self.paoi.merge(&o.paoi);
        add_nested(&mut self.occupancy, &o.occupancy);
        if self.occupancy_batches.len() < o.occupancy_batches.len() {
            self.occupancy_batches
                .resize(o.occupancy_batches.len(), Vec::new());
        }
        for (a, b) in self.occupancy_batches.iter_mut().zip(&o.occupancy_batches) {
            add_nested(a, b);
        }
    }
}

fn add_nested(a: &mut Vec<Vec<u64>>, b: &[Vec<u64>]) {
    if a.is_empty() {
        *a = b.to_vec();
        return;
    }
    for (ra, rb) in a.iter_mut().zip(b) {
        for (x, y) in ra.iter_mut().zip(rb) {
            *x += y;
        }
    }
}

/// 99% half-widths of the headline estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CiHalfwidths {
    pub s1: f64,
    pub ps1: f64,
    pub ps2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub s1_hat: f64,
    pub ps1_hat: f64,
    pub ps2_hat: f64,
    pub latency_hist: Pmf,
    pub paoi_hist: Pmf,
    /// Occupancy frequencies per phase (OMA); empty under NOMA.
    pub queue_occupancy_hist: Vec<Vec<f64>>,
    pub ci_halfwidth: CiHalfwidths,
    pub counts: SimCounts,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
}

impl SimResult {
    fn from_counts(k: u32, counts: SimCounts, trace: Vec<TraceEvent>) -> Self {
        let frames = counts.frames.max(1) as f64;
        let ps1_hat = counts.decoded_frames as f64 / frames;
        let measured = counts.measured_slots.max(1) as f64;
        let s1_hat = k as f64 * counts.decoded_frames as f64 / measured;
        let resolved = counts.ledger.resolved();
        let ps2_hat = if resolved == 0 {
            0.0
        } else {
            counts.ledger.decoded as f64 / resolved as f64
        };
        let spread = |p: f64, m: f64| Z99 * libm::sqrt(p * (1.0 - p) / m.max(1.0));
        let ci_halfwidth = CiHalfwidths {
            s1: k as f64 * frames * spread(ps1_hat, frames) / measured,
            ps1: spread(ps1_hat, frames),
            ps2: spread(ps2_hat, resolved as f64),
        };
        let queue_occupancy_hist = counts
            .occupancy
            .iter()
            .map(|row| {
                let t = row.iter().sum::<u64>().max(1) as f64;
                row.iter().map(|&c| c as f64 / t).collect()
            })
            .collect();
        Self {
            s1_hat,
            ps1_hat,
            ps2_hat,
            latency_hist: counts.latency.to_pmf(),
            paoi_hist: counts.paoi.to_pmf(),
            queue_occupancy_hist,
            ci_halfwidth,
            counts,
            trace,
        }
    }

    /// Batch-means standard error of the occupancy frequency of state `q` at
    /// phase `n`.
    pub fn occupancy_std_error(&self, n: usize, q: usize) -> f64 {
        let means: Vec<f64> = self
            .counts
            .occupancy_batches
            .iter()
            .filter_map(|b| {
                let row = b.get(n)?;
                let t = row.iter().sum::<u64>();
                (t > 0).then(|| row[q] as f64 / t as f64)
            })
            .collect();
        let m = means.len() as f64;
        if m < 2.0 {
            return f64::INFINITY;
        }
        let mean = means.iter().sum::<f64>() / m;
        let var = means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
        libm::sqrt(var / m)
    }
}

/// Age-of-information bookkeeping at the receiver.
#[derive(Default)]
struct AgeTracker {
    /// Generation slot and reception slot of the freshest update so far.
    last: Option<(u64, u64)>,
}

impl AgeTracker {
    /// Register a reception at `slot` of a packet generated at `generated`;
    /// returns the peak age just before it if a previous update existed.
    fn receive(&mut self, slot: u64, generated: u64) -> Option<u64> {
        let peak = self.last.and_then(|(g_prev, rx_prev)| {
            if generated <= g_prev {
                return None;
            }
            let peak = slot - g_prev;
            debug_assert_eq!(peak, (rx_prev - g_prev) + (slot - rx_prev));
            Some(peak)
        });
        if self.last.is_none_or(|(g_prev, _)| generated > g_prev) {
            self.last = Some((generated, slot));
        }
        peak
    }
}

struct Run<'a> {
    sim: &'a SimConfig,
    counts: SimCounts,
    age: AgeTracker,
    trace: Vec<TraceEvent>,
}

impl Run<'_> {
    fn measured(&self, slot: u64) -> bool {
        slot >= self.sim.warmup_slots
    }

    fn event(&mut self, slot: u64, kind: TraceKind, user: u8, outcome: i64) {
        if self.sim.trace {
            self.trace.push(TraceEvent {
                slot,
                kind,
                user,
                outcome,
            });
        }
    }

    fn generated(&mut self, slot: u64) {
        if self.measured(slot) {
            self.counts.ledger.generated += 1;
        }
    }

    fn lost(&mut self, generated: u64, channel: bool, frame: bool) {
        if !self.measured(generated) {
            return;
        }
        let l = &mut self.counts.ledger;
        if channel {
            l.channel_lost += 1;
        } else if frame {
            l.frame_lost += 1;
        } else {
            l.dropped += 1;
        }
        self.counts.latency.record_lost();
    }

    fn decoded(&mut self, slot: u64, generated: u64) {
        if self.measured(generated) {
            self.counts.ledger.decoded += 1;
            self.counts.latency.record(slot - generated);
        }
        self.event(slot, TraceKind::Decode, 2, (slot - generated) as i64);
    }

    /// Reception of the freshest packet of an event.
    fn update(&mut self, slot: u64, generated: u64) {
        if let Some(peak) = self.age.receive(slot, generated) {
            if self.measured(slot) {
                self.counts.paoi.record(peak);
            }
        }
    }

    fn frame_end(&mut self, slot: u64, success: bool) {
        if self.measured(slot) {
            self.counts.frames += 1;
            self.counts.decoded_frames += success as u64;
        }
        self.event(slot, TraceKind::FrameEnd, 1, success as i64);
    }
}

pub fn simulate(sim: &SimConfig) -> SimResult {
    let mut run = Run {
        sim,
        counts: SimCounts {
            measured_slots: sim.measured_slots(),
            ..SimCounts::default()
        },
        age: AgeTracker::default(),
        trace: Vec::new(),
    };
    match sim.scheme {
        Scheme::Oma => run_oma(&mut run),
        Scheme::Noma => run_noma(&mut run),
    }
    debug_assert!(run.counts.ledger.balanced());
    SimResult::from_counts(sim.cfg.k, run.counts, run.trace)
}

fn run_oma(run: &mut Run<'_>) {
    let sim = run.sim;
    let cfg = sim.cfg;
    let (t_int, q_cap) = (cfg.t_int as u64, cfg.q as usize);
    let mut arrivals = stream(sim.seed, STREAM_ARRIVALS);
    let mut erasures2 = stream(sim.seed, STREAM_INTERMITTENT_ERASURE);
    let mut erasures1 = stream(sim.seed, STREAM_BROADBAND_ERASURE);
    let mut queue: VecDeque<u64> = VecDeque::with_capacity(q_cap + 1);
    let (mut frame_slot, mut received) = (0u32, 0u32);
    run.counts.occupancy = vec![vec![0; q_cap + 1]; t_int as usize];
    run.counts.occupancy_batches = vec![run.counts.occupancy.clone(); OCCUPANCY_BATCHES];
    let measured = sim.measured_slots();

    for slot in 0..sim.n_slots {
        let (ua, ue2, ue1) = (
            uniform(&mut arrivals),
            uniform(&mut erasures2),
            uniform(&mut erasures1),
        );
        if ua < cfg.alpha {
            run.generated(slot);
            if queue.len() == q_cap {
                let old = queue.pop_front().expect("full queue");
                run.lost(old, false, false);
                run.event(slot, TraceKind::Drop, 2, (slot - old) as i64);
            }
            queue.push_back(slot);
            run.event(slot, TraceKind::Arrival, 2, queue.len() as i64);
        }
        if slot % t_int == t_int - 1 {
            if let Some(g) = queue.pop_front() {
                run.event(slot, TraceKind::Transmit, 2, (slot - g) as i64);
                if ue2 < 1.0 - cfg.eps2 {
                    run.decoded(slot, g);
                    run.update(slot, g);
                } else {
                    run.lost(g, true, false);
                    run.event(slot, TraceKind::Erasure, 2, 0);
                }
            }
        } else {
            frame_slot += 1;
            if ue1 < 1.0 - cfg.eps1 {
                received += 1;
            }
            if frame_slot == cfg.n {
                run.frame_end(slot, received >= cfg.k);
                frame_slot = 0;
                received = 0;
            }
        }
        if run.measured(slot) {
            let phase = ((slot + 1) % t_int) as usize;
            run.counts.occupancy[phase][queue.len()] += 1;
            let batch = ((slot - sim.warmup_slots) as u128 * OCCUPANCY_BATCHES as u128
                / measured as u128) as usize;
            run.counts.occupancy_batches[batch][phase][queue.len()] += 1;
        }
    }
    for g in queue {
        if run.measured(g) {
            run.counts.ledger.in_flight += 1;
        }
    }
}

fn run_noma(run: &mut Run<'_>) {
    let sim = run.sim;
    let cfg = sim.cfg;
    let n = cfg.n as u64;
    let mut arrivals = stream(sim.seed, STREAM_ARRIVALS);
    let mut erasures2 = stream(sim.seed, STREAM_INTERMITTENT_ERASURE);
    let mut erasures1 = stream(sim.seed, STREAM_BROADBAND_ERASURE);
    // Collided slots awaiting SIC: generation slot and cached erasure outcome.
    let mut stored: Vec<(u64, bool)> = Vec::new();
    let mut received = 0u32;
    let mut event_in_frame = false;

    for slot in 0..sim.n_slots {
        let (ua, ue2, ue1) = (
            uniform(&mut arrivals),
            uniform(&mut erasures2),
            uniform(&mut erasures1),
        );
        let decodable = received >= cfg.k;
        if ua < cfg.alpha {
            run.generated(slot);
            run.event(slot, TraceKind::Arrival, 2, 0);
            let ok = ue2 < 1.0 - cfg.eps2;
            if decodable {
                if ok {
                    run.decoded(slot, slot);
                    run.update(slot, slot);
                    event_in_frame = true;
                } else {
                    run.lost(slot, true, false);
                }
            } else {
                stored.push((slot, ok));
            }
        } else if ue1 < 1.0 - cfg.eps1 {
            received += 1;
            if received == cfg.k {
                let mut freshest = None;
                for &(g, ok) in &stored {
                    if ok {
                        run.decoded(slot, g);
                        freshest = Some(g);
                    } else {
                        run.lost(g, true, false);
                    }
                }
                stored.clear();
                if let Some(g) = freshest {
                    run.update(slot, g);
                    event_in_frame = true;
                }
            }
        }
        if slot % n == n - 1 {
            for &(g, ok) in &stored {
                run.lost(g, !ok, true);
            }
            stored.clear();
            run.frame_end(slot, received >= cfg.k);
            if event_in_frame && run.measured(slot) {
                run.counts.frames_with_event += 1;
            }
            received = 0;
            event_in_frame = false;
        }
    }
    for &(g, _) in &stored {
        if run.measured(g) {
            run.counts.ledger.in_flight += 1;
        }
    }
}

/// `n_reps` independent runs with seeds from [`replica_seed`].
pub fn replicate(sim: &SimConfig, n_reps: usize) -> Vec<SimResult> {
    (0..n_reps)
        .map(|i| {
            simulate(&SimConfig {
                seed: replica_seed(sim.seed, i as u64),
                ..*sim
            })
        })
        .collect()
}

/// Combine runs of the same configuration into one result.
pub fn pool(results: &[SimResult], k: u32) -> SimResult {
    let mut counts = SimCounts::default();
    for r in results {
        counts.merge(&r.counts);
    }
    SimResult::from_counts(k, counts, Vec::new())
}
