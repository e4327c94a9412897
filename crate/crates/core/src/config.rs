//! Scenario parameters, scheme and KPI selectors, and their validation.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::probcore::{Percentile, Pmf};

/// All scenario parameters. `p1` and `p2` are derived on demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Broadband source block size (packets per message).
    #[serde(rename = "K")]
    pub k: u32,
    /// Broadband coded block size (coded packets per frame).
    #[serde(rename = "N")]
    pub n: u32,
    /// Period between intermittent-reserved slots (OMA only).
    #[serde(rename = "T_int")]
    pub t_int: u32,
    /// Maximum intermittent queue length.
    #[serde(rename = "Q")]
    pub q: u32,
    /// Per-slot intermittent message-generation probability.
    pub alpha: f64,
    /// Broadband per-packet erasure probability.
    pub eps1: f64,
    /// Intermittent per-packet erasure probability.
    pub eps2: f64,
}

impl SystemConfig {
    /// Broadband per-packet success probability `1 - eps1`.
    pub fn p1(&self) -> f64 {
        1.0 - self.eps1
    }

    /// Probability that a slot carries a correctly received intermittent
    /// packet, `alpha (1 - eps2)`.
    pub fn p2(&self) -> f64 {
        self.alpha * (1.0 - self.eps2)
    }

    /// Lexicographic key `(K, N, T_int, Q)` used for deterministic ordering.
    pub fn key(&self) -> (u32, u32, u32, u32) {
        (self.k, self.n, self.t_int, self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "OMA", alias = "oma")]
    Oma,
    #[serde(rename = "NOMA", alias = "noma")]
    Noma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KpiMode {
    #[serde(rename = "LR", alias = "lr")]
    Lr,
    #[serde(rename = "PAOI", alias = "paoi", alias = "PAoI")]
    Paoi,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Oma => "OMA",
            Scheme::Noma => "NOMA",
        })
    }
}

impl fmt::Display for KpiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KpiMode::Lr => "LR",
            KpiMode::Paoi => "PAOI",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown value `{0}`")]
pub struct UnknownVariant(pub alloc::string::String);

impl FromStr for Scheme {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oma" => Ok(Scheme::Oma),
            "noma" => Ok(Scheme::Noma),
            _ => Err(UnknownVariant(s.into())),
        }
    }
}

impl FromStr for KpiMode {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(KpiMode::Lr),
            "paoi" => Ok(KpiMode::Paoi),
            _ => Err(UnknownVariant(s.into())),
        }
    }
}

/// One failed invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ZeroBlock,
    BlockOrder { k: u32, n: u32 },
    ZeroPeriod,
    ZeroQueue,
    Probability { name: &'static str, value: f64 },
    NomaLoad { p1: f64, p2: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroBlock => f.write_str("K ≥ 1 violated"),
            Violation::BlockOrder { k, n } => write!(f, "K ≤ N violated (K={k}, N={n})"),
            Violation::ZeroPeriod => f.write_str("T_int ≥ 1 violated"),
            Violation::ZeroQueue => f.write_str("Q ≥ 1 violated"),
            Violation::Probability { name, value } => {
                write!(f, "0 ≤ {name} ≤ 1 violated ({name}={value})")
            }
            Violation::NomaLoad { p1, p2 } => {
                write!(
                    f,
                    "p1 + p2 ≤ 1 violated under NOMA (p1={p1}, p2={p2}, sum={})",
                    p1 + p2
                )
            }
        }
    }
}

/// Every invariant that failed, in check order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid configuration: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl core::error::Error for ConfigError {}

/// A configuration that passed [`validate`] for a given scheme and mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checked {
    config: SystemConfig,
    scheme: Scheme,
    mode: KpiMode,
}

impl Checked {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn mode(&self) -> KpiMode {
        self.mode
    }
}

/// Check every invariant for the `(scheme, mode)` pair and normalize the
/// queue size where the pair fixes it (`Q = 1` for NOMA and for OMA-PAoI).
pub fn validate(cfg: &SystemConfig, scheme: Scheme, mode: KpiMode) -> Result<Checked, ConfigError> {
    let mut violations = Vec::new();
    if cfg.k == 0 {
        violations.push(Violation::ZeroBlock);
    }
    if cfg.k > cfg.n {
        violations.push(Violation::BlockOrder { k: cfg.k, n: cfg.n });
    }
    if cfg.t_int == 0 {
        violations.push(Violation::ZeroPeriod);
    }
    if cfg.q == 0 {
        violations.push(Violation::ZeroQueue);
    }
    let mut probs_ok = true;
    for (name, value) in [("alpha", cfg.alpha), ("eps1", cfg.eps1), ("eps2", cfg.eps2)] {
        if !(0.0..=1.0).contains(&value) {
            violations.push(Violation::Probability { name, value });
            probs_ok = false;
        }
    }
    if probs_ok && scheme == Scheme::Noma && cfg.p1() + cfg.p2() > 1.0 + 1e-12 {
        violations.push(Violation::NomaLoad {
            p1: cfg.p1(),
            p2: cfg.p2(),
        });
    }
    if !violations.is_empty() {
        return Err(ConfigError { violations });
    }
    let mut config = *cfg;
    if scheme == Scheme::Noma || mode == KpiMode::Paoi {
        config.q = 1;
    }
    Ok(Checked {
        config,
        scheme,
        mode,
    })
}

/// Broadband throughput `s1` (source packets per slot) and frame success
/// probability `ps1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub s1: f64,
    pub ps1: f64,
}

/// KPIs of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiResult {
    /// Broadband throughput in source packets per slot.
    pub s1: f64,
    /// Broadband frame decoding probability.
    pub ps1: f64,
    /// Intermittent packet success probability.
    pub ps2: f64,
    /// Latency PMF (LR) or PAoI PMF (PAoI); in LR mode the deficit is the
    /// loss probability `1 - ps2`.
    pub timeliness: Pmf,
    /// `max { n : Pr[X < n] < 0.9 }` of `timeliness`.
    pub percentile90: Percentile,
    /// Per-window successful transmission probability (OMA-PAoI only).
    pub xi: Option<f64>,
}
