//! Closed-form KPI analysis for uplink slicing between a full-buffer broadband
//! user and an intermittent user.
//!
//! The broadband user sends MDS-coded frames (`K` source packets in `N` coded
//! slots). The intermittent user generates single-packet messages with
//! probability `alpha` per slot and cares about timeliness, either as
//! latency-reliability (LR) or as peak age of information (PAoI).
//!
//! Two access schemes are covered:
//!
//! * [`oma`]: one slot every `T_int` is reserved for the intermittent user,
//!   which keeps a drop-oldest queue of size `Q`.
//! * [`noma`]: every slot is shared, collisions are destructive and the
//!   receiver recovers stored intermittent packets by SIC once the broadband
//!   frame is decodable.
//!
//! [`simulator`] is a slot-level Monte Carlo realization of the same system
//! and serves as the ground truth for the analytic modules.
//!
//! The crate is `no_std` (it needs `alloc`); IO, sweeps and the CLI live in
//! the `ranslice` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod audit;
pub mod config;
pub mod noma;
pub mod oma;
pub mod probcore;
pub mod simulator;

pub use config::{
    validate, Checked, ConfigError, KpiMode, KpiResult, Scheme, SystemConfig, Throughput, Violation,
};
pub use probcore::{Percentile, Pmf, SubPmf};

use thiserror::Error;

/// Which closed forms to use where the printed expressions and the system
/// model disagree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulas {
    /// Forms that are exact for the simulated system model.
    #[default]
    Consistent,
    /// The printed forms, verbatim where they define a valid distribution.
    Printed,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Oma(#[from] oma::OmaError),
    #[error(transparent)]
    Noma(#[from] noma::NomaError),
}

/// Evaluate the KPIs of a validated configuration with the analysis that
/// matches its scheme and mode.
pub fn analyze(checked: &Checked, formulas: Formulas) -> Result<KpiResult, AnalysisError> {
    let cfg = checked.config();
    Ok(match (checked.scheme(), checked.mode()) {
        (Scheme::Oma, KpiMode::Lr) => oma::oma_lr_kpis(cfg)?,
        (Scheme::Oma, KpiMode::Paoi) => oma::oma_paoi_kpis(cfg),
        (Scheme::Noma, KpiMode::Lr) => noma::noma_lr_kpis(cfg, formulas)?,
        (Scheme::Noma, KpiMode::Paoi) => noma::noma_paoi_kpis(cfg, formulas)?,
    })
}
