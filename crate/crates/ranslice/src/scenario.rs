//! Scenario files: a configuration plus the scheme and KPI mode to study.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use ranslice_core::{KpiMode, Scheme, SystemConfig};

/// On-disk form. Field names follow [`SystemConfig`] exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "T_int", default = "one")]
    pub t_int: u32,
    #[serde(rename = "Q", default = "one")]
    pub q: u32,
    pub alpha: f64,
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    pub scheme: Scheme,
    pub mode: KpiMode,
}

fn one() -> u32 {
    1
}

pub fn default_eps1() -> f64 {
    0.1
}

pub fn default_eps2() -> f64 {
    0.05
}

impl Scenario {
    pub fn config(&self) -> SystemConfig {
        SystemConfig {
            k: self.k,
            n: self.n,
            t_int: self.t_int,
            q: self.q,
            alpha: self.alpha,
            eps1: self.eps1,
            eps2: self.eps2,
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
