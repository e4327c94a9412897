//! Machine-readable records: nested JSON documents and flat CSV rows.
//!
//! PMFs are written as three parallel parts (support start, mass list,
//! deficit). In CSV the mass list is one field with `;` between entries and
//! the per-phase occupancy table uses `|` between phases.

use std::io::{Read, Write};

use anyhow::{anyhow, Context};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ranslice_core::simulator::SimResult;
use ranslice_core::{Formulas, KpiMode, KpiResult, Percentile, Pmf, Scheme, SystemConfig};

use crate::sweep::{AlphaRow, ParetoPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A record with a flat row form for CSV.
pub trait Flat: Sized {
    type Row: Serialize + DeserializeOwned;

    fn to_row(&self) -> Self::Row;
    fn from_row(row: Self::Row) -> anyhow::Result<Self>;
}

/// Write records as a JSON document (an object for one record, an array
/// otherwise) or as CSV with a header row.
pub fn write_records<R, W>(records: &[R], format: Format, mut out: W) -> anyhow::Result<()>
where
    R: Flat + Serialize,
    W: Write,
{
    match format {
        Format::Json => {
            if let [one] = records {
                serde_json::to_writer_pretty(&mut out, one)?;
            } else {
                serde_json::to_writer_pretty(&mut out, records)?;
            }
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r.to_row())?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Inverse of [`write_records`].
pub fn read_records<R, I>(input: I, format: Format) -> anyhow::Result<Vec<R>>
where
    R: Flat + DeserializeOwned,
    I: Read,
{
    match format {
        Format::Json => {
            let value: serde_json::Value = serde_json::from_reader(input)?;
            if value.is_array() {
                Ok(serde_json::from_value(value)?)
            } else {
                Ok(vec![serde_json::from_value(value)?])
            }
        }
        Format::Csv => csv::Reader::from_reader(input)
            .deserialize()
            .map(|row| R::from_row(row?))
            .collect(),
    }
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

fn split_f64(s: &str, sep: char) -> anyhow::Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(sep)
        .map(|x| x.parse().with_context(|| format!("bad number `{x}`")))
        .collect()
}

fn pmf_from(offset: i64, mass: &str, deficit: f64) -> anyhow::Result<Pmf> {
    Pmf::new(offset, split_f64(mass, ';')?, deficit).map_err(|e| anyhow!(e))
}

fn parse_percentile(s: &str) -> anyhow::Result<Percentile> {
    s.parse().map_err(|_| anyhow!("bad percentile `{s}`"))
}

/// Analytic KPIs of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub config: SystemConfig,
    pub scheme: Scheme,
    pub mode: KpiMode,
    pub formulas: Formulas,
    pub s1: f64,
    pub ps1: f64,
    pub ps2: f64,
    pub percentile90: Percentile,
    pub xi: Option<f64>,
    pub timeliness: Pmf,
}

impl AnalysisRecord {
    pub fn new(
        config: SystemConfig,
        scheme: Scheme,
        mode: KpiMode,
        formulas: Formulas,
        r: KpiResult,
    ) -> Self {
        Self {
            config,
            scheme,
            mode,
            formulas,
            s1: r.s1,
            ps1: r.ps1,
            ps2: r.ps2,
            percentile90: r.percentile90,
            xi: r.xi,
            timeliness: r.timeliness,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisRow {
    #[serde(rename = "K")]
    k: u32,
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "T_int")]
    t_int: u32,
    #[serde(rename = "Q")]
    q: u32,
    alpha: f64,
    eps1: f64,
    eps2: f64,
    scheme: Scheme,
    mode: KpiMode,
    formulas: Formulas,
    s1: f64,
    ps1: f64,
    ps2: f64,
    percentile90: String,
    xi: Option<f64>,
    pmf_offset: i64,
    pmf_mass: String,
    pmf_deficit: f64,
}

impl Flat for AnalysisRecord {
    type Row = AnalysisRow;

    fn to_row(&self) -> AnalysisRow {
        let c = &self.config;
        AnalysisRow {
            k: c.k,
            n: c.n,
            t_int: c.t_int,
            q: c.q,
            alpha: c.alpha,
            eps1: c.eps1,
            eps2: c.eps2,
            scheme: self.scheme,
            mode: self.mode,
            formulas: self.formulas,
            s1: self.s1,
            ps1: self.ps1,
            ps2: self.ps2,
            percentile90: self.percentile90.to_string(),
            xi: self.xi,
            pmf_offset: self.timeliness.offset(),
            pmf_mass: join(self.timeliness.mass(), ";"),
            pmf_deficit: self.timeliness.deficit(),
        }
    }

    fn from_row(r: AnalysisRow) -> anyhow::Result<Self> {
        Ok(Self {
            config: SystemConfig {
                k: r.k,
                n: r.n,
                t_int: r.t_int,
                q: r.q,
                alpha: r.alpha,
                eps1: r.eps1,
                eps2: r.eps2,
            },
            scheme: r.scheme,
            mode: r.mode,
            formulas: r.formulas,
            s1: r.s1,
            ps1: r.ps1,
            ps2: r.ps2,
            percentile90: parse_percentile(&r.percentile90)?,
            xi: r.xi,
            timeliness: pmf_from(r.pmf_offset, &r.pmf_mass, r.pmf_deficit)?,
        })
    }
}

/// One simulation run (or the pool of several).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub config: SystemConfig,
    pub scheme: Scheme,
    pub mode: KpiMode,
    pub seed: u64,
    pub n_slots: u64,
    pub warmup_slots: u64,
    /// Replica index, or `None` for the pooled record.
    pub replica: Option<usize>,
    pub s1_hat: f64,
    pub ps1_hat: f64,
    pub ps2_hat: f64,
    pub ci_s1: f64,
    pub ci_ps1: f64,
    pub ci_ps2: f64,
    pub latency: Pmf,
    pub paoi: Pmf,
    pub queue_occupancy: Vec<Vec<f64>>,
}

impl SimRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: SystemConfig,
        scheme: Scheme,
        mode: KpiMode,
        seed: u64,
        n_slots: u64,
        warmup_slots: u64,
        replica: Option<usize>,
        r: &SimResult,
    ) -> Self {
        Self {
            config,
            scheme,
            mode,
            seed,
            n_slots,
            warmup_slots,
            replica,
            s1_hat: r.s1_hat,
            ps1_hat: r.ps1_hat,
            ps2_hat: r.ps2_hat,
            ci_s1: r.ci_halfwidth.s1,
            ci_ps1: r.ci_halfwidth.ps1,
            ci_ps2: r.ci_halfwidth.ps2,
            latency: r.latency_hist.clone(),
            paoi: r.paoi_hist.clone(),
            queue_occupancy: r.queue_occupancy_hist.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimRow {
    #[serde(rename = "K")]
    k: u32,
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "T_int")]
    t_int: u32,
    #[serde(rename = "Q")]
    q: u32,
    alpha: f64,
    eps1: f64,
    eps2: f64,
    scheme: Scheme,
    mode: KpiMode,
    seed: u64,
    n_slots: u64,
    warmup_slots: u64,
    replica: Option<usize>,
    s1_hat: f64,
    ps1_hat: f64,
    ps2_hat: f64,
    ci_s1: f64,
    ci_ps1: f64,
    ci_ps2: f64,
    latency_offset: i64,
    latency_mass: String,
    latency_deficit: f64,
    paoi_offset: i64,
    paoi_mass: String,
    paoi_deficit: f64,
    queue_occupancy: String,
}

impl Flat for SimRecord {
    type Row = SimRow;

    fn to_row(&self) -> SimRow {
        let c = &self.config;
        SimRow {
            k: c.k,
            n: c.n,
            t_int: c.t_int,
            q: c.q,
            alpha: c.alpha,
            eps1: c.eps1,
            eps2: c.eps2,
            scheme: self.scheme,
            mode: self.mode,
            seed: self.seed,
            n_slots: self.n_slots,
            warmup_slots: self.warmup_slots,
            replica: self.replica,
            s1_hat: self.s1_hat,
            ps1_hat: self.ps1_hat,
            ps2_hat: self.ps2_hat,
            ci_s1: self.ci_s1,
            ci_ps1: self.ci_ps1,
            ci_ps2: self.ci_ps2,
            latency_offset: self.latency.offset(),
            latency_mass: join(self.latency.mass(), ";"),
            latency_deficit: self.latency.deficit(),
            paoi_offset: self.paoi.offset(),
            paoi_mass: join(self.paoi.mass(), ";"),
            paoi_deficit: self.paoi.deficit(),
            queue_occupancy: self
                .queue_occupancy
                .iter()
                .map(|row| join(row, ";"))
                .collect::<Vec<_>>()
                .join("|"),
        }
    }

    fn from_row(r: SimRow) -> anyhow::Result<Self> {
        let queue_occupancy = if r.queue_occupancy.is_empty() {
            Vec::new()
        } else {
            r.queue_occupancy
                .split('|')
                .map(|row| split_f64(row, ';'))
                .collect::<anyhow::Result<_>>()?
        };
        Ok(Self {
            config: SystemConfig {
                k: r.k,
                n: r.n,
                t_int: r.t_int,
                q: r.q,
                alpha: r.alpha,
                eps1: r.eps1,
                eps2: r.eps2,
            },
            scheme: r.scheme,
            mode: r.mode,
            seed: r.seed,
            n_slots: r.n_slots,
            warmup_slots: r.warmup_slots,
            replica: r.replica,
            s1_hat: r.s1_hat,
            ps1_hat: r.ps1_hat,
            ps2_hat: r.ps2_hat,
            ci_s1: r.ci_s1,
            ci_ps1: r.ci_ps1,
            ci_ps2: r.ci_ps2,
            latency: pmf_from(r.latency_offset, &r.latency_mass, r.latency_deficit)?,
            paoi: pmf_from(r.paoi_offset, &r.paoi_mass, r.paoi_deficit)?,
            queue_occupancy,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PointRow {
    s1: f64,
    tau: String,
    ps2: f64,
    #[serde(rename = "K")]
    k: u32,
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "T_int")]
    t_int: u32,
    #[serde(rename = "Q")]
    q: u32,
    alpha: f64,
    eps1: f64,
    eps2: f64,
    scheme: Scheme,
}

impl Flat for ParetoPoint {
    type Row = PointRow;

    fn to_row(&self) -> PointRow {
        let c = &self.config;
        PointRow {
            s1: self.s1,
            tau: self.tau.to_string(),
            ps2: self.ps2,
            k: c.k,
            n: c.n,
            t_int: c.t_int,
            q: c.q,
            alpha: c.alpha,
            eps1: c.eps1,
            eps2: c.eps2,
            scheme: self.scheme,
        }
    }

    fn from_row(r: PointRow) -> anyhow::Result<Self> {
        Ok(Self {
            s1: r.s1,
            tau: parse_percentile(&r.tau)?,
            ps2: r.ps2,
            config: SystemConfig {
                k: r.k,
                n: r.n,
                t_int: r.t_int,
                q: r.q,
                alpha: r.alpha,
                eps1: r.eps1,
                eps2: r.eps2,
            },
            scheme: r.scheme,
        })
    }
}

/// Per-alpha optimum; configuration columns are empty when infeasible.
#[derive(Debug, Serialize, Deserialize)]
pub struct AlphaRowFlat {
    alpha: f64,
    status: String,
    s1: Option<f64>,
    tau: Option<String>,
    ps2: Option<f64>,
    #[serde(rename = "K")]
    k: Option<u32>,
    #[serde(rename = "N")]
    n: Option<u32>,
    #[serde(rename = "T_int")]
    t_int: Option<u32>,
    #[serde(rename = "Q")]
    q: Option<u32>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    scheme: Option<Scheme>,
}

pub const INFEASIBLE: &str = "INFEASIBLE";

impl Flat for AlphaRow {
    type Row = AlphaRowFlat;

    fn to_row(&self) -> AlphaRowFlat {
        let p = self.optimum.as_ref();
        AlphaRowFlat {
            alpha: self.alpha,
            status: if p.is_some() { "OPTIMAL" } else { INFEASIBLE }.into(),
            s1: p.map(|p| p.s1),
            tau: p.map(|p| p.tau.to_string()),
            ps2: p.map(|p| p.ps2),
            k: p.map(|p| p.config.k),
            n: p.map(|p| p.config.n),
            t_int: p.map(|p| p.config.t_int),
            q: p.map(|p| p.config.q),
            eps1: p.map(|p| p.config.eps1),
            eps2: p.map(|p| p.config.eps2),
            scheme: p.map(|p| p.scheme),
        }
    }

    fn from_row(r: AlphaRowFlat) -> anyhow::Result<Self> {
        if r.status == INFEASIBLE {
            return Ok(Self {
                alpha: r.alpha,
                optimum: None,
            });
        }
        let missing = || anyhow!("optimal row with empty columns");
        let optimum = ParetoPoint {
            s1: r.s1.ok_or_else(missing)?,
            tau: parse_percentile(&r.tau.ok_or_else(missing)?)?,
            ps2: r.ps2.ok_or_else(missing)?,
            config: SystemConfig {
                k: r.k.ok_or_else(missing)?,
                n: r.n.ok_or_else(missing)?,
                t_int: r.t_int.ok_or_else(missing)?,
                q: r.q.ok_or_else(missing)?,
                alpha: r.alpha,
                eps1: r.eps1.ok_or_else(missing)?,
                eps2: r.eps2.ok_or_else(missing)?,
            },
            scheme: r.scheme.ok_or_else(missing)?,
        };
        Ok(Self {
            alpha: r.alpha,
            optimum: Some(optimum),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analysis() -> AnalysisRecord {
        AnalysisRecord {
            config: SystemConfig {
                k: 4,
                n: 6,
                t_int: 5,
                q: 1,
                alpha: 0.1,
                eps1: 0.1,
                eps2: 0.05,
            },
            scheme: Scheme::Oma,
            mode: KpiMode::Lr,
            formulas: Formulas::Consistent,
            s1: 0.1 + 0.2,
            ps1: 1.0 / 3.0,
            ps2: 0.7,
            percentile90: Percentile::Infinite,
            xi: None,
            timeliness: Pmf::new(2, vec![0.1, 0.2 / 3.0], 1.0 - 0.1 - 0.2 / 3.0).unwrap(),
        }
    }

    fn round_trip<R>(records: &[R], format: Format) -> Vec<R>
    where
        R: Flat + Serialize + DeserializeOwned,
    {
        let mut buf = Vec::new();
        write_records(records, format, &mut buf).unwrap();
        read_records(buf.as_slice(), format).unwrap()
    }

    #[test]
    fn analysis_round_trips() {
        let a = analysis();
        for format in [Format::Json, Format::Csv] {
            assert_eq!(
                round_trip(std::slice::from_ref(&a), format),
                vec![a.clone()]
            );
            assert_eq!(round_trip(&[a.clone(), a.clone()], format).len(), 2);
        }
    }

    #[test]
    fn alpha_rows_round_trip() {
        let p = ParetoPoint {
            s1: 0.75,
            tau: Percentile::Finite(12),
            ps2: 0.93,
            config: analysis().config,
            scheme: Scheme::Oma,
        };
        let rows = vec![
            AlphaRow {
                alpha: 0.1,
                optimum: Some(ParetoPoint {
                    config: SystemConfig {
                        alpha: 0.1,
                        ..p.config
                    },
                    ..p
                }),
            },
            AlphaRow {
                alpha: 0.2,
                optimum: None,
            },
        ];
        for format in [Format::Json, Format::Csv] {
            assert_eq!(round_trip(&rows, format), rows);
        }
    }
}
