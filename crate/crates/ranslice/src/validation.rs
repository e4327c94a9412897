//! Analytic results checked against a simulation of the same configuration.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use ranslice_core::audit::audit;
use ranslice_core::probcore::percentile;
use ranslice_core::simulator::{simulate, SimConfig, Z99};
use ranslice_core::{analyze, Checked, Formulas, KpiMode, Pmf, Scheme, SystemConfig};

use crate::output::Flat;

/// Largest total variation distance between analytic and empirical PMFs
/// that still counts as agreement.
pub const TVD_TOLERANCE: f64 = 0.02;

/// Agreement band for scalar statistics, in standard errors.
pub const SIGMAS: f64 = 3.0;

/// Deliberate perturbation of the analytic side, used as a negative control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    S1,
    Ps1,
    Ps2,
    Timeliness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Reported without a verdict.
    Info,
    /// Printed-versus-corrected comparison from the discrepancy ledger.
    Ledger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub statistic: String,
    pub analytic: Option<f64>,
    pub simulated: Option<f64>,
    pub abs_diff: Option<f64>,
    /// 99% half-width of the simulated estimate.
    pub ci_halfwidth: Option<f64>,
    pub tvd: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: SystemConfig,
    pub scheme: Scheme,
    pub mode: KpiMode,
    pub formulas: Formulas,
    pub n_slots: u64,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Present in strict mode: printed forms next to the computed ones.
    pub ledger: Option<Vec<Check>>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    /// Checks followed by ledger rows, for tabular output.
    pub fn rows(&self) -> Vec<Check> {
        let mut rows = self.checks.clone();
        rows.extend(self.ledger.iter().flatten().cloned());
        rows
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidateOptions {
    pub n_slots: u64,
    pub seed: u64,
    pub strict_paper: bool,
    pub corrupt: Option<Corruption>,
}

fn scalar(name: &str, analytic: f64, simulated: f64, ci: f64) -> Check {
    let band = SIGMAS * ci / Z99;
    let diff = (analytic - simulated).abs();
    Check {
        statistic: name.into(),
        analytic: Some(analytic),
        simulated: Some(simulated),
        abs_diff: Some(diff),
        ci_halfwidth: Some(ci),
        tvd: None,
        tolerance: Some(band),
        status: if diff <= band {
            Status::Pass
        } else {
            Status::Fail
        },
    }
}

fn shifted(p: &Pmf, by: i64) -> Pmf {
    Pmf::new(p.offset() + by, p.mass().to_vec(), p.deficit()).expect("shift keeps normalization")
}

pub fn run_validation(
    checked: &Checked,
    opts: ValidateOptions,
) -> anyhow::Result<ValidationReport> {
    let formulas = if opts.strict_paper {
        Formulas::Printed
    } else {
        Formulas::Consistent
    };
    let mut a = analyze(checked, formulas)?;
    match opts.corrupt {
        Some(Corruption::S1) => a.s1 += 0.05,
        Some(Corruption::Ps1) => a.ps1 = (a.ps1 - 0.05).max(0.0),
        Some(Corruption::Ps2) => a.ps2 = (a.ps2 - 0.05).max(0.0),
        Some(Corruption::Timeliness) => a.timeliness = shifted(&a.timeliness, 3),
        None => {}
    }
    let sim = SimConfig::new(checked, opts.n_slots, opts.seed)?;
    let r = simulate(&sim);

    let empirical = match checked.mode() {
        KpiMode::Lr => &r.latency_hist,
        KpiMode::Paoi => &r.paoi_hist,
    };
    let tvd = a.timeliness.total_variation(empirical);
    let name = match checked.mode() {
        KpiMode::Lr => "latency_pmf",
        KpiMode::Paoi => "paoi_pmf",
    };
    let sim_p90 = percentile(empirical, 0.9);
    let as_f64 = |p: ranslice_core::Percentile| p.finite().map(|v| v as f64);
    let checks = vec![
        scalar("s1", a.s1, r.s1_hat, r.ci_halfwidth.s1),
        scalar("ps1", a.ps1, r.ps1_hat, r.ci_halfwidth.ps1),
        scalar("ps2", a.ps2, r.ps2_hat, r.ci_halfwidth.ps2),
        Check {
            statistic: name.into(),
            analytic: None,
            simulated: None,
            abs_diff: None,
            ci_halfwidth: None,
            tvd: Some(tvd),
            tolerance: Some(TVD_TOLERANCE),
            status: if tvd < TVD_TOLERANCE {
                Status::Pass
            } else {
                Status::Fail
            },
        },
        Check {
            statistic: "percentile90".into(),
            analytic: as_f64(a.percentile90),
            simulated: as_f64(sim_p90),
            abs_diff: as_f64(a.percentile90)
                .zip(as_f64(sim_p90))
                .map(|(x, y)| (x - y).abs()),
            ci_halfwidth: None,
            tvd: None,
            tolerance: None,
            status: Status::Info,
        },
    ];

    let ledger = if opts.strict_paper {
        let items = audit(checked.config(), checked.scheme())?;
        Some(
            items
                .into_iter()
                .map(|d| Check {
                    statistic: d.item.into(),
                    analytic: Some(d.corrected),
                    simulated: Some(d.printed),
                    abs_diff: Some(d.gap()),
                    ci_halfwidth: None,
                    tvd: None,
                    tolerance: None,
                    status: Status::Ledger,
                })
                .collect(),
        )
    } else {
        None
    };
    let pass = checks.iter().all(|c| c.status != Status::Fail);
    Ok(ValidationReport {
        config: *checked.config(),
        scheme: checked.scheme(),
        mode: checked.mode(),
        formulas,
        n_slots: opts.n_slots,
        seed: opts.seed,
        checks,
        ledger,
        pass,
    })
}

impl Flat for Check {
    type Row = Check;

    fn to_row(&self) -> Check {
        self.clone()
    }

    fn from_row(row: Check) -> anyhow::Result<Self> {
        Ok(row)
    }
}
