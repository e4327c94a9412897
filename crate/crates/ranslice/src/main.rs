use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use ranslice::output::{write_records, AnalysisRecord, Format, SimRecord};
use ranslice::scenario::{default_eps1, default_eps2, Scenario};
use ranslice::sweep::{alpha_sweep, evaluate_grid, log_grid, pareto_frontier, NRange, SweepGrid};
use ranslice::validation::{run_validation, Corruption, ValidateOptions};
use ranslice_core::simulator::{default_warmup, pool, replica_seed, simulate, SimConfig};
use ranslice_core::{analyze, validate, Checked, Formulas, KpiMode, Scheme};

#[derive(Parser)]
#[command(
    name = "ranslice",
    version,
    about = "Uplink slicing between a broadband and an intermittent user"
)]
struct Cli {
    /// Output format; CSV for series and JSON for single records by default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Use the NOMA formulas as printed and report the discrepancy ledger.
    #[arg(long, global = true)]
    strict_paper: bool,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic KPIs of one configuration.
    Analyze(ConfigArgs),
    /// Monte Carlo estimates of one configuration.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1_000_000)]
        n_slots: u64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Discarded initial slots (default depends on the scheme).
        #[arg(long)]
        warmup: Option<u64>,
        /// Write a per-event trace of the first replica to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare analysis and simulation; exits with status 2 on any FAIL.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1_000_000)]
        n_slots: u64,
        /// Perturb one analytic statistic (negative control).
        #[arg(long, value_enum, hide = true)]
        corrupt: Option<Corruption>,
    },
    /// Pareto frontier of (s1, 90th percentile) over a grid.
    Pareto {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        alpha: f64,
    },
    /// Constrained optimum for each alpha of a list or a log grid.
    AlphaSweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Explicit alpha values; overrides the log grid.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 1e-4)]
        alpha_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        alpha_max: f64,
        #[arg(long, default_value_t = 20)]
        alpha_points: usize,
        #[arg(long, default_value_t = 0.75)]
        s1_min: f64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON scenario file; individual flags override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long = "K")]
    k: Option<u32>,
    #[arg(long = "N")]
    n: Option<u32>,
    #[arg(long = "Tint")]
    t_int: Option<u32>,
    #[arg(long = "Q")]
    q: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    mode: Option<KpiMode>,
}

impl ConfigArgs {
    fn scenario(&self) -> anyhow::Result<Scenario> {
        let base = self.scenario.as_deref().map(Scenario::load).transpose()?;
        macro_rules! pick {
            ($field:ident, $flag:literal) => {
                match (self.$field, base.as_ref().map(|b| b.$field)) {
                    (Some(v), _) | (None, Some(v)) => v,
                    (None, None) => bail!(concat!("missing --", $flag)),
                }
            };
        }
        let scheme = pick!(scheme, "scheme");
        let t_int = match (self.t_int, base.as_ref().map(|b| b.t_int)) {
            (Some(v), _) | (None, Some(v)) => v,
            (None, None) if scheme == Scheme::Noma => 1,
            (None, None) => bail!("missing --Tint (required for OMA)"),
        };
        Ok(Scenario {
            k: pick!(k, "K"),
            n: pick!(n, "N"),
            t_int,
            q: self.q.or(base.map(|b| b.q)).unwrap_or(1),
            alpha: pick!(alpha, "alpha"),
            eps1: self
                .eps1
                .or(base.map(|b| b.eps1))
                .unwrap_or_else(default_eps1),
            eps2: self
                .eps2
                .or(base.map(|b| b.eps2))
                .unwrap_or_else(default_eps2),
            scheme,
            mode: pick!(mode, "mode"),
        })
    }

    fn checked(&self) -> anyhow::Result<Checked> {
        let s = self.scenario()?;
        Ok(validate(&s.config(), s.scheme, s.mode)?)
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    mode: KpiMode,
    #[arg(long = "K-min", default_value_t = 2)]
    k_min: u32,
    #[arg(long = "K-max", default_value_t = 64)]
    k_max: u32,
    /// Search N in K..=K+extra instead of the automatic range.
    #[arg(long)]
    n_extra: Option<u32>,
    #[arg(long = "Tint-min", default_value_t = 1)]
    t_min: u32,
    #[arg(long = "Tint-max", default_value_t = 64)]
    t_max: u32,
    #[arg(long = "Q", value_delimiter = ',', default_values_t = [1, 4])]
    q: Vec<u32>,
    #[arg(long, default_value_t = 0.1)]
    eps1: f64,
    #[arg(long, default_value_t = 0.05)]
    eps2: f64,
    /// Minimum ps2 for feasibility (default: 0.9 for OMA-LR, none otherwise).
    #[arg(long)]
    min_ps2: Option<f64>,
}

impl GridArgs {
    fn grid(&self, strict: bool) -> anyhow::Result<SweepGrid> {
        if self.k_min == 0 || self.k_min > self.k_max {
            bail!(
                "K range {}..={} is empty or starts at 0",
                self.k_min,
                self.k_max
            );
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            bail!(
                "T_int range {}..={} is empty or starts at 0",
                self.t_min,
                self.t_max
            );
        }
        let mut g = SweepGrid::standard(self.scheme, self.mode);
        g.k = (self.k_min, self.k_max);
        g.n_range = self.n_extra.map_or(NRange::Auto, NRange::Extra);
        g.t_int = (self.t_min..=self.t_max).collect();
        g.q = self.q.clone();
        g.eps1 = self.eps1;
        g.eps2 = self.eps2;
        if strict {
            g.formulas = Formulas::Printed;
        }
        if self.min_ps2.is_some() {
            g.min_ps2 = self.min_ps2;
        }
        Ok(g)
    }
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let formulas = if cli.strict_paper {
        Formulas::Printed
    } else {
        Formulas::Consistent
    };
    let out = sink(&cli.out)?;
    match &cli.command {
        Command::Analyze(args) => {
            let checked = args.checked()?;
            let r = analyze(&checked, formulas)?;
            let rec = AnalysisRecord::new(
                *checked.config(),
                checked.scheme(),
                checked.mode(),
                formulas,
                r,
            );
            write_records(&[rec], cli.format.unwrap_or(Format::Json), out)?;
        }
        Command::Simulate {
            config,
            n_slots,
            reps,
            warmup,
            trace,
        } => {
            let checked = config.checked()?;
            if *reps == 0 {
                bail!("--reps must be at least 1");
            }
            let warmup =
                warmup.unwrap_or_else(|| default_warmup(checked.config(), checked.scheme()));
            let base = SimConfig::with_warmup(&checked, *n_slots, cli.seed, warmup)?;
            let seeds: Vec<u64> = if *reps == 1 {
                vec![cli.seed]
            } else {
                (0..*reps as u64)
                    .map(|i| replica_seed(cli.seed, i))
                    .collect()
            };
            let results: Vec<_> = {
                use rayon::prelude::*;
                seeds
                    .par_iter()
                    .enumerate()
                    .map(|(i, &seed)| {
                        simulate(&SimConfig {
                            seed,
                            trace: i == 0 && trace.is_some(),
                            ..base
                        })
                    })
                    .collect()
            };
            if let Some(path) = trace {
                let mut w = csv::Writer::from_path(path)?;
                for e in &results[0].trace {
                    w.serialize(e)?;
                }
                w.flush()?;
            }
            let record = |i: Option<usize>, seed: u64, r| {
                SimRecord::new(
                    *checked.config(),
                    checked.scheme(),
                    checked.mode(),
                    seed,
                    *n_slots,
                    warmup,
                    i,
                    r,
                )
            };
            let mut records: Vec<SimRecord> = results
                .iter()
                .zip(&seeds)
                .enumerate()
                .map(|(i, (r, &seed))| record((*reps > 1).then_some(i), seed, r))
                .collect();
            if *reps > 1 {
                let pooled = pool(&results, checked.config().k);
                records.push(record(None, cli.seed, &pooled));
            }
            let default = if *reps > 1 { Format::Csv } else { Format::Json };
            write_records(&records, cli.format.unwrap_or(default), out)?;
        }
        Command::Validate {
            config,
            n_slots,
            corrupt,
        } => {
            let checked = config.checked()?;
            let report = run_validation(
                &checked,
                ValidateOptions {
                    n_slots: *n_slots,
                    seed: cli.seed,
                    strict_paper: cli.strict_paper,
                    corrupt: *corrupt,
                },
            )?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    let mut out = out;
                    serde_json::to_writer_pretty(&mut out, &report)?;
                    writeln!(out)?;
                }
                Format::Csv => write_records(&report.rows(), Format::Csv, out)?,
            }
            for f in report.failures() {
                eprintln!("FAIL {}", f.statistic);
            }
            if !report.pass {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Pareto { grid, alpha } => {
            let g = grid.grid(cli.strict_paper)?;
            let eval = evaluate_grid(&g, *alpha);
            info!(
                "{} points evaluated, {} skipped",
                eval.points.len(),
                eval.skipped.len()
            );
            let frontier = pareto_frontier(&eval.points);
            write_records(&frontier, cli.format.unwrap_or(Format::Csv), out)?;
        }
        Command::AlphaSweep {
            grid,
            alphas,
            alpha_min,
            alpha_max,
            alpha_points,
            s1_min,
        } => {
            if !(*s1_min > 0.0 && *s1_min < 1.0) {
                bail!("--s1-min must lie in (0, 1)");
            }
            let g = grid.grid(cli.strict_paper)?;
            let mut list = if alphas.is_empty() {
                log_grid(*alpha_min, *alpha_max, *alpha_points)
            } else {
                alphas.clone()
            };
            list.sort_by(f64::total_cmp);
            let rows = alpha_sweep(&g, &list, *s1_min);
            write_records(&rows, cli.format.unwrap_or(Format::Csv), out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
