//! Command-line harness for the GWPT+HWP solver.
//!
//! Exit status: 0 when every row passes its thresholds, 1 when a row is
//! flagged, 2 on a configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gwpt_hwp::experiment::{
    emit_profile, error_series, parse_real, run_single, run_sweep, sweep_summary, timing_table, write_csv,
    write_series_csv, ExperimentConfig, ExperimentError, SweepAxis,
};

#[derive(Parser)]
#[command(name = "gwpt-hwp", version, about = "GWPT + Hagedorn wave-packet spectral solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and print a CSV row.
    Run(Common),
    /// Vary one parameter and report errors with observed orders.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// eps, n, quad, dt_c, dt_gt or index_norm.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `1/256,1/512,1/1024`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Wall time of the propagation loop over n and eps.
    Timing {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        n_values: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1/64,1/256,1/1024")]
        eps_values: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Sample w̃ and ψ at the final time. Writes `<out>_w.csv` and `<out>_psi.csv`.
    Profile(Common),
    /// L² error against the reference over time.
    Series {
        #[command(flatten)]
        common: Common,
        /// Coarse steps between samples.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    packets: Option<String>,
    #[arg(long)]
    index_norm: Option<String>,
    #[arg(long)]
    quad: Option<String>,
    #[arg(long)]
    dt_c: Option<String>,
    #[arg(long)]
    dt_gt: Option<String>,
    #[arg(long)]
    tf: Option<String>,
    /// compute, none or load:<path>.
    #[arg(long)]
    reference: Option<String>,
    /// Directory for cached references.
    #[arg(long)]
    cache_dir: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// Any other configuration key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("example", &self.example),
            ("eps", &self.eps),
            ("n", &self.packets),
            ("index_norm", &self.index_norm),
            ("quad", &self.quad),
            ("dt_c", &self.dt_c),
            ("dt_gt", &self.dt_gt),
            ("t_final", &self.tf),
            ("reference", &self.reference),
            ("cache_dir", &self.cache_dir),
            ("out", &self.out),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.extra {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("--set expects key=value, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Returns whether any row was flagged.
fn execute(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Run(common) => {
            let cfg = common.config()?;
            let row = run_single(&cfg)?;
            let mut out = open_out(cfg.output_path.as_deref())?;
            write_csv(&mut out, std::slice::from_ref(&row))?;
            out.flush()?;
            let flags = row.flags();
            for f in &flags {
                eprintln!("flagged: {f}");
            }
            Ok(!flags.is_empty())
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.config()?;
            let axis: SweepAxis = axis.parse().map_err(ExperimentError::Config)?;
            let sweep = run_sweep(&cfg, axis, &values)?;
            let mut out = open_out(cfg.output_path.as_deref())?;
            write_csv(&mut out, &sweep.rows)?;
            out.flush()?;
            eprint!("{}", sweep_summary(&sweep));
            Ok(sweep.rows.iter().any(|r| r.is_flagged()))
        }
        Command::Timing { common, n_values, eps_values, repeats } => {
            let cfg = common.config()?;
            let eps = eps_values
                .iter()
                .map(|s| parse_real(s).ok_or_else(|| ExperimentError::Config(format!("invalid eps `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            let table = timing_table(&cfg, &n_values, &eps, repeats)?;
            let mut out = open_out(cfg.output_path.as_deref())?;
            table.write_csv(&mut out)?;
            out.flush()?;
            for (n, r) in table.n_values.iter().zip(table.eps_ratios()) {
                eprintln!("n = {n:>4}: max/min wall time across eps = {r:.3}");
            }
            Ok(false)
        }
        Command::Profile(common) => {
            let cfg = common.config()?;
            let profile = emit_profile(&cfg)?;
            match &cfg.output_path {
                Some(base) => {
                    let mut w = open_out(Some(&suffixed(base, "w")))?;
                    profile.write_w_csv(&mut w)?;
                    w.flush()?;
                    let mut p = open_out(Some(&suffixed(base, "psi")))?;
                    profile.write_psi_csv(&mut p)?;
                    p.flush()?;
                }
                None => {
                    let mut out = open_out(None)?;
                    profile.write_w_csv(&mut out)?;
                    profile.write_psi_csv(&mut out)?;
                    out.flush()?;
                }
            }
            Ok(false)
        }
        Command::Series { common, every } => {
            let cfg = common.config()?;
            let series = error_series(&cfg, every)?;
            let mut out = open_out(cfg.output_path.as_deref())?;
            write_series_csv(&mut out, &series)?;
            out.flush()?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ExperimentError>() {
                Some(ExperimentError::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
