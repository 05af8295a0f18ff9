//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{Protocol, ScenarioConfig, SweepAxis, SweepSpec};
use super::table::{Format, Record, Table};
use super::{error_record, run_protocol, sweep, with_threads};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "zeno-sta", version, about = "Zeno dragging simulators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Row output file; the summary goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// csv or json; inferred from --out when omitted.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Worker threads; 1 gives bit-exact reruns.
    #[arg(long, global = true, env = "ZENO_STA_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stroboscopic projective measurements.
    Strobe,
    /// Continuous monitoring ensemble.
    Sme,
    /// Complex absorbing potential.
    Cap,
    /// Counterdiabatic reference evolution.
    Cd,
    /// Randomized projector and leakage identities.
    Identities,
    /// Sweep one parameter of the scenario and fit a log-log slope.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        metric: Option<String>,
    },
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|_| format!("expected csv or json, got `{s}`"))
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|_| format!("expected dt, kappa or M, got `{s}`"))
}

impl Command {
    fn protocol(&self) -> Option<Protocol> {
        match self {
            Command::Strobe => Some(Protocol::Strobe),
            Command::Sme => Some(Protocol::Sme),
            Command::Cap => Some(Protocol::Cap),
            Command::Cd => Some(Protocol::Cd),
            Command::Identities => Some(Protocol::Identities),
            Command::Sweep { .. } => None,
        }
    }
}

/// Scenario after applying the command line on top of the file.
pub fn resolve(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::from_path(p)?,
        None => match cli.command.protocol() {
            Some(p) => ScenarioConfig::new(p),
            None => return Err(Error::ConfigInvalid("config".into())),
        },
    };
    if let Some(p) = cli.command.protocol() {
        match cfg.protocol {
            Some(q) if q != p => return Err(Error::ConfigInvalid("protocol".into())),
            _ => cfg.protocol = Some(p),
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
        if cli.format.is_none() {
            if let Some(f) = out.extension().and_then(|e| e.to_str()).and_then(|e| e.parse().ok()) {
                cfg.output.format = f;
            }
        }
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Command::Sweep { axis, values, metric } = &cli.command {
        let base = cfg.sweep.take();
        let axis = axis
            .or(base.as_ref().map(|s| s.axis))
            .ok_or_else(|| Error::ConfigInvalid("sweep.axis".into()))?;
        let values = values
            .clone()
            .or(base.as_ref().map(|s| s.values.clone()))
            .ok_or_else(|| Error::ConfigInvalid("sweep.values".into()))?;
        let metric = metric.clone().or(base.and_then(|s| s.metric));
        cfg.sweep = Some(SweepSpec { axis, values, metric });
    }
    Ok(cfg)
}

fn write_summary(summary: &Record, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    Ok(())
}

/// Writes rows to `path` (or stdout) and the summary to stdout (or stderr
/// when the rows already occupy stdout).
fn emit(summary: &Record, rows: &Table, format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            super::export(rows, format, p)?;
            write_summary(summary, std::io::stdout().lock())
        }
        None => {
            rows.write(format, std::io::stdout().lock())?;
            write_summary(summary, std::io::stderr().lock())
        }
    }
}

/// Resolves and runs the scenario, writing its outputs.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let threads = cli.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let path = cfg.output.path.clone();
    let format = cfg.output.format;
    let (summary, rows) = with_threads(threads, || -> Result<(Record, Table)> {
        match &cli.command {
            Command::Sweep { .. } => {
                let spec = cfg.sweep.clone().expect("resolved above");
                let mut base = cfg.clone();
                base.sweep = None;
                let r = sweep(&base, &spec)?;
                Ok((r.summary(), r.rows))
            }
            _ => {
                let r = run_protocol(&cfg)?;
                Ok((r.summary, r.rows))
            }
        }
    })??;
    emit(&summary, &rows, format, path.as_deref())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            match e {
                Error::ConfigInvalid(_) => 2,
                _ => 1,
            }
        }
    }
}
