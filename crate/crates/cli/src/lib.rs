//! Command-line experiment runner for the `dbmc` link simulator.
//!
//! Each subcommand runs one experiment family and writes a CSV table headed
//! by a `#` metadata block holding the full configuration, so any output can
//! be regenerated exactly.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use output::{emit, Table};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] dbmc::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// 1 for a failed validation, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dbmc", version, about = "Diffusion-based molecular communication link experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Small Monte Carlo budgets for a fast pass.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads; all cores when omitted. Does not affect results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER against SNR for each codec.
    SweepSnr,
    /// BER against ISI memory length.
    SweepMemory,
    /// BER against molecule count, distance or receiver radius.
    SweepScalar {
        /// n_m, distance or radius; overrides the `axis` key.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Achievable rate against SNR.
    Rate,
    /// Particle oracle against the closed-form channel model.
    ValidateChannel,
    /// Threshold that minimises BER for each codec.
    OptimizeThreshold,
    /// Codeword and correction tables.
    Tables,
    /// Slot trace of one frame for the first configured codec.
    Trace,
}

impl Cli {
    /// Defaults, then the config file, quick mode, overrides and flags.
    pub fn resolve_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if self.quick {
            cfg.make_quick();
        }
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Command::SweepScalar { axis: Some(axis) } = &self.command {
            cfg.axis = axis.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolve_config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("cannot start workers: {e}")))?;
    pool.install(|| execute(cli, &cfg))
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    let text = match &cli.command {
        Command::SweepSnr => Table::from_sweep("sweep-snr", cfg, "snr_db", &commands::sweep_snr(cfg)?).render()?,
        Command::SweepMemory => {
            Table::from_sweep("sweep-memory", cfg, "memory_length", &commands::sweep_memory(cfg)?).render()?
        }
        Command::SweepScalar { .. } => {
            Table::from_sweep("sweep-scalar", cfg, &cfg.axis.to_string(), &commands::sweep_scalar(cfg)?).render()?
        }
        Command::Rate => Table::from_sweep("rate", cfg, "snr_db", &commands::rate(cfg)?).render()?,
        Command::ValidateChannel => {
            let v = commands::validate_channel(cfg)?;
            eprint!("{}", v.report());
            emit(&commands::with_metadata("validate-channel", cfg, &v.histogram.to_csv())?, out)?;
            if !v.passed() {
                return Err(CliError::Validation(format!(
                    "oracle deviation {:.6} exceeds {:.6}",
                    v.max_deviation(),
                    v.tolerance
                )));
            }
            return Ok(());
        }
        Command::OptimizeThreshold => {
            let mut t = Table::new("optimize-threshold", cfg, &[], &commands::THRESHOLD_HEADER);
            t.records = commands::optimize_thresholds(cfg)?;
            for r in &t.records {
                eprintln!("{:<15} tau* = {} (BER {}), default tau = {} (BER {})", r[0], r[2], r[3], r[4], r[5]);
            }
            t.render()?
        }
        Command::Tables => {
            let body: String = cfg
                .codecs
                .iter()
                .flat_map(|&c| {
                    dbmc::codecs::table_csv(c)
                        .lines()
                        .skip(1)
                        .map(|l| format!("{c},{l}\n"))
                        .collect::<Vec<_>>()
                })
                .collect();
            commands::with_metadata("tables", cfg, &format!("codec,info_bits,codeword,corrections\n{body}"))?
        }
        Command::Trace => commands::with_metadata("trace", cfg, &commands::trace(cfg)?)?,
    };
    emit(&text, out)
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dbmc: {e}");
            e.exit_code()
        }
    }
}
