//! The `semcode` command-line pipeline: synthetic data, quantizer training,
//! semantic-ID export, CTR training and analysis reports.

pub mod analyze;
pub mod args;
pub mod commands;
pub mod config;
pub mod ctr;
pub mod error;
pub mod output;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

use args::{AnalyzeCommand, Cli, Command, CtrCommand};
pub use config::RunConfig;
pub use error::{CliError, CliResult, ErrorKind};

/// Parses `argv` (including the program name), resolves the configuration
/// and runs the chosen command.
pub fn run<I, T>(argv: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let text = e.to_string();
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
        CliError::config(first.trim_start_matches("error: ").to_string())
    })?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Synth(a) => a.apply(&mut cfg),
        Command::IndexTrain(a) => a.apply(&mut cfg)?,
        Command::Encode(a) => a.apply(&mut cfg),
        Command::Analyze(AnalyzeCommand::Recon(a)) => a.apply(&mut cfg),
        Command::Analyze(AnalyzeCommand::Nmi(a)) => a.apply(&mut cfg),
        Command::Analyze(AnalyzeCommand::Spectrum(a)) => a.apply(&mut cfg),
        Command::Analyze(AnalyzeCommand::Corr(a)) => a.apply(&mut cfg),
        Command::Ctr(CtrCommand::Train(a)) => a.apply(&mut cfg)?,
        Command::Ctr(CtrCommand::Eval(a)) => a.apply(&mut cfg),
        Command::Report(a) => a.apply(&mut cfg),
    }
    let env = std::env::var(config::SEED_ENV).ok();
    cfg.resolve_seed(cli.seed, env.as_deref())?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::IndexTrain(_) => commands::index_train(&cfg),
        Command::Encode(_) => commands::encode(&cfg),
        Command::Analyze(AnalyzeCommand::Recon(_)) => analyze::recon(&cfg),
        Command::Analyze(AnalyzeCommand::Nmi(_)) => analyze::nmi(&cfg),
        Command::Analyze(AnalyzeCommand::Spectrum(_)) => analyze::spectrum(&cfg),
        Command::Analyze(AnalyzeCommand::Corr(_)) => analyze::corr(&cfg),
        Command::Ctr(CtrCommand::Train(_)) => ctr::train(&cfg),
        Command::Ctr(CtrCommand::Eval(a)) => ctr::eval(&cfg, a.split),
        Command::Report(_) => report::report(&cfg),
    }
}
