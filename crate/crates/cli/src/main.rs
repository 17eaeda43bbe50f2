use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<_> = std::env::args_os().collect();
    if argv.iter().skip(1).any(|a| a == "-h" || a == "--help" || a == "-V" || a == "--version" || a == "help") {
        if let Err(e) = semcode_cli::args::Cli::try_parse_from(&argv) {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
        }
    }
    match semcode_cli::run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
