mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use args::{Cli, Command, Format};
use output::{CliError, Document, RunConfig};

fn run(cli: &Cli) -> Result<commands::Outcome, CliError> {
    match &cli.command {
        Command::Bounds(a) => commands::bounds(a, cli.format),
        Command::Ci(a) => commands::ci(a, cli.format),
        Command::Derive(a) => commands::derive(a, cli.format),
        Command::Verify(a) => commands::verify(a, cli.format),
        Command::Reproduce(a) => commands::reproduce(a, cli.format),
        Command::DumpLp(a) => commands::dump_lp(a, cli.format),
    }
}

fn subcommand(c: &Command) -> &'static str {
    match c {
        Command::Bounds(_) => "bounds",
        Command::Ci(_) => "ci",
        Command::Derive(_) => "derive",
        Command::Verify(_) => "verify",
        Command::Reproduce(_) => "reproduce",
        Command::DumpLp(_) => "dump-lp",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            match cli.format {
                Format::Json => println!("{}", Document::new(out.config, out.results, out.diagnostics).to_json()),
                Format::Human => print!("{}", out.human),
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: {}", CliError::Failed("verification found violations".into()).message());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if cli.format == Format::Json {
                let cfg = RunConfig {
                    subcommand: subcommand(&cli.command).into(),
                    format: "json".into(),
                    ..Default::default()
                };
                println!("{}", Document::new(cfg, Value::Null, e.diagnostics()).to_json());
            }
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
