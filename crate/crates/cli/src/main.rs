use std::process::ExitCode;

use clap::Parser;
use madd_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let echo = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    match run(&cli.command, &echo) {
        Ok(report) => {
            match &report.csv {
                Some(text) => print!("{text}"),
                None => println!("{}", serde_json::to_string_pretty(&report.outputs).expect("json")),
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("wall time: {:.3} s", report.wall_time_s);
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
