use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hum_core::session::run_script;
use hum_core::{Session, SessionConfig};

#[derive(Parser)]
#[command(name = "hum", version, about = "Symbolic probabilistic inference over an ATMS")]
struct Cli {
    #[command(subcommand)]
    command: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Read commands interactively.
    Repl,
    /// Run a script of commands.
    Run {
        script: PathBuf,
        /// Cross-check every query against brute-force enumeration.
        #[arg(long)]
        verify: bool,
        /// Run every command even after a failure.
        #[arg(long)]
        keep_going: bool,
        /// Print the full transcript, inputs included.
        #[arg(long)]
        echo: bool,
    },
    /// Serve sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = SessionConfig::from_env();
    match cli.command {
        Mode::Repl => repl(config),
        Mode::Run { script, verify, keep_going, echo } => {
            run(script, SessionConfig { verify, ..config }, keep_going, echo)
        }
        Mode::Serve { port } => serve(port, config),
    }
}

fn run(script: PathBuf, config: SessionConfig, keep_going: bool, echo: bool) -> ExitCode {
    let report = match run_script(&script, config, keep_going) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hum: {e}");
            return ExitCode::FAILURE;
        }
    };
    if echo {
        print!("{}", report.transcript.render());
    } else {
        for entry in &report.transcript.entries {
            for line in &entry.lines {
                println!("{line}");
            }
        }
    }
    for (line, e) in &report.errors {
        eprintln!("hum: {}:{line}: {e}", script.display());
    }
    if report.succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn depth(text: &str) -> i64 {
    let mut d = 0;
    for line in text.lines() {
        let code = line.split(';').next().unwrap_or("");
        d += code.matches('(').count() as i64 - code.matches(')').count() as i64;
    }
    d
}

fn repl(config: SessionConfig) -> ExitCode {
    let mut session = Session::new(config);
    let stdin = io::stdin();
    let mut buffer = String::new();
    let prompt = |pending: bool| {
        print!("{}", if pending { "  " } else { "> " });
        let _ = io::stdout().flush();
    };
    prompt(false);
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        buffer.push_str(&line);
        buffer.push('\n');
        if depth(&buffer) > 0 {
            prompt(true);
            continue;
        }
        let text = std::mem::take(&mut buffer);
        let blank = text.lines().all(|l| l.split(';').next().unwrap_or("").trim().is_empty());
        if !blank {
            match session.execute(&text) {
                Ok(outcome) => outcome.lines.iter().for_each(|l| println!("{l}")),
                Err(e) => eprintln!("error: {e}"),
            }
        }
        prompt(false);
    }
    println!();
    ExitCode::SUCCESS
}

fn serve(port: u16, config: SessionConfig) -> ExitCode {
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("hum: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("hum: serving on http://127.0.0.1:{port}");
    match runtime.block_on(hum_service::serve(port, config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hum: {e}");
            ExitCode::FAILURE
        }
    }
}
