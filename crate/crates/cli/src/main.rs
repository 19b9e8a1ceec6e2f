//! `contagion` command-line tool.

mod artifacts;
mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use serde_json::json;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Core(contagion_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(_) => "input",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<contagion_core::Error> for CliError {
    fn from(e: contagion_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let matches = match config::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim().to_owned())),
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cfg = RunConfig::resolve(name, sub)?;
    if let Some(w) = cfg.opt::<usize>("workers")? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    }
    commands::dispatch(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code())
        }
    }
}
