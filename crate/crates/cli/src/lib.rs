//! The `forge` command: one subcommand per pipeline stage over a single
//! JSON config.
//!
//! Every stage reads the previous stage's artifacts from the work
//! directory, refuses to run when they are missing, and records checksums
//! and counts in `manifest.json`.

pub mod bundle;
pub mod config;
pub mod manifest;
pub mod stages;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use config::{LoadedConfig, PipelineConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("stage `{stage}` needs {path}; run the earlier stages first")]
    MissingInput { stage: &'static str, path: PathBuf },
    #[error("provider: {0}")]
    Provider(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingInput { .. } => 3,
            CliError::Provider(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput { .. } => "missing_input",
            CliError::Provider(_) => "provider",
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Internal(format!("{}: {e}", path.display()))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Curate and search a corpus of 30-day challenges")]
pub struct Cli {
    /// Pipeline config (JSON). Relative paths inside resolve against its
    /// directory. Defaults apply when omitted.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set dedup.high=0.75`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest SERP files, drop blocked domains, fetch pages.
    Collect,
    /// Score pages with the judge and keep likely challenge sources.
    Filter,
    /// Extract challenge records from kept pages.
    Extract,
    /// Deduplicate extracted challenges.
    Dedup,
    /// Embed the deduplicated corpus and write the store.
    Index,
    /// Run one search and print the response as JSON.
    Search {
        #[arg(long)]
        wish: String,
        #[arg(short = 'k', long)]
        k: Option<usize>,
        /// Skip judge validation.
        #[arg(long)]
        no_validate: bool,
    },
    /// Serve the search API and the static UI bundle.
    Serve,
    /// Score search over the labeled query set.
    Eval,
    /// Write dedup audit worksheets.
    Audit,
    /// Run collect, filter, extract, dedup, index and eval in order.
    All,
    /// Regenerate the bundled fixture set into a directory.
    #[command(hide = true)]
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Fixtures { out } = &cli.command {
        return bundle::write_bundle(out);
    }
    let cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Collect => stages::collect(&cfg),
        Command::Filter => stages::filter(&cfg),
        Command::Extract => stages::extract(&cfg),
        Command::Dedup => stages::dedup(&cfg),
        Command::Index => stages::index(&cfg),
        Command::Search { wish, k, no_validate } => {
            let mut request = cfg.search_request(&wish);
            if let Some(k) = k {
                request.k = k;
                request.retrieve_k = request.retrieve_k.max(k);
            }
            if no_validate {
                request.validate = false;
            }
            let response = stages::search(&cfg, &request)?;
            println!("{}", serde_json::to_string_pretty(&response).expect("response serializes"));
            Ok(())
        }
        Command::Serve => stages::serve(&cfg),
        Command::Eval => stages::eval(&cfg).map(|report| {
            eprint!("{}", forge_core::eval::harness::summary_table(&report));
        }),
        Command::Audit => stages::audit(&cfg),
        Command::All => stages::all(&cfg),
        Command::Fixtures { .. } => unreachable!("handled above"),
    }
}
