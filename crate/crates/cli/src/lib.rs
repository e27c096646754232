//! Batch front end for the bosonic BdG toolkit.
//!
//! A run reads one TOML job file, computes one task and writes its tables
//! (CSV or JSON) plus `manifest.json` into the output directory. Every data
//! file starts with the manifest hash, which depends only on the inputs and
//! the library version, so identical jobs give byte-identical data files.

pub mod config;
mod output;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{Format, JobConfig, Task};
pub use output::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent job file.
    Config { field: Option<String>, message: String },
    Library(bosonic_bdg::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Library(e) if e.is_numerical() => "numerical",
            CliError::Library(_) => "validation",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable form written to stderr and `error.json`.
    pub fn to_json(&self) -> serde_json::Value {
        let (field, message) = match self {
            CliError::Config { field, message } => (field.clone(), message.clone()),
            CliError::Library(e) => (None, e.to_string()),
            CliError::Io(m) => (None, m.clone()),
        };
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "field": field,
            "message": message,
        })
    }
}

impl From<bosonic_bdg::Error> for CliError {
    fn from(e: bosonic_bdg::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Command-line options beyond the config path.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub task: Option<Task>,
    pub emit_plotscript: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    hash: &'a str,
    task: &'static str,
    seed: u64,
    config: &'a JobConfig,
    outputs: &'a [String],
    wall_time_s: f64,
}

/// SHA-256 of the effective job and the library version. The output
/// directory is left out so that a job moved elsewhere keeps its hash.
pub fn manifest_hash(cfg: &JobConfig) -> String {
    let job = (env!("CARGO_PKG_VERSION"), cfg.task, cfg.seed, &cfg.model, &cfg.params, cfg.output.format);
    let canonical = serde_json::to_string(&job).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn load(path: &Path, opts: &RunOptions) -> Result<JobConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        field: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = JobConfig::parse(&text)?;
    if let Some(t) = opts.task {
        cfg.task = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn execute(cfg: &JobConfig, opts: &RunOptions) -> Result<Vec<String>, CliError> {
    let start = Instant::now();
    let hash = manifest_hash(cfg);
    info!("task {} on model {:?}, manifest {hash}", cfg.task.name(), cfg.model.name);
    let result = tasks::run_task(cfg)?;
    fs::create_dir_all(&cfg.output.dir)?;
    // a stale error report from an earlier failed run would be misleading
    let _ = fs::remove_file(cfg.output.dir.join("error.json"));
    let mut outputs = output::write(&cfg.output.dir, cfg.output.format, cfg.task.name(), &hash, &result)?;
    if opts.emit_plotscript {
        outputs.push(output::write_plotscript(&cfg.output.dir, &outputs)?);
    }
    let manifest = Manifest {
        tool: "bdg",
        version: env!("CARGO_PKG_VERSION"),
        hash: &hash,
        task: cfg.task.name(),
        seed: cfg.seed,
        config: cfg,
        outputs: &outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(cfg.output.dir.join("manifest.json"), text + "\n")?;
    Ok(outputs)
}

/// Run the job in `config_path` and return the process exit code.
pub fn run(config_path: &Path, opts: &RunOptions) -> i32 {
    let mut out_dir: Option<PathBuf> = None;
    let outcome = load(config_path, opts).and_then(|cfg| {
        out_dir = Some(cfg.output.dir.clone());
        execute(&cfg, opts)
    });
    match outcome {
        Ok(files) => {
            info!("wrote {}", files.join(", "));
            EXIT_OK
        }
        Err(e) => {
            let json = e.to_json();
            eprintln!("{json}");
            if let Some(dir) = out_dir {
                if fs::create_dir_all(&dir).is_ok() {
                    let _ = fs::write(dir.join("error.json"), format!("{json}\n"));
                }
            }
            e.exit_code()
        }
    }
}
