use std::path::PathBuf;

use bdg_cli::{run, RunOptions, Task};
use clap::Parser;

/// Run one bosonic BdG job described by a TOML file.
#[derive(Parser)]
#[command(name = "bdg", version)]
struct Args {
    /// Job file.
    config: PathBuf,
    /// Override the task named in the job file.
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Also write a matplotlib script for the CSV outputs.
    #[arg(long)]
    emit_plotscript: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let opts = RunOptions {
        task: args.task,
        emit_plotscript: args.emit_plotscript,
    };
    std::process::exit(run(&args.config, &opts));
}
