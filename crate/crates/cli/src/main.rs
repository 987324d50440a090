//! Command-line front end: `gridex run` processes a document
//! collection with a project's design artifacts and writes the
//! semantic view; `gridex validate` checks the artifacts without
//! touching any documents.
//!
//! Exit codes: 0 success, 1 configuration error, 2 at least one
//! document failed (the rest are still processed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridex::project::{load_project, run_pipeline, validate_project, RunOptions};

#[derive(Parser)]
#[command(name = "gridex", version, about = "Rule-driven extraction from grid documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a directory of documents.
    Run {
        /// Project file (TOML).
        #[arg(long)]
        project: PathBuf,
        /// Directory of input documents (.json grid files, .txt
        /// two-column text).
        #[arg(long)]
        input: PathBuf,
        /// Output directory for the view files.
        #[arg(long)]
        out: PathBuf,
        /// Split column for .txt inputs (overrides the project file).
        #[arg(long)]
        split_col: Option<usize>,
        /// Write per-document fact dumps under <out>/facts/.
        #[arg(long)]
        emit_facts: bool,
        /// Write the compiled descriptor rules to <out>/rules.dl.
        #[arg(long)]
        emit_rules: bool,
        /// Worker threads for document processing.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Load and cross-check a project's design artifacts.
    Validate {
        #[arg(long)]
        project: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            project,
            input,
            out,
            split_col,
            emit_facts,
            emit_rules,
            jobs,
        } => {
            let loaded = match load_project(&project) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let opts = RunOptions {
                split_col,
                emit_facts,
                emit_rules,
                jobs,
            };
            match run_pipeline(&loaded, &input, &out, &opts) {
                Ok(summary) => {
                    println!(
                        "processed {} document(s), {} failure(s), {} violation(s); view written to {}",
                        summary.processed,
                        summary.failures.len(),
                        summary.violation_count,
                        out.display()
                    );
                    if summary.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        for (doc, msg) in &summary.failures {
                            eprintln!("failed: {doc}: {msg}");
                        }
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Validate { project } => {
            let report = validate_project(&project);
            print!("{}", report.render());
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
