//! `aidfx` — config-driven study runner for observational causal effect
//! estimation, plus DAG validation and synthetic benchmark data generation.
//!
//! Exit codes: 0 = success (all grid cells estimated), 2 = study completed
//! with some inestimable cells, 1 = fatal error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use aidfx_core::scm;
use aidfx_core::study::{emit_report, run_study, OutputFormat, StudyConfig};

#[derive(Parser)]
#[command(name = "aidfx", version, about = "Observational causal effect studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full study from a TOML config and write the report.
    Run(RunArgs),
    /// Inspect a causal DAG file.
    Dag {
        #[command(subcommand)]
        command: DagCommand,
    },
    /// Generate synthetic benchmark data as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the study config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, default_value = "text")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum DagCommand {
    /// Validate a DAG file and print its adjustment sets.
    Check { path: PathBuf },
}

#[derive(Args)]
struct SynthArgs {
    /// Benchmark name (see `synth --spec list`) or `somalia-fixture`.
    #[arg(long)]
    spec: String,
    /// Number of rows to sample (ignored by `somalia-fixture`, which has
    /// a fixed shape).
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Dag { command: DagCommand::Check { path } } => cmd_dag_check(&path).map(|()| 0),
        Command::Synth(args) => cmd_synth(args).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let mut config = StudyConfig::from_toml_path(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    let report = run_study(&config)?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating output directory {}", config.out_dir.display()))?;
    let path = emit_report(&report, args.format, &config.out_dir)?;
    let estimated =
        report.cells.iter().filter(|c| !matches!(c.outcome,
            aidfx_core::study::CellOutcome::Inestimable { .. })).count();
    println!(
        "wrote {} ({} of {} cells estimated)",
        path.display(),
        estimated,
        report.cells.len()
    );
    Ok(if report.all_estimated() { 0 } else { 2 })
}

fn cmd_dag_check(path: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let dag = aidfx_core::graph::parse_dag(&text, None, None)?;
    println!(
        "{} nodes, {} edges, treatment `{}`, outcome `{}`",
        dag.node_count(),
        dag.edge_count(),
        dag.treatment(),
        dag.outcome()
    );
    let parents = dag.parent_adjustment_set();
    println!("parent adjustment set: {}", format_set(&parents));
    let ok = dag.backdoor_satisfied(&parents.members)?;
    println!("backdoor criterion: {}", if ok { "satisfied" } else { "NOT satisfied" });
    let minimal = dag.minimal_backdoor_sets(dag.node_count());
    if minimal.is_empty() {
        println!("no minimal backdoor set found");
    } else {
        println!("minimal backdoor sets:");
        for set in &minimal {
            println!("  {}", format_set(set));
        }
    }
    Ok(())
}

fn format_set(set: &aidfx_core::AdjustmentSet) -> String {
    let names: Vec<&str> = set.members.iter().map(String::as_str).collect();
    format!("{{{}}}", names.join(", "))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.spec == "list" {
        for (name, _) in scm::benchmark_suite() {
            println!("{name}");
        }
        println!("somalia-fixture");
        return Ok(());
    }
    let table = if args.spec == "somalia-fixture" {
        scm::somalia_fixture(args.seed)
    } else {
        let spec = scm::benchmark(&args.spec)?;
        spec.sample(args.n, args.seed)
    };
    if table.n_rows() == 0 {
        bail!("no rows generated");
    }
    table
        .write_csv(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} ({} rows)", args.out.display(), table.n_rows());
    Ok(())
}
