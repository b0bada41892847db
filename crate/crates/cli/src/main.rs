//! Command-line front end for the warehouse benchmark pipeline.
//!
//! The subcommands mirror the pipeline stages:
//!
//! - `estimate` prices a parameter set without generating anything,
//! - `generate` materializes the warehouse (DDL, data files, manifest),
//! - `workload` derives the query workload for a generated warehouse,
//! - `execute` times a workload against an execution target,
//! - `report` compares timing runs and prints gain figures.
//!
//! Every stage is deterministic in the seed: the same seed and parameters
//! produce byte-identical artifacts, regardless of table generation order
//! or parallelism.

mod config;
mod engines;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dwbench_core::emit::{
    emit_warehouse, read_manifest, write_manifest, write_workload_file, DataFormat, EmitOptions,
    Manifest,
};
use dwbench_core::exec::{
    build_gain_report, export_timings, import_timings, read_workload_script, run_workload,
    TimingRecord, TimingStatus,
};
use dwbench_core::model::{LowLevelParams, SchemaModel};
use dwbench_core::random::{Streams, StringReferential};
use dwbench_core::schema::{build_schema, derive_low_level, estimate_size};
use dwbench_core::workload::generate_workload;

use config::{Overrides, Resolved, SchemaSource};

#[derive(Parser)]
#[command(
    name = "dwbench",
    version,
    about = "Deterministic decision-support benchmark: schema synthesis, data generation, CUBE/ROLLUP workloads, and timing reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict table row counts and data volume without generating anything.
    Estimate(SchemaArgs),
    /// Generate the warehouse: DDL, data files, and a manifest.
    Generate(GenerateArgs),
    /// Generate the query workload for an existing warehouse.
    Workload(WorkloadArgs),
    /// Run a workload against an execution target and record timings.
    Execute(ExecuteArgs),
    /// Compare timing runs and report gains.
    Report(ReportArgs),
}

#[derive(Args)]
struct SchemaArgs {
    /// TOML config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in warehouse preset (dw1, dw2, dw3).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Master seed for every generation stage (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Standard deviation of derivation draws as a fraction of the mean.
    #[arg(long, value_name = "RATIO")]
    spread_ratio: Option<f64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// Output directory for schema.sql, data files, and the manifest.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Data file format: dat (delimited flat files) or sql (insert scripts).
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
    /// Generate tables on one thread each; output is byte-identical.
    #[arg(long)]
    parallel: bool,
    /// Refuse fact tables spanning more key combinations than this.
    #[arg(long, value_name = "N")]
    max_combinations: Option<u64>,
}

#[derive(Args)]
struct WorkloadArgs {
    /// Warehouse directory holding the manifest of a previous `generate`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override the manifest's NB_Q for this run.
    #[arg(long, value_name = "N")]
    queries: Option<u64>,
}

#[derive(Args)]
struct ExecuteArgs {
    /// Workload script to run.
    #[arg(long, value_name = "FILE")]
    workload: PathBuf,
    /// Execution target: sqlite:<path>, sqlite::memory:, or grammar:.
    #[arg(long, value_name = "ENGINE")]
    connection: String,
    /// Measured passes over the workload.
    #[arg(long, default_value_t = 1, value_name = "N")]
    runs: u64,
    /// Unmeasured warmup passes before timing starts.
    #[arg(long, default_value_t = 0, value_name = "N")]
    warmup: u64,
    /// Warehouse directory; its manifest is checked against the script.
    #[arg(long, value_name = "DIR")]
    warehouse: Option<PathBuf>,
    /// Load schema.sql and the data files from --warehouse before running
    /// (requires the warehouse to be generated with --format sql).
    #[arg(long, requires = "warehouse")]
    load: bool,
    /// Write per-query timings to this CSV file.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Timing CSV of the reference configuration.
    #[arg(long, value_name = "FILE")]
    reference: PathBuf,
    /// Timing CSV of a candidate configuration; repeatable.
    #[arg(long, value_name = "FILE", required = true)]
    candidate: Vec<PathBuf>,
    /// Print the report as CSV instead of an aligned table.
    #[arg(long)]
    csv: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Estimate(args) => estimate(args),
        Command::Generate(args) => generate(args),
        Command::Workload(args) => workload(args),
        Command::Execute(args) => execute(args),
        Command::Report(args) => report(args),
    }
}

fn resolve_schema_args(args: &SchemaArgs, overrides: Overrides) -> Result<Resolved> {
    let file = args.config.as_deref().map(config::load_file).transpose()?;
    let overrides = Overrides {
        preset: args.preset.clone(),
        seed: args.seed,
        spread_ratio: args.spread_ratio,
        ..overrides
    };
    config::resolve(file, &overrides)
}

/// Expands the schema source into exact parameters. High-level averages are
/// derived with the seed's derivation substream; presets and low-level
/// sections pass through unchanged.
fn low_level_params(resolved: &Resolved) -> LowLevelParams {
    match &resolved.source {
        SchemaSource::Preset(p) => p.low_level.clone(),
        SchemaSource::LowLevel(low) => low.clone(),
        SchemaSource::HighLevel(high) => derive_low_level(
            high,
            resolved.spread_ratio,
            &mut Streams::new(resolved.seed).derive(),
        ),
    }
}

/// Builds the schema a seed and parameter set describe. This is the single
/// wiring point between seeds and schema instantiation; `generate` and
/// `workload` both go through it, so a manifest always rebuilds the exact
/// schema its warehouse was generated from.
fn schema_for(low: &LowLevelParams, seed: u64) -> Result<SchemaModel> {
    build_schema(low, &mut Streams::new(seed).schema()).map_err(Into::into)
}

fn estimate(args: SchemaArgs) -> Result<()> {
    let resolved = resolve_schema_args(&args, Overrides::default())?;
    let low = low_level_params(&resolved);
    let schema = schema_for(&low, resolved.seed)?;
    let estimate = estimate_size(&schema)?;

    println!(
        "{} schema from {} (seed {})",
        schema.class, resolved.source, resolved.seed
    );
    if let SchemaSource::Preset(p) = &resolved.source {
        println!("{}: {}", p.name, p.description);
    }
    let name_width = estimate
        .tables
        .iter()
        .map(|t| t.table_name.len())
        .chain(["table".len()])
        .max()
        .unwrap();
    println!("{:<name_width$}  {:>14}  {:>14}", "table", "rows", "bytes");
    for table in &estimate.tables {
        println!(
            "{:<name_width$}  {:>14.0}  {:>14.0}",
            table.table_name, table.rows, table.bytes
        );
    }
    println!(
        "{:<name_width$}  {:>14.0}  {:>14.0}",
        "total", estimate.total_rows, estimate.total_bytes
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let format_override = args
        .format
        .as_deref()
        .map(|s| s.parse::<DataFormat>().map_err(anyhow::Error::msg))
        .transpose()?;
    let resolved = resolve_schema_args(
        &args.schema,
        Overrides {
            format: format_override,
            parallel: args.parallel,
            max_combinations: args.max_combinations,
            ..Overrides::default()
        },
    )?;
    let low = low_level_params(&resolved);
    let schema = schema_for(&low, resolved.seed)?;
    let pool = StringReferential::from_seed(resolved.seed);
    let streams = Streams::new(resolved.seed);

    let options = EmitOptions {
        format: resolved.format,
        parallel: resolved.parallel,
        combination_cap: resolved.combination_cap,
        ..EmitOptions::default()
    };
    let report = emit_warehouse(&schema, &pool, &streams, &args.out, &options)?;

    let manifest = Manifest {
        seed: resolved.seed,
        spread_ratio: resolved.spread_ratio,
        format: resolved.format.to_string(),
        schema_class: schema.class.to_string(),
        schema_fingerprint: schema.fingerprint(),
        total_bytes: report.total_bytes,
        low_level: low,
        workload: resolved.workload.clone(),
        tables: report.tables.clone(),
    };
    write_manifest(&args.out, &manifest)?;

    let rows: u64 = report.tables.iter().map(|t| t.rows).sum();
    println!(
        "generated {} warehouse in {}: {} tables, {} rows, {} bytes (seed {}, format {})",
        schema.class,
        args.out.display(),
        report.tables.len(),
        rows,
        report.total_bytes,
        resolved.seed,
        resolved.format,
    );
    Ok(())
}

fn workload(args: WorkloadArgs) -> Result<()> {
    let manifest = read_manifest(&args.out)?;
    let schema = schema_for(&manifest.low_level, manifest.seed)?;
    if schema.fingerprint() != manifest.schema_fingerprint {
        bail!(
            "manifest fingerprint {} does not match the schema rebuilt from its parameters; \
             the warehouse was generated by an incompatible version",
            manifest.schema_fingerprint
        );
    }

    let mut params = manifest.workload.clone();
    if let Some(n) = args.queries {
        params.nb_queries = n;
    }
    let pool = StringReferential::from_seed(manifest.seed);
    let workload = generate_workload(
        &schema,
        &pool,
        &params,
        manifest.spread_ratio,
        &Streams::new(manifest.seed),
    );
    write_workload_file(&args.out, &workload)?;

    let initial = workload.initial_queries().count();
    println!(
        "wrote {} queries ({} initial, {} drill-down) to {}",
        workload.len(),
        initial,
        workload.len() - initial,
        args.out.join("workload.sql").display(),
    );
    Ok(())
}

fn execute(args: ExecuteArgs) -> Result<()> {
    let text = fs::read_to_string(&args.workload)
        .with_context(|| format!("cannot read workload {}", args.workload.display()))?;
    let script = read_workload_script(&text)?;
    if script.entries.is_empty() {
        bail!("workload {} contains no queries", args.workload.display());
    }

    let mut session = engines::open_session(&args.connection)?;

    if let Some(dir) = &args.warehouse {
        let manifest = read_manifest(dir)?;
        match &script.schema_fingerprint {
            Some(fp) if *fp != manifest.schema_fingerprint => eprintln!(
                "warning: workload was generated for schema {fp}, \
                 but {} holds schema {}; results may be meaningless",
                dir.display(),
                manifest.schema_fingerprint
            ),
            None => eprintln!("warning: workload names no schema fingerprint; skipping the check"),
            _ => {}
        }
        if args.load {
            load_warehouse(session.as_mut(), dir, &manifest)?;
        }
    }

    let run = run_workload(session.as_mut(), &script.entries, args.runs, args.warmup);

    if let Some(path) = &args.csv {
        let file =
            fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        export_timings(&run.records, file)?;
    }
    print_run_summary(&run.records);

    if run.aborted {
        bail!("connection lost; timings above are partial");
    }
    Ok(())
}

fn load_warehouse(
    session: &mut dyn dwbench_core::exec::SqlSession,
    dir: &Path,
    manifest: &Manifest,
) -> Result<()> {
    if manifest.format != DataFormat::Sql.to_string() {
        bail!(
            "--load needs insert scripts; regenerate the warehouse with --format sql \
             (manifest says format {})",
            manifest.format
        );
    }
    let ddl_path = dir.join("schema.sql");
    let ddl = fs::read_to_string(&ddl_path)
        .with_context(|| format!("cannot read {}", ddl_path.display()))?;
    session
        .execute(&ddl)
        .map_err(|e| anyhow::anyhow!("loading schema.sql failed: {e}"))?;
    for table in &manifest.tables {
        let path = dir.join("data").join(format!("{}.sql", table.name));
        let statements =
            fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let fail = |e| anyhow::anyhow!("loading {} failed: {e}", table.name);
        // Insert scripts hold one statement per line. Feed them one at a
        // time inside an explicit transaction: passing the whole script to
        // the session makes SQLite re-copy the remaining text for every
        // statement (quadratic on a million-row fact table), and autocommit
        // around each insert is slow even without that.
        session.execute("BEGIN;").map_err(fail)?;
        for statement in statements.lines().filter(|l| !l.is_empty()) {
            session.execute(statement).map_err(fail)?;
        }
        session.execute("COMMIT;").map_err(fail)?;
    }
    Ok(())
}

fn print_run_summary(records: &[TimingRecord]) {
    let ok = records.iter().filter(|r| r.status.is_ok()).count();
    let failed = records.len() - ok;
    let total_ms: u64 = records.iter().map(|r| r.elapsed_ms).sum();
    println!(
        "{} timed statements, {failed} failed, {total_ms} ms total",
        records.len()
    );
    for record in records.iter().filter(|r| !r.status.is_ok()) {
        if let TimingStatus::Error(message) = &record.status {
            println!("  {} run {}: {message}", record.query_id, record.run_index);
        }
    }
}

fn report(args: ReportArgs) -> Result<()> {
    let name_of = |path: &Path| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    };
    let read = |path: &Path| -> Result<Vec<TimingRecord>> {
        let file = fs::File::open(path)
            .with_context(|| format!("cannot open timings {}", path.display()))?;
        Ok(import_timings(file)?)
    };

    let reference = read(&args.reference)?;
    let reference_name = name_of(&args.reference);
    let mut candidates = Vec::with_capacity(args.candidate.len());
    for path in &args.candidate {
        candidates.push((name_of(path), read(path)?));
    }
    let candidate_refs: Vec<(&str, &[TimingRecord])> = candidates
        .iter()
        .map(|(name, records)| (name.as_str(), records.as_slice()))
        .collect();

    let report = build_gain_report((&reference_name, &reference), &candidate_refs)?;
    if args.csv {
        print!("{}", report.render_csv());
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}
