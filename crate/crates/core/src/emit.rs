//! Artifact emission: DDL, data files, workload scripts, and the manifest.
//!
//! A generated warehouse lands in one output directory:
//!
//! ```text
//! <out>/schema.sql        CREATE TABLE statements, referenced tables first
//! <out>/data/<TABLE>.dat  one delimited flat file per table (or .sql for
//!                         INSERT scripts, depending on the data format)
//! <out>/workload.sql      the workload script, written by the workload step
//! <out>/manifest          TOML description of what was generated
//! ```
//!
//! Everything written here is deterministic: given the same seed, parameters,
//! and format, every file is byte-identical across runs, platforms, and
//! whether tables were generated sequentially or in parallel. The manifest
//! records the exact low-level parameters and seed, so later steps (workload
//! generation, execution) can rebuild the identical schema.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    generate_level, stream_fact_rows, DataError, TableExtension, Value, DEFAULT_COMBINATION_CAP,
};
use crate::model::{
    AttributeKind, DimensionSpec, FactTableSpec, LevelSpec, LowLevelParams, SchemaModel,
    WorkloadParams,
};
use crate::random::{Streams, StringReferential};
use crate::workload::{sql::render_sql, Workload};

/// Column separator of the delimited flat-file format.
pub const FIELD_SEPARATOR: char = '|';

/// File name of the manifest inside an output directory.
pub const MANIFEST_FILE: &str = "manifest";

/// File name of the workload script inside an output directory.
pub const WORKLOAD_FILE: &str = "workload.sql";

/// How table data is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Delimited flat files, one row per line, `|`-separated, no header.
    Dat,
    /// INSERT scripts, one statement per row.
    Sql,
}

impl DataFormat {
    pub fn file_extension(&self) -> &'static str {
        match self {
            DataFormat::Dat => "dat",
            DataFormat::Sql => "sql",
        }
    }
}

impl std::fmt::Display for DataFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.file_extension())
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dat" => Ok(DataFormat::Dat),
            "sql" => Ok(DataFormat::Sql),
            other => Err(format!("unknown data format {other}; expected dat or sql")),
        }
    }
}

/// SQL type names used by the DDL emitter. The default suits standard SQL
/// engines; fields are public so a caller can override individual type names
/// for an engine with different spellings.
#[derive(Debug, Clone)]
pub struct SqlDialect {
    /// Type for key columns.
    pub key_type: &'static str,
    /// Type for measure columns.
    pub measure_type: &'static str,
    /// Type template for fixed-width descriptor columns; `{}` receives the
    /// character count.
    pub char_type: &'static str,
}

impl Default for SqlDialect {
    fn default() -> Self {
        Self {
            key_type: "INTEGER",
            measure_type: "REAL",
            char_type: "CHAR",
        }
    }
}

impl SqlDialect {
    fn char_column(&self, width: usize) -> String {
        format!("{}({width})", self.char_type)
    }
}

/// Renders the CREATE TABLE script for a schema.
///
/// Tables appear in dependency order (coarsest dimension levels first, fact
/// tables last), so the script loads into any engine that checks foreign
/// keys eagerly. Descriptor columns are fixed-width characters sized for
/// `name + '_' + 20` pool characters; fact tables use the composite of their
/// foreign keys as primary key.
pub fn emit_ddl(schema: &SchemaModel, dialect: &SqlDialect) -> String {
    let mut statements = Vec::new();
    for (_, level) in schema.level_tables() {
        let mut lines = Vec::new();
        for attr in &level.attributes {
            let sql_type = match &attr.kind {
                AttributeKind::PrimaryKey | AttributeKind::ForeignKey { .. } => {
                    dialect.key_type.to_string()
                }
                AttributeKind::Descriptor => dialect.char_column(attr.name.len() + 21),
                AttributeKind::Measure => unreachable!("dimension levels have no measures"),
            };
            lines.push(format!("    {} {} NOT NULL", attr.name, sql_type));
        }
        lines.push(format!("    PRIMARY KEY ({})", level.primary_key().name));
        if let Some(fk) = level.coarser_key() {
            let AttributeKind::ForeignKey { references } = &fk.kind else {
                unreachable!()
            };
            lines.push(format!(
                "    FOREIGN KEY ({}) REFERENCES {references} ({})",
                fk.name, fk.name
            ));
        }
        statements.push(format!(
            "CREATE TABLE {} (\n{}\n);",
            level.table_name,
            lines.join(",\n")
        ));
    }

    for fact in &schema.fact_tables {
        let fks = schema.fact_foreign_keys(fact);
        let mut lines = Vec::new();
        for fk in &fks {
            lines.push(format!("    {} {} NOT NULL", fk.name, dialect.key_type));
        }
        for measure in &fact.measures {
            lines.push(format!(
                "    {} {} NOT NULL",
                measure.name, dialect.measure_type
            ));
        }
        let key_list = fks
            .iter()
            .map(|a| a.name.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        lines.push(format!("    PRIMARY KEY ({key_list})"));
        for fk in &fks {
            let AttributeKind::ForeignKey { references } = &fk.kind else {
                unreachable!()
            };
            lines.push(format!(
                "    FOREIGN KEY ({}) REFERENCES {references} ({})",
                fk.name, fk.name
            ));
        }
        statements.push(format!(
            "CREATE TABLE {} (\n{}\n);",
            fact.table_name,
            lines.join(",\n")
        ));
    }

    statements.join("\n\n") + "\n"
}

/// Formats a measure or threshold value with 6 significant digits.
///
/// The format is a fixpoint under parse-and-reformat: formatting the parsed
/// value reproduces the same text, which keeps rendered SQL and emitted data
/// stable through round trips.
pub fn format_measure(value: f64) -> String {
    assert!(value.is_finite(), "measure values are finite");
    let first = format_with_digits(value, int_digits(value));
    let int_len = first.split('.').next().unwrap_or(&first).len();
    if int_len > int_digits(value) {
        // Rounding carried into a new integer digit (999.9996 -> 1000.00);
        // reformat so the total stays at 6 significant digits.
        format_with_digits(value, int_len)
    } else {
        first
    }
}

fn format_with_digits(value: f64, digits_before: usize) -> String {
    let precision = 6usize.saturating_sub(digits_before);
    format!("{value:.precision$}")
}

fn int_digits(value: f64) -> usize {
    let a = value.abs();
    let mut digits = 1;
    let mut threshold = 10.0;
    while a >= threshold && digits < 17 {
        digits += 1;
        threshold *= 10.0;
    }
    digits
}

fn format_value(value: &Value) -> String {
    match value {
        Value::Int(k) => k.to_string(),
        Value::Str(s) => s.clone(),
        Value::Float(m) => format_measure(*m as f64),
    }
}

/// Writes one materialized extension in the given format. Returns nothing;
/// callers wrap the writer in [`CountingWriter`] when they need byte counts.
pub fn write_extension(
    ext: &TableExtension,
    format: DataFormat,
    w: &mut impl Write,
) -> io::Result<()> {
    match format {
        DataFormat::Dat => {
            for row in &ext.rows {
                for (i, value) in row.iter().enumerate() {
                    if i > 0 {
                        write!(w, "{FIELD_SEPARATOR}")?;
                    }
                    w.write_all(format_value(value).as_bytes())?;
                }
                writeln!(w)?;
            }
        }
        DataFormat::Sql => {
            for row in &ext.rows {
                write!(w, "INSERT INTO {} VALUES (", ext.table_name)?;
                for (i, value) in row.iter().enumerate() {
                    if i > 0 {
                        write!(w, ", ")?;
                    }
                    match value {
                        Value::Str(s) => write!(w, "'{s}'")?,
                        other => w.write_all(format_value(other).as_bytes())?,
                    }
                }
                writeln!(w, ");")?;
            }
        }
    }
    Ok(())
}

fn write_fact_row(
    w: &mut impl Write,
    format: DataFormat,
    table: &str,
    keys: &[u64],
    measures: &[f32],
) -> io::Result<()> {
    match format {
        DataFormat::Dat => {
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    write!(w, "{FIELD_SEPARATOR}")?;
                }
                write!(w, "{k}")?;
            }
            for m in measures {
                write!(w, "{FIELD_SEPARATOR}{}", format_measure(*m as f64))?;
            }
            writeln!(w)
        }
        DataFormat::Sql => {
            write!(w, "INSERT INTO {table} VALUES (")?;
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    write!(w, ", ")?;
                }
                write!(w, "{k}")?;
            }
            for m in measures {
                write!(w, ", {}", format_measure(*m as f64))?;
            }
            writeln!(w, ");")
        }
    }
}

/// Write adapter that counts the bytes passing through it.
pub struct CountingWriter<W: Write> {
    inner: W,
    bytes: u64,
}

impl<W: Write> CountingWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner, bytes: 0 }
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("failed writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Options for warehouse emission.
#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub format: DataFormat,
    pub dialect: SqlDialect,
    /// Generate and write tables on one thread per table. Output is
    /// byte-identical either way; parallelism only changes wall-clock time.
    pub parallel: bool,
    /// Refuse fact tables spanning more combinations than this.
    pub combination_cap: u128,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self {
            format: DataFormat::Dat,
            dialect: SqlDialect::default(),
            parallel: false,
            combination_cap: DEFAULT_COMBINATION_CAP,
        }
    }
}

/// Rows and bytes written for one table's data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableFileEntry {
    pub name: String,
    pub rows: u64,
    pub bytes: u64,
}

/// Result of a warehouse emission: per-table files in canonical order plus
/// the total data volume (data files only; the DDL script is not counted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitReport {
    pub tables: Vec<TableFileEntry>,
    pub total_bytes: u64,
}

enum TableJob<'a> {
    Level {
        dim: &'a DimensionSpec,
        level: &'a LevelSpec,
    },
    Fact(&'a FactTableSpec),
}

impl TableJob<'_> {
    fn table_name(&self) -> &str {
        match self {
            TableJob::Level { level, .. } => &level.table_name,
            TableJob::Fact(fact) => &fact.table_name,
        }
    }
}

/// Generates the warehouse and writes `schema.sql` plus one data file per
/// table under `out_dir`.
///
/// Dimension levels are materialized and written whole; fact tables are
/// streamed row by row, so arbitrarily large fact tables need constant
/// memory. With `parallel` set, each table is generated and written by its
/// own thread; per-table substreams guarantee the files come out identical
/// to a sequential run.
pub fn emit_warehouse(
    schema: &SchemaModel,
    pool: &StringReferential,
    streams: &Streams,
    out_dir: &Path,
    options: &EmitOptions,
) -> Result<EmitReport, EmitError> {
    let data_dir = out_dir.join("data");
    fs::create_dir_all(&data_dir).map_err(|source| EmitError::Io {
        path: data_dir.clone(),
        source,
    })?;

    let schema_path = out_dir.join("schema.sql");
    fs::write(&schema_path, emit_ddl(schema, &options.dialect)).map_err(|source| {
        EmitError::Io {
            path: schema_path.clone(),
            source,
        }
    })?;

    let mut jobs = Vec::new();
    for dim in &schema.dimensions {
        for level in &dim.levels {
            jobs.push(TableJob::Level { dim, level });
        }
    }
    for fact in &schema.fact_tables {
        jobs.push(TableJob::Fact(fact));
    }

    let tables = if options.parallel {
        let data_dir = data_dir.as_path();
        thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|job| {
                    scope
                        .spawn(move || run_table_job(job, schema, pool, streams, options, data_dir))
                })
                .collect();
            // Join in job order so the report keeps canonical table order.
            handles
                .into_iter()
                .map(|h| h.join().expect("table generation thread panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        jobs.iter()
            .map(|job| run_table_job(job, schema, pool, streams, options, &data_dir))
            .collect::<Result<Vec<_>, _>>()?
    };

    let total_bytes = tables.iter().map(|t| t.bytes).sum();
    Ok(EmitReport {
        tables,
        total_bytes,
    })
}

fn run_table_job(
    job: &TableJob<'_>,
    schema: &SchemaModel,
    pool: &StringReferential,
    streams: &Streams,
    options: &EmitOptions,
    data_dir: &Path,
) -> Result<TableFileEntry, EmitError> {
    let name = job.table_name().to_string();
    let path = data_dir.join(format!("{name}.{}", options.format.file_extension()));
    let io_err = |source| EmitError::Io {
        path: path.clone(),
        source,
    };

    let file = File::create(&path).map_err(io_err)?;
    let mut writer = CountingWriter::new(BufWriter::new(file));
    let rows = match job {
        TableJob::Level { dim, level } => {
            let ext = generate_level(dim, level.level_index, pool, streams);
            write_extension(&ext, options.format, &mut writer).map_err(io_err)?;
            ext.rows.len() as u64
        }
        TableJob::Fact(fact) => stream_fact_rows(
            schema,
            fact,
            streams,
            options.combination_cap,
            &mut |keys, measures| {
                write_fact_row(&mut writer, options.format, &name, keys, measures)
            },
        )
        .map_err(|e| match e {
            DataError::Io(source) => EmitError::Io {
                path: path.clone(),
                source,
            },
            other => EmitError::Data(other),
        })?,
    };
    writer.flush().map_err(io_err)?;
    Ok(TableFileEntry {
        name,
        rows,
        bytes: writer.bytes(),
    })
}

/// Manifest of a generated warehouse: everything needed to rebuild the
/// schema, regenerate the workload, and sanity-check artifact integrity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub spread_ratio: f64,
    /// Data format the tables were written in (`dat` or `sql`).
    pub format: String,
    pub schema_class: String,
    pub schema_fingerprint: String,
    pub total_bytes: u64,
    /// Exact parameters the schema was built from.
    pub low_level: LowLevelParams,
    /// Workload parameters to use (or used) for this warehouse.
    pub workload: WorkloadParams,
    pub tables: Vec<TableFileEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("no manifest found at {path}; generate the warehouse first")]
    Missing { path: PathBuf },
    #[error("failed reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
}

/// Writes the manifest into `dir`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), EmitError> {
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(manifest).expect("manifest serialization cannot fail");
    fs::write(&path, text).map_err(|source| EmitError::Io { path, source })
}

/// Reads the manifest from `dir`.
pub fn read_manifest(dir: &Path) -> Result<Manifest, ManifestError> {
    let path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(ManifestError::Missing { path })
        }
        Err(source) => return Err(ManifestError::Io { path, source }),
    };
    toml::from_str(&text).map_err(|source| ManifestError::Parse {
        path,
        source: Box::new(source),
    })
}

/// Writes a workload script: a header naming the seed, parameters, and
/// schema fingerprint, then one annotated SQL statement per query.
///
/// Each query is introduced by a comment of the form
/// `-- Q<i>[.D<k>] kind=<olap|extraction|drilldown> parent=<id|none>`,
/// followed by its SQL and a terminating semicolon.
pub fn write_workload(workload: &Workload, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "-- seed={}", workload.seed)?;
    writeln!(w, "-- schema={}", workload.schema_fingerprint)?;
    let p = &workload.params;
    writeln!(
        w,
        "-- NB_Q={} AVG_NB_ATT={} AVG_NB_RESTR={} PROB_OLAP={} AVG_NB_AGGREG={} PROB_CUBE={} PROB_HAVING={} AVG_NB_DD={}",
        p.nb_queries,
        p.avg_nb_attributes,
        p.avg_nb_restrictions,
        p.prob_olap,
        p.avg_nb_aggregates,
        p.prob_cube,
        p.prob_having,
        p.avg_nb_drill_downs
    )?;
    for query in &workload.queries {
        writeln!(w)?;
        let parent = query
            .parent
            .map_or_else(|| "none".to_string(), |p| p.to_string());
        writeln!(w, "-- {} kind={} parent={}", query.id, query.kind, parent)?;
        writeln!(w, "{};", render_sql(&query.body))?;
    }
    Ok(())
}

/// Writes the workload script to `<dir>/workload.sql`.
pub fn write_workload_file(dir: &Path, workload: &Workload) -> Result<(), EmitError> {
    let path = dir.join(WORKLOAD_FILE);
    let io_err = |source| EmitError::Io {
        path: path.clone(),
        source,
    };
    let file = File::create(&path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    write_workload(workload, &mut writer).map_err(io_err)?;
    writer.flush().map_err(io_err)
}
