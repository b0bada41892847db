//! Synthetic data generation for instantiated schemas.
//!
//! Dimension levels are materialized as [`TableExtension`]s: sequential
//! surrogate keys, skewed pool-backed descriptor strings, and skewed foreign
//! keys into the next coarser level. Fact tables enumerate every combination
//! of entry-level keys in lexicographic order and keep each combination with
//! probability `DENSITY`, so the row count is binomial around
//! `DENSITY * product(cardinalities)` and every kept row is referentially
//! valid by construction.
//!
//! Each table draws from its own named substream
//! ([`Streams::table`]), which makes per-table generation independent:
//! tables can be generated in any order, selectively, or in parallel and
//! still produce identical rows.
//!
//! Fact rows can be streamed through a sink ([`stream_fact_rows`]) so
//! multi-gigabyte tables never need to exist in memory.

use std::io;

use thiserror::Error;

use crate::model::{Attribute, AttributeKind, DimensionSpec, FactTableSpec, SchemaModel};
use crate::random::{Streams, StringReferential};

/// Upper bound on fact-table key combinations generation will attempt.
///
/// Enumerating combinations is linear work; this cap refuses configurations
/// that would silently run for hours or fill the disk. Callers can raise it
/// deliberately.
pub const DEFAULT_COMBINATION_CAP: u128 = 1_000_000_000;

/// Measures are uniform floats in `[0, MEASURE_MAX)`.
pub const MEASURE_MAX: f64 = 10_000.0;

/// One generated value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Key value (primary or foreign).
    Int(u64),
    /// Descriptor string.
    Str(String),
    /// Measure. Single precision is plenty for synthetic measures and
    /// halves the memory of materialized fact tables.
    Float(f32),
}

/// A materialized table: column metadata plus rows in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct TableExtension {
    pub table_name: String,
    pub columns: Vec<Attribute>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(
        "fact table {table} spans {combinations} dimension-key combinations, \
         above the configured cap of {cap}; raise the combination cap to generate it anyway"
    )]
    CombinationsExceedCap {
        table: String,
        combinations: u128,
        cap: u128,
    },
    #[error("fact table {table} combination count overflows 128 bits")]
    CombinationOverflow { table: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Generates one level table of a dimension.
///
/// Per row, the draw order is fixed: descriptor values in column order, then
/// the foreign key into the coarser level (a skewed draw, so child rows
/// cluster on popular parents). Surrogate keys are sequential from 1 and
/// never consume randomness.
pub fn generate_level(
    dim: &DimensionSpec,
    level_index: u64,
    pool: &StringReferential,
    streams: &Streams,
) -> TableExtension {
    let level = &dim.levels[(level_index - 1) as usize];
    let coarser_cardinality =
        (level_index > 1).then(|| dim.levels[(level_index - 2) as usize].cardinality);
    let mut source = streams.table(&level.table_name);
    let mut rows = Vec::with_capacity(level.cardinality as usize);
    for key in 1..=level.cardinality {
        let mut row = Vec::with_capacity(level.attributes.len());
        for attr in &level.attributes {
            row.push(match &attr.kind {
                AttributeKind::PrimaryKey => Value::Int(key),
                AttributeKind::Descriptor => Value::Str(pool.pick(&mut source, &attr.name)),
                AttributeKind::ForeignKey { .. } => {
                    let parent = coarser_cardinality
                        .expect("foreign key only exists below the coarsest level");
                    Value::Int(source.skewed_index(parent))
                }
                AttributeKind::Measure => unreachable!("dimension levels have no measures"),
            });
        }
        rows.push(row);
    }
    TableExtension {
        table_name: level.table_name.clone(),
        columns: level.attributes.clone(),
        rows,
    }
}

/// Generates every level table of one dimension, coarsest first.
pub fn generate_dimension(
    dim: &DimensionSpec,
    pool: &StringReferential,
    streams: &Streams,
) -> Vec<TableExtension> {
    dim.levels
        .iter()
        .map(|level| generate_level(dim, level.level_index, pool, streams))
        .collect()
}

/// Number of entry-key combinations a fact table spans, checked against the
/// cap. This is the generation work and the row-count upper bound.
pub fn fact_combinations(
    schema: &SchemaModel,
    fact: &FactTableSpec,
    cap: u128,
) -> Result<u128, DataError> {
    let mut combinations = 1u128;
    for card in schema.entry_cardinalities(fact) {
        combinations = combinations.checked_mul(card as u128).ok_or_else(|| {
            DataError::CombinationOverflow {
                table: fact.table_name.clone(),
            }
        })?;
    }
    if combinations > cap {
        return Err(DataError::CombinationsExceedCap {
            table: fact.table_name.clone(),
            combinations,
            cap,
        });
    }
    Ok(combinations)
}

/// Receiver for streamed fact rows: entry keys, then measure values.
pub type FactRowSink<'a> = dyn FnMut(&[u64], &[f32]) -> io::Result<()> + 'a;

/// Streams a fact table's rows through `sink` without materializing them.
///
/// Combinations are enumerated lexicographically (first referenced dimension
/// most significant, last one fastest-varying). Per combination, one uniform
/// draw decides survival against the density; surviving rows then draw their
/// measures. The sink receives the entry keys (in `dimension_refs` order)
/// and the measures. Returns the number of rows emitted.
pub fn stream_fact_rows(
    schema: &SchemaModel,
    fact: &FactTableSpec,
    streams: &Streams,
    cap: u128,
    sink: &mut FactRowSink<'_>,
) -> Result<u64, DataError> {
    let cards = schema.entry_cardinalities(fact);
    let combinations = fact_combinations(schema, fact, cap)?;
    let mut source = streams.table(&fact.table_name);
    let mut keys = vec![1u64; cards.len()];
    let mut measures = vec![0f32; fact.measures.len()];
    let mut emitted = 0u64;
    for _ in 0..combinations {
        if source.uniform_float(0.0, 1.0) < fact.density {
            for m in measures.iter_mut() {
                *m = source.uniform_float(0.0, MEASURE_MAX) as f32;
            }
            sink(&keys, &measures)?;
            emitted += 1;
        }
        // Odometer increment: last key varies fastest.
        for i in (0..keys.len()).rev() {
            if keys[i] < cards[i] {
                keys[i] += 1;
                break;
            }
            keys[i] = 1;
        }
    }
    Ok(emitted)
}

/// Materializes one fact table. Convenient for tests and small runs; large
/// tables should go through [`stream_fact_rows`].
pub fn generate_fact_table(
    schema: &SchemaModel,
    fact: &FactTableSpec,
    streams: &Streams,
    cap: u128,
) -> Result<TableExtension, DataError> {
    let mut columns = schema.fact_foreign_keys(fact);
    columns.extend(fact.measures.iter().cloned());
    let mut rows = Vec::new();
    stream_fact_rows(schema, fact, streams, cap, &mut |keys, measures| {
        let mut row = Vec::with_capacity(keys.len() + measures.len());
        row.extend(keys.iter().map(|&k| Value::Int(k)));
        row.extend(measures.iter().map(|&m| Value::Float(m)));
        rows.push(row);
        Ok(())
    })?;
    Ok(TableExtension {
        table_name: fact.table_name.clone(),
        columns,
        rows,
    })
}

/// Materializes the whole warehouse in canonical table order: every
/// dimension level, then every fact table.
pub fn generate_warehouse(
    schema: &SchemaModel,
    pool: &StringReferential,
    streams: &Streams,
    cap: u128,
) -> Result<Vec<TableExtension>, DataError> {
    let mut extensions = Vec::new();
    for dim in &schema.dimensions {
        extensions.extend(generate_dimension(dim, pool, streams));
    }
    for fact in &schema.fact_tables {
        extensions.push(generate_fact_table(schema, fact, streams, cap)?);
    }
    Ok(extensions)
}
