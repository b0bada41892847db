//! Deterministic data-warehouse benchmarking engine.
//!
//! The crate covers the full benchmark lifecycle:
//!
//! 1. [`model`] defines warehouse and workload parameter sets plus validation.
//! 2. [`schema`] derives low-level parameters from averages and instantiates
//!    star, snowflake, or constellation schemas.
//! 3. [`data`] populates dimension hierarchies and fact tables with seeded,
//!    reproducible synthetic rows.
//! 4. [`workload`] builds decision-support query mixes (joins, restrictions,
//!    CUBE/ROLLUP aggregations, drill-down chains) and renders them to SQL.
//! 5. [`emit`] writes DDL, data files, workload scripts, and a manifest to disk.
//! 6. [`exec`] runs workloads against a SQL session, records timings, and
//!    computes performance-gain reports between configurations.
//!
//! Everything downstream of a seed is deterministic: the same seed and
//! parameters produce byte-identical artifacts on every platform, which makes
//! benchmark runs comparable across machines and over time.

pub mod data;
pub mod emit;
pub mod exec;
pub mod model;
pub mod random;
pub mod schema;
pub mod workload;
