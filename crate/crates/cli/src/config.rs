//! Configuration resolution: TOML file, named presets, and command-line
//! overrides folded into one runnable description.
//!
//! A config file can specify the schema in exactly one of three ways:
//!
//! - `preset = "dw1"` picks a built-in warehouse,
//! - a `[high_level]` section gives averages the generator derives exact
//!   parameters from,
//! - a `[low_level]` section pins every fact table and dimension.
//!
//! With none of the three, the high-level defaults apply. `[workload]`
//! tunes query generation and `[output]` the emission format. Command-line
//! flags override file values everywhere.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dwbench_core::data::DEFAULT_COMBINATION_CAP;
use dwbench_core::emit::DataFormat;
use dwbench_core::model::{
    DimensionParams, FactTableParams, HighLevelParams, LowLevelParams, WorkloadParams,
};
use dwbench_core::random::DEFAULT_SPREAD_RATIO;
use serde::Deserialize;

/// Workload parameters that exist only as complements of configurable ones.
/// Naming them in a config is always a mistake, so it gets a dedicated
/// error instead of a generic unknown-field complaint.
const DERIVED_WORKLOAD_PARAMS: [(&str, &str); 2] = [
    ("PROB_EXTRACT", "1 - PROB_OLAP; set PROB_OLAP instead"),
    ("PROB_ROLLUP", "1 - PROB_CUBE; set PROB_CUBE instead"),
];

/// On-disk config file layout.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub spread_ratio: Option<f64>,
    pub preset: Option<String>,
    pub high_level: Option<HighLevelParams>,
    pub low_level: Option<LowLevelParams>,
    pub workload: Option<WorkloadParams>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: Option<String>,
    pub parallel: Option<bool>,
    pub max_combinations: Option<u64>,
}

/// Values taken from command-line flags; `None` defers to the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub spread_ratio: Option<f64>,
    pub format: Option<DataFormat>,
    pub parallel: bool,
    pub max_combinations: Option<u64>,
}

/// Where the schema parameters come from.
#[derive(Debug, Clone)]
pub enum SchemaSource {
    /// Built-in preset warehouse, parameters pinned below.
    Preset(Preset),
    /// Averages to derive exact parameters from (seeded).
    HighLevel(HighLevelParams),
    /// Exact parameters as given.
    LowLevel(LowLevelParams),
}

impl fmt::Display for SchemaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaSource::Preset(p) => write!(f, "preset {}", p.name),
            SchemaSource::HighLevel(_) => f.write_str("high-level averages"),
            SchemaSource::LowLevel(_) => f.write_str("low-level parameters"),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub spread_ratio: f64,
    pub source: SchemaSource,
    pub workload: WorkloadParams,
    pub format: DataFormat,
    pub parallel: bool,
    pub combination_cap: u128,
}

/// A built-in warehouse definition.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub low_level: LowLevelParams,
    pub workload: WorkloadParams,
}

/// Names of the built-in presets, in documentation order.
pub const PRESET_NAMES: [&str; 3] = ["dw1", "dw2", "dw3"];

/// Looks up a built-in preset by name.
pub fn preset(name: &str) -> Option<Preset> {
    let fact = |nb_dim, nb_measures, density| FactTableParams {
        nb_dim,
        nb_measures,
        density,
    };
    let dim = |nb_levels, nb_attributes: &[u64], hhlevel_size, scale_factor| DimensionParams {
        nb_levels,
        nb_attributes: nb_attributes.to_vec(),
        hhlevel_size,
        scale_factor,
    };
    let workload = WorkloadParams {
        nb_queries: 20,
        ..WorkloadParams::default()
    };
    match name {
        "dw1" => Some(Preset {
            name: "dw1",
            description: "snowflake star, one fact over two hierarchies, ~1.1M fact rows",
            low_level: LowLevelParams {
                fact_tables: vec![fact(2, 5, 0.6)],
                dimensions: vec![
                    dim(2, &[5, 5], 18, Some(18)),
                    dim(3, &[4, 4, 4], 18, Some(18)),
                ],
            },
            workload,
        }),
        "dw2" => Some(Preset {
            name: "dw2",
            description: "sparse snowflake, four hierarchies, ~3.2M fact rows",
            low_level: LowLevelParams {
                fact_tables: vec![fact(4, 3, 0.25)],
                dimensions: vec![
                    dim(1, &[5], 8, None),
                    dim(2, &[5, 5], 8, Some(5)),
                    dim(3, &[5, 5, 5], 8, Some(5)),
                    dim(3, &[5, 5, 5], 8, Some(5)),
                ],
            },
            workload,
        }),
        "dw3" => Some(Preset {
            name: "dw3",
            description: "flat star, three single-level dimensions, ~560k fact rows",
            low_level: LowLevelParams {
                fact_tables: vec![fact(3, 5, 0.8)],
                dimensions: vec![
                    dim(1, &[5], 100, None),
                    dim(1, &[5], 100, None),
                    dim(1, &[4], 70, None),
                ],
            },
            workload,
        }),
        _ => None,
    }
}

/// Parses a config file, rejecting derived workload parameters with a
/// targeted message before the typed deserialization sees them.
pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_file(&text).with_context(|| format!("in config file {}", path.display()))
}

fn parse_file(text: &str) -> Result<FileConfig> {
    let raw: toml::Table = text.parse().context("not valid TOML")?;
    if let Some(toml::Value::Table(workload)) = raw.get("workload") {
        for (key, derivation) in DERIVED_WORKLOAD_PARAMS {
            if workload.contains_key(key) {
                bail!("{key} is a derived parameter ({derivation})");
            }
        }
    }
    let config: FileConfig = toml::from_str(text)?;
    Ok(config)
}

/// Folds file values and command-line overrides into a runnable config.
///
/// Precedence is flags over file over defaults. The schema may come from at
/// most one of preset, `[high_level]`, or `[low_level]`; with none given,
/// high-level defaults apply.
pub fn resolve(file: Option<FileConfig>, overrides: &Overrides) -> Result<Resolved> {
    let file = file.unwrap_or_default();

    let preset_name = overrides.preset.as_deref().or(file.preset.as_deref());
    let mut sources: Vec<SchemaSource> = Vec::new();
    if let Some(name) = preset_name {
        let p = preset(name).with_context(|| {
            format!(
                "unknown preset {name}; available: {}",
                PRESET_NAMES.join(", ")
            )
        })?;
        sources.push(SchemaSource::Preset(p));
    }
    if let Some(high) = file.high_level.clone() {
        sources.push(SchemaSource::HighLevel(high));
    }
    if let Some(low) = file.low_level.clone() {
        sources.push(SchemaSource::LowLevel(low));
    }
    if sources.len() > 1 {
        bail!("choose one schema source: a preset, [high_level], or [low_level]");
    }
    let source = sources
        .pop()
        .unwrap_or_else(|| SchemaSource::HighLevel(HighLevelParams::default()));

    // Presets pin their workload size; an explicit [workload] section wins.
    let workload = file.workload.clone().unwrap_or_else(|| match &source {
        SchemaSource::Preset(p) => p.workload.clone(),
        _ => WorkloadParams::default(),
    });

    let output = file.output.unwrap_or_default();
    let format = match overrides.format {
        Some(f) => f,
        None => match output.format.as_deref() {
            Some(s) => s.parse().map_err(|e: String| anyhow::anyhow!(e))?,
            None => DataFormat::Dat,
        },
    };

    Ok(Resolved {
        seed: overrides.seed.or(file.seed).unwrap_or(0),
        spread_ratio: overrides
            .spread_ratio
            .or(file.spread_ratio)
            .unwrap_or(DEFAULT_SPREAD_RATIO),
        source,
        workload,
        format,
        parallel: overrides.parallel || output.parallel.unwrap_or(false),
        combination_cap: overrides
            .max_combinations
            .or(output.max_combinations)
            .map(u128::from)
            .unwrap_or(DEFAULT_COMBINATION_CAP),
    })
}
