//! Shared model types: benchmark parameters, validation, and the instantiated
//! schema description.
//!
//! Parameters come in three groups. [`HighLevelParams`] are a handful of
//! averages a user can set quickly; [`schema::derive_low_level`] expands them
//! into a full [`LowLevelParams`] set with seeded perturbation.
//! [`LowLevelParams`] describe every fact table and dimension exactly and are
//! what the schema builder consumes. [`WorkloadParams`] size and shape the
//! query mix.
//!
//! Serialized field names match the conventional parameter names used in
//! configuration files (`NB_FT`, `DENSITY`, `PROB_OLAP`, ...), so a config
//! section deserializes directly into these types.
//!
//! [`schema::derive_low_level`]: crate::schema::derive_low_level

use std::fmt;

use serde::{Deserialize, Serialize};

/// High-level warehouse parameters: averages from which a complete
/// [`LowLevelParams`] set is derived with seeded gaussian perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighLevelParams {
    /// Average number of fact tables.
    #[serde(rename = "AVG_NB_FT")]
    pub avg_nb_ft: f64,
    /// Average number of dimensions per fact table.
    #[serde(rename = "AVG_NB_DIM")]
    pub avg_nb_dim: f64,
    /// Average total number of distinct dimensions in the warehouse.
    #[serde(rename = "AVG_TOT_NB_DIM")]
    pub avg_tot_nb_dim: f64,
    /// Average number of measures per fact table.
    #[serde(rename = "AVG_NB_MEAS")]
    pub avg_nb_measures: f64,
    /// Average fact-table density: the fraction of possible dimension-key
    /// combinations that actually carry a fact row.
    #[serde(rename = "AVG_DENSITY")]
    pub avg_density: f64,
    /// Average number of hierarchy levels per dimension.
    #[serde(rename = "AVG_NB_LEVELS")]
    pub avg_nb_levels: f64,
    /// Average number of descriptor attributes per hierarchy level.
    #[serde(rename = "AVG_NB_ATT")]
    pub avg_nb_attributes: f64,
    /// Average cardinality of the highest (coarsest) hierarchy level.
    #[serde(rename = "AVG_HHLEVEL_SIZE")]
    pub avg_hhlevel_size: f64,
    /// Cardinality multiplier from one hierarchy level to the next finer one.
    #[serde(rename = "DIM_SFACTOR")]
    pub dim_sfactor: f64,
}

impl Default for HighLevelParams {
    fn default() -> Self {
        Self {
            avg_nb_ft: 1.0,
            avg_nb_dim: 5.0,
            avg_tot_nb_dim: 5.0,
            avg_nb_measures: 5.0,
            avg_density: 0.6,
            avg_nb_levels: 3.0,
            avg_nb_attributes: 5.0,
            avg_hhlevel_size: 10.0,
            dim_sfactor: 10.0,
        }
    }
}

/// Exact parameters for one fact table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactTableParams {
    /// Number of dimensions this fact table references.
    #[serde(rename = "NB_DIM")]
    pub nb_dim: u64,
    /// Number of measure columns.
    #[serde(rename = "NB_MEAS")]
    pub nb_measures: u64,
    /// Fraction of possible dimension-key combinations kept as fact rows,
    /// in `(0, 1]`.
    #[serde(rename = "DENSITY")]
    pub density: f64,
}

/// Exact parameters for one dimension hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionParams {
    /// Number of hierarchy levels (1 means a flat dimension).
    #[serde(rename = "NB_LEVELS")]
    pub nb_levels: u64,
    /// Descriptor attributes per level, listed coarsest level first.
    #[serde(rename = "NB_ATT")]
    pub nb_attributes: Vec<u64>,
    /// Cardinality of the coarsest level.
    #[serde(rename = "HHLEVEL_SIZE")]
    pub hhlevel_size: u64,
    /// Cardinality multiplier per finer level. Present exactly when the
    /// dimension has more than one level.
    #[serde(
        rename = "DIM_SFACTOR",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub scale_factor: Option<u64>,
}

/// Complete warehouse description: one entry per fact table and one per
/// dimension. `NB_FT` and `TOT_NB_DIM` are the lengths of the two lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowLevelParams {
    #[serde(rename = "fact_table", default)]
    pub fact_tables: Vec<FactTableParams>,
    #[serde(rename = "dimension", default)]
    pub dimensions: Vec<DimensionParams>,
}

impl LowLevelParams {
    /// Number of fact tables (`NB_FT`).
    pub fn nb_ft(&self) -> u64 {
        self.fact_tables.len() as u64
    }

    /// Total number of distinct dimensions (`TOT_NB_DIM`).
    pub fn tot_nb_dim(&self) -> u64 {
        self.dimensions.len() as u64
    }

    /// Classifies the schema these parameters describe.
    ///
    /// More than one fact table makes a constellation regardless of
    /// hierarchy shape; otherwise any multi-level dimension makes a
    /// snowflake and a warehouse of flat dimensions is a star.
    pub fn classify(&self) -> SchemaClass {
        if self.fact_tables.len() > 1 {
            SchemaClass::Constellation
        } else if self.dimensions.iter().any(|d| d.nb_levels > 1) {
            SchemaClass::Snowflake
        } else {
            SchemaClass::Star
        }
    }
}

/// Workload generation parameters.
///
/// The extraction and rollup probabilities are not independent knobs: an
/// initial query is either an OLAP query or an extraction, and an OLAP
/// grouping is either CUBE or ROLLUP, so those probabilities are the
/// complements exposed by [`prob_extraction`](Self::prob_extraction) and
/// [`prob_rollup`](Self::prob_rollup).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadParams {
    /// Number of queries generated (drill-down queries included). The last
    /// drill-down chain runs to completion, so a workload may slightly
    /// exceed this count.
    #[serde(rename = "NB_Q")]
    pub nb_queries: u64,
    /// Average number of selected dimension attributes per query.
    #[serde(rename = "AVG_NB_ATT")]
    pub avg_nb_attributes: f64,
    /// Average number of restriction predicates per query.
    #[serde(rename = "AVG_NB_RESTR")]
    pub avg_nb_restrictions: f64,
    /// Probability that an initial query is an OLAP (aggregating) query
    /// rather than a plain extraction.
    #[serde(rename = "PROB_OLAP")]
    pub prob_olap: f64,
    /// Average number of aggregated measures per OLAP query.
    #[serde(rename = "AVG_NB_AGGREG")]
    pub avg_nb_aggregates: f64,
    /// Probability that an OLAP query groups with CUBE rather than ROLLUP.
    #[serde(rename = "PROB_CUBE")]
    pub prob_cube: f64,
    /// Probability that an OLAP query carries a HAVING clause.
    #[serde(rename = "PROB_HAVING")]
    pub prob_having: f64,
    /// Average length of the drill-down chain following an OLAP query.
    #[serde(rename = "AVG_NB_DD")]
    pub avg_nb_drill_downs: f64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            nb_queries: 100,
            avg_nb_attributes: 5.0,
            avg_nb_restrictions: 3.0,
            prob_olap: 0.9,
            avg_nb_aggregates: 3.0,
            prob_cube: 0.3,
            prob_having: 0.2,
            avg_nb_drill_downs: 3.0,
        }
    }
}

impl WorkloadParams {
    /// Probability that an initial query is a plain extraction
    /// (derived: `1 - PROB_OLAP`).
    pub fn prob_extraction(&self) -> f64 {
        1.0 - self.prob_olap
    }

    /// Probability that an OLAP query groups with ROLLUP
    /// (derived: `1 - PROB_CUBE`).
    pub fn prob_rollup(&self) -> f64 {
        1.0 - self.prob_cube
    }
}

/// Overall shape of an instantiated schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaClass {
    Star,
    Snowflake,
    Constellation,
}

impl fmt::Display for SchemaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaClass::Star => write!(f, "star"),
            SchemaClass::Snowflake => write!(f, "snowflake"),
            SchemaClass::Constellation => write!(f, "constellation"),
        }
    }
}

/// One parameter violation found during validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Conventional name of the offending parameter (`DENSITY`, `NB_ATT`, ...).
    pub parameter: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.parameter, self.message)
    }
}

/// All violations found in one parameter set. An empty report means the
/// parameters are accepted by the generators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, parameter: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            parameter: parameter.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "parameters valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a complete low-level parameter set against the generator
/// preconditions. Returns every violation, not just the first.
pub fn validate_low_level(p: &LowLevelParams) -> ValidationReport {
    let mut report = ValidationReport::default();

    if p.fact_tables.is_empty() {
        report.push("NB_FT", "at least one fact table is required");
    }
    for (i, ft) in p.fact_tables.iter().enumerate() {
        let f = i + 1;
        if ft.nb_dim == 0 {
            report.push(
                "NB_DIM",
                format!("fact table {f} must reference at least one dimension"),
            );
        }
        if ft.nb_measures == 0 {
            report.push(
                "NB_MEAS",
                format!("fact table {f} must have at least one measure"),
            );
        }
        if !ft.density.is_finite() || ft.density <= 0.0 || ft.density > 1.0 {
            report.push(
                "DENSITY",
                format!("fact table {f} density {} outside (0, 1]", ft.density),
            );
        }
    }

    let tot = p.dimensions.len() as u64;
    if p.dimensions.is_empty() {
        report.push("TOT_NB_DIM", "at least one dimension is required");
    }
    if let Some(max_nb_dim) = p.fact_tables.iter().map(|ft| ft.nb_dim).max() {
        if tot < max_nb_dim {
            report.push(
                "TOT_NB_DIM",
                format!("{tot} is below the largest per-fact NB_DIM ({max_nb_dim})"),
            );
        }
        let sum: u64 = p.fact_tables.iter().map(|ft| ft.nb_dim).sum();
        if tot > sum {
            report.push(
                "TOT_NB_DIM",
                format!("{tot} exceeds the sum of NB_DIM over fact tables ({sum})"),
            );
        }
    }

    for (i, dim) in p.dimensions.iter().enumerate() {
        let d = i + 1;
        if dim.nb_levels == 0 {
            report.push(
                "NB_LEVELS",
                format!("dimension {d} must have at least one level"),
            );
        }
        if dim.nb_attributes.len() as u64 != dim.nb_levels {
            report.push(
                "NB_ATT",
                format!(
                    "dimension {d} lists {} per-level attribute counts but has {} levels",
                    dim.nb_attributes.len(),
                    dim.nb_levels
                ),
            );
        }
        for (h, &n) in dim.nb_attributes.iter().enumerate() {
            if n == 0 {
                report.push(
                    "NB_ATT",
                    format!(
                        "dimension {d} level {} must have at least one attribute",
                        h + 1
                    ),
                );
            }
        }
        if dim.hhlevel_size == 0 {
            report.push(
                "HHLEVEL_SIZE",
                format!("dimension {d} coarsest level cannot be empty"),
            );
        }
        match (dim.nb_levels > 1, dim.scale_factor) {
            (true, None) => report.push(
                "DIM_SFACTOR",
                format!(
                    "dimension {d} has {} levels and needs a scale factor",
                    dim.nb_levels
                ),
            ),
            (true, Some(sf)) if sf < 1 => report.push(
                "DIM_SFACTOR",
                format!("dimension {d} scale factor must be at least 1"),
            ),
            (false, Some(_)) => report.push(
                "DIM_SFACTOR",
                format!("dimension {d} is single-level; scale factor does not apply"),
            ),
            _ => {}
        }
    }

    report
}

/// Checks workload parameters against the generator preconditions.
pub fn validate_workload(p: &WorkloadParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    if p.nb_queries == 0 {
        report.push("NB_Q", "workload must contain at least one query");
    }
    for (name, value) in [
        ("AVG_NB_ATT", p.avg_nb_attributes),
        ("AVG_NB_RESTR", p.avg_nb_restrictions),
        ("AVG_NB_AGGREG", p.avg_nb_aggregates),
        ("AVG_NB_DD", p.avg_nb_drill_downs),
    ] {
        if !value.is_finite() || value < 1.0 {
            report.push(name, format!("average {value} must be at least 1"));
        }
    }
    for (name, value) in [
        ("PROB_OLAP", p.prob_olap),
        ("PROB_CUBE", p.prob_cube),
        ("PROB_HAVING", p.prob_having),
    ] {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            report.push(name, format!("probability {value} outside [0, 1]"));
        }
    }
    report
}

/// Role of a column within its table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeKind {
    /// Surrogate primary key, values 1..=cardinality.
    PrimaryKey,
    /// Foreign key; the column is named after the referenced table's key.
    ForeignKey { references: String },
    /// Textual descriptor attribute of a hierarchy level.
    Descriptor,
    /// Numeric measure of a fact table.
    Measure,
}

/// A named column with its role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn is_descriptor(&self) -> bool {
        matches!(self.kind, AttributeKind::Descriptor)
    }
}

/// One hierarchy level of a dimension, materialized as its own table.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub table_name: String,
    /// 1-based position in the hierarchy; 1 is the coarsest level and
    /// `NB_LEVELS` is the finest (entry) level referenced by fact tables.
    pub level_index: u64,
    pub cardinality: u64,
    /// Columns in emission order: primary key, descriptors, then the foreign
    /// key to the next coarser level when one exists.
    pub attributes: Vec<Attribute>,
}

impl LevelSpec {
    pub fn primary_key(&self) -> &Attribute {
        &self.attributes[0]
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter().filter(|a| a.is_descriptor())
    }

    /// Foreign key to the next coarser level, absent on the coarsest level.
    pub fn coarser_key(&self) -> Option<&Attribute> {
        self.attributes
            .iter()
            .find(|a| matches!(a.kind, AttributeKind::ForeignKey { .. }))
    }
}

/// A dimension hierarchy: levels listed coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionSpec {
    /// 1-based dimension index used in table names.
    pub index: u64,
    pub levels: Vec<LevelSpec>,
}

impl DimensionSpec {
    /// The finest level, the one fact tables reference.
    pub fn entry_level(&self) -> &LevelSpec {
        self.levels
            .last()
            .expect("dimension has at least one level")
    }

    pub fn nb_levels(&self) -> u64 {
        self.levels.len() as u64
    }
}

/// A fact table: foreign keys into the entry level of each referenced
/// dimension plus measure columns. The primary key is the composite of all
/// foreign keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FactTableSpec {
    /// 1-based fact table index used in table names.
    pub index: u64,
    pub table_name: String,
    /// Indices (1-based, ascending) of the referenced dimensions.
    pub dimension_refs: Vec<u64>,
    pub measures: Vec<Attribute>,
    pub density: f64,
}

/// A fully instantiated schema: every table, column, cardinality, and
/// relationship the generators will materialize.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaModel {
    pub class: SchemaClass,
    pub dimensions: Vec<DimensionSpec>,
    pub fact_tables: Vec<FactTableSpec>,
    /// The exact parameters this schema was built from; stored so a manifest
    /// can rebuild the identical schema later.
    pub low_level: LowLevelParams,
}

impl SchemaModel {
    /// Looks up a dimension by its 1-based index.
    pub fn dimension(&self, index: u64) -> &DimensionSpec {
        &self.dimensions[(index - 1) as usize]
    }

    /// Foreign-key columns of a fact table, one per referenced dimension,
    /// in `dimension_refs` order.
    pub fn fact_foreign_keys(&self, fact: &FactTableSpec) -> Vec<Attribute> {
        fact.dimension_refs
            .iter()
            .map(|&d| {
                let entry = self.dimension(d).entry_level();
                Attribute {
                    name: entry.primary_key().name.clone(),
                    kind: AttributeKind::ForeignKey {
                        references: entry.table_name.clone(),
                    },
                }
            })
            .collect()
    }

    /// Entry-level cardinalities of a fact table's dimensions, in
    /// `dimension_refs` order.
    pub fn entry_cardinalities(&self, fact: &FactTableSpec) -> Vec<u64> {
        fact.dimension_refs
            .iter()
            .map(|&d| self.dimension(d).entry_level().cardinality)
            .collect()
    }

    /// All level tables in canonical order: dimensions by index, levels
    /// coarsest first. Referenced tables always precede referencing ones.
    pub fn level_tables(&self) -> impl Iterator<Item = (&DimensionSpec, &LevelSpec)> {
        self.dimensions
            .iter()
            .flat_map(|d| d.levels.iter().map(move |l| (d, l)))
    }

    /// Names of all tables in canonical emission order: every dimension
    /// level, then every fact table.
    pub fn table_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .level_tables()
            .map(|(_, l)| l.table_name.clone())
            .collect();
        names.extend(self.fact_tables.iter().map(|f| f.table_name.clone()));
        names
    }

    /// Stable hex fingerprint of the schema structure.
    ///
    /// Covers class, every table with its columns, roles, references, and
    /// cardinalities, and each fact table's density. Artifacts generated from
    /// the same seed and parameters share a fingerprint, which lets the
    /// executor warn when a workload is pointed at a different warehouse.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut canon = format!("class={}\n", self.class);
        for (_, level) in self.level_tables() {
            canon.push_str(&format!(
                "table={} card={} cols=",
                level.table_name, level.cardinality
            ));
            push_columns(&mut canon, &level.attributes);
            canon.push('\n');
        }
        for fact in &self.fact_tables {
            canon.push_str(&format!(
                "table={} density={} cols=",
                fact.table_name, fact.density
            ));
            let mut cols = self.fact_foreign_keys(fact);
            cols.extend(fact.measures.iter().cloned());
            push_columns(&mut canon, &cols);
            canon.push('\n');
        }
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn push_columns(out: &mut String, attributes: &[Attribute]) {
    for (i, attr) in attributes.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&attr.name);
        match &attr.kind {
            AttributeKind::PrimaryKey => out.push_str(":pk"),
            AttributeKind::ForeignKey { references } => {
                out.push_str(":fk->");
                out.push_str(references);
            }
            AttributeKind::Descriptor => out.push_str(":descr"),
            AttributeKind::Measure => out.push_str(":meas"),
        }
    }
}
