//! Schema derivation and instantiation.
//!
//! [`derive_low_level`] expands a handful of high-level averages into a
//! complete per-table parameter set with seeded gaussian perturbation, then
//! repairs the dimension total so the result always validates.
//! [`build_schema`] turns validated low-level parameters into a
//! [`SchemaModel`]: concrete tables, columns, cardinalities, and
//! fact-to-dimension assignments. [`estimate_size`] predicts row counts and
//! flat-file bytes without generating anything, so oversized configurations
//! can be caught before generation starts.

use thiserror::Error;

use crate::model::{
    validate_low_level, Attribute, AttributeKind, DimensionParams, DimensionSpec, FactTableParams,
    FactTableSpec, HighLevelParams, LevelSpec, LowLevelParams, SchemaModel, ValidationReport,
};
use crate::random::RandomSource;

/// Lower clamp for derived densities. A gaussian draw can go non-positive;
/// densities must stay in `(0, 1]` for the row-keeping probability to make
/// sense, so draws are clamped into `[MIN_DENSITY, 1]`.
pub const MIN_DENSITY: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SchemaError {
    /// The parameter set failed validation; the report lists every violation.
    #[error("invalid parameters:\n{0}")]
    Invalid(ValidationReport),
    /// A level cardinality overflowed 64 bits.
    #[error("cardinality overflow in dimension {dimension} at level {level}")]
    CardinalityOverflow { dimension: u64, level: u64 },
}

/// Derives a complete low-level parameter set from high-level averages.
///
/// Each count is drawn with [`RandomSource::gaussian_int`] around its
/// average; the density is a clamped gaussian around `AVG_DENSITY`. With
/// `spread_ratio` 0 every draw equals its rounded average exactly.
///
/// Draws happen in a fixed, documented order so results are reproducible:
///
/// 1. the number of fact tables,
/// 2. per fact table: dimension count, measure count, density,
/// 3. the total dimension count,
/// 4. per dimension: level count, per-level attribute counts, coarsest-level
///    cardinality, and (for multi-level dimensions) the scale factor.
///
/// The drawn total dimension count is then clamped into the feasible range
/// `[max NB_DIM, sum NB_DIM]` so the result always passes
/// [`validate_low_level`].
pub fn derive_low_level(
    high: &HighLevelParams,
    spread_ratio: f64,
    source: &mut RandomSource,
) -> LowLevelParams {
    let nb_ft = source.gaussian_int(high.avg_nb_ft, spread_ratio);
    let mut fact_tables = Vec::with_capacity(nb_ft as usize);
    for _ in 0..nb_ft {
        let nb_dim = source.gaussian_int(high.avg_nb_dim, spread_ratio);
        let nb_measures = source.gaussian_int(high.avg_nb_measures, spread_ratio);
        let density = source
            .gaussian(high.avg_density, spread_ratio * high.avg_density)
            .clamp(MIN_DENSITY, 1.0);
        fact_tables.push(FactTableParams {
            nb_dim,
            nb_measures,
            density,
        });
    }

    let drawn_tot = source.gaussian_int(high.avg_tot_nb_dim, spread_ratio);
    let max_nb_dim = fact_tables.iter().map(|ft| ft.nb_dim).max().unwrap_or(1);
    let sum_nb_dim: u64 = fact_tables.iter().map(|ft| ft.nb_dim).sum();
    let tot_nb_dim = drawn_tot.clamp(max_nb_dim, sum_nb_dim);

    let mut dimensions = Vec::with_capacity(tot_nb_dim as usize);
    for _ in 0..tot_nb_dim {
        let nb_levels = source.gaussian_int(high.avg_nb_levels, spread_ratio);
        let nb_attributes = (0..nb_levels)
            .map(|_| source.gaussian_int(high.avg_nb_attributes, spread_ratio))
            .collect();
        let hhlevel_size = source.gaussian_int(high.avg_hhlevel_size, spread_ratio);
        let scale_factor = if nb_levels > 1 {
            Some(source.gaussian_int(high.dim_sfactor, spread_ratio))
        } else {
            None
        };
        dimensions.push(DimensionParams {
            nb_levels,
            nb_attributes,
            hhlevel_size,
            scale_factor,
        });
    }

    LowLevelParams {
        fact_tables,
        dimensions,
    }
}

/// Instantiates the schema described by a low-level parameter set.
///
/// Dimension `d` becomes tables `DIM{d}_1` (coarsest) through
/// `DIM{d}_{NB_LEVELS}` (finest); level `h` has cardinality
/// `HHLEVEL_SIZE * DIM_SFACTOR^(h-1)` and carries a surrogate key, its
/// descriptors, and a foreign key to the next coarser level. Fact table `f`
/// becomes `FT{f}` with foreign keys into the entry level of each assigned
/// dimension and measures `FT{f}_MEAS{k}`.
///
/// Dimension assignment draws without replacement with a centered skew, so
/// in a constellation the middle dimensions are the ones fact tables are
/// most likely to share.
pub fn build_schema(
    low: &LowLevelParams,
    source: &mut RandomSource,
) -> Result<SchemaModel, SchemaError> {
    let report = validate_low_level(low);
    if !report.is_empty() {
        return Err(SchemaError::Invalid(report));
    }

    let mut dimensions = Vec::with_capacity(low.dimensions.len());
    for (i, params) in low.dimensions.iter().enumerate() {
        let d = (i + 1) as u64;
        let mut levels = Vec::with_capacity(params.nb_levels as usize);
        let mut cardinality = params.hhlevel_size;
        for h in 1..=params.nb_levels {
            if h > 1 {
                let sf = params
                    .scale_factor
                    .expect("validated: multi-level has a factor");
                cardinality =
                    cardinality
                        .checked_mul(sf)
                        .ok_or(SchemaError::CardinalityOverflow {
                            dimension: d,
                            level: h,
                        })?;
            }
            let table_name = format!("DIM{d}_{h}");
            let mut attributes = vec![Attribute {
                name: format!("{table_name}_PK"),
                kind: AttributeKind::PrimaryKey,
            }];
            for k in 1..=params.nb_attributes[(h - 1) as usize] {
                attributes.push(Attribute {
                    name: format!("{table_name}_DESCR{k}"),
                    kind: AttributeKind::Descriptor,
                });
            }
            if h > 1 {
                let coarser = format!("DIM{d}_{}", h - 1);
                attributes.push(Attribute {
                    name: format!("{coarser}_PK"),
                    kind: AttributeKind::ForeignKey {
                        references: coarser,
                    },
                });
            }
            levels.push(LevelSpec {
                table_name,
                level_index: h,
                cardinality,
                attributes,
            });
        }
        dimensions.push(DimensionSpec { index: d, levels });
    }

    let tot = low.dimensions.len() as u64;
    let mut fact_tables = Vec::with_capacity(low.fact_tables.len());
    for (i, params) in low.fact_tables.iter().enumerate() {
        let f = (i + 1) as u64;
        let mut candidates: Vec<u64> = (1..=tot).collect();
        let mut refs = Vec::with_capacity(params.nb_dim as usize);
        for _ in 0..params.nb_dim {
            let pick = source.skewed_index(candidates.len() as u64) - 1;
            refs.push(candidates.remove(pick as usize));
        }
        refs.sort_unstable();
        let table_name = format!("FT{f}");
        let measures = (1..=params.nb_measures)
            .map(|k| Attribute {
                name: format!("{table_name}_MEAS{k}"),
                kind: AttributeKind::Measure,
            })
            .collect();
        fact_tables.push(FactTableSpec {
            index: f,
            table_name,
            dimension_refs: refs,
            measures,
            density: params.density,
        });
    }

    Ok(SchemaModel {
        class: low.classify(),
        dimensions,
        fact_tables,
        low_level: low.clone(),
    })
}

/// Predicted size of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSizeEstimate {
    pub table_name: String,
    /// Expected row count. Exact for dimension levels; for fact tables this
    /// is `density * product(entry cardinalities)`, the mean of the
    /// binomially distributed actual count.
    pub rows: f64,
    /// Expected delimited-flat-file bytes for the table's data file.
    pub bytes: f64,
}

/// Predicted size of a full warehouse.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeEstimate {
    pub tables: Vec<TableSizeEstimate>,
    pub total_rows: f64,
    pub total_bytes: f64,
}

impl SizeEstimate {
    pub fn table(&self, name: &str) -> Option<&TableSizeEstimate> {
        self.tables.iter().find(|t| t.table_name == name)
    }
}

#[derive(Debug, Error)]
pub enum EstimateError {
    /// Parameters are so large the estimate left the finite float range.
    #[error("size estimate overflowed for table {table}")]
    Overflow { table: String },
}

/// Estimates row counts and data-file bytes for a schema without generating
/// any data.
///
/// The byte model follows the delimited flat-file emitter exactly: keys are
/// decimal integers (averaged digit count over the key range), descriptors
/// are `name + '_' + 20` pool characters, measures are 7 characters
/// (6 significant digits of a value in `[0, 10000)`), plus one separator
/// between columns and a newline per row. Estimates land within a few
/// percent of emitted files, comfortably inside the documented 10% band.
pub fn estimate_size(schema: &SchemaModel) -> Result<SizeEstimate, EstimateError> {
    const MEASURE_WIDTH: f64 = 7.0;
    const DESCRIPTOR_SUFFIX: f64 = 21.0; // '_' + 20 pool characters

    let mut tables = Vec::new();

    for (dim, level) in schema.level_tables() {
        let mut row_width = 0.0;
        for attr in &level.attributes {
            row_width += match &attr.kind {
                AttributeKind::PrimaryKey => average_decimal_digits(level.cardinality),
                AttributeKind::ForeignKey { .. } => {
                    // References the coarser level; its key range is that
                    // level's cardinality.
                    let coarser = &dim.levels[(level.level_index - 2) as usize];
                    average_decimal_digits(coarser.cardinality)
                }
                AttributeKind::Descriptor => attr.name.len() as f64 + DESCRIPTOR_SUFFIX,
                AttributeKind::Measure => MEASURE_WIDTH,
            };
        }
        row_width += level.attributes.len() as f64; // separators + newline
        let rows = level.cardinality as f64;
        tables.push(TableSizeEstimate {
            table_name: level.table_name.clone(),
            rows,
            bytes: rows * row_width,
        });
    }

    for fact in &schema.fact_tables {
        let cards = schema.entry_cardinalities(fact);
        let mut combinations = 1.0f64;
        let mut row_width = 0.0;
        for &card in &cards {
            combinations *= card as f64;
            row_width += average_decimal_digits(card);
        }
        row_width += fact.measures.len() as f64 * MEASURE_WIDTH;
        row_width += (cards.len() + fact.measures.len()) as f64; // separators + newline
        let rows = fact.density * combinations;
        let bytes = rows * row_width;
        if !rows.is_finite() || !bytes.is_finite() {
            return Err(EstimateError::Overflow {
                table: fact.table_name.clone(),
            });
        }
        tables.push(TableSizeEstimate {
            table_name: fact.table_name.clone(),
            rows,
            bytes,
        });
    }

    let total_rows = tables.iter().map(|t| t.rows).sum();
    let total_bytes = tables.iter().map(|t| t.bytes).sum();
    Ok(SizeEstimate {
        tables,
        total_rows,
        total_bytes,
    })
}

/// Average decimal digit count over the keys `1..=n`.
fn average_decimal_digits(n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0f64;
    let mut digits = 1u32;
    let mut lo = 1u64;
    while lo <= n {
        let hi = if digits >= 20 {
            u64::MAX
        } else {
            10u64.pow(digits) - 1
        };
        let hi = hi.min(n);
        total += (hi - lo + 1) as f64 * digits as f64;
        if hi == u64::MAX {
            break;
        }
        lo = hi + 1;
        digits += 1;
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SchemaClass;
    use crate::random::{RandomSource, DEFAULT_SPREAD_RATIO};

    fn snowflake_params() -> LowLevelParams {
        LowLevelParams {
            fact_tables: vec![FactTableParams {
                nb_dim: 2,
                nb_measures: 5,
                density: 0.6,
            }],
            dimensions: vec![
                DimensionParams {
                    nb_levels: 2,
                    nb_attributes: vec![5, 5],
                    hhlevel_size: 18,
                    scale_factor: Some(18),
                },
                DimensionParams {
                    nb_levels: 3,
                    nb_attributes: vec![4, 4, 4],
                    hhlevel_size: 18,
                    scale_factor: Some(18),
                },
            ],
        }
    }

    #[test]
    fn zero_spread_reproduces_averages_exactly() {
        let mut source = RandomSource::new(1);
        let low = derive_low_level(&HighLevelParams::default(), 0.0, &mut source);
        assert_eq!(low.nb_ft(), 1);
        assert_eq!(low.tot_nb_dim(), 5);
        for ft in &low.fact_tables {
            assert_eq!(ft.nb_dim, 5);
            assert_eq!(ft.nb_measures, 5);
            assert!((ft.density - 0.6).abs() < 1e-12);
        }
        for dim in &low.dimensions {
            assert_eq!(dim.nb_levels, 3);
            assert_eq!(dim.nb_attributes, vec![5, 5, 5]);
            assert_eq!(dim.hhlevel_size, 10);
            assert_eq!(dim.scale_factor, Some(10));
        }
        assert_eq!(low.classify(), SchemaClass::Snowflake);
    }

    #[test]
    fn derivation_is_deterministic_per_seed() {
        let high = HighLevelParams::default();
        let a = derive_low_level(&high, DEFAULT_SPREAD_RATIO, &mut RandomSource::new(99));
        let b = derive_low_level(&high, DEFAULT_SPREAD_RATIO, &mut RandomSource::new(99));
        let c = derive_low_level(&high, DEFAULT_SPREAD_RATIO, &mut RandomSource::new(100));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    /// Any derivation must validate: the repair step keeps the dimension
    /// total inside the feasible range whatever the draws did.
    #[test]
    fn derived_params_always_validate() {
        let high = HighLevelParams {
            avg_nb_ft: 2.0,
            avg_nb_dim: 3.0,
            avg_tot_nb_dim: 12.0, // deliberately above the feasible range
            ..HighLevelParams::default()
        };
        for seed in 0..500 {
            let mut source = RandomSource::new(seed);
            let low = derive_low_level(&high, 0.5, &mut source);
            let report = validate_low_level(&low);
            assert!(report.is_empty(), "seed {seed}: {report}");
        }
    }

    #[test]
    fn derived_level_mean_tracks_average() {
        let high = HighLevelParams::default();
        let mut sum = 0u64;
        let mut count = 0u64;
        for seed in 0..2000 {
            let mut source = RandomSource::new(seed);
            let low = derive_low_level(&high, DEFAULT_SPREAD_RATIO, &mut source);
            for dim in &low.dimensions {
                sum += dim.nb_levels;
                count += 1;
            }
        }
        let mean = sum as f64 / count as f64;
        // sigma = 0.6 per draw, ~10000 draws: standard error ~0.006.
        assert!((mean - 3.0).abs() < 0.1, "NB_LEVELS mean drifted: {mean}");
    }

    #[test]
    fn snowflake_cardinalities_follow_scale_factor() {
        let mut source = RandomSource::new(1);
        let schema = build_schema(&snowflake_params(), &mut source).unwrap();
        assert_eq!(schema.class, SchemaClass::Snowflake);
        let cards: Vec<Vec<u64>> = schema
            .dimensions
            .iter()
            .map(|d| d.levels.iter().map(|l| l.cardinality).collect())
            .collect();
        assert_eq!(cards, vec![vec![18, 324], vec![18, 324, 5832]]);
        assert_eq!(
            schema.entry_cardinalities(&schema.fact_tables[0]),
            vec![324, 5832]
        );
    }

    #[test]
    fn level_tables_carry_expected_columns() {
        let mut source = RandomSource::new(1);
        let schema = build_schema(&snowflake_params(), &mut source).unwrap();
        let finest = schema.dimension(1).entry_level();
        assert_eq!(finest.table_name, "DIM1_2");
        assert_eq!(finest.primary_key().name, "DIM1_2_PK");
        assert_eq!(finest.descriptors().count(), 5);
        let fk = finest.coarser_key().unwrap();
        assert_eq!(fk.name, "DIM1_1_PK");
        assert_eq!(
            fk.kind,
            AttributeKind::ForeignKey {
                references: "DIM1_1".into()
            }
        );

        let coarsest = &schema.dimension(1).levels[0];
        assert!(coarsest.coarser_key().is_none());

        let fact = &schema.fact_tables[0];
        assert_eq!(fact.table_name, "FT1");
        assert_eq!(fact.dimension_refs, vec![1, 2]);
        let fks = schema.fact_foreign_keys(fact);
        assert_eq!(fks.len(), 2);
        assert_eq!(fks[0].name, "DIM1_2_PK");
        assert_eq!(fks[1].name, "DIM2_3_PK");
        assert_eq!(fact.measures.len(), 5);
        assert_eq!(fact.measures[4].name, "FT1_MEAS5");
    }

    #[test]
    fn star_schema_has_single_level_dimensions() {
        let low = LowLevelParams {
            fact_tables: vec![FactTableParams {
                nb_dim: 3,
                nb_measures: 5,
                density: 0.8,
            }],
            dimensions: vec![
                DimensionParams {
                    nb_levels: 1,
                    nb_attributes: vec![5],
                    hhlevel_size: 100,
                    scale_factor: None,
                },
                DimensionParams {
                    nb_levels: 1,
                    nb_attributes: vec![5],
                    hhlevel_size: 100,
                    scale_factor: None,
                },
                DimensionParams {
                    nb_levels: 1,
                    nb_attributes: vec![5],
                    hhlevel_size: 70,
                    scale_factor: None,
                },
            ],
        };
        let schema = build_schema(&low, &mut RandomSource::new(7)).unwrap();
        assert_eq!(schema.class, SchemaClass::Star);
        for dim in &schema.dimensions {
            assert_eq!(dim.levels.len(), 1);
            assert!(dim.levels[0].coarser_key().is_none());
        }
        assert_eq!(
            schema.entry_cardinalities(&schema.fact_tables[0]),
            vec![100, 100, 70]
        );
    }

    #[test]
    fn full_dimension_pool_is_used_when_counts_match() {
        // NB_DIM equals TOT_NB_DIM: the fact table must reference every
        // dimension exactly once, whatever order the skew drew them in.
        let low = LowLevelParams {
            fact_tables: vec![FactTableParams {
                nb_dim: 4,
                nb_measures: 1,
                density: 0.5,
            }],
            dimensions: (0..4)
                .map(|_| DimensionParams {
                    nb_levels: 1,
                    nb_attributes: vec![2],
                    hhlevel_size: 5,
                    scale_factor: None,
                })
                .collect(),
        };
        for seed in 0..50 {
            let schema = build_schema(&low, &mut RandomSource::new(seed)).unwrap();
            assert_eq!(schema.fact_tables[0].dimension_refs, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn invalid_params_are_refused() {
        let mut low = snowflake_params();
        low.fact_tables[0].density = 0.0;
        match build_schema(&low, &mut RandomSource::new(1)) {
            Err(SchemaError::Invalid(report)) => {
                assert_eq!(report.violations[0].parameter, "DENSITY")
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn cardinality_overflow_is_reported() {
        let low = LowLevelParams {
            fact_tables: vec![FactTableParams {
                nb_dim: 1,
                nb_measures: 1,
                density: 0.5,
            }],
            dimensions: vec![DimensionParams {
                nb_levels: 30,
                nb_attributes: vec![1; 30],
                hhlevel_size: 1000,
                scale_factor: Some(1000),
            }],
        };
        match build_schema(&low, &mut RandomSource::new(1)) {
            Err(SchemaError::CardinalityOverflow {
                dimension: 1,
                level,
            }) => {
                assert!(level > 1)
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn fingerprint_is_stable_and_structure_sensitive() {
        let schema = build_schema(&snowflake_params(), &mut RandomSource::new(1)).unwrap();
        let again = build_schema(&snowflake_params(), &mut RandomSource::new(1)).unwrap();
        assert_eq!(schema.fingerprint(), again.fingerprint());
        assert_eq!(schema.fingerprint().len(), 64);

        let mut other_params = snowflake_params();
        other_params.fact_tables[0].nb_measures = 4;
        let other = build_schema(&other_params, &mut RandomSource::new(1)).unwrap();
        assert_ne!(schema.fingerprint(), other.fingerprint());
    }

    #[test]
    fn average_digits_is_exact() {
        assert_eq!(average_decimal_digits(9), 1.0);
        // 1..=18: nine 1-digit and nine 2-digit keys.
        assert!((average_decimal_digits(18) - 1.5).abs() < 1e-12);
        // 1..=324: 9 + 90*2 + 225*3 = 864 digits over 324 keys.
        assert!((average_decimal_digits(324) - 864.0 / 324.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_matches_exact_expectations() {
        let schema = build_schema(&snowflake_params(), &mut RandomSource::new(1)).unwrap();
        let est = estimate_size(&schema).unwrap();
        let fact = est.table("FT1").unwrap();
        // 0.6 * 324 * 5832 combinations.
        assert!(
            (fact.rows - 1_133_740.8).abs() < 1e-6,
            "fact rows {}",
            fact.rows
        );
        let dim = est.table("DIM2_3").unwrap();
        assert_eq!(dim.rows, 5832.0);
        assert!(est.total_bytes > 0.0);
        assert_eq!(est.tables.len(), 6);
    }

    #[test]
    fn estimate_overflow_is_reported() {
        let low = LowLevelParams {
            fact_tables: vec![FactTableParams {
                nb_dim: 20,
                nb_measures: 1,
                density: 1.0,
            }],
            dimensions: (0..20)
                .map(|_| DimensionParams {
                    nb_levels: 2,
                    nb_attributes: vec![1, 1],
                    hhlevel_size: u64::MAX / 2,
                    scale_factor: Some(2),
                })
                .collect(),
        };
        let schema = build_schema(&low, &mut RandomSource::new(1)).unwrap();
        assert!(matches!(
            estimate_size(&schema),
            Err(EstimateError::Overflow { .. })
        ));
    }
}
