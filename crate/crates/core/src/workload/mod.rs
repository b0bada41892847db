//! Decision-support workload generation.
//!
//! A workload is a sequence of queries over one generated schema. Each
//! initial query starts from a skew-chosen fact table, walks up a few
//! dimension hierarchies to collect descriptor attributes (building the join
//! chain as it goes), and adds restriction predicates. Most initial queries
//! aggregate measures under `GROUP BY CUBE` or `ROLLUP` and may filter with
//! `HAVING`; the rest are plain extractions. Every OLAP query is followed by
//! a drill-down chain that re-runs the query with one finer-grained
//! attribute added per step, the classic interactive analysis pattern.
//!
//! Queries are held as structured [`QueryAst`] values; [`sql`] renders them
//! to SQL text and checks arbitrary text against the workload grammar.

pub mod sql;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::model::{FactTableSpec, LevelSpec, SchemaModel, WorkloadParams};
use crate::random::{RandomSource, Streams, StringReferential};

/// Workload-wide query identifier: `Q3` for initial queries, `Q3.D2` for the
/// second drill-down following initial query 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryId {
    pub initial: u64,
    pub drill: Option<u64>,
}

impl QueryId {
    pub fn initial(n: u64) -> Self {
        Self {
            initial: n,
            drill: None,
        }
    }

    pub fn drill(n: u64, k: u64) -> Self {
        Self {
            initial: n,
            drill: Some(k),
        }
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.drill {
            None => write!(f, "Q{}", self.initial),
            Some(k) => write!(f, "Q{}.D{}", self.initial, k),
        }
    }
}

impl FromStr for QueryId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix('Q')
            .ok_or_else(|| format!("query id must start with Q: {s}"))?;
        let (initial, drill) = match rest.split_once(".D") {
            Some((i, d)) => (i, Some(d)),
            None => (rest, None),
        };
        let initial = initial
            .parse()
            .map_err(|_| format!("bad query number in {s}"))?;
        let drill = match drill {
            Some(d) => Some(d.parse().map_err(|_| format!("bad drill number in {s}"))?),
            None => None,
        };
        Ok(QueryId { initial, drill })
    }
}

/// What role a query plays in the workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    /// Aggregating query with CUBE or ROLLUP grouping.
    Olap,
    /// Plain attribute extraction, no aggregation.
    Extraction,
    /// OLAP query refined from its parent by one finer attribute.
    DrillDown,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryKind::Olap => write!(f, "olap"),
            QueryKind::Extraction => write!(f, "extraction"),
            QueryKind::DrillDown => write!(f, "drilldown"),
        }
    }
}

impl FromStr for QueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "olap" => Ok(QueryKind::Olap),
            "extraction" => Ok(QueryKind::Extraction),
            "drilldown" => Ok(QueryKind::DrillDown),
            other => Err(format!("unknown query kind: {other}")),
        }
    }
}

/// A column reference. Rendered `TABLE.COLUMN`; the table part may be empty
/// for hand-written unqualified SQL fed to the grammar checker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QualifiedAttr {
    pub table: String,
    pub column: String,
}

impl QualifiedAttr {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for QualifiedAttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.table.is_empty() {
            write!(f, "{}", self.column)
        } else {
            write!(f, "{}.{}", self.table, self.column)
        }
    }
}

/// One aggregated measure: `SUM(measure) AS alias`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateSelect {
    pub measure: QualifiedAttr,
    pub alias: String,
}

/// Equality join between two key columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinCondition {
    pub left: QualifiedAttr,
    pub right: QualifiedAttr,
}

/// Equality restriction of an attribute against a string literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    pub attribute: QualifiedAttr,
    pub literal: String,
}

/// Grouping operator of an OLAP query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupOperator {
    /// Plain `GROUP BY` without subtotal expansion.
    Plain,
    Cube,
    Rollup,
}

/// `GROUP BY` clause: operator plus grouped attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupBy {
    pub operator: GroupOperator,
    pub attributes: Vec<QualifiedAttr>,
}

/// `HAVING alias >= threshold` filter over one aggregate of the select list.
#[derive(Debug, Clone, PartialEq)]
pub struct Having {
    pub aggregate_alias: String,
    pub threshold: f64,
}

/// Structured form of one query. Rendering is deterministic; see
/// [`sql::render_sql`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryBody {
    pub select_attributes: Vec<QualifiedAttr>,
    pub select_aggregates: Vec<AggregateSelect>,
    pub from_tables: Vec<String>,
    pub join_conditions: Vec<JoinCondition>,
    pub restrictions: Vec<Restriction>,
    pub group_by: Option<GroupBy>,
    pub having: Option<Having>,
}

/// A query with its workload position and lineage.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub id: QueryId,
    pub kind: QueryKind,
    /// For drill-downs, the query this one refines.
    pub parent: Option<QueryId>,
    pub body: QueryBody,
}

/// A generated workload, tied to the schema it was generated against.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub queries: Vec<QueryAst>,
    pub params: WorkloadParams,
    /// Fingerprint of the schema the queries reference; the executor warns
    /// when running against a warehouse with a different fingerprint.
    pub schema_fingerprint: String,
    pub seed: u64,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Initial queries only (OLAP and extraction, no drill-downs).
    pub fn initial_queries(&self) -> impl Iterator<Item = &QueryAst> {
        self.queries.iter().filter(|q| q.id.drill.is_none())
    }
}

/// Generates a workload over `schema`.
///
/// Draws come from the seed's workload substream, so workload generation is
/// independent of data generation: the same seed gives the same workload
/// whether or not data was generated first.
///
/// The loop produces initial queries until the total query count (initial
/// plus drill-downs) reaches `NB_Q`. The final drill-down chain always runs
/// to completion, so the workload can slightly exceed `NB_Q`.
pub fn generate_workload(
    schema: &SchemaModel,
    pool: &StringReferential,
    params: &WorkloadParams,
    spread_ratio: f64,
    streams: &Streams,
) -> Workload {
    let mut source = streams.workload();
    let mut queries: Vec<QueryAst> = Vec::with_capacity(params.nb_queries as usize);
    let mut initial_index = 0u64;

    while (queries.len() as u64) < params.nb_queries {
        initial_index += 1;
        let fact_pick = source.skewed_index(schema.fact_tables.len() as u64);
        let fact = &schema.fact_tables[(fact_pick - 1) as usize];

        let mut body = QueryBody {
            from_tables: vec![fact.table_name.clone()],
            ..QueryBody::default()
        };
        // Deepest (coarsest) level already joined per dimension.
        let mut joined: BTreeMap<u64, u64> = BTreeMap::new();
        // Dimension picks go without replacement until the pool is exhausted,
        // then fall back to the full list.
        let mut unused_dims = fact.dimension_refs.clone();
        let mut last_pick = None;

        let attribute_picks = source.gaussian_int(params.avg_nb_attributes, spread_ratio);
        for _ in 0..attribute_picks {
            let dim_index = if unused_dims.is_empty() {
                let pick = source.skewed_index(fact.dimension_refs.len() as u64);
                fact.dimension_refs[(pick - 1) as usize]
            } else {
                let pick = source.skewed_index(unused_dims.len() as u64);
                unused_dims.remove((pick - 1) as usize)
            };
            let dim = schema.dimension(dim_index);
            let level_index = source.uniform_int(1, dim.nb_levels());
            join_down_to(&mut body, &mut joined, schema, fact, dim_index, level_index);
            let level = &dim.levels[(level_index - 1) as usize];
            if let Some(attr) = pick_unused_descriptor(level, &body.select_attributes, &mut source)
            {
                body.select_attributes.push(attr);
            }
            last_pick = Some((dim_index, level_index));
        }

        let restriction_draws = source
            .gaussian_int(params.avg_nb_restrictions, spread_ratio)
            .min(body.select_attributes.len() as u64);
        for _ in 0..restriction_draws {
            let pick = source.skewed_index(body.select_attributes.len() as u64);
            let attribute = body.select_attributes[(pick - 1) as usize].clone();
            let literal = pool.pick(&mut source, &attribute.column);
            let restriction = Restriction { attribute, literal };
            if !body.restrictions.contains(&restriction) {
                body.restrictions.push(restriction);
            }
        }

        if source.uniform_float(0.0, 1.0) < params.prob_olap {
            let aggregate_draws = source
                .gaussian_int(params.avg_nb_aggregates, spread_ratio)
                .min(fact.measures.len() as u64);
            let mut unused_measures: Vec<&crate::model::Attribute> = fact.measures.iter().collect();
            for _ in 0..aggregate_draws {
                let pick = source.skewed_index(unused_measures.len() as u64);
                let measure = unused_measures.remove((pick - 1) as usize);
                body.select_aggregates.push(AggregateSelect {
                    measure: QualifiedAttr::new(&fact.table_name, &measure.name),
                    alias: format!("{}_SUM", measure.name),
                });
            }
            let operator = if source.uniform_float(0.0, 1.0) < params.prob_cube {
                GroupOperator::Cube
            } else {
                GroupOperator::Rollup
            };
            body.group_by = Some(GroupBy {
                operator,
                attributes: body.select_attributes.clone(),
            });
            if source.uniform_float(0.0, 1.0) < params.prob_having {
                let pick = source.skewed_index(body.select_aggregates.len() as u64);
                // Snap the threshold to its rendered precision so the AST
                // holds exactly the value the SQL text carries and queries
                // survive a render/parse round trip unchanged.
                let raw = source.uniform_float(0.0, crate::data::MEASURE_MAX);
                let threshold = crate::emit::format_measure(raw)
                    .parse()
                    .expect("formatted measure parses back");
                body.having = Some(Having {
                    aggregate_alias: body.select_aggregates[(pick - 1) as usize].alias.clone(),
                    threshold,
                });
            }

            let id = QueryId::initial(initial_index);
            queries.push(QueryAst {
                id,
                kind: QueryKind::Olap,
                parent: None,
                body: body.clone(),
            });

            // Drill-down chain: from the level of the last attribute pick,
            // move one level finer per step and add one of its descriptors
            // to the select and group lists. The chain stops early at the
            // finest level or when a level has no unused descriptor left.
            let drill_target = source.gaussian_int(params.avg_nb_drill_downs, spread_ratio);
            let (dim_index, mut level_index) =
                last_pick.expect("attribute_picks >= 1 guarantees a pick");
            let dim = schema.dimension(dim_index);
            let mut parent_id = id;
            let mut drill_body = body;
            let mut step = 0u64;
            while step < drill_target && level_index < dim.nb_levels() {
                level_index += 1;
                let level = &dim.levels[(level_index - 1) as usize];
                let Some(attr) =
                    pick_unused_descriptor(level, &drill_body.select_attributes, &mut source)
                else {
                    break;
                };
                step += 1;
                drill_body.select_attributes.push(attr.clone());
                drill_body
                    .group_by
                    .as_mut()
                    .expect("OLAP query always has a group clause")
                    .attributes
                    .push(attr);
                let drill_id = QueryId::drill(initial_index, step);
                queries.push(QueryAst {
                    id: drill_id,
                    kind: QueryKind::DrillDown,
                    parent: Some(parent_id),
                    body: drill_body.clone(),
                });
                parent_id = drill_id;
            }
        } else {
            queries.push(QueryAst {
                id: QueryId::initial(initial_index),
                kind: QueryKind::Extraction,
                parent: None,
                body,
            });
        }
    }

    Workload {
        queries,
        params: params.clone(),
        schema_fingerprint: schema.fingerprint(),
        seed: streams.seed(),
    }
}

/// Ensures the join chain from the fact table down to `level_index` of the
/// given dimension exists in the body, extending it monotonically: once a
/// level is joined it stays joined.
///
/// The chain runs fact -> entry level -> ... -> `level_index` inclusive, so
/// every table whose attributes the query can reference is in `FROM` and
/// transitively joined to the fact table.
fn join_down_to(
    body: &mut QueryBody,
    joined: &mut BTreeMap<u64, u64>,
    schema: &SchemaModel,
    fact: &FactTableSpec,
    dim_index: u64,
    level_index: u64,
) {
    let dim = schema.dimension(dim_index);
    let entry = dim.entry_level();
    let current = joined.entry(dim_index).or_insert_with(|| {
        // First contact with this dimension: join the fact table to the
        // entry level. The fact's foreign key is named after the entry key.
        body.from_tables.push(entry.table_name.clone());
        body.join_conditions.push(JoinCondition {
            left: QualifiedAttr::new(&fact.table_name, &entry.primary_key().name),
            right: QualifiedAttr::new(&entry.table_name, &entry.primary_key().name),
        });
        entry.level_index
    });
    while *current > level_index {
        let finer = &dim.levels[(*current - 1) as usize];
        let coarser = &dim.levels[(*current - 2) as usize];
        body.from_tables.push(coarser.table_name.clone());
        body.join_conditions.push(JoinCondition {
            left: QualifiedAttr::new(&finer.table_name, &coarser.primary_key().name),
            right: QualifiedAttr::new(&coarser.table_name, &coarser.primary_key().name),
        });
        *current -= 1;
    }
}

/// Draws one descriptor of `level` that is not already selected, with the
/// usual centered skew over the remaining candidates. Returns `None` when
/// the level's descriptors are exhausted.
fn pick_unused_descriptor(
    level: &LevelSpec,
    selected: &[QualifiedAttr],
    source: &mut RandomSource,
) -> Option<QualifiedAttr> {
    let candidates: Vec<QualifiedAttr> = level
        .descriptors()
        .map(|a| QualifiedAttr::new(&level.table_name, &a.name))
        .filter(|a| !selected.contains(a))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let pick = source.skewed_index(candidates.len() as u64);
    Some(candidates[(pick - 1) as usize].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DimensionParams, FactTableParams, LowLevelParams};
    use crate::random::DEFAULT_SPREAD_RATIO;
    use crate::schema::build_schema;

    fn test_schema(seed: u64) -> SchemaModel {
        let low = LowLevelParams {
            fact_tables: vec![FactTableParams {
                nb_dim: 2,
                nb_measures: 5,
                density: 0.6,
            }],
            dimensions: vec![
                DimensionParams {
                    nb_levels: 2,
                    nb_attributes: vec![5, 5],
                    hhlevel_size: 4,
                    scale_factor: Some(3),
                },
                DimensionParams {
                    nb_levels: 3,
                    nb_attributes: vec![4, 4, 4],
                    hhlevel_size: 4,
                    scale_factor: Some(3),
                },
            ],
        };
        build_schema(&low, &mut RandomSource::new(seed)).unwrap()
    }

    fn generate(seed: u64, params: &WorkloadParams) -> Workload {
        let schema = test_schema(1);
        let pool = StringReferential::with_size(seed, 50);
        generate_workload(
            &schema,
            &pool,
            params,
            DEFAULT_SPREAD_RATIO,
            &Streams::new(seed),
        )
    }

    #[test]
    fn query_ids_roundtrip() {
        for id in [QueryId::initial(7), QueryId::drill(7, 2)] {
            let text = id.to_string();
            assert_eq!(text.parse::<QueryId>().unwrap(), id);
        }
        assert_eq!(QueryId::initial(3).to_string(), "Q3");
        assert_eq!(QueryId::drill(3, 1).to_string(), "Q3.D1");
        assert!("X3".parse::<QueryId>().is_err());
    }

    #[test]
    fn workload_reaches_requested_count() {
        let params = WorkloadParams {
            nb_queries: 20,
            ..WorkloadParams::default()
        };
        let w = generate(1, &params);
        assert!(w.len() >= 20, "only {} queries", w.len());
        // The overshoot is at most the tail drill chain.
        assert!(
            w.len() < 40,
            "workload overshot far beyond NB_Q: {}",
            w.len()
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let params = WorkloadParams {
            nb_queries: 30,
            ..WorkloadParams::default()
        };
        assert_eq!(generate(5, &params), generate(5, &params));
        assert_ne!(generate(5, &params), generate(6, &params));
    }

    #[test]
    fn zero_olap_probability_yields_pure_extractions() {
        let params = WorkloadParams {
            nb_queries: 40,
            prob_olap: 0.0,
            ..WorkloadParams::default()
        };
        let w = generate(2, &params);
        assert_eq!(w.len(), 40, "extractions have no drill overshoot");
        for q in &w.queries {
            assert_eq!(q.kind, QueryKind::Extraction);
            assert!(q.body.select_aggregates.is_empty());
            assert!(q.body.group_by.is_none());
            assert!(q.body.having.is_none());
            assert!(q.parent.is_none());
        }
    }

    #[test]
    fn olap_queries_aggregate_and_group() {
        let params = WorkloadParams {
            nb_queries: 60,
            prob_olap: 1.0,
            prob_having: 1.0,
            ..WorkloadParams::default()
        };
        let w = generate(3, &params);
        for q in &w.queries {
            assert!(matches!(q.kind, QueryKind::Olap | QueryKind::DrillDown));
            assert!(!q.body.select_aggregates.is_empty());
            let group = q.body.group_by.as_ref().expect("OLAP queries must group");
            assert!(matches!(
                group.operator,
                GroupOperator::Cube | GroupOperator::Rollup
            ));
            assert_eq!(group.attributes, q.body.select_attributes);
            let having = q.body.having.as_ref().expect("PROB_HAVING 1 forces HAVING");
            assert!(q
                .body
                .select_aggregates
                .iter()
                .any(|a| a.alias == having.aggregate_alias));
            // Snapping to rendered precision can round the top draw up to
            // the bound itself, so the upper end is inclusive.
            assert!((0.0..=crate::data::MEASURE_MAX).contains(&having.threshold));
            // Aggregated measures are distinct.
            for (i, a) in q.body.select_aggregates.iter().enumerate() {
                for b in &q.body.select_aggregates[..i] {
                    assert_ne!(a.measure, b.measure);
                }
            }
        }
    }

    #[test]
    fn join_chains_link_every_referenced_table() {
        let params = WorkloadParams {
            nb_queries: 50,
            ..WorkloadParams::default()
        };
        let w = generate(4, &params);
        for q in &w.queries {
            // Fact table first, no duplicates.
            assert_eq!(q.body.from_tables[0], "FT1");
            for (i, t) in q.body.from_tables.iter().enumerate() {
                assert!(!q.body.from_tables[..i].contains(t), "duplicate table {t}");
            }
            // Every selected attribute's table is in FROM.
            for attr in &q.body.select_attributes {
                assert!(
                    q.body.from_tables.contains(&attr.table),
                    "{} selected but {} not joined",
                    attr.column,
                    attr.table
                );
            }
            // Every non-fact table is reachable from the fact table through
            // join conditions (connected join graph).
            let mut reached = vec![q.body.from_tables[0].clone()];
            let mut grew = true;
            while grew {
                grew = false;
                for j in &q.body.join_conditions {
                    let l = &j.left.table;
                    let r = &j.right.table;
                    if reached.contains(l) && !reached.contains(r) {
                        reached.push(r.clone());
                        grew = true;
                    } else if reached.contains(r) && !reached.contains(l) {
                        reached.push(l.clone());
                        grew = true;
                    }
                }
            }
            for t in &q.body.from_tables {
                assert!(
                    reached.contains(t),
                    "table {t} not joined to the fact table"
                );
            }
        }
    }

    #[test]
    fn restrictions_use_selected_attributes() {
        let params = WorkloadParams {
            nb_queries: 50,
            ..WorkloadParams::default()
        };
        let w = generate(7, &params);
        let mut saw_restriction = false;
        for q in &w.queries {
            assert!(q.body.restrictions.len() <= q.body.select_attributes.len());
            for r in &q.body.restrictions {
                saw_restriction = true;
                assert!(q.body.select_attributes.contains(&r.attribute));
                // Literal is the attribute name, an underscore, a pool string.
                assert!(r.literal.starts_with(&format!("{}_", r.attribute.column)));
            }
        }
        assert!(
            saw_restriction,
            "expected at least one restriction in 50 queries"
        );
    }

    #[test]
    fn drill_downs_descend_one_attribute_at_a_time() {
        let params = WorkloadParams {
            nb_queries: 80,
            prob_olap: 1.0,
            avg_nb_drill_downs: 3.0,
            ..WorkloadParams::default()
        };
        let w = generate(8, &params);
        let mut saw_drill = false;
        for pair in w.queries.windows(2) {
            let (prev, q) = (&pair[0], &pair[1]);
            if q.kind != QueryKind::DrillDown {
                continue;
            }
            saw_drill = true;
            assert_eq!(q.parent, Some(prev.id));
            assert_eq!(q.id.initial, prev.id.initial);
            // Exactly one attribute added, everything else inherited.
            assert_eq!(
                q.body.select_attributes.len(),
                prev.body.select_attributes.len() + 1
            );
            assert_eq!(
                q.body.select_attributes[..prev.body.select_attributes.len()],
                prev.body.select_attributes[..]
            );
            assert_eq!(q.body.select_aggregates, prev.body.select_aggregates);
            assert_eq!(q.body.restrictions, prev.body.restrictions);
            assert_eq!(q.body.from_tables, prev.body.from_tables);
            let added = q.body.select_attributes.last().unwrap();
            let prev_added = q.body.group_by.as_ref().unwrap().attributes.last().unwrap();
            assert_eq!(added, prev_added);
        }
        assert!(saw_drill, "expected drill-downs with PROB_OLAP=1");
    }

    #[test]
    fn olap_fraction_tracks_probability() {
        let params = WorkloadParams {
            nb_queries: 4000,
            prob_olap: 0.9,
            ..WorkloadParams::default()
        };
        let w = generate(9, &params);
        let initials: Vec<_> = w.initial_queries().collect();
        let olap = initials
            .iter()
            .filter(|q| q.kind == QueryKind::Olap)
            .count();
        let frac = olap as f64 / initials.len() as f64;
        // ~1100 initial queries; standard error ~0.009. A loose smoke bound;
        // the acceptance suite checks tighter bounds at larger scale.
        assert!((frac - 0.9).abs() < 0.04, "OLAP fraction {frac}");
    }
}
