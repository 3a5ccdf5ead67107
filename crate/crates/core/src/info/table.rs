use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_clustered_graph, ClusterAssignment, IcError};
use crate::kg::{tab_records, EntityId, KnowledgeGraph, RelationId, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcMode {
    Ic,
    Cic,
    CicByRelation,
}

impl IcMode {
    pub fn needs_clusters(self) -> bool {
        !matches!(self, IcMode::Ic)
    }
}

impl fmt::Display for IcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IcMode::Ic => "ic",
            IcMode::Cic => "cic",
            IcMode::CicByRelation => "cic_by_relation",
        })
    }
}

impl FromStr for IcMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ic" => Ok(IcMode::Ic),
            "cic" => Ok(IcMode::Cic),
            "cic_by_relation" => Ok(IcMode::CicByRelation),
            other => Err(format!("unknown IC mode `{other}`")),
        }
    }
}

/// How raw surprisal is mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by `ln |G|` (`ln |G_c|` for clustered modes), the surprisal of a degree-1 node.
    #[default]
    MaxSurprisal,
    /// Divide by a fixed constant; results are clamped to `[0, 1]`.
    Fixed(f64),
}

fn surprisal(count: u32, population: usize) -> f64 {
    -(count as f64 / population as f64).ln()
}

/// `-ln(degree(v) / |G|)`. Self-loops count twice, so the value can drop below
/// zero on graphs dominated by self-loops.
pub fn node_ic(kg: &KnowledgeGraph, v: EntityId) -> Result<f64, IcError> {
    match kg.degree(v)? {
        0 => Err(IcError::ZeroDegree(v)),
        d => Ok(surprisal(d, kg.len())),
    }
}

/// `-ln(degree_c(κ(v)) / |G_c|)` with the degree taken in the clustered graph.
pub fn clustered_node_ic(
    clustered: &KnowledgeGraph,
    clusters: &ClusterAssignment,
    v: EntityId,
) -> Result<f64, IcError> {
    let c = clusters.cluster_of(v)?;
    match clustered.degree(c)? {
        0 => Err(IcError::ZeroDegree(v)),
        d => Ok(surprisal(d, clustered.len())),
    }
}

/// `-ln(degree_c(κ(v), r) / N_r)` where `N_r` counts clustered triples with relation `r`.
pub fn clustered_node_ic_by_relation(
    clustered: &KnowledgeGraph,
    clusters: &ClusterAssignment,
    v: EntityId,
    r: RelationId,
) -> Result<f64, IcError> {
    clustered.check_relation(r)?;
    let population = clustered.relation_count(r);
    if population == 0 {
        return Err(IcError::AbsentRelation(r));
    }
    let c = clusters.cluster_of(v)?;
    match clustered.degree_by_relation(c, r)? {
        0 => Err(IcError::ZeroRelationDegree {
            entity: v,
            relation: r,
        }),
        d => Ok(surprisal(d, population)),
    }
}

/// Per-node (and, in by-relation mode, per node and relation) IC scores.
///
/// Stored raw scores are clamped at zero. In by-relation mode each entity also
/// keeps its relation-agnostic clustered score, used when the queried relation
/// never touches the entity's cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct IcTable {
    mode: IcMode,
    z: f64,
    k: Option<usize>,
    seed: Option<u64>,
    node_raw: Vec<Option<f64>>,
    rel_offsets: Vec<usize>,
    rel_scores: Vec<(RelationId, f64)>,
}

impl IcTable {
    pub fn mode(&self) -> IcMode {
        self.mode
    }

    /// Normalization constant.
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn cluster_count(&self) -> Option<usize> {
        self.k
    }

    pub fn cluster_seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn num_entities(&self) -> usize {
        self.node_raw.len()
    }

    /// Relation-agnostic raw score (IC or CIC by mode).
    pub fn raw(&self, v: EntityId) -> Result<f64, IcError> {
        self.node_raw
            .get(v.index())
            .copied()
            .flatten()
            .ok_or(IcError::ZeroDegree(v))
    }

    fn relation_slice(&self, v: EntityId) -> &[(RelationId, f64)] {
        if self.rel_offsets.is_empty() || v.index() + 1 >= self.rel_offsets.len() {
            return &[];
        }
        &self.rel_scores[self.rel_offsets[v.index()]..self.rel_offsets[v.index() + 1]]
    }

    /// Raw score of `v` conditioned on `r` where the mode uses relations, falling
    /// back to the relation-agnostic score when `(κ(v), r)` has zero degree.
    pub fn raw_for(&self, v: EntityId, r: RelationId) -> Result<f64, IcError> {
        if self.mode == IcMode::CicByRelation {
            let slice = self.relation_slice(v);
            if let Ok(i) = slice.binary_search_by_key(&r, |x| x.0) {
                return Ok(slice[i].1);
            }
        }
        self.raw(v)
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        if self.z > 0.0 {
            (raw / self.z).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Relation-conditioned rows, `(entity, relation, raw)`, by-relation mode only.
    pub fn relation_rows(&self) -> impl Iterator<Item = (EntityId, RelationId, f64)> + '_ {
        (0..self.rel_offsets.len().saturating_sub(1)).flat_map(move |v| {
            let v = EntityId(v as u32);
            self.relation_slice(v).iter().map(move |&(r, s)| (v, r, s))
        })
    }

    /// Writes `entity[<TAB>relation]<TAB>raw<TAB>normalized` rows behind a header
    /// line `# mode=…<TAB>Z=…<TAB>k=…<TAB>seed=…`. In by-relation mode the
    /// relation-agnostic fallback rows use `*` as relation.
    pub fn write_tsv(&self, kg: &KnowledgeGraph, mut out: impl Write) -> std::io::Result<()> {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "# mode={}\tZ={}\tk={}\tseed={}",
            self.mode,
            self.z,
            opt(self.k.map(|k| k.to_string())),
            opt(self.seed.map(|s| s.to_string()))
        )?;
        let by_relation = self.mode == IcMode::CicByRelation;
        for (i, raw) in self.node_raw.iter().enumerate() {
            let Some(raw) = raw else { continue };
            let label = kg.entity_label(EntityId(i as u32));
            if by_relation {
                writeln!(out, "{label}\t*\t{raw}\t{}", self.normalize(*raw))?;
            } else {
                writeln!(out, "{label}\t{raw}\t{}", self.normalize(*raw))?;
            }
        }
        for (v, r, raw) in self.relation_rows() {
            writeln!(
                out,
                "{}\t{}\t{raw}\t{}",
                kg.entity_label(v),
                kg.relation_label(r),
                self.normalize(raw)
            )?;
        }
        Ok(())
    }

    pub fn parse_tsv(text: &str, kg: &KnowledgeGraph) -> Result<Self, IcError> {
        let parse_err = |line: usize, message: String| IcError::Parse { line, message };
        let header = text
            .lines()
            .next()
            .and_then(|h| h.strip_prefix('#'))
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let (mut mode, mut z, mut k, mut seed) = (None, None, None, None);
        for field in header.split('\t') {
            match field.trim().split_once('=') {
                Some(("mode", v)) => mode = Some(v.parse::<IcMode>().map_err(|e| parse_err(1, e))?),
                Some(("Z", v)) => {
                    z = Some(v.parse::<f64>().map_err(|e| parse_err(1, e.to_string()))?)
                }
                Some(("k", v)) => k = v.parse::<usize>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        let mode = mode.ok_or_else(|| parse_err(1, "missing mode".into()))?;
        let z = z
            .filter(|z| z.is_finite() && *z >= 0.0)
            .ok_or_else(|| parse_err(1, "missing or invalid Z".into()))?;

        let n = kg.num_entities();
        let mut node_raw = vec![None; n];
        let mut per_entity: Vec<Vec<(RelationId, f64)>> = vec![Vec::new(); n];
        let columns = if mode == IcMode::CicByRelation { 4 } else { 3 };
        for (line, fields) in tab_records(text) {
            if fields.len() != columns {
                return Err(parse_err(
                    line,
                    format!("expected {columns} fields, found {}", fields.len()),
                ));
            }
            let v = kg
                .entity_id(fields[0])
                .ok_or_else(|| parse_err(line, format!("unknown entity `{}`", fields[0])))?;
            let raw: f64 = fields[columns - 2]
                .parse()
                .map_err(|_| parse_err(line, format!("bad score `{}`", fields[columns - 2])))?;
            if !(raw.is_finite() && raw >= 0.0) {
                return Err(parse_err(line, "raw score must be finite and non-negative".into()));
            }
            if columns == 4 && fields[1] != "*" {
                let r = kg
                    .relation_id(fields[1])
                    .ok_or_else(|| parse_err(line, format!("unknown relation `{}`", fields[1])))?;
                per_entity[v.index()].push((r, raw));
            } else {
                node_raw[v.index()] = Some(raw);
            }
        }
        let (rel_offsets, rel_scores) = if mode == IcMode::CicByRelation {
            flatten(per_entity)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            mode,
            z,
            k,
            seed,
            node_raw,
            rel_offsets,
            rel_scores,
        })
    }
}

fn flatten(mut rows: Vec<Vec<(RelationId, f64)>>) -> (Vec<usize>, Vec<(RelationId, f64)>) {
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    let mut scores = Vec::new();
    offsets.push(0);
    for row in &mut rows {
        row.sort_by_key(|x| x.0);
        row.dedup_by_key(|x| x.0);
        scores.extend_from_slice(row);
        offsets.push(scores.len());
    }
    (offsets, scores)
}

fn normalization_constant(norm: Normalization, population: usize) -> f64 {
    match norm {
        Normalization::MaxSurprisal if population > 1 => (population as f64).ln(),
        Normalization::MaxSurprisal => 0.0,
        Normalization::Fixed(z) => z,
    }
}

/// Builds the score table for every entity of `kg`. Clustered modes need `clusters`.
pub fn compute_ic_table(
    kg: &KnowledgeGraph,
    mode: IcMode,
    clusters: Option<&ClusterAssignment>,
    normalization: Normalization,
) -> Result<IcTable, IcError> {
    if mode == IcMode::Ic {
        let population = kg.len();
        let node_raw = kg
            .degrees()
            .par_iter()
            .map(|&d| (d > 0).then(|| surprisal(d, population).max(0.0)))
            .collect();
        return Ok(IcTable {
            mode,
            z: normalization_constant(normalization, population),
            k: None,
            seed: None,
            node_raw,
            rel_offsets: Vec::new(),
            rel_scores: Vec::new(),
        });
    }

    let clusters = clusters.ok_or(IcError::MissingClusters(mode))?;
    let clustered = build_clustered_graph(kg, clusters)?;
    let population = clustered.len();
    let cluster_raw: Vec<Option<f64>> = clustered
        .degrees()
        .iter()
        .map(|&d| (d > 0).then(|| surprisal(d, population).max(0.0)))
        .collect();
    let labels = clusters.labels();
    let node_raw = labels[..kg.num_entities()]
        .iter()
        .map(|&c| cluster_raw[c as usize])
        .collect();

    let (rel_offsets, rel_scores) = if mode == IcMode::CicByRelation {
        let counts = clustered.relation_counts();
        let per_cluster: Vec<Vec<(RelationId, f64)>> = (0..clustered.num_entities())
            .into_par_iter()
            .map(|c| {
                let c = EntityId(c as u32);
                let mut rels: Vec<RelationId> = clustered
                    .outgoing(c)
                    .iter()
                    .map(|t| t.relation)
                    .chain(clustered.incoming(c).iter().map(|x| x.0))
                    .collect();
                rels.sort_unstable();
                rels.dedup();
                rels.into_iter()
                    .map(|r| {
                        let d = clustered.degree_by_relation(c, r).expect("ids in range");
                        (r, surprisal(d, counts[r.index()]).max(0.0))
                    })
                    .collect()
            })
            .collect();
        flatten(
            labels[..kg.num_entities()]
                .iter()
                .map(|&c| per_cluster[c as usize].clone())
                .collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };

    Ok(IcTable {
        mode,
        z: normalization_constant(normalization, population),
        k: Some(clusters.k()),
        seed: Some(clusters.seed()),
        node_raw,
        rel_offsets,
        rel_scores,
    })
}

/// Mean of the endpoint scores divided by the normalization constant. In
/// by-relation mode both endpoints are conditioned on the edge's relation.
pub fn edge_ic(table: &IcTable, t: &Triple) -> Result<f64, IcError> {
    let s = table.raw_for(t.subject, t.relation)?;
    let o = table.raw_for(t.object, t.relation)?;
    Ok(table.normalize((s + o) / 2.0))
}

/// Mean edge IC along a path.
pub fn path_relevance(table: &IcTable, triples: &[Triple]) -> Result<f64, IcError> {
    if triples.is_empty() {
        return Err(IcError::EmptyPath);
    }
    let mut sum = 0.0;
    for t in triples {
        sum += edge_ic(table, t)?;
    }
    Ok(sum / triples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::build_clustered_graph;
    use crate::kg::parse_triples;

    fn toy() -> KnowledgeGraph {
        parse_triples("a\tr\tb\nb\tr\tc\na\tq\tc\n").unwrap()
    }

    #[test]
    fn node_ic_values() {
        let kg = toy();
        // each node has degree 2 of |G| = 3
        for v in 0..3 {
            let ic = node_ic(&kg, EntityId(v)).unwrap();
            assert!((ic - (1.5f64).ln()).abs() < 1e-15);
        }
        // degree(v) = |G| gives zero
        let star = parse_triples("h\tr\tx\nh\tr\ty\n").unwrap();
        assert_eq!(node_ic(&star, star.entity_id("h").unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn node_ic_formula_points() {
        // degree 5 of 100 gives ln 20
        let mut text = String::new();
        for i in 0..5 {
            text.push_str(&format!("v\tr\tx{i}\n"));
        }
        for i in 0..95 {
            text.push_str(&format!("p{i}\tr\tq{i}\n"));
        }
        let kg = parse_triples(&text).unwrap();
        let ic = node_ic(&kg, kg.entity_id("v").unwrap()).unwrap();
        assert!((ic - 20f64.ln()).abs() < 1e-12);
        assert!((ic - 2.9957).abs() < 1e-4);
        // degree 1 gives ln |G|
        let ic1 = node_ic(&kg, kg.entity_id("p0").unwrap()).unwrap();
        assert!((ic1 - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn undefined_for_isolated() {
        let kg = toy();
        let mut b = crate::kg::GraphBuilder::from_graph(&kg);
        b.intern_entity("lonely");
        let kg = b.build().unwrap();
        let v = kg.entity_id("lonely").unwrap();
        assert!(matches!(node_ic(&kg, v), Err(IcError::ZeroDegree(_))));
    }

    #[test]
    fn clustered_singletons_match_ic() {
        let kg = toy();
        let c = ClusterAssignment::singletons(3);
        let kc = build_clustered_graph(&kg, &c).unwrap();
        for v in 0..3 {
            let v = EntityId(v);
            assert_eq!(node_ic(&kg, v).unwrap(), clustered_node_ic(&kc, &c, v).unwrap());
        }
        let ic = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let cic = compute_ic_table(&kg, IcMode::Cic, Some(&c), Normalization::MaxSurprisal).unwrap();
        for v in 0..3 {
            assert_eq!(ic.raw(EntityId(v)).unwrap(), cic.raw(EntityId(v)).unwrap());
        }
    }

    #[test]
    fn one_cluster_self_loop() {
        // single node with a self-loop: degree 2 of |G_c| = 1
        let kg = toy();
        let c = ClusterAssignment::new(vec![0; 3], 1, 0).unwrap();
        let kc = build_clustered_graph(&kg, &c).unwrap();
        assert_eq!(kc.len(), 2);
        let kg1 = parse_triples("a\tr\tb\nc\tr\ta\n").unwrap();
        let kc1 = build_clustered_graph(&kg1, &c).unwrap();
        assert_eq!(kc1.len(), 1);
        let v = clustered_node_ic(&kc1, &c, EntityId(0)).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-15);
        // the table clamps that to zero
        let t = compute_ic_table(&kg1, IcMode::Cic, Some(&c), Normalization::MaxSurprisal).unwrap();
        assert_eq!(t.raw(EntityId(0)).unwrap(), 0.0);
    }

    #[test]
    fn merged_entities_share_cic() {
        let kg = parse_triples("a\tr\tx\nb\tr\ty\nb\tq\tz\n").unwrap();
        let c = ClusterAssignment::new(vec![0, 1, 0, 2, 3], 4, 0).unwrap();
        let kc = build_clustered_graph(&kg, &c).unwrap();
        let b = kg.entity_id("b").unwrap();
        let a = kg.entity_id("a").unwrap();
        assert_eq!(c.cluster_of(a).unwrap(), c.cluster_of(b).unwrap());
        assert_eq!(
            clustered_node_ic(&kc, &c, a).unwrap(),
            clustered_node_ic(&kc, &c, b).unwrap()
        );
    }

    #[test]
    fn by_relation_formula() {
        // cluster A appears in 2 of the 8 r-triples
        let mut text = String::from("a\tr\tm0\nm1\tr\ta\n");
        for i in 2..8 {
            text.push_str(&format!("m{i}\tr\tn{i}\n"));
        }
        text.push_str("a\tq\tm0\n");
        let kg = parse_triples(&text).unwrap();
        let c = ClusterAssignment::singletons(kg.num_entities());
        let kc = build_clustered_graph(&kg, &c).unwrap();
        let a = kg.entity_id("a").unwrap();
        let r = kg.relation_id("r").unwrap();
        let q = kg.relation_id("q").unwrap();
        let v = clustered_node_ic_by_relation(&kc, &c, a, r).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-15);
        assert!((v - 1.3863).abs() < 1e-4);
        // only q-triple touches a
        assert_eq!(clustered_node_ic_by_relation(&kc, &c, a, q).unwrap(), 0.0);
        let m5 = kg.entity_id("m5").unwrap();
        assert!(matches!(
            clustered_node_ic_by_relation(&kc, &c, m5, q),
            Err(IcError::ZeroRelationDegree { .. })
        ));
        assert!(clustered_node_ic_by_relation(&kc, &c, a, RelationId(9)).is_err());
    }

    #[test]
    fn absent_relation_errors() {
        let mut b = crate::kg::GraphBuilder::default();
        b.add("a", "r", "b");
        b.intern_relation("ghost");
        let kg = b.build().unwrap();
        let c = ClusterAssignment::singletons(2);
        let kc = build_clustered_graph(&kg, &c).unwrap();
        let ghost = kg.relation_id("ghost").unwrap();
        assert!(matches!(
            clustered_node_ic_by_relation(&kc, &c, EntityId(0), ghost),
            Err(IcError::AbsentRelation(_))
        ));
    }

    #[test]
    fn edge_and_path_scores() {
        let kg = toy();
        let t = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let z = 3f64.ln();
        assert_eq!(t.z(), z);
        let e = kg.triples()[0];
        let x = t.raw(e.subject).unwrap();
        let y = t.raw(e.object).unwrap();
        assert!((edge_ic(&t, &e).unwrap() - (x + y) / (2.0 * z)).abs() < 1e-15);
        assert_eq!(
            path_relevance(&t, &kg.triples()[..1]).unwrap(),
            edge_ic(&t, &kg.triples()[0]).unwrap()
        );
        let two = [kg.triples()[0], kg.triples()[1]];
        let mean = (edge_ic(&t, &two[0]).unwrap() + edge_ic(&t, &two[1]).unwrap()) / 2.0;
        assert!((path_relevance(&t, &two).unwrap() - mean).abs() < 1e-15);
        assert!(matches!(path_relevance(&t, &[]), Err(IcError::EmptyPath)));
    }

    #[test]
    fn zero_scores_give_zero_edge() {
        let kg = parse_triples("h\tr\th2\nh2\tr\th\n").unwrap();
        let t = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        assert_eq!(edge_ic(&t, &kg.triples()[0]).unwrap(), 0.0);
    }

    #[test]
    fn missing_clusters() {
        assert!(matches!(
            compute_ic_table(&toy(), IcMode::Cic, None, Normalization::MaxSurprisal),
            Err(IcError::MissingClusters(IcMode::Cic))
        ));
    }

    #[test]
    fn by_relation_fallback_and_rows() {
        let kg = parse_triples("a\tr\tb\nb\tq\tc\nc\tr\td\n").unwrap();
        let c = ClusterAssignment::new(vec![0, 1, 0, 1], 2, 3).unwrap();
        let t = compute_ic_table(&kg, IcMode::CicByRelation, Some(&c), Normalization::MaxSurprisal)
            .unwrap();
        let kc = build_clustered_graph(&kg, &c).unwrap();
        // counting oracle: nonzero (cluster, relation) pairs expanded per entity
        let mut expected = 0;
        for v in 0..4u32 {
            let cv = c.labels()[v as usize];
            for r in 0..kc.num_relations() as u32 {
                let touches = kc.triples().iter().any(|t| {
                    t.relation.0 == r && (t.subject.0 == cv || t.object.0 == cv)
                });
                expected += touches as usize;
            }
        }
        assert_eq!(t.relation_rows().count(), expected);
        let unknown_rel = RelationId(5);
        assert_eq!(t.raw_for(EntityId(0), unknown_rel).unwrap(), t.raw(EntityId(0)).unwrap());
    }

    #[test]
    fn tsv_roundtrip_all_modes() {
        let kg = parse_triples("a\tr\tb\nb\tq\tc\nc\tr\td\nd\tq\ta\n").unwrap();
        let c = ClusterAssignment::new(vec![0, 1, 0, 1], 2, 3).unwrap();
        for mode in [IcMode::Ic, IcMode::Cic, IcMode::CicByRelation] {
            let t = compute_ic_table(&kg, mode, Some(&c), Normalization::MaxSurprisal).unwrap();
            let mut buf = Vec::new();
            t.write_tsv(&kg, &mut buf).unwrap();
            let back = IcTable::parse_tsv(std::str::from_utf8(&buf).unwrap(), &kg).unwrap();
            assert_eq!(back, t, "{mode}");
        }
        assert!(IcTable::parse_tsv("a\t1\t1\n", &kg).is_err());
        assert!(IcTable::parse_tsv("# mode=ic\tZ=1\na\t-1\t0\n", &kg).is_err());
    }
}
