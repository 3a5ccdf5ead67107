use std::io::Write;

use super::IcError;
use crate::kg::{tab_records, EntityId, GraphBuilder, KnowledgeGraph};

/// κ: entity → cluster, every entity in exactly one of `k` clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<u32>,
    k: usize,
    seed: u64,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<u32>, k: usize, seed: u64) -> Result<Self, IcError> {
        if let Some(&cluster) = labels.iter().find(|&&c| c as usize >= k) {
            return Err(IcError::ClusterOutOfRange { cluster, k });
        }
        Ok(Self { labels, k, seed })
    }

    /// Each entity its own cluster.
    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n as u32).collect(),
            k: n,
            seed: 0,
        }
    }

    pub fn cluster_of(&self, v: EntityId) -> Result<EntityId, IcError> {
        self.labels
            .get(v.index())
            .map(|&c| EntityId(c))
            .ok_or(IcError::Unassigned(v))
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `entity<TAB>cluster` rows after a `# k=…<TAB>seed=…` header.
    pub fn write_tsv(&self, kg: &KnowledgeGraph, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# k={}\tseed={}", self.k, self.seed)?;
        for (i, c) in self.labels.iter().enumerate() {
            writeln!(out, "{}\t{}", kg.entity_label(EntityId(i as u32)), c)?;
        }
        Ok(())
    }

    pub fn parse_tsv(text: &str, kg: &KnowledgeGraph) -> Result<Self, IcError> {
        let header = text.lines().next().unwrap_or_default();
        let mut k = None;
        let mut seed = 0;
        for field in header.trim_start_matches('#').split('\t') {
            match field.trim().split_once('=') {
                Some(("k", v)) => k = v.parse::<usize>().ok(),
                Some(("seed", v)) => seed = v.parse().unwrap_or(0),
                _ => {}
            }
        }
        let k = k.ok_or_else(|| IcError::Parse {
            line: 1,
            message: "missing `k=` in header".into(),
        })?;
        let mut labels = vec![None; kg.num_entities()];
        for (line, fields) in tab_records(text) {
            let [label, cluster] = fields[..] else {
                return Err(IcError::Parse {
                    line,
                    message: format!("expected 2 fields, found {}", fields.len()),
                });
            };
            let cluster: u32 = cluster.parse().map_err(|_| IcError::Parse {
                line,
                message: format!("bad cluster id `{cluster}`"),
            })?;
            let id = kg.entity_id(label).ok_or_else(|| IcError::Parse {
                line,
                message: format!("unknown entity `{label}`"),
            })?;
            labels[id.index()] = Some(cluster);
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or(IcError::Unassigned(EntityId(i as u32))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(labels, k, seed)
    }
}

/// Entity label used for cluster node `c` in the clustered graph.
pub fn cluster_label(c: u32) -> String {
    format!("C{c}")
}

/// Quotient graph: node ids are cluster ids, relation ids match `kg`, and
/// `(Ci, r, Cj)` exists iff some `(u, r, v)` has `u ∈ Ci`, `v ∈ Cj`.
pub fn build_clustered_graph(
    kg: &KnowledgeGraph,
    clusters: &ClusterAssignment,
) -> Result<KnowledgeGraph, IcError> {
    if clusters.len() < kg.num_entities() {
        return Err(IcError::Unassigned(EntityId(clusters.len() as u32)));
    }
    let mut builder = GraphBuilder::default();
    for c in 0..clusters.k() as u32 {
        builder.intern_entity(&cluster_label(c));
    }
    for r in kg.relations() {
        builder.intern_relation(&r.label);
    }
    let labels = clusters.labels();
    for t in kg.triples() {
        builder.add_ids(
            EntityId(labels[t.subject.index()]),
            t.relation,
            EntityId(labels[t.object.index()]),
        );
    }
    Ok(builder.build_unchecked())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_triples, Triple};
    use std::collections::BTreeSet;

    #[test]
    fn single_cluster_collapses() {
        let kg = parse_triples("a\tr\tb\nc\tr\td\n").unwrap();
        let one = ClusterAssignment::new(vec![0; 4], 1, 0).unwrap();
        let kc = build_clustered_graph(&kg, &one).unwrap();
        assert_eq!(kc.num_entities(), 1);
        assert_eq!(kc.len(), 1);
        assert_eq!(kc.triples()[0], Triple::new(EntityId(0), kc.relation_id("r").unwrap(), EntityId(0)));
    }

    #[test]
    fn singletons_are_isomorphic() {
        let kg = parse_triples("a\tr\tb\nb\tq\tc\nc\tr\ta\n").unwrap();
        let kc = build_clustered_graph(&kg, &ClusterAssignment::singletons(3)).unwrap();
        let a: BTreeSet<_> = kg.triples().iter().collect();
        let b: BTreeSet<_> = kc.triples().iter().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_and_range_errors() {
        let kg = parse_triples("a\tr\tb\nb\tq\tc\n").unwrap();
        let short = ClusterAssignment::new(vec![0, 0], 1, 0).unwrap();
        assert!(matches!(build_clustered_graph(&kg, &short), Err(IcError::Unassigned(_))));
        assert!(ClusterAssignment::new(vec![0, 3], 2, 0).is_err());
    }

    #[test]
    fn tsv_roundtrip() {
        let kg = parse_triples("a\tr\tb\nb\tq\tc\n").unwrap();
        let c = ClusterAssignment::new(vec![1, 0, 1], 2, 77).unwrap();
        let mut buf = Vec::new();
        c.write_tsv(&kg, &mut buf).unwrap();
        let back = ClusterAssignment::parse_tsv(std::str::from_utf8(&buf).unwrap(), &kg).unwrap();
        assert_eq!(back, c);
        assert!(ClusterAssignment::parse_tsv("a\t0\n", &kg).is_err());
    }
}
