//! Knowledge graph storage: vocabularies, a deduplicated triple set and
//! CSR-style outgoing/incoming adjacency with degree tables.

mod io;
mod path;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use path::{Path, PathError};
pub use io::{
    parse_entity_types, parse_hypotheses, parse_triples, read_entity_types, read_hypotheses,
    read_triples, tab_records, write_triples,
};

/// Label prefix marking an inverse relation.
pub const INVERSE_PREFIX: &str = "_inv_";

/// Type tag given to entities missing from the type file.
pub const UNKNOWN_TYPE: &str = "Unknown";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("graph contains no triples")]
    Empty,
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("entity id {0} out of range")]
    EntityOutOfRange(u32),
    #[error("relation id {0} out of range")]
    RelationOutOfRange(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Self {
            subject,
            relation,
            object,
        }
    }
}

/// A candidate link to validate. The object is always known for training and
/// evaluation; inference-time queries use [`crate::pathfinder::Query`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity<'a> {
    pub id: EntityId,
    pub label: &'a str,
    pub type_tag: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub id: RelationId,
    pub label: String,
    pub is_inverse: bool,
    pub inverse_of: Option<RelationId>,
}

/// Label of the relation paired with `label` under the prefix convention.
pub fn inverse_label(label: &str) -> String {
    match label.strip_prefix(INVERSE_PREFIX) {
        Some(base) => base.to_string(),
        None => format!("{INVERSE_PREFIX}{label}"),
    }
}

/// Immutable, indexed knowledge graph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_labels: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    entity_types: Vec<Option<String>>,
    relations: Vec<Relation>,
    relation_index: HashMap<String, RelationId>,
    /// Sorted by (subject, relation, object), no duplicates.
    triples: Vec<Triple>,
    out_offsets: Vec<usize>,
    /// (relation, subject) pairs grouped by object, sorted within a group.
    incoming: Vec<(RelationId, EntityId)>,
    in_offsets: Vec<usize>,
    degree: Vec<u32>,
}

impl KnowledgeGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    /// |G|, the number of distinct triples.
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.out_slice(t.subject)
            .binary_search_by(|x| (x.relation, x.object).cmp(&(t.relation, t.object)))
            .is_ok()
    }

    pub fn entity(&self, id: EntityId) -> Result<Entity<'_>, GraphError> {
        self.check_entity(id)?;
        Ok(Entity {
            id,
            label: &self.entity_labels[id.index()],
            type_tag: self.entity_types[id.index()].as_deref(),
        })
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        &self.entity_labels[id.index()]
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entity_labels
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entity_index.get(label).copied()
    }

    /// Type tag of an entity, `Unknown` when untyped.
    pub fn entity_type(&self, id: EntityId) -> &str {
        self.entity_types[id.index()]
            .as_deref()
            .unwrap_or(UNKNOWN_TYPE)
    }

    pub fn set_entity_types(&mut self, types: Vec<Option<String>>) {
        assert_eq!(types.len(), self.num_entities(), "one type slot per entity");
        self.entity_types = types;
    }

    pub fn relation(&self, id: RelationId) -> &Relation {
        &self.relations[id.index()]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation_label(&self, id: RelationId) -> &str {
        &self.relations[id.index()].label
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relation_index.get(label).copied()
    }

    pub fn check_entity(&self, id: EntityId) -> Result<(), GraphError> {
        if id.index() < self.num_entities() {
            Ok(())
        } else {
            Err(GraphError::EntityOutOfRange(id.0))
        }
    }

    pub fn check_relation(&self, id: RelationId) -> Result<(), GraphError> {
        if id.index() < self.num_relations() {
            Ok(())
        } else {
            Err(GraphError::RelationOutOfRange(id.0))
        }
    }

    fn out_slice(&self, v: EntityId) -> &[Triple] {
        &self.triples[self.out_offsets[v.index()]..self.out_offsets[v.index() + 1]]
    }

    fn in_slice(&self, v: EntityId) -> &[(RelationId, EntityId)] {
        &self.incoming[self.in_offsets[v.index()]..self.in_offsets[v.index() + 1]]
    }

    /// Outgoing edges of `v`, ordered by (relation id, entity id).
    pub fn neighbors(
        &self,
        v: EntityId,
    ) -> Result<impl ExactSizeIterator<Item = (RelationId, EntityId)> + '_, GraphError> {
        self.check_entity(v)?;
        Ok(self.out_slice(v).iter().map(|t| (t.relation, t.object)))
    }

    /// Outgoing triples of `v` without bounds checking beyond the slice index.
    pub fn outgoing(&self, v: EntityId) -> &[Triple] {
        self.out_slice(v)
    }

    /// Incoming edges of `v` as (relation, subject), ordered.
    pub fn incoming(&self, v: EntityId) -> &[(RelationId, EntityId)] {
        self.in_slice(v)
    }

    /// Occurrences of `v` as subject plus occurrences as object; a self-loop counts twice.
    pub fn degree(&self, v: EntityId) -> Result<u32, GraphError> {
        self.check_entity(v)?;
        Ok(self.degree[v.index()])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degree
    }

    pub fn degree_by_relation(&self, v: EntityId, r: RelationId) -> Result<u32, GraphError> {
        self.check_entity(v)?;
        self.check_relation(r)?;
        let out = self.out_slice(v);
        let lo = out.partition_point(|t| t.relation < r);
        let hi = out.partition_point(|t| t.relation <= r);
        let inc = self.in_slice(v);
        let ilo = inc.partition_point(|x| x.0 < r);
        let ihi = inc.partition_point(|x| x.0 <= r);
        Ok((hi - lo + ihi - ilo) as u32)
    }

    /// Number of triples carrying relation `r`.
    pub fn relation_count(&self, r: RelationId) -> usize {
        self.triples.iter().filter(|t| t.relation == r).count()
    }

    /// Per-relation triple counts, indexed by relation id.
    pub fn relation_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_relations()];
        for t in &self.triples {
            counts[t.relation.index()] += 1;
        }
        counts
    }

    /// Adds `(o, inv(r), s)` for every triple, creating `_inv_`-prefixed relations as
    /// needed. Applying it to a graph already closed under inverses changes nothing.
    pub fn add_inverse_edges(&self) -> KnowledgeGraph {
        let mut builder = GraphBuilder::from_graph(self);
        for t in &self.triples {
            let inv = builder.intern_relation(&inverse_label(self.relation_label(t.relation)));
            builder.add_ids(t.object, inv, t.subject);
        }
        let mut kg = builder.build_unchecked();
        kg.entity_types = self.entity_types.clone();
        kg
    }

    /// Identifies the vocabularies, for checkpoint compatibility checks.
    pub fn vocabulary_hash(&self) -> (String, String) {
        use sha2::{Digest, Sha256};
        let mut eh = Sha256::new();
        for l in &self.entity_labels {
            eh.update(l.as_bytes());
            eh.update([0u8]);
        }
        let mut rh = Sha256::new();
        for r in &self.relations {
            rh.update(r.label.as_bytes());
            rh.update([0u8]);
        }
        (hex::encode(eh.finalize()), hex::encode(rh.finalize()))
    }
}

/// Accumulates vocabularies (first-appearance order) and triples.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    entity_labels: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relation_labels: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    triples: Vec<Triple>,
}

impl GraphBuilder {
    /// Starts from an existing graph's vocabularies and triples.
    pub fn from_graph(kg: &KnowledgeGraph) -> Self {
        Self {
            entity_labels: kg.entity_labels.clone(),
            entity_index: kg.entity_index.clone(),
            relation_labels: kg.relations.iter().map(|r| r.label.clone()).collect(),
            relation_index: kg.relation_index.clone(),
            triples: kg.triples.clone(),
        }
    }

    pub fn intern_entity(&mut self, label: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(label) {
            return id;
        }
        let id = EntityId(self.entity_labels.len() as u32);
        self.entity_labels.push(label.to_string());
        self.entity_index.insert(label.to_string(), id);
        id
    }

    pub fn intern_relation(&mut self, label: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(label) {
            return id;
        }
        let id = RelationId(self.relation_labels.len() as u32);
        self.relation_labels.push(label.to_string());
        self.relation_index.insert(label.to_string(), id);
        id
    }

    pub fn add(&mut self, subject: &str, relation: &str, object: &str) -> Triple {
        let s = self.intern_entity(subject);
        let r = self.intern_relation(relation);
        let o = self.intern_entity(object);
        self.add_ids(s, r, o);
        Triple::new(s, r, o)
    }

    /// Ids must come from this builder's vocabularies.
    pub fn add_ids(&mut self, s: EntityId, r: RelationId, o: EntityId) {
        debug_assert!(s.index() < self.entity_labels.len() && o.index() < self.entity_labels.len());
        debug_assert!(r.index() < self.relation_labels.len());
        self.triples.push(Triple::new(s, r, o));
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn build(self) -> Result<KnowledgeGraph, GraphError> {
        if self.triples.is_empty() {
            return Err(GraphError::Empty);
        }
        Ok(self.build_unchecked())
    }

    /// Builds without rejecting an empty triple set.
    pub fn build_unchecked(mut self) -> KnowledgeGraph {
        self.triples.sort_unstable();
        self.triples.dedup();
        let n = self.entity_labels.len();

        let mut out_offsets = vec![0usize; n + 1];
        let mut in_counts = vec![0usize; n + 1];
        let mut degree = vec![0u32; n];
        for t in &self.triples {
            out_offsets[t.subject.index() + 1] += 1;
            in_counts[t.object.index() + 1] += 1;
            degree[t.subject.index()] += 1;
            degree[t.object.index()] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_counts[i + 1] += in_counts[i];
        }
        let in_offsets = in_counts;
        let mut cursor = in_offsets.clone();
        let mut incoming = vec![(RelationId(0), EntityId(0)); self.triples.len()];
        // Triples are sorted by subject, so each object's group fills in (s, r, o) order.
        for t in &self.triples {
            let slot = &mut cursor[t.object.index()];
            incoming[*slot] = (t.relation, t.subject);
            *slot += 1;
        }
        for v in 0..n {
            incoming[in_offsets[v]..in_offsets[v + 1]].sort_unstable();
        }

        let relations = pair_relations(&self.relation_labels, &self.relation_index);
        KnowledgeGraph {
            entity_types: vec![None; n],
            entity_labels: self.entity_labels,
            entity_index: self.entity_index,
            relations,
            relation_index: self.relation_index,
            triples: self.triples,
            out_offsets,
            incoming,
            in_offsets,
            degree,
        }
    }
}

fn pair_relations(labels: &[String], index: &HashMap<String, RelationId>) -> Vec<Relation> {
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let inverse_of = index.get(&inverse_label(label)).copied();
            Relation {
                id: RelationId(i as u32),
                label: label.clone(),
                is_inverse: inverse_of.is_some() && label.starts_with(INVERSE_PREFIX),
                inverse_of,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(triples: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        for (s, r, o) in triples {
            b.add(s, r, o);
        }
        b.build().unwrap()
    }

    fn labelled(kg: &KnowledgeGraph) -> Vec<(String, String, String)> {
        let mut v: Vec<_> = kg
            .triples()
            .iter()
            .map(|t| {
                (
                    kg.entity_label(t.subject).to_string(),
                    kg.relation_label(t.relation).to_string(),
                    kg.entity_label(t.object).to_string(),
                )
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn duplicates_collapse() {
        let kg = graph(&[("a", "r", "b"), ("b", "r", "c"), ("a", "r", "b")]);
        assert_eq!(kg.len(), 2);
        assert_eq!(kg.num_entities(), 3);
        assert_eq!(kg.num_relations(), 1);
        assert_eq!(kg.entity_id("a"), Some(EntityId(0)));
        assert_eq!(kg.entity_id("c"), Some(EntityId(2)));
    }

    #[test]
    fn single_inverse() {
        let kg = graph(&[("a", "r", "b")]).add_inverse_edges();
        assert_eq!(kg.len(), 2);
        assert_eq!(
            labelled(&kg),
            vec![
                ("a".into(), "r".into(), "b".into()),
                ("b".into(), "_inv_r".into(), "a".into())
            ]
        );
        let r = kg.relation(kg.relation_id("r").unwrap());
        let inv = kg.relation(kg.relation_id("_inv_r").unwrap());
        assert!(!r.is_inverse && inv.is_inverse);
        assert_eq!(r.inverse_of, Some(inv.id));
        assert_eq!(inv.inverse_of, Some(r.id));
    }

    #[test]
    fn inverse_is_idempotent() {
        let once = graph(&[("a", "r", "b"), ("b", "s", "c")]).add_inverse_edges();
        let twice = once.add_inverse_edges();
        assert_eq!(labelled(&once), labelled(&twice));
        assert_eq!(once.num_relations(), twice.num_relations());
    }

    #[test]
    fn symmetric_pair_gets_four_triples() {
        // closure: (a,r,b) (b,r,a) (b,_inv_r,a) (a,_inv_r,b)
        let kg = graph(&[("a", "r", "b"), ("b", "r", "a")]).add_inverse_edges();
        assert_eq!(kg.len(), 4);
    }

    #[test]
    fn closed_graph_unchanged() {
        let kg = graph(&[("a", "r", "b"), ("b", "_inv_r", "a")]);
        assert_eq!(kg.add_inverse_edges().len(), 2);
    }

    #[test]
    fn neighbor_order() {
        let kg = graph(&[("x", "r0", "y"), ("v", "r1", "b"), ("v", "r0", "c")]);
        let v = kg.entity_id("v").unwrap();
        let got: Vec<_> = kg.neighbors(v).unwrap().collect();
        let r0 = kg.relation_id("r0").unwrap();
        let r1 = kg.relation_id("r1").unwrap();
        assert_eq!(
            got,
            vec![(r0, kg.entity_id("c").unwrap()), (r1, kg.entity_id("b").unwrap())]
        );
        assert_eq!(kg.neighbors(kg.entity_id("y").unwrap()).unwrap().len(), 0);
        assert!(kg.neighbors(EntityId(99)).is_err());
    }

    #[test]
    fn star_has_five_spokes() {
        let spokes: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let mut b = KnowledgeGraph::builder();
        for s in &spokes {
            b.add("hub", "r", s);
        }
        let kg = b.build().unwrap();
        assert_eq!(kg.neighbors(kg.entity_id("hub").unwrap()).unwrap().len(), 5);
    }

    #[test]
    fn degrees() {
        let kg = graph(&[("v", "r", "b"), ("c", "r", "v"), ("c", "q", "b")]);
        let v = kg.entity_id("v").unwrap();
        let r = kg.relation_id("r").unwrap();
        let q = kg.relation_id("q").unwrap();
        assert_eq!(kg.degree(v).unwrap(), 2);
        assert_eq!(kg.degree_by_relation(v, r).unwrap(), 2);
        assert_eq!(kg.degree_by_relation(v, q).unwrap(), 0);
        assert!(kg.degree(EntityId(10)).is_err());
        assert!(kg.degree_by_relation(v, RelationId(10)).is_err());
    }

    #[test]
    fn self_loop_counts_twice() {
        let kg = graph(&[("a", "r", "a"), ("a", "r", "b")]);
        assert_eq!(kg.degree(EntityId(0)).unwrap(), 3);
    }

    #[test]
    fn empty_builder_errors() {
        assert!(matches!(KnowledgeGraph::builder().build(), Err(GraphError::Empty)));
    }

    #[test]
    fn vocabulary_hash_tracks_labels() {
        let a = graph(&[("a", "r", "b")]);
        let b = graph(&[("a", "r", "c")]);
        assert_eq!(a.vocabulary_hash().1, b.vocabulary_hash().1);
        assert_ne!(a.vocabulary_hash().0, b.vocabulary_hash().0);
    }
}
