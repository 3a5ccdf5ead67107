//! Explanation assembly: metapath grouping, representative selection and
//! ontology enrichment of the selected paths.

mod ontology;
mod subgraph;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::{path_relevance, IcError, IcTable};
use crate::kg::{tab_records, EntityId, KnowledgeGraph, Path};
use crate::pathfinder::{BeamOutput, Trajectory};

pub use ontology::{ClassId, OntologyError, OntologyHierarchy};
pub use subgraph::{
    build_explanation, Axiom, ClassNode, ExplainedPath, ExplanationSubgraph, HypothesisLabels,
    STATUS_NONE, STATUS_OK,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetapathError {
    #[error("metapath is empty")]
    Empty,
    #[error("metapath must alternate types and relations, got {0} elements")]
    EvenLength(usize),
    #[error("metapath element {0} is empty")]
    EmptyElement(usize),
    #[error("metapath element {0} does not survive its text form")]
    UnwritableElement(usize),
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<MetapathError> },
}

/// `type_0 | r_1 | type_1 | … | r_k | type_k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Metapath(Vec<String>);

impl Metapath {
    pub fn new(elements: Vec<String>) -> Result<Self, MetapathError> {
        if elements.is_empty() {
            return Err(MetapathError::Empty);
        }
        if elements.len().is_multiple_of(2) {
            return Err(MetapathError::EvenLength(elements.len()));
        }
        if let Some(i) = elements.iter().position(|e| e.trim().is_empty()) {
            return Err(MetapathError::EmptyElement(i));
        }
        // The text form trims elements, splits on `|` and skips `#` lines.
        let unwritable = |e: &String| e.trim() != e || e.contains(['|', '\n', '\r']);
        if let Some(i) = elements.iter().position(unwritable) {
            return Err(MetapathError::UnwritableElement(i));
        }
        if elements[0].starts_with('#') {
            return Err(MetapathError::UnwritableElement(0));
        }
        Ok(Self(elements))
    }

    pub fn elements(&self) -> &[String] {
        &self.0
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.0.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 1
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.0.iter().step_by(2).map(String::as_str)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.0.iter().skip(1).step_by(2).map(String::as_str)
    }
}

impl fmt::Display for Metapath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("|"))
    }
}

impl FromStr for Metapath {
    type Err = MetapathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metapath::new(s.split('|').map(|e| e.trim().to_string()).collect())
    }
}

impl TryFrom<String> for Metapath {
    type Error = MetapathError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Metapath> for String {
    fn from(m: Metapath) -> String {
        m.to_string()
    }
}

/// One metapath per line.
pub fn parse_metapaths(text: &str) -> Result<Vec<Metapath>, MetapathError> {
    tab_records(text)
        .map(|(line, fields)| {
            fields.join("\t").parse().map_err(|e| MetapathError::Line {
                line,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn write_metapaths<'a>(
    metapaths: impl IntoIterator<Item = &'a Metapath>,
    mut out: impl std::io::Write,
) -> std::io::Result<()> {
    for m in metapaths {
        writeln!(out, "{m}")?;
    }
    Ok(())
}

pub fn metapath_of(kg: &KnowledgeGraph, path: &Path) -> Metapath {
    let mut el = vec![kg.entity_type(path.source()).to_string()];
    for t in path.triples() {
        el.push(kg.relation_label(t.relation).to_string());
        el.push(kg.entity_type(t.object).to_string());
    }
    Metapath(el)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub path: Path,
    pub relevance: f64,
}

/// Per metapath, the path of highest relevance. Ties go to the smallest
/// entity-id sequence, then the smallest triple sequence.
pub fn group_and_select(
    kg: &KnowledgeGraph,
    table: &IcTable,
    paths: &[Path],
) -> Result<BTreeMap<Metapath, Selected>, IcError> {
    let mut best: BTreeMap<Metapath, Selected> = BTreeMap::new();
    for p in paths {
        if p.is_empty() {
            continue;
        }
        let relevance = path_relevance(table, p.triples())?;
        let key = metapath_of(kg, p);
        match best.get(&key) {
            Some(cur) if !beats(p, relevance, cur) => {}
            _ => {
                best.insert(
                    key,
                    Selected {
                        path: p.clone(),
                        relevance,
                    },
                );
            }
        }
    }
    Ok(best)
}

fn beats(p: &Path, relevance: f64, cur: &Selected) -> bool {
    relevance > cur.relevance
        || (relevance == cur.relevance
            && (p.entities(), p.triples()) < (cur.path.entities(), cur.path.triples()))
}

/// Distinct nonempty paths from `subject` ending at `object`: answer paths of
/// a beam plus successful rollouts.
pub fn explanatory_paths(
    object: EntityId,
    beam: Option<&BeamOutput>,
    rollouts: &[Trajectory],
) -> Vec<Path> {
    let mut set = BTreeSet::new();
    if let Some(b) = beam {
        set.extend(
            b.paths
                .iter()
                .filter(|(p, _)| !p.is_empty() && p.target() == object)
                .map(|(p, _)| p.clone()),
        );
    }
    set.extend(
        rollouts
            .iter()
            .filter(|t| t.success() && t.final_entity() == object && !t.path.is_empty())
            .map(|t| t.path.clone()),
    );
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{compute_ic_table, IcMode, Normalization};
    use crate::kg::{parse_entity_types, parse_triples, Triple};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn typed(text: &str, types: &str) -> KnowledgeGraph {
        let mut kg = parse_triples(text).unwrap();
        let (t, _) = parse_entity_types(types, &kg).unwrap();
        kg.set_entity_types(t);
        kg
    }

    fn path(kg: &KnowledgeGraph, labels: &[&str]) -> Path {
        let ids: Vec<EntityId> = labels.iter().map(|l| kg.entity_id(l).unwrap()).collect();
        let triples = ids
            .windows(2)
            .map(|w| *kg.outgoing(w[0]).iter().find(|t| t.object == w[1]).unwrap())
            .collect();
        Path::new(ids[0], triples).unwrap()
    }

    #[test]
    fn metapath_examples() {
        let kg = typed(
            "aspirin\tbinds\tptgs2\nptgs2\tassoc\tpain\nibuprofen\tbinds\tptgs1\nptgs1\tassoc\tfever\n",
            "aspirin\tCompound\nibuprofen\tCompound\nptgs1\tGene\nptgs2\tGene\npain\tDisease\nfever\tDisease\n",
        );
        let m = metapath_of(&kg, &path(&kg, &["aspirin", "ptgs2", "pain"]));
        assert_eq!(m.to_string(), "Compound|binds|Gene|assoc|Disease");
        assert_eq!(m.len(), 2);
        assert_eq!(m, metapath_of(&kg, &path(&kg, &["ibuprofen", "ptgs1", "fever"])));
        assert_eq!(metapath_of(&kg, &path(&kg, &["aspirin", "ptgs2"])).elements().len(), 3);
        assert_eq!(m.relations().collect::<Vec<_>>(), ["binds", "assoc"]);
        assert_eq!(m.types().count(), 3);
    }

    #[test]
    fn metapath_text_round_trip() {
        let m: Metapath = "Compound|binds|Gene|assoc|Disease".parse().unwrap();
        assert_eq!(m.to_string().parse::<Metapath>().unwrap(), m);
        assert_eq!("".parse::<Metapath>(), Err(MetapathError::EmptyElement(0)));
        assert_eq!("\u{c}##".parse::<Metapath>(), Err(MetapathError::UnwritableElement(0)));
        assert!("A|#r|B".parse::<Metapath>().is_ok());
        assert!(Metapath::new(vec![" A".into()]).is_err());
        assert_eq!("A|r".parse::<Metapath>(), Err(MetapathError::EvenLength(2)));
        assert!("A||B".parse::<Metapath>().is_err());
        let ms = parse_metapaths("# gt\nA|r|B\n\nB|s|C|t|A\n").unwrap();
        assert_eq!(ms.len(), 2);
        assert!(matches!(
            parse_metapaths("A|r|B\nA|r\n"),
            Err(MetapathError::Line { line: 2, .. })
        ));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"Compound|binds|Gene|assoc|Disease\"");
        assert_eq!(serde_json::from_str::<Metapath>(&json).unwrap(), m);
    }

    #[test]
    fn selection_basic() {
        // a→b→d and a→c→d share a metapath; c has the smaller degree.
        let kg = typed(
            "a\tr\tb\na\tr\tc\nb\ts\td\nc\ts\td\nb\tq\tx\nb\tq\ty\nb\tq\tz\nd\tu\tw\n",
            "a\tA\nb\tB\nc\tB\nd\tD\n",
        );
        let table = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let abd = path(&kg, &["a", "b", "d"]);
        let acd = path(&kg, &["a", "c", "d"]);
        let ad = path(&kg, &["d", "w"]);
        let sel = group_and_select(&kg, &table, &[abd.clone(), acd.clone(), ad]).unwrap();
        assert_eq!(sel.len(), 2);
        let m = metapath_of(&kg, &abd);
        assert_eq!(sel[&m].path, acd);
        assert!(sel[&m].relevance > path_relevance(&table, abd.triples()).unwrap());
    }

    #[test]
    fn ties_prefer_smaller_entity_sequence() {
        let kg = typed("a\tr\tb\na\tr\tc\nb\ts\td\nc\ts\td\n", "a\tA\nb\tB\nc\tB\nd\tD\n");
        let table = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let abd = path(&kg, &["a", "b", "d"]);
        let acd = path(&kg, &["a", "c", "d"]);
        for order in [[abd.clone(), acd.clone()], [acd.clone(), abd.clone()]] {
            let sel = group_and_select(&kg, &table, &order).unwrap();
            assert_eq!(sel.values().next().unwrap().path, abd);
        }
    }

    #[test]
    fn twenty_random_paths_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut text = String::new();
            let mut types = String::new();
            for i in 0..30 {
                types.push_str(&format!("n{i}\tT{}\n", i % 3));
                for _ in 0..3 {
                    let j = rng.random_range(0..30);
                    if j != i {
                        text.push_str(&format!("n{i}\tr{}\tn{j}\n", rng.random_range(0..2)));
                    }
                }
            }
            let kg = typed(&text, &types);
            let table =
                compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
            let mut paths = Vec::new();
            while paths.len() < 20 {
                let mut cur = EntityId(rng.random_range(0..kg.num_entities() as u32));
                let start = cur;
                let mut seen = vec![cur];
                let mut ts: Vec<Triple> = Vec::new();
                for _ in 0..rng.random_range(1..=3) {
                    let opts: Vec<Triple> = kg
                        .outgoing(cur)
                        .iter()
                        .filter(|t| !seen.contains(&t.object))
                        .copied()
                        .collect();
                    if opts.is_empty() {
                        break;
                    }
                    let t = opts[rng.random_range(0..opts.len())];
                    seen.push(t.object);
                    cur = t.object;
                    ts.push(t);
                }
                if !ts.is_empty() {
                    paths.push(Path::new(start, ts).unwrap());
                }
            }
            let sel = group_and_select(&kg, &table, &paths).unwrap();
            let keys: BTreeSet<Metapath> = paths.iter().map(|p| metapath_of(&kg, p)).collect();
            assert_eq!(sel.len(), keys.len());
            for k in keys {
                let group: Vec<&Path> =
                    paths.iter().filter(|p| metapath_of(&kg, p) == k).collect();
                let rel = |p: &Path| path_relevance(&table, p.triples()).unwrap();
                let top = group.iter().map(|p| rel(p)).fold(f64::NEG_INFINITY, f64::max);
                let expect = group
                    .iter()
                    .filter(|p| rel(p) == top)
                    .min_by(|a, b| (a.entities(), a.triples()).cmp(&(b.entities(), b.triples())))
                    .unwrap();
                assert_eq!(&sel[&k].path, *expect);
                assert_eq!(sel[&k].relevance, top);
            }
        }
    }
}
