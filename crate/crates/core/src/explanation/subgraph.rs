use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ClassId, Metapath, OntologyHierarchy, Selected};
use crate::kg::{Hypothesis, KnowledgeGraph};

pub const STATUS_OK: &str = "ok";
pub const STATUS_NONE: &str = "no explanation found";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisLabels {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedPath {
    pub metapath: Metapath,
    /// `[subject, relation, object]` labels.
    pub triples: Vec<[String; 3]>,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassNode {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axiom {
    Type { entity: String, class: String },
    Subclass { child: String, parent: String },
}

/// Selected paths merged with their ontology enrichment. Each path keeps its
/// metapath, which records where its triples came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSubgraph {
    pub hypothesis: HypothesisLabels,
    pub status: String,
    pub paths: Vec<ExplainedPath>,
    pub classes: Vec<ClassNode>,
    pub axioms: Vec<Axiom>,
}

/// Union of the selected paths plus, for every consecutive entity pair, its
/// lowest common ancestor classes with type axioms to both entities and the
/// direct subclass edges among all added classes.
pub fn build_explanation<'a>(
    kg: &KnowledgeGraph,
    hypothesis: &Hypothesis,
    selected: impl IntoIterator<Item = (&'a Metapath, &'a Selected)>,
    ontology: Option<&OntologyHierarchy>,
) -> ExplanationSubgraph {
    let mut paths = Vec::new();
    let mut classes: BTreeSet<ClassId> = BTreeSet::new();
    let mut types: BTreeSet<(String, ClassId)> = BTreeSet::new();
    for (m, s) in selected {
        paths.push(ExplainedPath {
            metapath: m.clone(),
            triples: s
                .path
                .triples()
                .iter()
                .map(|t| {
                    [
                        kg.entity_label(t.subject).to_string(),
                        kg.relation_label(t.relation).to_string(),
                        kg.entity_label(t.object).to_string(),
                    ]
                })
                .collect(),
            relevance: s.relevance,
        });
        if let Some(ont) = ontology {
            for t in s.path.triples() {
                for c in ont.lca(t.subject, t.object) {
                    classes.insert(c);
                    types.insert((kg.entity_label(t.subject).to_string(), c));
                    types.insert((kg.entity_label(t.object).to_string(), c));
                }
            }
        }
    }
    let mut axioms: Vec<Axiom> = Vec::new();
    let label = |c: ClassId| ontology.expect("classes imply ontology").label(c).to_string();
    axioms.extend(types.into_iter().map(|(entity, c)| Axiom::Type {
        entity,
        class: label(c),
    }));
    if let Some(ont) = ontology {
        for &c in &classes {
            for p in ont.parents(c) {
                if classes.contains(p) {
                    axioms.push(Axiom::Subclass {
                        child: label(c),
                        parent: label(*p),
                    });
                }
            }
        }
    }
    let mut class_nodes: Vec<ClassNode> = classes
        .into_iter()
        .map(|c| ClassNode {
            id: label(c),
            label: label(c),
        })
        .collect();
    class_nodes.sort();
    axioms.sort();
    ExplanationSubgraph {
        hypothesis: HypothesisLabels {
            subject: kg.entity_label(hypothesis.subject).to_string(),
            relation: kg.relation_label(hypothesis.relation).to_string(),
            object: kg.entity_label(hypothesis.object).to_string(),
        },
        status: if paths.is_empty() { STATUS_NONE } else { STATUS_OK }.to_string(),
        paths,
        classes: class_nodes,
        axioms,
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl ExplanationSubgraph {
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Distinct path triples.
    pub fn triples(&self) -> BTreeSet<[String; 3]> {
        self.paths
            .iter()
            .flat_map(|p| p.triples.iter().cloned())
            .collect()
    }

    pub fn entities(&self) -> BTreeSet<String> {
        self.triples()
            .into_iter()
            .flat_map(|[s, _, o]| [s, o])
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("explanation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Graphviz rendering. Class nodes are filled boxes, axioms dashed.
    pub fn write_dot(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "digraph explanation {{")?;
        writeln!(out, "  rankdir=LR;")?;
        writeln!(out, "  node [shape=ellipse];")?;
        let h = &self.hypothesis;
        for e in self.entities() {
            let emphasis = if e == h.subject || e == h.object {
                " penwidth=2"
            } else {
                ""
            };
            writeln!(
                out,
                "  {} [label={}{emphasis}];",
                quote(&format!("e:{e}")),
                quote(&e)
            )?;
        }
        for c in &self.classes {
            writeln!(
                out,
                "  {} [label={} shape=box style=\"rounded,filled\" fillcolor=\"#e8e0f5\"];",
                quote(&format!("c:{}", c.id)),
                quote(&c.label)
            )?;
        }
        for [s, r, o] in self.triples() {
            writeln!(
                out,
                "  {} -> {} [label={}];",
                quote(&format!("e:{s}")),
                quote(&format!("e:{o}")),
                quote(&r)
            )?;
        }
        for a in &self.axioms {
            let (from, to, label) = match a {
                Axiom::Type { entity, class } => (format!("e:{entity}"), format!("c:{class}"), "type"),
                Axiom::Subclass { child, parent } => {
                    (format!("c:{child}"), format!("c:{parent}"), "subClassOf")
                }
            };
            writeln!(
                out,
                "  {} -> {} [label={} style=dashed];",
                quote(&from),
                quote(&to),
                quote(label)
            )?;
        }
        writeln!(out, "}}")
    }

    pub fn to_dot(&self) -> String {
        let mut buf = Vec::new();
        self.write_dot(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("labels are UTF-8")
    }
}
