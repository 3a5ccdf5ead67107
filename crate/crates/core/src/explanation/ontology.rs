use std::collections::{BTreeSet, HashMap};
use std::path::Path as FsPath;

use thiserror::Error;

use crate::kg::{tab_records, EntityId, KnowledgeGraph};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("subclass cycle through `{0}`")]
    Cycle(String),
    #[error("line {line}: unknown class `{class}`")]
    UnknownClass { line: usize, class: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Subclass DAG over a class vocabulary plus entity annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OntologyHierarchy {
    labels: Vec<String>,
    index: HashMap<String, ClassId>,
    /// Direct superclasses, sorted.
    parents: Vec<Vec<ClassId>>,
    /// Annotation classes per entity, sorted.
    annotations: HashMap<EntityId, Vec<ClassId>>,
}

impl OntologyHierarchy {
    fn intern(&mut self, label: &str) -> ClassId {
        if let Some(&c) = self.index.get(label) {
            return c;
        }
        let c = ClassId(self.labels.len() as u32);
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), c);
        self.parents.push(Vec::new());
        c
    }

    /// Builds from `child<TAB>parent` lines (a lone `class` declares a root)
    /// and `entity<TAB>class` lines. Annotations of entities absent from `kg`
    /// are skipped and reported as warnings.
    pub fn parse(
        class_edges: &str,
        annotations: &str,
        kg: &KnowledgeGraph,
    ) -> Result<(Self, Vec<String>), OntologyError> {
        let mut ont = Self::default();
        for (line, fields) in tab_records(class_edges) {
            match fields[..] {
                [c] if !c.is_empty() => {
                    ont.intern(c);
                }
                [c, p] if !c.is_empty() && !p.is_empty() => {
                    let c = ont.intern(c);
                    let p = ont.intern(p);
                    ont.parents[c.index()].push(p);
                }
                _ => {
                    return Err(OntologyError::Parse {
                        line,
                        message: format!("expected child<TAB>parent, found {} fields", fields.len()),
                    })
                }
            }
        }
        for ps in &mut ont.parents {
            ps.sort_unstable();
            ps.dedup();
        }
        ont.check_acyclic()?;
        let mut warnings = Vec::new();
        for (line, fields) in tab_records(annotations) {
            let [entity, class] = fields[..] else {
                return Err(OntologyError::Parse {
                    line,
                    message: format!("expected entity<TAB>class, found {} fields", fields.len()),
                });
            };
            let Some(&c) = ont.index.get(class) else {
                return Err(OntologyError::UnknownClass {
                    line,
                    class: class.to_string(),
                });
            };
            match kg.entity_id(entity) {
                Some(e) => ont.annotations.entry(e).or_default().push(c),
                None => warnings.push(format!("line {line}: unknown entity `{entity}`")),
            }
        }
        for cs in ont.annotations.values_mut() {
            cs.sort_unstable();
            cs.dedup();
        }
        Ok((ont, warnings))
    }

    pub fn load(
        class_edges: impl AsRef<FsPath>,
        annotations: impl AsRef<FsPath>,
        kg: &KnowledgeGraph,
    ) -> Result<(Self, Vec<String>), OntologyError> {
        Self::parse(
            &std::fs::read_to_string(class_edges)?,
            &std::fs::read_to_string(annotations)?,
            kg,
        )
    }

    fn check_acyclic(&self) -> Result<(), OntologyError> {
        // 0 unvisited, 1 on stack, 2 done.
        let mut mark = vec![0u8; self.labels.len()];
        for root in 0..self.labels.len() {
            if mark[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            mark[root] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&p) = self.parents[v].get(*next) {
                    *next += 1;
                    match mark[p.index()] {
                        0 => {
                            mark[p.index()] = 1;
                            stack.push((p.index(), 0));
                        }
                        1 => return Err(OntologyError::Cycle(self.labels[p.index()].clone())),
                        _ => {}
                    }
                } else {
                    mark[v] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, c: ClassId) -> &str {
        &self.labels[c.index()]
    }

    pub fn class_id(&self, label: &str) -> Option<ClassId> {
        self.index.get(label).copied()
    }

    pub fn parents(&self, c: ClassId) -> &[ClassId] {
        &self.parents[c.index()]
    }

    pub fn annotations(&self, e: EntityId) -> &[ClassId] {
        self.annotations.get(&e).map_or(&[], Vec::as_slice)
    }

    /// Reflexive-transitive superclasses of every class in `start`.
    pub fn ancestors(&self, start: &[ClassId]) -> BTreeSet<ClassId> {
        let mut seen: BTreeSet<ClassId> = start.iter().copied().collect();
        let mut todo: Vec<ClassId> = start.to_vec();
        while let Some(c) = todo.pop() {
            for &p in self.parents(c) {
                if seen.insert(p) {
                    todo.push(p);
                }
            }
        }
        seen
    }

    /// Minimal common ancestors of the two entities' annotations. Empty when
    /// either entity is unannotated.
    pub fn lca(&self, e1: EntityId, e2: EntityId) -> Vec<ClassId> {
        let (a, b) = (self.annotations(e1), self.annotations(e2));
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let (a, b) = (self.ancestors(a), self.ancestors(b));
        let common: Vec<ClassId> = a.intersection(&b).copied().collect();
        let mut dominated = BTreeSet::new();
        for &c in &common {
            let mut strict = self.ancestors(self.parents(c));
            strict.remove(&c);
            dominated.extend(strict);
        }
        common.into_iter().filter(|c| !dominated.contains(c)).collect()
    }
}
