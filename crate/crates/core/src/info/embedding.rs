use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::IcError;
use crate::kg::{tab_records, EntityId, KnowledgeGraph};

/// One real vector per entity, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, IcError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(IcError::Parse {
                    line: i + 1,
                    message: format!("dimension {} differs from {dim}", row.len()),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(IcError::Parse {
                    line: i + 1,
                    message: "non-finite component".into(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, v: EntityId) -> &[f64] {
        &self.data[v.index() * self.dim..(v.index() + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

/// Parses `entity<TAB>v1 v2 … vd`. Every graph entity needs a vector; labels
/// unknown to the graph are skipped.
pub fn parse_embeddings(text: &str, kg: &KnowledgeGraph) -> Result<EmbeddingTable, IcError> {
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; kg.num_entities()];
    let mut dim = None;
    for (line, fields) in tab_records(text) {
        let [label, values] = fields[..] else {
            return Err(IcError::Parse {
                line,
                message: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        };
        let vector = values
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IcError::Parse {
                line,
                message: e.to_string(),
            })?;
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(IcError::Parse {
                line,
                message: "non-finite component".into(),
            });
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(IcError::Parse {
                    line,
                    message: format!("dimension {} differs from {d}", vector.len()),
                })
            }
            _ => {}
        }
        if let Some(id) = kg.entity_id(label) {
            rows[id.index()] = Some(vector);
        }
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or(IcError::Unassigned(EntityId(i as u32))))
        .collect::<Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err(IcError::EmptyGraph);
    }
    EmbeddingTable::from_rows(rows)
}

pub fn read_embeddings(
    path: impl AsRef<Path>,
    kg: &KnowledgeGraph,
) -> Result<EmbeddingTable, IcError> {
    parse_embeddings(&std::fs::read_to_string(path)?, kg)
}

/// Per-entity relation-degree profile (length |R|) projected to `dim` by a
/// seeded Gaussian matrix.
pub fn fallback_embeddings(
    kg: &KnowledgeGraph,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable, IcError> {
    if dim < 2 {
        return Err(IcError::Dimension(dim));
    }
    if kg.num_entities() == 0 || kg.is_empty() {
        return Err(IcError::EmptyGraph);
    }
    let nr = kg.num_relations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid std");
    let projection: Vec<f64> = (0..nr * dim).map(|_| normal.sample(&mut rng)).collect();

    let mut profiles = vec![0.0f64; kg.num_entities() * nr];
    for t in kg.triples() {
        profiles[t.subject.index() * nr + t.relation.index()] += 1.0;
        profiles[t.object.index() * nr + t.relation.index()] += 1.0;
    }
    let mut data = vec![0.0; kg.num_entities() * dim];
    for (profile, out) in profiles.chunks_exact(nr).zip(data.chunks_exact_mut(dim)) {
        for (r, &count) in profile.iter().enumerate() {
            if count != 0.0 {
                let row = &projection[r * dim..(r + 1) * dim];
                for (o, p) in out.iter_mut().zip(row) {
                    *o += count * p;
                }
            }
        }
    }
    Ok(EmbeddingTable { dim, data })
}
