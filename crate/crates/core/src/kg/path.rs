use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EntityId, Triple};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("triple {index} does not start where the previous one ended")]
    Broken { index: usize },
    #[error("entity {0} visited twice")]
    Revisit(EntityId),
}

/// A simple path: chained triples over pairwise-distinct entities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    source: EntityId,
    triples: Vec<Triple>,
}

impl Path {
    pub fn empty(source: EntityId) -> Self {
        Self {
            source,
            triples: Vec::new(),
        }
    }

    pub fn new(source: EntityId, triples: Vec<Triple>) -> Result<Self, PathError> {
        let mut seen = vec![source];
        let mut at = source;
        for (index, t) in triples.iter().enumerate() {
            if t.subject != at {
                return Err(PathError::Broken { index });
            }
            if seen.contains(&t.object) {
                return Err(PathError::Revisit(t.object));
            }
            seen.push(t.object);
            at = t.object;
        }
        Ok(Self { source, triples })
    }

    pub fn source(&self) -> EntityId {
        self.source
    }

    pub fn target(&self) -> EntityId {
        self.triples.last().map_or(self.source, |t| t.object)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Source followed by every triple's object.
    pub fn entities(&self) -> Vec<EntityId> {
        std::iter::once(self.source)
            .chain(self.triples.iter().map(|t| t.object))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::RelationId;

    fn t(s: u32, o: u32) -> Triple {
        Triple::new(EntityId(s), RelationId(0), EntityId(o))
    }

    #[test]
    fn chain_checks() {
        let p = Path::new(EntityId(0), vec![t(0, 1), t(1, 2)]).unwrap();
        assert_eq!(p.target(), EntityId(2));
        assert_eq!(p.entities(), vec![EntityId(0), EntityId(1), EntityId(2)]);
        assert_eq!(
            Path::new(EntityId(0), vec![t(0, 1), t(2, 3)]),
            Err(PathError::Broken { index: 1 })
        );
        assert_eq!(
            Path::new(EntityId(0), vec![t(0, 1), t(1, 0)]),
            Err(PathError::Revisit(EntityId(0)))
        );
        assert_eq!(Path::empty(EntityId(4)).target(), EntityId(4));
    }
}
