use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{OptimizerState, Policy, PolicyConfig, Tensor, TrainConfig, Trainer};
use crate::kg::KnowledgeGraph;

const FORMAT: &str = "rex-checkpoint-1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format `{0}`")]
    Format(String),
    #[error("{which} vocabulary hash mismatch: checkpoint {stored}, graph {graph}")]
    VocabularyMismatch {
        which: &'static str,
        stored: String,
        graph: String,
    },
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("tensor `{0}` missing")]
    MissingTensor(&'static str),
    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("tensor `{0}` holds non-finite values")]
    NonFinite(String),
    #[error("optimizer state does not match parameter count")]
    Optimizer,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: (usize, usize),
    pub data: Vec<f64>,
}

/// Serialized trainer: configuration echo, vocabulary fingerprint, weights
/// and optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub policy_config: PolicyConfig,
    pub train_config: TrainConfig,
    pub num_entities: usize,
    pub num_relations: usize,
    pub entity_hash: String,
    pub relation_hash: String,
    pub epoch: usize,
    pub updates: usize,
    pub baseline: f64,
    pub tensors: Vec<TensorRecord>,
    pub optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer, kg: &KnowledgeGraph, cfg: &TrainConfig) -> Self {
        let (entity_hash, relation_hash) = kg.vocabulary_hash();
        let p = &trainer.policy;
        Self {
            format: FORMAT.to_string(),
            policy_config: *p.config(),
            train_config: cfg.clone(),
            num_entities: p.num_entities(),
            num_relations: p.num_relations(),
            entity_hash,
            relation_hash,
            epoch: trainer.epoch,
            updates: trainer.updates,
            baseline: trainer.baseline,
            tensors: Tensor::ALL
                .into_iter()
                .map(|t| TensorRecord {
                    name: t.name().to_string(),
                    shape: p.shape(t),
                    data: p.tensor(t).to_vec(),
                })
                .collect(),
            optimizer: trainer.optimizer.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT {
            return Err(CheckpointError::Format(c.format));
        }
        Ok(c)
    }

    pub fn read(path: impl AsRef<FsPath>) -> Result<Self, CheckpointError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn check_vocabulary(&self, kg: &KnowledgeGraph) -> Result<(), CheckpointError> {
        let (eh, rh) = kg.vocabulary_hash();
        for (which, stored, graph) in [
            ("entity", &self.entity_hash, eh),
            ("relation", &self.relation_hash, rh),
        ] {
            if *stored != graph {
                return Err(CheckpointError::VocabularyMismatch {
                    which,
                    stored: stored.clone(),
                    graph,
                });
            }
        }
        Ok(())
    }

    /// Rebuilds the policy after verifying it belongs to `kg`.
    pub fn policy(&self, kg: &KnowledgeGraph) -> Result<Policy, CheckpointError> {
        self.check_vocabulary(kg)?;
        let mut p = Policy::zeros(self.policy_config, self.num_entities, self.num_relations);
        if let Some(r) = self.tensors.iter().find(|r| Tensor::from_name(&r.name).is_none()) {
            return Err(CheckpointError::UnknownTensor(r.name.clone()));
        }
        for t in Tensor::ALL {
            let record = self
                .tensors
                .iter()
                .find(|r| r.name == t.name())
                .ok_or(CheckpointError::MissingTensor(t.name()))?;
            let expected = p.shape(t);
            if record.shape != expected || record.data.len() != expected.0 * expected.1 {
                return Err(CheckpointError::Shape {
                    name: record.name.clone(),
                    expected,
                    found: record.shape,
                });
            }
            if record.data.iter().any(|x| !x.is_finite()) {
                return Err(CheckpointError::NonFinite(record.name.clone()));
            }
            p.tensor_mut(t).copy_from_slice(&record.data);
        }
        Ok(p)
    }

    pub fn into_trainer(self, kg: &KnowledgeGraph) -> Result<Trainer, CheckpointError> {
        let policy = self.policy(kg)?;
        let o = &self.optimizer;
        let expected = match o.kind {
            super::OptimizerKind::Adam => policy.num_params(),
            super::OptimizerKind::Sgd => 0,
        };
        if o.first_moment.len() != expected || o.second_moment.len() != expected {
            return Err(CheckpointError::Optimizer);
        }
        Ok(Trainer {
            policy,
            optimizer: self.optimizer,
            baseline: self.baseline,
            epoch: self.epoch,
            updates: self.updates,
        })
    }
}
