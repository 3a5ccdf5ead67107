//! Reinforcement-learning path finder.
//!
//! The environment is a deterministic walk over the graph starting at the
//! hypothesis subject. The agent observes its current entity, the subject and
//! the query relation, never the object. Each step it either follows an
//! outgoing edge to an unvisited entity or stops. During training a walk also
//! ends when it first reaches the object (early stop) or hits the horizon.
//! Reward is fidelity (reached the object) times path relevance.

mod beam;
mod checkpoint;
mod env;
mod gradcheck;
mod policy;
mod reward;
mod rollout;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::IcError;
use crate::kg::{EntityId, GraphError, RelationId};

pub use crate::kg::Path;
pub use beam::{beam_search_infer, AnswerMode, BeamConfig, BeamOutput, RankedTarget};
pub use checkpoint::{Checkpoint, CheckpointError, TensorRecord};
pub use env::{available_actions, candidate_actions, env_reset, env_step, EnvState, Status};
pub use gradcheck::{gradient_check, Episode, GradCheckReport};
pub use policy::{log_softmax, LstmState, Policy, PolicyConfig, PrevRelation, Tensor};
pub use reward::{reward_fidelity, reward_final, reward_relevance, Reward};
pub use rollout::{sample_rollouts, sample_trajectory};
pub use train::{
    reinforce_update, train, BatchLog, OptimizerKind, OptimizerState, TrainConfig, Trainer,
    TrainingLog,
};

/// Inference-time query: the object is unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub subject: EntityId,
    pub relation: RelationId,
}

impl From<&crate::kg::Hypothesis> for Query {
    fn from(h: &crate::kg::Hypothesis) -> Self {
        Query {
            subject: h.subject,
            relation: h.relation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Stop,
    Edge {
        relation: RelationId,
        target: EntityId,
    },
}

/// One decision: what was observed, what was available, what was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub prev_relation: PrevRelation,
    pub current: EntityId,
    pub actions: Vec<Action>,
    pub chosen: usize,
}

/// A rollout from the hypothesis subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub hypothesis: crate::kg::Hypothesis,
    pub steps: Vec<Step>,
    pub path: Path,
    /// `None` while the walk can still continue.
    pub status: Option<Status>,
    pub reward: Option<Reward>,
}

impl Trajectory {
    pub fn is_terminal(&self) -> bool {
        self.status.is_some()
    }

    pub fn final_entity(&self) -> EntityId {
        self.path.target()
    }

    pub fn success(&self) -> bool {
        self.is_terminal() && self.final_entity() == self.hypothesis.object
    }
}

#[derive(Debug, Error)]
pub enum PathfinderError {
    #[error("action {0:?} is not available in the current state")]
    IllegalAction(Action),
    #[error("state is terminal")]
    Terminal,
    #[error("trajectory is not terminal")]
    NotTerminal,
    #[error("non-finite gradient in {tensor} at index {index}")]
    NonFiniteGradient { tensor: &'static str, index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ic(#[from] IcError),
}
