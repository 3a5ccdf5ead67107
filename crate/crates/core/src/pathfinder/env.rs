use serde::{Deserialize, Serialize};

use super::{Action, PathfinderError};
use crate::kg::{EntityId, Hypothesis, KnowledgeGraph, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// The agent chose STOP.
    Stopped,
    /// Early stop on first arrival at the hypothesis object.
    Reached,
    /// Step budget exhausted.
    Horizon,
}

/// `(e, s_h, o_h)` plus the step count and visited entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub current: EntityId,
    pub hypothesis: Hypothesis,
    pub step: usize,
    pub visited: Vec<EntityId>,
    pub status: Option<Status>,
}

impl EnvState {
    pub fn is_terminal(&self) -> bool {
        self.status.is_some()
    }
}

pub fn env_reset(kg: &KnowledgeGraph, h: &Hypothesis) -> Result<EnvState, PathfinderError> {
    kg.check_entity(h.subject)?;
    Ok(EnvState {
        current: h.subject,
        hypothesis: *h,
        step: 0,
        visited: vec![h.subject],
        status: None,
    })
}

/// Edges that would restate the hypothesis itself, either direction.
pub(crate) fn hypothesis_edges(kg: &KnowledgeGraph, h: &Hypothesis) -> [Option<Triple>; 2] {
    let inverse = kg
        .relation(h.relation)
        .inverse_of
        .map(|inv| Triple::new(h.object, inv, h.subject));
    [Some(Triple::new(h.subject, h.relation, h.object)), inverse]
}

/// Outgoing edges of `current` to unvisited entities, skipping `masked`
/// triples, in (relation, entity) order, followed by STOP.
pub fn candidate_actions(
    kg: &KnowledgeGraph,
    current: EntityId,
    visited: &[EntityId],
    masked: &[Option<Triple>],
) -> Vec<Action> {
    let mut out: Vec<Action> = kg
        .outgoing(current)
        .iter()
        .filter(|t| !visited.contains(&t.object) && !masked.contains(&Some(**t)))
        .map(|t| Action::Edge {
            relation: t.relation,
            target: t.object,
        })
        .collect();
    out.push(Action::Stop);
    out
}

/// Actions from a non-terminal state; empty once terminal.
pub fn available_actions(kg: &KnowledgeGraph, state: &EnvState) -> Vec<Action> {
    if state.is_terminal() {
        return Vec::new();
    }
    let masked = hypothesis_edges(kg, &state.hypothesis);
    candidate_actions(kg, state.current, &state.visited, &masked)
}

pub fn env_step(
    kg: &KnowledgeGraph,
    state: &EnvState,
    action: Action,
    max_len: usize,
    early_stop: bool,
) -> Result<EnvState, PathfinderError> {
    if state.is_terminal() {
        return Err(PathfinderError::Terminal);
    }
    if !available_actions(kg, state).contains(&action) {
        return Err(PathfinderError::IllegalAction(action));
    }
    let mut next = state.clone();
    match action {
        Action::Stop => next.status = Some(Status::Stopped),
        Action::Edge { target, .. } => {
            next.current = target;
            next.step += 1;
            next.visited.push(target);
            if early_stop && target == state.hypothesis.object {
                next.status = Some(Status::Reached);
            } else if next.step >= max_len {
                next.status = Some(Status::Horizon);
            }
        }
    }
    Ok(next)
}
