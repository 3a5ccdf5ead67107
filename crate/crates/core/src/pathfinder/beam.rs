use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::env::hypothesis_edges;
use super::{candidate_actions, Action, LstmState, PathfinderError, Policy, PrevRelation, Query};
use crate::kg::{EntityId, Hypothesis, KnowledgeGraph, Path, Triple};

/// Which paths in the beam count as answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    /// Final entity of walks ending in STOP or at the horizon.
    #[default]
    Terminal,
    /// Every entity a retained beam entry arrives at, scored by its prefix.
    FirstArrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub max_len: usize,
    pub answer_mode: AnswerMode,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 32,
            max_len: 3,
            answer_mode: AnswerMode::Terminal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTarget {
    pub entity: EntityId,
    pub path: Path,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamOutput {
    /// One entry per distinct answer entity, best first. Never the subject.
    pub ranked: Vec<RankedTarget>,
    /// Every answer path found, best first.
    pub paths: Vec<(Path, f64)>,
}

impl BeamOutput {
    pub fn rank_of(&self, e: EntityId) -> Option<usize> {
        self.ranked.iter().position(|t| t.entity == e).map(|i| i + 1)
    }
}

#[derive(Clone)]
struct Entry {
    state: LstmState,
    prev: PrevRelation,
    current: EntityId,
    visited: Vec<EntityId>,
    triples: Vec<Triple>,
    log_prob: f64,
    done: bool,
    /// Took an edge in the latest expansion.
    fresh: bool,
}

fn by_score(a: &Entry, b: &Entry) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then_with(|| a.triples.cmp(&b.triples))
        .then_with(|| a.done.cmp(&b.done))
}

/// Beam decoding of the policy from `query.subject` for up to `max_len`
/// edges. Finished and open entries share one pool of `beam_width`. With
/// `mask`, the hypothesis edge and its inverse are never expanded.
pub fn beam_search_infer(
    kg: &KnowledgeGraph,
    policy: &Policy,
    query: &Query,
    cfg: &BeamConfig,
    mask: Option<&Hypothesis>,
) -> Result<BeamOutput, PathfinderError> {
    if cfg.beam_width == 0 || cfg.max_len == 0 {
        return Err(PathfinderError::Config(
            "beam_width and max_len must be at least 1".into(),
        ));
    }
    kg.check_entity(query.subject)?;
    kg.check_relation(query.relation)?;
    let masked = mask.map_or([None, None], |h| hypothesis_edges(kg, h));
    let mut pool = vec![Entry {
        state: policy.initial_state(),
        prev: PrevRelation::Start,
        current: query.subject,
        visited: vec![query.subject],
        triples: Vec::new(),
        log_prob: 0.0,
        done: false,
        fresh: false,
    }];
    let mut arrivals: Vec<(Vec<Triple>, f64)> = Vec::new();
    for _ in 0..cfg.max_len {
        if pool.iter().all(|e| e.done) {
            break;
        }
        let mut next = Vec::new();
        for entry in pool {
            if entry.done {
                next.push(Entry {
                    fresh: false,
                    ..entry
                });
                continue;
            }
            let state = policy.encode(&entry.state, entry.prev, entry.current);
            let actions = candidate_actions(kg, entry.current, &entry.visited, &masked);
            let lps = policy.action_log_probs(&state.h, query, &actions);
            for (a, lp) in actions.iter().zip(lps) {
                let mut child = Entry {
                    state: state.clone(),
                    log_prob: entry.log_prob + lp,
                    fresh: false,
                    ..entry.clone()
                };
                match *a {
                    Action::Stop => child.done = true,
                    Action::Edge { relation, target } => {
                        child.triples.push(Triple::new(entry.current, relation, target));
                        child.visited.push(target);
                        child.prev = PrevRelation::Relation(relation);
                        child.current = target;
                        child.done = child.triples.len() >= cfg.max_len;
                        child.fresh = true;
                    }
                }
                next.push(child);
            }
        }
        next.sort_by(by_score);
        next.truncate(cfg.beam_width);
        if cfg.answer_mode == AnswerMode::FirstArrival {
            arrivals.extend(
                next.iter()
                    .filter(|e| e.fresh)
                    .map(|e| (e.triples.clone(), e.log_prob)),
            );
        }
        pool = next;
    }
    if cfg.answer_mode == AnswerMode::Terminal {
        arrivals = pool
            .into_iter()
            .filter(|e| e.done)
            .map(|e| (e.triples, e.log_prob))
            .collect();
    }
    Ok(collect(query.subject, arrivals))
}

fn collect(subject: EntityId, found: Vec<(Vec<Triple>, f64)>) -> BeamOutput {
    let mut paths: Vec<(Path, f64)> = found
        .into_iter()
        .map(|(t, lp)| (Path::new(subject, t).expect("beam entries are simple"), lp))
        .collect();
    paths.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    paths.dedup();
    let mut best: HashMap<EntityId, usize> = HashMap::new();
    let mut ranked = Vec::new();
    for (path, lp) in &paths {
        let e = path.target();
        if e == subject || best.contains_key(&e) {
            continue;
        }
        best.insert(e, ranked.len());
        ranked.push(RankedTarget {
            entity: e,
            path: path.clone(),
            log_prob: *lp,
        });
    }
    BeamOutput { ranked, paths }
}
