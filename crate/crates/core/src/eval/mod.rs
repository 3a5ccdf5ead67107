//! Ranking metrics, multi-seed aggregation, ablations, IC histograms and
//! ground-truth metapath matching.

mod ablation;
mod metapaths;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::IcError;
use crate::kg::{EntityId, Hypothesis, KnowledgeGraph, RelationId};
use crate::pathfinder::{beam_search_infer, BeamConfig, PathfinderError, Policy, Query};

pub use ablation::{
    answer_mode_for, run_ablation, train_and_evaluate, write_metrics_csv, AblationRow,
    AblationSetup, Variant, VARIANTS,
};
pub use metapaths::{ic_distribution, match_ground_truth_metapaths, Histogram, MetapathMatch};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ranks to aggregate")]
    EmptyRanks,
    #[error("histogram needs at least one bin")]
    InvalidBins,
    #[error("no paths to score")]
    EmptyPaths,
    #[error("policy vocabulary ({policy_entities} entities, {policy_relations} relations) does not match graph ({graph_entities}, {graph_relations})")]
    Vocabulary {
        policy_entities: usize,
        policy_relations: usize,
        graph_entities: usize,
        graph_relations: usize,
    },
    #[error(transparent)]
    Pathfinder(#[from] PathfinderError),
    #[error(transparent)]
    Ic(#[from] IcError),
}

/// 1-based rank; `None` when the target was not retrieved.
pub type Rank = Option<usize>;

/// Position of `target` in `ranked`. When `filtered`, entries of `known`
/// other than the target do not count.
pub fn rank_of_target(
    ranked: &[EntityId],
    target: EntityId,
    known: &HashSet<EntityId>,
    filtered: bool,
) -> Rank {
    let mut rank = 0;
    for &e in ranked {
        if e == target {
            return Some(rank + 1);
        }
        if !(filtered && known.contains(&e)) {
            rank += 1;
        }
    }
    None
}

pub fn hits_at_k(ranks: &[Rank], k: usize) -> Result<f64, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    let hit = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
    Ok(hit as f64 / ranks.len() as f64)
}

pub fn mrr(ranks: &[Rank]) -> Result<f64, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    let sum: f64 = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum();
    Ok(sum / ranks.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub mrr: f64,
}

impl Metrics {
    pub fn from_ranks(ranks: &[Rank]) -> Result<Self, EvalError> {
        Ok(Self {
            hits1: hits_at_k(ranks, 1)?,
            hits3: hits_at_k(ranks, 3)?,
            hits10: hits_at_k(ranks, 10)?,
            mrr: mrr(ranks)?,
        })
    }

    fn fields(&self) -> [f64; 4] {
        [self.hits1, self.hits3, self.hits10, self.mrr]
    }

    fn from_fields(f: [f64; 4]) -> Self {
        Self {
            hits1: f[0],
            hits3: f[1],
            hits10: f[2],
            mrr: f[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metrics: Metrics,
    pub ranks: Vec<Rank>,
    pub filtered: bool,
    pub seed: u64,
}

impl EvalResult {
    pub fn from_ranks(ranks: Vec<Rank>, filtered: bool, seed: u64) -> Result<Self, EvalError> {
        Ok(Self {
            metrics: Metrics::from_ranks(&ranks)?,
            ranks,
            filtered,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub filtered: EvalResult,
    pub raw: EvalResult,
}

/// Correct objects per `(subject, relation)`, used for filtered ranking.
#[derive(Debug, Clone, Default)]
pub struct KnownAnswers(HashMap<(EntityId, RelationId), HashSet<EntityId>>);

impl KnownAnswers {
    pub fn from_graph(kg: &KnowledgeGraph) -> Self {
        let mut k = Self::default();
        for t in kg.triples() {
            k.insert(t.subject, t.relation, t.object);
        }
        k
    }

    pub fn insert(&mut self, s: EntityId, r: RelationId, o: EntityId) {
        self.0.entry((s, r)).or_default().insert(o);
    }

    pub fn add_hypotheses(&mut self, hs: &[Hypothesis]) {
        for h in hs {
            self.insert(h.subject, h.relation, h.object);
        }
    }

    pub fn get(&self, s: EntityId, r: RelationId) -> Option<&HashSet<EntityId>> {
        self.0.get(&(s, r))
    }
}

/// Mean and sample standard deviation over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Metrics,
    pub std: Metrics,
    pub runs: usize,
}

pub fn aggregate(results: &[EvalResult]) -> Result<Aggregate, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    let n = results.len() as f64;
    let mut mean = [0.0; 4];
    for r in results {
        for (m, x) in mean.iter_mut().zip(r.metrics.fields()) {
            *m += x / n;
        }
    }
    let mut var = [0.0; 4];
    if results.len() > 1 {
        for r in results {
            for ((v, x), m) in var.iter_mut().zip(r.metrics.fields()).zip(mean) {
                *v += (x - m) * (x - m) / (n - 1.0);
            }
        }
    }
    Ok(Aggregate {
        mean: Metrics::from_fields(mean),
        std: Metrics::from_fields(var.map(f64::sqrt)),
        runs: results.len(),
    })
}

/// Beam-decodes every hypothesis (its own edge masked) and ranks its object,
/// both filtered against `known` and raw.
pub fn evaluate(
    kg: &KnowledgeGraph,
    policy: &Policy,
    hypotheses: &[Hypothesis],
    known: &KnownAnswers,
    beam: &BeamConfig,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if policy.num_entities() != kg.num_entities() || policy.num_relations() != kg.num_relations()
    {
        return Err(EvalError::Vocabulary {
            policy_entities: policy.num_entities(),
            policy_relations: policy.num_relations(),
            graph_entities: kg.num_entities(),
            graph_relations: kg.num_relations(),
        });
    }
    let empty = HashSet::new();
    let ranks: Vec<(Rank, Rank)> = hypotheses
        .par_iter()
        .map(|h| {
            let out = beam_search_infer(kg, policy, &Query::from(h), beam, Some(h))?;
            let order: Vec<EntityId> = out.ranked.iter().map(|t| t.entity).collect();
            let k = known.get(h.subject, h.relation).unwrap_or(&empty);
            Ok((
                rank_of_target(&order, h.object, k, true),
                rank_of_target(&order, h.object, k, false),
            ))
        })
        .collect::<Result<_, PathfinderError>>()?;
    let (filtered, raw): (Vec<Rank>, Vec<Rank>) = ranks.into_iter().unzip();
    Ok(EvalReport {
        filtered: EvalResult::from_ranks(filtered, true, seed)?,
        raw: EvalResult::from_ranks(raw, false, seed)?,
    })
}
