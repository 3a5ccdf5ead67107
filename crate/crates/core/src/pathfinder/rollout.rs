use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::env::hypothesis_edges;
use super::{
    candidate_actions, Action, Path, PathfinderError, Policy, PrevRelation, Query, Status, Step,
    TrainConfig, Trajectory,
};
use crate::kg::{Hypothesis, KnowledgeGraph, Triple};
use crate::seed::derive_indexed;

fn sample_index(log_probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Samples one walk from the policy. Ends on STOP, on the horizon, or (with
/// `early_stop`) on first arrival at the hypothesis object.
pub fn sample_trajectory(
    kg: &KnowledgeGraph,
    policy: &Policy,
    h: &Hypothesis,
    max_len: usize,
    early_stop: bool,
    rng: &mut impl Rng,
) -> Result<Trajectory, PathfinderError> {
    kg.check_entity(h.subject)?;
    let query = Query::from(h);
    let masked = hypothesis_edges(kg, h);
    let mut state = policy.initial_state();
    let mut prev = PrevRelation::Start;
    let mut current = h.subject;
    let mut visited = vec![current];
    let mut steps = Vec::new();
    let mut triples = Vec::new();
    let status = loop {
        state = policy.encode(&state, prev, current);
        let actions = candidate_actions(kg, current, &visited, &masked);
        let log_probs = policy.action_log_probs(&state.h, &query, &actions);
        let chosen = sample_index(&log_probs, rng);
        let action = actions[chosen];
        steps.push(Step {
            prev_relation: prev,
            current,
            actions,
            chosen,
        });
        match action {
            Action::Stop => break Status::Stopped,
            Action::Edge { relation, target } => {
                triples.push(Triple::new(current, relation, target));
                visited.push(target);
                prev = PrevRelation::Relation(relation);
                current = target;
                if early_stop && target == h.object {
                    break Status::Reached;
                }
                if triples.len() >= max_len {
                    break Status::Horizon;
                }
            }
        }
    };
    Ok(Trajectory {
        hypothesis: *h,
        steps,
        path: Path::new(h.subject, triples).expect("masked walk is simple"),
        status: Some(status),
        reward: None,
    })
}

/// `cfg.rollouts` independent walks for `h`. Rollout `i` draws from its own
/// stream seeded by `(stream_seed, i)`, so results do not depend on threading.
pub fn sample_rollouts(
    kg: &KnowledgeGraph,
    policy: &Policy,
    h: &Hypothesis,
    cfg: &TrainConfig,
    stream_seed: u64,
) -> Result<Vec<Trajectory>, PathfinderError> {
    (0..cfg.rollouts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(stream_seed, &[i]));
            sample_trajectory(kg, policy, h, cfg.max_len, cfg.use_early_stop, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triples;
    use crate::pathfinder::PolicyConfig;

    fn setup() -> (KnowledgeGraph, Policy, Hypothesis) {
        let kg = parse_triples("a\tr\tb\nb\tr\tc\nc\tr\ta\nb\tr\td\nd\tr\tc\na\tt\tc\n")
            .unwrap()
            .add_inverse_edges();
        let cfg = PolicyConfig {
            entity_dim: 4,
            relation_dim: 4,
            hidden_dim: 6,
            mlp_dim: 6,
        };
        let p = Policy::init(cfg, kg.num_entities(), kg.num_relations(), 3);
        let h = Hypothesis {
            subject: kg.entity_id("a").unwrap(),
            relation: kg.relation_id("t").unwrap(),
            object: kg.entity_id("c").unwrap(),
        };
        (kg, p, h)
    }

    #[test]
    fn thirty_simple_rollouts() {
        let (kg, p, h) = setup();
        let cfg = TrainConfig::default();
        assert_eq!(cfg.rollouts, 30);
        let trajs = sample_rollouts(&kg, &p, &h, &cfg, 11).unwrap();
        assert_eq!(trajs.len(), 30);
        for t in &trajs {
            let mut e = t.path.entities();
            let n = e.len();
            e.sort();
            e.dedup();
            assert_eq!(e.len(), n);
            assert!(t.path.len() <= cfg.max_len);
            // nothing after the object
            if let Some(pos) = t.path.entities().iter().position(|&x| x == h.object) {
                assert_eq!(pos, t.path.len());
            }
        }
        assert_eq!(trajs, sample_rollouts(&kg, &p, &h, &cfg, 11).unwrap());
    }

    #[test]
    fn without_early_stop_can_pass_object() {
        let (kg, p, h) = setup();
        let cfg = TrainConfig {
            use_early_stop: false,
            max_len: 4,
            rollouts: 200,
            ..TrainConfig::default()
        };
        let trajs = sample_rollouts(&kg, &p, &h, &cfg, 5).unwrap();
        let passed = trajs.iter().any(|t| {
            let e = t.path.entities();
            e.iter().position(|&x| x == h.object).is_some_and(|pos| pos < t.path.len())
        });
        assert!(passed);
    }
}
