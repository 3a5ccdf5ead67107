use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{aggregate, evaluate, EvalError, EvalReport, KnownAnswers, Metrics};
use crate::info::IcTable;
use crate::kg::{Hypothesis, KnowledgeGraph};
use crate::pathfinder::{
    train, AnswerMode, BeamConfig, Policy, PolicyConfig, TrainConfig, Trainer,
};
use crate::seed::derive;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub use_early_stop: bool,
    pub use_relevance: bool,
}

pub const VARIANTS: [Variant; 4] = [
    Variant {
        name: "REx",
        use_early_stop: true,
        use_relevance: true,
    },
    Variant {
        name: "REx -s",
        use_early_stop: false,
        use_relevance: true,
    },
    Variant {
        name: "REx -r",
        use_early_stop: true,
        use_relevance: false,
    },
    Variant {
        name: "REx -rs",
        use_early_stop: false,
        use_relevance: false,
    },
];

/// A policy trained with early stop never learns to stop at the object, so
/// its answers are the entities it arrives at; otherwise the walk's end.
pub fn answer_mode_for(cfg: &TrainConfig) -> AnswerMode {
    if cfg.use_early_stop {
        AnswerMode::FirstArrival
    } else {
        AnswerMode::Terminal
    }
}

/// Everything a train + evaluate run needs besides its seed.
#[derive(Clone, Copy)]
pub struct AblationSetup<'a> {
    pub kg: &'a KnowledgeGraph,
    pub table: &'a IcTable,
    pub train: &'a [Hypothesis],
    pub test: &'a [Hypothesis],
    pub known: &'a KnownAnswers,
    pub policy: PolicyConfig,
    pub training: &'a TrainConfig,
    pub beam: BeamConfig,
}

/// Trains a fresh policy from `seed` and evaluates it. The policy
/// initialization and the training streams are derived from `seed`.
pub fn train_and_evaluate(
    setup: &AblationSetup<'_>,
    training: &TrainConfig,
    seed: u64,
) -> Result<(Trainer, EvalReport), EvalError> {
    let policy = Policy::init(
        setup.policy,
        setup.kg.num_entities(),
        setup.kg.num_relations(),
        derive(seed, "policy-init"),
    );
    let cfg = TrainConfig {
        seed: derive(seed, "train"),
        ..training.clone()
    };
    let mut trainer = Trainer::new(policy, cfg.optimizer);
    train(setup.kg, setup.table, setup.train, &mut trainer, &cfg)?;
    let beam = BeamConfig {
        answer_mode: answer_mode_for(&cfg),
        ..setup.beam
    };
    let report = evaluate(setup.kg, &trainer.policy, setup.test, setup.known, &beam, seed)?;
    Ok((trainer, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub mean: Metrics,
    pub std: Metrics,
    pub runs: usize,
}

/// The four flag combinations, each trained and evaluated on every seed.
pub fn run_ablation(setup: &AblationSetup<'_>, seeds: &[u64]) -> Result<Vec<AblationRow>, EvalError> {
    VARIANTS
        .iter()
        .map(|v| {
            let cfg = TrainConfig {
                use_early_stop: v.use_early_stop,
                use_relevance: v.use_relevance,
                ..setup.training.clone()
            };
            let runs = seeds
                .iter()
                .map(|&s| train_and_evaluate(setup, &cfg, s).map(|(_, r)| r.filtered))
                .collect::<Result<Vec<_>, _>>()?;
            let a = aggregate(&runs)?;
            Ok(AblationRow {
                variant: v.name.to_string(),
                mean: a.mean,
                std: a.std,
                runs: a.runs,
            })
        })
        .collect()
}

pub fn write_metrics_csv(rows: &[AblationRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "variant,hits1,hits3,hits10,mrr,std_mrr")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.variant, r.mean.hits1, r.mean.hits3, r.mean.hits10, r.mean.mrr, r.std.mrr
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{compute_ic_table, IcMode, Normalization};
    use crate::kg::parse_triples;

    #[test]
    fn flag_matrix() {
        let flags: Vec<(bool, bool)> = VARIANTS
            .iter()
            .map(|v| (v.use_early_stop, v.use_relevance))
            .collect();
        assert_eq!(flags, [(true, true), (false, true), (true, false), (false, false)]);
    }

    #[test]
    fn four_rows_csv() {
        let kg = parse_triples("a\tr\tb\nb\tr\tc\nd\tr\tb\nb\tr\te\nd\tt\te\n")
            .unwrap()
            .add_inverse_edges();
        let table = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let t = kg.relation_id("t").unwrap();
        let e = |l| kg.entity_id(l).unwrap();
        let train_h = [Hypothesis {
            subject: e("d"),
            relation: t,
            object: e("e"),
        }];
        let test_h = [Hypothesis {
            subject: e("a"),
            relation: t,
            object: e("c"),
        }];
        let mut known = KnownAnswers::from_graph(&kg);
        known.add_hypotheses(&test_h);
        let training = TrainConfig {
            epochs: 2,
            rollouts: 4,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let setup = AblationSetup {
            kg: &kg,
            table: &table,
            train: &train_h,
            test: &test_h,
            known: &known,
            policy: PolicyConfig {
                entity_dim: 4,
                relation_dim: 4,
                hidden_dim: 4,
                mlp_dim: 4,
            },
            training: &training,
            beam: BeamConfig::default(),
        };
        let rows = run_ablation(&setup, &[1, 2]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.runs == 2));
        let mut csv = Vec::new();
        write_metrics_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(4).unwrap().starts_with("REx -rs,"));
        // Same seed, same variant: identical outcome.
        let again = run_ablation(&setup, &[1, 2]).unwrap();
        assert_eq!(rows, again);
    }
}
