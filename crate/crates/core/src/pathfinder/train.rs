use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reward_final, sample_rollouts, PathfinderError, Policy, Query, Trajectory};
use crate::info::IcTable;
use crate::kg::{Hypothesis, KnowledgeGraph};
use crate::seed::derive_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Reward switches and REINFORCE hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Multiply fidelity by path relevance (off for the `-r` ablation).
    pub use_relevance: bool,
    /// End walks on first arrival at the object (off for the `-s` ablation).
    pub use_early_stop: bool,
    pub max_len: usize,
    pub rollouts: usize,
    pub baseline_decay: f64,
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            use_relevance: true,
            use_early_stop: true,
            max_len: 3,
            rollouts: 30,
            baseline_decay: 0.95,
            entropy_weight: 0.01,
            learning_rate: 1e-3,
            seed: 0,
            epochs: 10,
            batch_size: 16,
            grad_clip: 5.0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PathfinderError> {
        let fail = |m: &str| Err(PathfinderError::Config(m.to_string()));
        if self.rollouts == 0 {
            return fail("rollouts must be at least 1");
        }
        if self.max_len == 0 {
            return fail("max_len must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.baseline_decay) {
            return fail("baseline_decay must lie in [0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(self.entropy_weight.is_finite() && self.grad_clip.is_finite() && self.grad_clip >= 0.0)
        {
            return fail("entropy_weight and grad_clip must be finite, grad_clip non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        let n = if kind == OptimizerKind::Adam { num_params } else { 0 };
        Self {
            kind,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
                    let m = &mut self.first_moment[i];
                    let v = &mut self.second_moment[i];
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Policy plus everything an update step mutates.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub policy: Policy,
    pub optimizer: OptimizerState,
    /// Moving-average reward baseline.
    pub baseline: f64,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed update steps.
    pub updates: usize,
}

impl Trainer {
    pub fn new(policy: Policy, kind: OptimizerKind) -> Self {
        let optimizer = OptimizerState::new(kind, policy.num_params());
        Self {
            policy,
            optimizer,
            baseline: 0.0,
            epoch: 0,
            updates: 0,
        }
    }
}

/// Fixed partition of the gradient sum, independent of thread count.
const GRAD_CHUNKS: usize = 8;

/// One REINFORCE step on scored trajectories. The surrogate loss is the mean
/// over trajectories of `−(R − b) Σ_t log π(a_t | H_t) − β Σ_t H(π_t)` with `b`
/// the moving-average baseline before this batch. Returns that loss.
pub fn reinforce_update(
    trainer: &mut Trainer,
    trajectories: &[Trajectory],
    cfg: &TrainConfig,
) -> Result<f64, PathfinderError> {
    if trajectories.is_empty() {
        return Ok(0.0);
    }
    let rewards = trajectories
        .iter()
        .map(|t| t.reward.map(|r| r.total).ok_or(PathfinderError::NotTerminal))
        .collect::<Result<Vec<f64>, _>>()?;
    let baseline = trainer.baseline;
    let scale = 1.0 / trajectories.len() as f64;
    let policy = &trainer.policy;
    let n = policy.num_params();
    let chunk = trajectories.len().div_ceil(GRAD_CHUNKS);
    let partials: Vec<(f64, Vec<f64>)> = trajectories
        .par_chunks(chunk)
        .zip(rewards.par_chunks(chunk))
        .map(|(trajs, rs)| {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for (t, &r) in trajs.iter().zip(rs) {
                loss += policy.episode_loss(
                    &Query::from(&t.hypothesis),
                    &t.steps,
                    r - baseline,
                    cfg.entropy_weight,
                    scale,
                    Some(&mut grad),
                );
            }
            (loss, grad)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(PathfinderError::NonFiniteGradient {
            tensor: policy.tensor_of(index).name(),
            index,
        });
    }
    if cfg.grad_clip > 0.0 {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > cfg.grad_clip {
            let s = cfg.grad_clip / norm;
            grad.iter_mut().for_each(|g| *g *= s);
        }
    }
    trainer
        .optimizer
        .apply(trainer.policy.params_mut(), &grad, cfg.learning_rate);
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    trainer.baseline = cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * mean;
    trainer.updates += 1;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchLog {
    pub epoch: usize,
    pub batch: usize,
    pub mean_reward: f64,
    pub mean_fidelity: f64,
    pub mean_relevance: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<BatchLog>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "epoch,batch,mean_reward,mean_fidelity,mean_relevance,loss";

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.batch, r.mean_reward, r.mean_fidelity, r.mean_relevance, r.loss
            )?;
        }
        Ok(())
    }

    pub fn last_mean_reward(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mean_reward)
    }
}

/// Runs `cfg.epochs` epochs of shuffled mini-batches, one update per batch.
/// Random streams are keyed by the trainer's epoch and update counters, so a
/// resumed trainer continues with fresh streams.
pub fn train(
    kg: &KnowledgeGraph,
    table: &IcTable,
    hypotheses: &[Hypothesis],
    trainer: &mut Trainer,
    cfg: &TrainConfig,
) -> Result<TrainingLog, PathfinderError> {
    cfg.validate()?;
    if hypotheses.is_empty() {
        return Err(PathfinderError::Config("empty training set".into()));
    }
    let mut log = TrainingLog::default();
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..hypotheses.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(cfg.seed, &[0, trainer.epoch as u64]));
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let step = trainer.updates as u64;
            let policy = &trainer.policy;
            let sampled: Vec<Vec<Trajectory>> = idx
                .par_iter()
                .map(|&i| {
                    let seed = derive_indexed(cfg.seed, &[1, step, i as u64]);
                    let mut trajs = sample_rollouts(kg, policy, &hypotheses[i], cfg, seed)?;
                    for t in &mut trajs {
                        t.reward = Some(reward_final(table, t, cfg.use_relevance)?);
                    }
                    Ok(trajs)
                })
                .collect::<Result<_, PathfinderError>>()?;
            let trajectories: Vec<Trajectory> = sampled.into_iter().flatten().collect();
            let n = trajectories.len() as f64;
            let mean = |f: fn(&super::Reward) -> f64| {
                trajectories
                    .iter()
                    .map(|t| f(t.reward.as_ref().expect("scored")))
                    .sum::<f64>()
                    / n
            };
            let (mean_reward, mean_fidelity, mean_relevance) =
                (mean(|r| r.total), mean(|r| r.fidelity), mean(|r| r.relevance));
            let loss = reinforce_update(trainer, &trajectories, cfg)?;
            log.rows.push(BatchLog {
                epoch: trainer.epoch,
                batch,
                mean_reward,
                mean_fidelity,
                mean_relevance,
                loss,
            });
        }
        trainer.epoch += 1;
    }
    Ok(log)
}
