//! History-dependent action policy.
//!
//! An LSTM cell consumes, at each step, the previous action's relation and the
//! current entity. A two-layer tanh network maps `[h_t; e(s_h); r(query)]` to a
//! vector `y_t` in action space, and each candidate action `(r, e_d)` is scored
//! by `y_t · [r; e_d]`. Because candidates are scored independently and then
//! soft-maxed, the distribution is equivariant under reordering of the list.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Action, Query, Step};
use crate::kg::{EntityId, RelationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub entity_dim: usize,
    pub relation_dim: usize,
    pub hidden_dim: usize,
    pub mlp_dim: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            entity_dim: 32,
            relation_dim: 32,
            hidden_dim: 64,
            mlp_dim: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tensor {
    EntityEmbedding,
    RelationEmbedding,
    LstmWeight,
    LstmBias,
    HiddenWeight,
    HiddenBias,
    OutputWeight,
    OutputBias,
}

impl Tensor {
    pub const ALL: [Tensor; 8] = [
        Tensor::EntityEmbedding,
        Tensor::RelationEmbedding,
        Tensor::LstmWeight,
        Tensor::LstmBias,
        Tensor::HiddenWeight,
        Tensor::HiddenBias,
        Tensor::OutputWeight,
        Tensor::OutputBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::EntityEmbedding => "entity_embedding",
            Tensor::RelationEmbedding => "relation_embedding",
            Tensor::LstmWeight => "lstm_weight",
            Tensor::LstmBias => "lstm_bias",
            Tensor::HiddenWeight => "hidden_weight",
            Tensor::HiddenBias => "hidden_bias",
            Tensor::OutputWeight => "output_weight",
            Tensor::OutputBias => "output_bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Tensor> {
        Tensor::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// Relation rows beyond the graph vocabulary.
const STOP_RELATION_ROW: usize = 0;
const START_RELATION_ROW: usize = 1;

/// Previous-action relation fed to the recurrent cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrevRelation {
    Start,
    Relation(RelationId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// All learnable weights, one contiguous buffer with a fixed tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    config: PolicyConfig,
    num_entities: usize,
    num_relations: usize,
    shapes: [(usize, usize); 8],
    offsets: [usize; 9],
    params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// out += W x, W is rows×cols row-major.
fn matvec_add(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += Wᵀ d.
fn matvec_t_add(w: &[f64], cols: usize, d: &[f64], out: &mut [f64]) {
    for (row, &di) in w.chunks_exact(cols).zip(d) {
        if di != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * di;
            }
        }
    }
}

/// G += d xᵀ.
fn outer_add(g: &mut [f64], cols: usize, d: &[f64], x: &[f64]) {
    for (row, &di) in g.chunks_exact_mut(cols).zip(d) {
        if di != 0.0 {
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += di * xi;
            }
        }
    }
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-softmax of `scores`.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

struct StepCache {
    prev: usize,
    current: usize,
    zin: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    q: Vec<f64>,
    m: Vec<f64>,
    y: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Policy {
    fn layout(
        config: &PolicyConfig,
        num_entities: usize,
        num_relations: usize,
    ) -> ([(usize, usize); 8], [usize; 9]) {
        let PolicyConfig {
            entity_dim: de,
            relation_dim: dr,
            hidden_dim: h,
            mlp_dim: m,
        } = *config;
        let x = dr + de;
        let shapes = [
            (num_entities + 1, de),
            (num_relations + 2, dr),
            (4 * h, x + h),
            (4 * h, 1),
            (m, h + de + dr),
            (m, 1),
            (dr + de, m),
            (dr + de, 1),
        ];
        let mut offsets = [0; 9];
        for i in 0..8 {
            offsets[i + 1] = offsets[i] + shapes[i].0 * shapes[i].1;
        }
        (shapes, offsets)
    }

    /// All-zero weights: every candidate scores 0, so distributions are uniform.
    pub fn zeros(config: PolicyConfig, num_entities: usize, num_relations: usize) -> Self {
        let (shapes, offsets) = Self::layout(&config, num_entities, num_relations);
        Self {
            config,
            num_entities,
            num_relations,
            shapes,
            offsets,
            params: vec![0.0; offsets[8]],
        }
    }

    /// Uniform embeddings with unit expected norm, Glorot-uniform matrices,
    /// zero biases except a forget-gate bias of one.
    pub fn init(
        config: PolicyConfig,
        num_entities: usize,
        num_relations: usize,
        seed: u64,
    ) -> Self {
        let mut p = Self::zeros(config, num_entities, num_relations);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in Tensor::ALL {
            let (rows, cols) = p.shape(t);
            let bound = match t {
                Tensor::EntityEmbedding | Tensor::RelationEmbedding => (3.0 / cols as f64).sqrt(),
                Tensor::LstmWeight | Tensor::HiddenWeight | Tensor::OutputWeight => {
                    (6.0 / (rows + cols) as f64).sqrt()
                }
                _ => 0.0,
            };
            if bound > 0.0 {
                for w in p.tensor_mut(t) {
                    *w = rng.random_range(-bound..bound);
                }
            }
        }
        let h = config.hidden_dim;
        p.tensor_mut(Tensor::LstmBias)[h..2 * h].fill(1.0);
        p
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn shape(&self, t: Tensor) -> (usize, usize) {
        self.shapes[t as usize]
    }

    pub fn range(&self, t: Tensor) -> Range<usize> {
        self.offsets[t as usize]..self.offsets[t as usize + 1]
    }

    /// Tensor owning flat parameter index `i`.
    pub fn tensor_of(&self, i: usize) -> Tensor {
        Tensor::ALL
            .into_iter()
            .find(|&t| self.range(t).contains(&i))
            .expect("index within parameter buffer")
    }

    pub fn tensor(&self, t: Tensor) -> &[f64] {
        &self.params[self.range(t)]
    }

    pub fn tensor_mut(&mut self, t: Tensor) -> &mut [f64] {
        let r = self.range(t);
        &mut self.params[r]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn relation_row(&self, prev: PrevRelation) -> usize {
        match prev {
            PrevRelation::Start => self.num_relations + START_RELATION_ROW,
            PrevRelation::Relation(r) => r.index(),
        }
    }

    /// (relation row, entity row) embedding a candidate action.
    fn action_rows(&self, a: &Action) -> (usize, usize) {
        match *a {
            Action::Stop => (self.num_relations + STOP_RELATION_ROW, self.num_entities),
            Action::Edge { relation, target } => (relation.index(), target.index()),
        }
    }

    fn entity_vec(&self, row: usize) -> &[f64] {
        let d = self.config.entity_dim;
        &self.tensor(Tensor::EntityEmbedding)[row * d..(row + 1) * d]
    }

    fn relation_vec(&self, row: usize) -> &[f64] {
        let d = self.config.relation_dim;
        &self.tensor(Tensor::RelationEmbedding)[row * d..(row + 1) * d]
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState {
            h: vec![0.0; self.config.hidden_dim],
            c: vec![0.0; self.config.hidden_dim],
        }
    }

    /// Returns (zin = [r(prev); e(current); h_prev], gate activations, c, tanh c, h).
    #[allow(clippy::type_complexity)]
    fn lstm_forward(
        &self,
        state: &LstmState,
        prev_row: usize,
        current_row: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.config.hidden_dim;
        let mut zin = Vec::with_capacity(self.shape(Tensor::LstmWeight).1);
        zin.extend_from_slice(self.relation_vec(prev_row));
        zin.extend_from_slice(self.entity_vec(current_row));
        zin.extend_from_slice(&state.h);
        let mut z = self.tensor(Tensor::LstmBias).to_vec();
        matvec_add(self.tensor(Tensor::LstmWeight), zin.len(), &zin, &mut z);
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = if k < 3 * h { sigmoid(*zk) } else { zk.tanh() };
        }
        let (i, rest) = z.split_at(h);
        let (f, rest) = rest.split_at(h);
        let (o, g) = rest.split_at(h);
        let c: Vec<f64> = (0..h).map(|j| f[j] * state.c[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
        let hn: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
        (zin, z, c, tanh_c, hn)
    }

    /// Advances the history encoding by one observation.
    pub fn encode(&self, state: &LstmState, prev: PrevRelation, current: EntityId) -> LstmState {
        let (_, _, c, _, h) = self.lstm_forward(state, self.relation_row(prev), current.index());
        LstmState { h, c }
    }

    fn mlp_forward(&self, h: &[f64], query: &Query) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut q = Vec::with_capacity(self.shape(Tensor::HiddenWeight).1);
        q.extend_from_slice(h);
        q.extend_from_slice(self.entity_vec(query.subject.index()));
        q.extend_from_slice(self.relation_vec(query.relation.index()));
        let mut m = self.tensor(Tensor::HiddenBias).to_vec();
        matvec_add(self.tensor(Tensor::HiddenWeight), q.len(), &q, &mut m);
        m.iter_mut().for_each(|x| *x = x.tanh());
        let mut y = self.tensor(Tensor::OutputBias).to_vec();
        matvec_add(self.tensor(Tensor::OutputWeight), m.len(), &m, &mut y);
        (q, m, y)
    }

    fn score(&self, y: &[f64], a: &Action) -> f64 {
        let dr = self.config.relation_dim;
        let (rr, er) = self.action_rows(a);
        dot(&y[..dr], self.relation_vec(rr)) + dot(&y[dr..], self.entity_vec(er))
    }

    /// Unnormalized action scores given the current history encoding.
    pub fn action_scores(&self, h: &[f64], query: &Query, actions: &[Action]) -> Vec<f64> {
        let (_, _, y) = self.mlp_forward(h, query);
        actions.iter().map(|a| self.score(&y, a)).collect()
    }

    pub fn action_log_probs(&self, h: &[f64], query: &Query, actions: &[Action]) -> Vec<f64> {
        log_softmax(&self.action_scores(h, query, actions))
    }

    /// Distribution over `actions` after encoding the full observation history,
    /// given as (previous relation, entity) pairs from the first step on.
    pub fn forward(
        &self,
        history: &[(PrevRelation, EntityId)],
        query: &Query,
        actions: &[Action],
    ) -> Vec<f64> {
        assert!(!actions.is_empty(), "at least one candidate action");
        let mut state = self.initial_state();
        for &(prev, e) in history {
            state = self.encode(&state, prev, e);
        }
        self.action_log_probs(&state.h, query, actions)
            .into_iter()
            .map(f64::exp)
            .collect()
    }

    /// REINFORCE surrogate for one episode,
    /// `scale · Σ_t [−advantage · log π(a_t) − entropy_weight · H(π_t)]`,
    /// accumulating its gradient into `grad` when given.
    pub fn episode_loss(
        &self,
        query: &Query,
        steps: &[Step],
        advantage: f64,
        entropy_weight: f64,
        scale: f64,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let mut state = self.initial_state();
        let mut caches = Vec::with_capacity(steps.len());
        let mut loss = 0.0;
        for step in steps {
            let prev = self.relation_row(step.prev_relation);
            let cur = step.current.index();
            let (zin, gates, c, tanh_c, h) = self.lstm_forward(&state, prev, cur);
            let (q, m, y) = self.mlp_forward(&h, query);
            let scores: Vec<f64> = step.actions.iter().map(|a| self.score(&y, a)).collect();
            let log_probs = log_softmax(&scores);
            let entropy: f64 = -log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>();
            loss += scale * (-advantage * log_probs[step.chosen] - entropy_weight * entropy);
            let c_prev = std::mem::replace(&mut state, LstmState { h, c }).c;
            if grad.is_some() {
                caches.push(StepCache {
                    prev,
                    current: cur,
                    zin,
                    gates,
                    c_prev,
                    tanh_c,
                    q,
                    m,
                    y,
                    log_probs,
                });
            }
        }
        if let Some(g) = grad {
            self.backward(query, steps, &caches, advantage, entropy_weight, scale, g);
        }
        loss
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        query: &Query,
        steps: &[Step],
        caches: &[StepCache],
        advantage: f64,
        entropy_weight: f64,
        scale: f64,
        grad: &mut [f64],
    ) {
        let PolicyConfig {
            entity_dim: de,
            relation_dim: dr,
            hidden_dim: hd,
            mlp_dim: md,
        } = self.config;
        let ent_off = self.offsets[Tensor::EntityEmbedding as usize];
        let rel_off = self.offsets[Tensor::RelationEmbedding as usize];
        let (lw, lb) = (self.range(Tensor::LstmWeight), self.range(Tensor::LstmBias));
        let (hw, hb) = (self.range(Tensor::HiddenWeight), self.range(Tensor::HiddenBias));
        let (ow, ob) = (self.range(Tensor::OutputWeight), self.range(Tensor::OutputBias));
        let zin_len = self.shape(Tensor::LstmWeight).1;
        let q_len = self.shape(Tensor::HiddenWeight).1;

        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for (step, cache) in steps.iter().zip(caches).rev() {
            // softmax scores
            let entropy: f64 = -cache.log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>();
            let mut dy = vec![0.0; dr + de];
            for (k, (a, &lp)) in step.actions.iter().zip(&cache.log_probs).enumerate() {
                let p = lp.exp();
                let chosen = if k == step.chosen { 1.0 } else { 0.0 };
                let ds = scale
                    * (-advantage * (chosen - p) + entropy_weight * p * (lp + entropy));
                if ds == 0.0 {
                    continue;
                }
                let (rr, er) = self.action_rows(a);
                axpy(&mut dy[..dr], ds, self.relation_vec(rr));
                axpy(&mut dy[dr..], ds, self.entity_vec(er));
                axpy(&mut grad[rel_off + rr * dr..rel_off + (rr + 1) * dr], ds, &cache.y[..dr]);
                axpy(&mut grad[ent_off + er * de..ent_off + (er + 1) * de], ds, &cache.y[dr..]);
            }

            // output and hidden layers
            outer_add(&mut grad[ow.clone()], md, &dy, &cache.m);
            axpy(&mut grad[ob.clone()], 1.0, &dy);
            let mut dm = vec![0.0; md];
            matvec_t_add(self.tensor(Tensor::OutputWeight), md, &dy, &mut dm);
            let du: Vec<f64> = dm
                .iter()
                .zip(&cache.m)
                .map(|(d, m)| d * (1.0 - m * m))
                .collect();
            outer_add(&mut grad[hw.clone()], q_len, &du, &cache.q);
            axpy(&mut grad[hb.clone()], 1.0, &du);
            let mut dq = vec![0.0; q_len];
            matvec_t_add(self.tensor(Tensor::HiddenWeight), q_len, &du, &mut dq);
            let s_row = query.subject.index();
            let r_row = query.relation.index();
            axpy(&mut grad[ent_off + s_row * de..ent_off + (s_row + 1) * de], 1.0, &dq[hd..hd + de]);
            axpy(&mut grad[rel_off + r_row * dr..rel_off + (r_row + 1) * dr], 1.0, &dq[hd + de..]);

            // recurrent cell
            let (i, rest) = cache.gates.split_at(hd);
            let (f, rest) = rest.split_at(hd);
            let (o, g) = rest.split_at(hd);
            let mut dz = vec![0.0; 4 * hd];
            let mut dc_prev = vec![0.0; hd];
            for j in 0..hd {
                let dh = dq[j] + dh_next[j];
                let tc = cache.tanh_c[j];
                let d_o = dh * tc;
                let dc = dc_next[j] + dh * o[j] * (1.0 - tc * tc);
                let di = dc * g[j];
                let dg = dc * i[j];
                let df = dc * cache.c_prev[j];
                dc_prev[j] = dc * f[j];
                dz[j] = di * i[j] * (1.0 - i[j]);
                dz[hd + j] = df * f[j] * (1.0 - f[j]);
                dz[2 * hd + j] = d_o * o[j] * (1.0 - o[j]);
                dz[3 * hd + j] = dg * (1.0 - g[j] * g[j]);
            }
            outer_add(&mut grad[lw.clone()], zin_len, &dz, &cache.zin);
            axpy(&mut grad[lb.clone()], 1.0, &dz);
            let mut dzin = vec![0.0; zin_len];
            matvec_t_add(self.tensor(Tensor::LstmWeight), zin_len, &dz, &mut dzin);
            let (pr, cr) = (cache.prev, cache.current);
            axpy(&mut grad[rel_off + pr * dr..rel_off + (pr + 1) * dr], 1.0, &dzin[..dr]);
            axpy(&mut grad[ent_off + cr * de..ent_off + (cr + 1) * de], 1.0, &dzin[dr..dr + de]);
            dh_next = dzin[dr + de..].to_vec();
            dc_next = dc_prev;
        }
    }

    /// Replaces weights from a flat buffer of matching length.
    pub fn load_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }
}
