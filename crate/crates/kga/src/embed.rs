//! Embedding models (TransE, DistMult, ComplEx) trained by SGD with
//! self-adversarial negative sampling.
//!
//! One loss serves all three models:
//!
//! ```text
//! L = −log σ(ψ(pos)) − Σᵢ wᵢ · log σ(−ψ(negᵢ)),   wᵢ = softmax(α · ψ(negᵢ))
//! ```
//!
//! summed over the k head- and k tail-corruptions of each positive. The
//! softmax weights are treated as constants during backpropagation (no
//! gradient flows through them), which is also the contract the
//! finite-difference tests check. α = 0 gives uniform weights.
//!
//! Training is bitwise-deterministic single-threaded. With more threads,
//! minibatch shards update the shared parameter tables without
//! synchronization (stale reads and lost updates tolerated), trading
//! determinism for throughput.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::EntityTriple;
use crate::vocab::Vocab;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::DistMult => 1,
            ModelKind::ComplEx => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ModelKind::TransE),
            1 => Some(ModelKind::DistMult),
            2 => Some(ModelKind::ComplEx),
            _ => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            _ => Err(Error::config(format!(
                "unknown model {s:?}, expected transe|distmult|complex"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::TransE => write!(f, "transe"),
            ModelKind::DistMult => write!(f, "distmult"),
            ModelKind::ComplEx => write!(f, "complex"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    /// Embedding dimension; ComplEx stores 2·dim reals per id.
    pub dim: usize,
    /// TransE distance norm, 1 or 2.
    pub p_norm: u8,
    /// TransE margin γ.
    pub gamma: f64,
    /// Corruptions per positive and side (k head + k tail per positive).
    pub negatives: usize,
    /// Self-adversarial temperature α; 0 = uniform negative weights.
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Kept for configuration parity with 1-N trainers; the sampled
    /// sigmoid loss used here has no targets to smooth, so it is inert.
    pub label_smoothing: f64,
    /// L2 penalty on the three positive-triple embeddings, 0 to disable.
    pub l2: f64,
    /// Scale updates by accumulated squared gradients (AdaGrad-style).
    pub adaptive: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: ModelKind::TransE,
            dim: 64,
            p_norm: 1,
            gamma: 12.0,
            negatives: 16,
            alpha: 1.0,
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 512,
            seed: 42,
            label_smoothing: 0.0,
            l2: 0.0,
            adaptive: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::config(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.p_norm != 1 && self.p_norm != 2 {
            return bad("p_norm must be 1 or 2");
        }
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return bad("gamma must be a positive real");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return bad("alpha must be nonnegative");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must be in [0,1)");
        }
        if self.l2 < 0.0 || !self.l2.is_finite() {
            return bad("l2 must be nonnegative");
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        match self.model {
            ModelKind::ComplEx => 2 * self.dim,
            _ => self.dim,
        }
    }
}

/// Hash of the (entity, relation) vocabularies a model was trained against.
/// Checkpoints carry it so embeddings are never applied to ids from a
/// different interning.
pub fn vocab_hash(entities: &Vocab, relations: &Vocab) -> u64 {
    let mut h = Sha256::new();
    h.update((entities.len() as u64).to_le_bytes());
    for (_, s) in entities.iter() {
        h.update(s.as_bytes());
        h.update([0u8]);
    }
    h.update((relations.len() as u64).to_le_bytes());
    for (_, s) in relations.iter() {
        h.update(s.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub config: ModelConfig,
    pub n_entities: usize,
    pub n_relations: usize,
    pub vocab_hash: u64,
    /// Row-major `n_entities × stride` (stride = dim, or 2·dim for ComplEx
    /// with real parts in `[0,dim)` and imaginary parts in `[dim,2·dim)`).
    pub entity: Vec<f64>,
    pub relation: Vec<f64>,
}

/// Initialize embeddings uniformly in `[−6/√dim, +6/√dim]`, seeded by the
/// config seed. Deterministic: the same inputs give bitwise-equal tables.
pub fn init_embeddings(
    n_entities: usize,
    n_relations: usize,
    vocab_hash: u64,
    config: &ModelConfig,
) -> Result<EmbeddingModel> {
    config.validate()?;
    if n_entities == 0 || n_relations == 0 {
        return Err(Error::config("vocabulary sizes must be positive".to_string()));
    }
    let bound = 6.0 / (config.dim as f64).sqrt();
    let stride = config.stride();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n * stride).map(|_| rng.gen_range(-bound..=bound)).collect()
    };
    let entity = draw(n_entities);
    let relation = draw(n_relations);
    Ok(EmbeddingModel {
        config: config.clone(),
        n_entities,
        n_relations,
        vocab_hash,
        entity,
        relation,
    })
}

impl EmbeddingModel {
    pub fn stride(&self) -> usize {
        self.config.stride()
    }

    fn ent_row(&self, id: u32) -> &[f64] {
        let s = self.stride();
        &self.entity[id as usize * s..(id as usize + 1) * s]
    }

    fn rel_row(&self, id: u32) -> &[f64] {
        let s = self.stride();
        &self.relation[id as usize * s..(id as usize + 1) * s]
    }

    /// ψ(s, r, o) under the configured model.
    pub fn score(&self, s: u32, r: u32, o: u32) -> f64 {
        score_rows(&self.config, self.ent_row(s), self.rel_row(r), self.ent_row(o))
    }

    pub fn score_triple(&self, t: &EntityTriple) -> f64 {
        self.score(t.subject.0, t.relation.0, t.object.0)
    }

    fn assert_finite(&self, epoch: usize) -> Result<()> {
        let ok = self.entity.iter().chain(&self.relation).all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Divergence {
                epoch,
                batch: 0,
                msg: "non-finite parameter after epoch".to_string(),
            })
        }
    }
}

fn score_rows(cfg: &ModelConfig, es: &[f64], er: &[f64], eo: &[f64]) -> f64 {
    let d = cfg.dim;
    match cfg.model {
        ModelKind::TransE => {
            let mut dist = 0.0;
            if cfg.p_norm == 1 {
                for i in 0..d {
                    dist += (es[i] + er[i] - eo[i]).abs();
                }
            } else {
                for i in 0..d {
                    let delta = es[i] + er[i] - eo[i];
                    dist += delta * delta;
                }
                dist = dist.sqrt();
            }
            cfg.gamma - dist
        }
        ModelKind::DistMult => {
            let mut acc = 0.0;
            for i in 0..d {
                acc += es[i] * er[i] * eo[i];
            }
            acc
        }
        ModelKind::ComplEx => {
            let (sr, si) = es.split_at(d);
            let (rr, ri) = er.split_at(d);
            let (or_, oi) = eo.split_at(d);
            let mut acc = 0.0;
            for i in 0..d {
                acc += (sr[i] * rr[i] - si[i] * ri[i]) * or_[i]
                    + (sr[i] * ri[i] + si[i] * rr[i]) * oi[i];
            }
            acc
        }
    }
}

/// Adds `coeff · ∂ψ/∂row` for the three rows of one triple into `g{s,r,o}`.
fn add_score_grads(
    cfg: &ModelConfig,
    es: &[f64],
    er: &[f64],
    eo: &[f64],
    coeff: f64,
    gs: &mut [f64],
    gr: &mut [f64],
    go: &mut [f64],
) {
    let d = cfg.dim;
    match cfg.model {
        ModelKind::TransE => {
            // ψ = γ − ‖δ‖, δ = e_s + e_r − e_o.
            if cfg.p_norm == 1 {
                for i in 0..d {
                    let sgn = (es[i] + er[i] - eo[i]).signum();
                    let sgn = if sgn.is_nan() { 0.0 } else { sgn };
                    gs[i] -= coeff * sgn;
                    gr[i] -= coeff * sgn;
                    go[i] += coeff * sgn;
                }
            } else {
                let mut norm = 0.0;
                for i in 0..d {
                    let delta = es[i] + er[i] - eo[i];
                    norm += delta * delta;
                }
                let norm = norm.sqrt();
                if norm > 0.0 {
                    for i in 0..d {
                        let u = (es[i] + er[i] - eo[i]) / norm;
                        gs[i] -= coeff * u;
                        gr[i] -= coeff * u;
                        go[i] += coeff * u;
                    }
                }
            }
        }
        ModelKind::DistMult => {
            for i in 0..d {
                gs[i] += coeff * er[i] * eo[i];
                gr[i] += coeff * es[i] * eo[i];
                go[i] += coeff * es[i] * er[i];
            }
        }
        ModelKind::ComplEx => {
            let (sr, si) = es.split_at(d);
            let (rr, ri) = er.split_at(d);
            let (or_, oi) = eo.split_at(d);
            let (gsr, gsi) = gs.split_at_mut(d);
            let (grr, gri) = gr.split_at_mut(d);
            let (gor, goi) = go.split_at_mut(d);
            for i in 0..d {
                gsr[i] += coeff * (rr[i] * or_[i] + ri[i] * oi[i]);
                gsi[i] += coeff * (-ri[i] * or_[i] + rr[i] * oi[i]);
                grr[i] += coeff * (sr[i] * or_[i] + si[i] * oi[i]);
                gri[i] += coeff * (-si[i] * or_[i] + sr[i] * oi[i]);
                gor[i] += coeff * (sr[i] * rr[i] - si[i] * ri[i]);
                goi[i] += coeff * (sr[i] * ri[i] + si[i] * rr[i]);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// −log σ(x), computed without overflow.
fn softplus_neg(x: f64) -> f64 {
    // −log σ(x) = log(1 + e^{−x}).
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Self-adversarial weights softmax(α · score) over one positive's
/// negatives; α = 0 gives uniform weights.
pub fn negative_weights(neg_scores: &[f64], alpha: f64) -> Vec<f64> {
    if neg_scores.is_empty() {
        return Vec::new();
    }
    if alpha == 0.0 {
        return vec![1.0 / neg_scores.len() as f64; neg_scores.len()];
    }
    let m = neg_scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(alpha * b));
    let exps: Vec<f64> = neg_scores.iter().map(|&s| (alpha * s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Sparse gradient accumulator keyed by table row.
#[derive(Clone, Debug, Default)]
pub struct GradAccum {
    pub entity: HashMap<u32, Vec<f64>>,
    pub relation: HashMap<u32, Vec<f64>>,
}

impl GradAccum {
    fn ent(&mut self, row: u32, stride: usize) -> &mut Vec<f64> {
        self.entity.entry(row).or_insert_with(|| vec![0.0; stride])
    }

    fn rel(&mut self, row: u32, stride: usize) -> &mut Vec<f64> {
        self.relation.entry(row).or_insert_with(|| vec![0.0; stride])
    }
}

/// The loss of one positive with fixed negative weights: the weights enter
/// as constants, exactly as during training, which makes this the right
/// function to finite-difference against `grad_with_weights`.
///
/// `neg_heads`/`neg_tails` are entity ids replacing the subject/object;
/// `weights` covers heads then tails.
pub fn loss_with_weights(
    model: &EmbeddingModel,
    pos: &EntityTriple,
    neg_heads: &[u32],
    neg_tails: &[u32],
    weights: &[f64],
    l2: f64,
) -> f64 {
    let (s, r, o) = (pos.subject.0, pos.relation.0, pos.object.0);
    let mut loss = softplus_neg(model.score(s, r, o));
    for (j, &n) in neg_heads.iter().chain(neg_tails.iter()).enumerate() {
        let psi = if j < neg_heads.len() { model.score(n, r, o) } else { model.score(s, r, n) };
        loss += weights[j] * softplus_neg(-psi);
    }
    if l2 > 0.0 {
        for row in [model.ent_row(s), model.rel_row(r), model.ent_row(o)] {
            loss += l2 * row.iter().map(|v| v * v).sum::<f64>();
        }
    }
    loss
}

/// Analytic gradients of `loss_with_weights`, accumulated into `grads`.
/// Returns the loss.
pub fn grad_with_weights(
    model: &EmbeddingModel,
    pos: &EntityTriple,
    neg_heads: &[u32],
    neg_tails: &[u32],
    weights: &[f64],
    l2: f64,
    grads: &mut GradAccum,
) -> f64 {
    let cfg = &model.config;
    let stride = model.stride();
    let (s, r, o) = (pos.subject.0, pos.relation.0, pos.object.0);

    // dL/dψ(pos) = σ(ψ) − 1; dL/dψ(negⱼ) = wⱼ · σ(ψⱼ).
    let pos_score = model.score(s, r, o);
    let mut loss = softplus_neg(pos_score);
    {
        let coeff = sigmoid(pos_score) - 1.0;
        // Split borrows: rows can coincide (s == o), so gradients must be
        // staged per role and merged through the accumulator.
        let mut gs = vec![0.0; stride];
        let mut gr = vec![0.0; stride];
        let mut go = vec![0.0; stride];
        add_score_grads(
            cfg,
            model.ent_row(s),
            model.rel_row(r),
            model.ent_row(o),
            coeff,
            &mut gs,
            &mut gr,
            &mut go,
        );
        merge(grads.ent(s, stride), &gs);
        merge(grads.rel(r, stride), &gr);
        merge(grads.ent(o, stride), &go);
    }
    for (j, &n) in neg_heads.iter().chain(neg_tails.iter()).enumerate() {
        let head_side = j < neg_heads.len();
        let (ns, no) = if head_side { (n, o) } else { (s, n) };
        let psi = model.score(ns, r, no);
        loss += weights[j] * softplus_neg(-psi);
        let coeff = weights[j] * sigmoid(psi);
        let mut gs = vec![0.0; stride];
        let mut gr = vec![0.0; stride];
        let mut go = vec![0.0; stride];
        add_score_grads(
            cfg,
            model.ent_row(ns),
            model.rel_row(r),
            model.ent_row(no),
            coeff,
            &mut gs,
            &mut gr,
            &mut go,
        );
        merge(grads.ent(ns, stride), &gs);
        merge(grads.rel(r, stride), &gr);
        merge(grads.ent(no, stride), &go);
    }
    if l2 > 0.0 {
        for (is_entity, row) in [(true, s), (false, r), (true, o)] {
            let vals: Vec<f64> = if is_entity {
                model.ent_row(row).to_vec()
            } else {
                model.rel_row(row).to_vec()
            };
            loss += l2 * vals.iter().map(|v| v * v).sum::<f64>();
            let g = if is_entity { grads.ent(row, stride) } else { grads.rel(row, stride) };
            for (gv, v) in g.iter_mut().zip(&vals) {
                *gv += 2.0 * l2 * v;
            }
        }
    }
    loss
}

fn merge(acc: &mut [f64], add: &[f64]) {
    for (a, b) in acc.iter_mut().zip(add) {
        *a += b;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Head,
    Tail,
}

const NEG_RESAMPLE_TRIES: usize = 16;

/// Sample `k` corruptions of one side of a triple, uniform over all entity
/// ids (bin entities included). Draws that form a known-true training
/// triple are resampled a bounded number of times, then kept as-is.
pub fn sample_negatives(
    pos: &EntityTriple,
    k: usize,
    n_entities: usize,
    known: &HashSet<(u32, u32, u32)>,
    rng: &mut ChaCha8Rng,
    side: Side,
) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut candidate = rng.gen_range(0..n_entities as u32);
        for _ in 0..NEG_RESAMPLE_TRIES {
            let corrupted = match side {
                Side::Head => (candidate, pos.relation.0, pos.object.0),
                Side::Tail => (pos.subject.0, pos.relation.0, candidate),
            };
            if !known.contains(&corrupted) {
                break;
            }
            candidate = rng.gen_range(0..n_entities as u32);
        }
        out.push(candidate);
    }
    out
}

pub fn known_triple_set(triples: &[EntityTriple]) -> HashSet<(u32, u32, u32)> {
    triples.iter().map(|t| (t.subject.0, t.relation.0, t.object.0)).collect()
}

/// Owns a model being trained plus sampler and optimizer state.
pub struct Trainer {
    pub model: EmbeddingModel,
    known: HashSet<(u32, u32, u32)>,
    rng: ChaCha8Rng,
    ada_entity: Vec<f64>,
    ada_relation: Vec<f64>,
    pub epochs_done: usize,
}

impl Trainer {
    pub fn new(model: EmbeddingModel, train_triples: &[EntityTriple]) -> Trainer {
        let known = known_triple_set(train_triples);
        let rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x9e3779b97f4a7c15);
        let (ada_entity, ada_relation) = if model.config.adaptive {
            (vec![0.0; model.entity.len()], vec![0.0; model.relation.len()])
        } else {
            (Vec::new(), Vec::new())
        };
        Trainer { model, known, rng, ada_entity, ada_relation, epochs_done: 0 }
    }

    /// One pass over shuffled positives in minibatches, returning the mean
    /// per-positive loss. `threads = 1` is bitwise-deterministic;
    /// `threads > 1` shards batches hogwild-style.
    pub fn epoch(&mut self, triples: &[EntityTriple], threads: usize) -> Result<f64> {
        if triples.is_empty() {
            return Err(Error::data("cannot train on an empty triple set".to_string()));
        }
        let mut order: Vec<u32> = (0..triples.len() as u32).collect();
        order.shuffle(&mut self.rng);
        let epoch = self.epochs_done;

        let loss_sum = if threads <= 1 {
            let seed = self.rng.gen::<u64>();
            let mut worker = Worker {
                cfg: self.model.config.clone(),
                known: &self.known,
                n_entities: self.model.n_entities,
                rng: ChaCha8Rng::seed_from_u64(seed),
            };
            let mut tables = Tables {
                entity: &mut self.model.entity,
                relation: &mut self.model.relation,
                ada_entity: &mut self.ada_entity,
                ada_relation: &mut self.ada_relation,
            };
            worker.run(&mut tables, triples, &order, epoch)?
        } else {
            self.epoch_hogwild(triples, &order, threads, epoch)?
        };

        self.model.assert_finite(epoch)?;
        self.epochs_done += 1;
        Ok(loss_sum / triples.len() as f64)
    }

    fn epoch_hogwild(
        &mut self,
        triples: &[EntityTriple],
        order: &[u32],
        threads: usize,
        epoch: usize,
    ) -> Result<f64> {
        // Hogwild contract: worker threads read and write the shared tables
        // without synchronization. Races lose or mix individual updates,
        // which SGD tolerates; this mode gives up bitwise reproducibility
        // and is excluded from determinism guarantees.
        struct SharedTables {
            entity: *mut f64,
            entity_len: usize,
            relation: *mut f64,
            relation_len: usize,
            ada_entity: *mut f64,
            ada_relation: *mut f64,
        }
        unsafe impl Send for SharedTables {}
        unsafe impl Sync for SharedTables {}

        let shared = SharedTables {
            entity: self.model.entity.as_mut_ptr(),
            entity_len: self.model.entity.len(),
            relation: self.model.relation.as_mut_ptr(),
            relation_len: self.model.relation.len(),
            ada_entity: self.ada_entity.as_mut_ptr(),
            ada_relation: self.ada_relation.as_mut_ptr(),
        };
        let chunk_len = order.len().div_ceil(threads);
        let base_seed = self.rng.gen::<u64>();
        let cfg = &self.model.config;
        let known = &self.known;
        let n_entities = self.model.n_entities;

        let results: Vec<Result<f64>> = std::thread::scope(|scope| {
            let shared = &shared;
            let handles: Vec<_> = order
                .chunks(chunk_len)
                .enumerate()
                .map(|(t, chunk)| {
                    scope.spawn(move || {
                        let mut worker = Worker {
                            cfg: cfg.clone(),
                            known,
                            n_entities,
                            rng: ChaCha8Rng::seed_from_u64(
                                base_seed ^ (t as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15),
                            ),
                        };
                        let mut tables = unsafe {
                            Tables {
                                entity: std::slice::from_raw_parts_mut(
                                    shared.entity,
                                    shared.entity_len,
                                ),
                                relation: std::slice::from_raw_parts_mut(
                                    shared.relation,
                                    shared.relation_len,
                                ),
                                ada_entity: std::slice::from_raw_parts_mut(
                                    shared.ada_entity,
                                    if worker.cfg.adaptive { shared.entity_len } else { 0 },
                                ),
                                ada_relation: std::slice::from_raw_parts_mut(
                                    shared.ada_relation,
                                    if worker.cfg.adaptive { shared.relation_len } else { 0 },
                                ),
                            }
                        };
                        worker.run(&mut tables, triples, chunk, epoch)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
        });
        let mut loss_sum = 0.0;
        for r in results {
            loss_sum += r?;
        }
        Ok(loss_sum)
    }
}

struct Tables<'a> {
    entity: &'a mut [f64],
    relation: &'a mut [f64],
    ada_entity: &'a mut [f64],
    ada_relation: &'a mut [f64],
}

struct Worker<'a> {
    cfg: ModelConfig,
    known: &'a HashSet<(u32, u32, u32)>,
    n_entities: usize,
    rng: ChaCha8Rng,
}

impl Worker<'_> {
    /// Run minibatches over `order` (indices into `triples`), applying one
    /// accumulated SGD step per batch. Returns the summed loss.
    fn run(&mut self, tables: &mut Tables, triples: &[EntityTriple], order: &[u32], epoch: usize) -> Result<f64> {
        let stride = self.cfg.stride();
        let k = self.cfg.negatives;
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let mut grads = GradAccum::default();
            let mut batch_loss = 0.0;
            for &i in batch {
                let pos = &triples[i as usize];
                let neg_heads = sample_negatives(
                    pos,
                    k,
                    self.n_entities,
                    self.known,
                    &mut self.rng,
                    Side::Head,
                );
                let neg_tails = sample_negatives(
                    pos,
                    k,
                    self.n_entities,
                    self.known,
                    &mut self.rng,
                    Side::Tail,
                );
                // Scores for the weights read the same tables the gradient
                // pass reads; a temporary model view shares them.
                let view = TableView { cfg: &self.cfg, entity: tables.entity, relation: tables.relation };
                let mut neg_scores = Vec::with_capacity(2 * k);
                for &n in &neg_heads {
                    neg_scores.push(view.score(n, pos.relation.0, pos.object.0));
                }
                for &n in &neg_tails {
                    neg_scores.push(view.score(pos.subject.0, pos.relation.0, n));
                }
                let weights = negative_weights(&neg_scores, self.cfg.alpha);
                batch_loss += grad_with_weights_view(
                    &view,
                    pos,
                    &neg_heads,
                    &neg_tails,
                    &weights,
                    self.cfg.l2,
                    &mut grads,
                );
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                    msg: "non-finite batch loss (reduce the learning rate)".to_string(),
                });
            }
            total += batch_loss;
            self.apply(tables, &grads, batch.len() as f64, stride);
        }
        Ok(total)
    }

    fn apply(&self, tables: &mut Tables, grads: &GradAccum, batch_n: f64, stride: usize) {
        let lr = self.cfg.learning_rate;
        let inv = 1.0 / batch_n;
        let step = |table: &mut [f64], ada: &mut [f64], row: u32, g: &[f64]| {
            let base = row as usize * stride;
            for (j, &gj) in g.iter().enumerate() {
                let gm = gj * inv;
                if self.cfg.adaptive {
                    ada[base + j] += gm * gm;
                    table[base + j] -= lr * gm / (ada[base + j].sqrt() + 1e-10);
                } else {
                    table[base + j] -= lr * gm;
                }
            }
        };
        for (&row, g) in &grads.entity {
            step(tables.entity, tables.ada_entity, row, g);
        }
        for (&row, g) in &grads.relation {
            step(tables.relation, tables.ada_relation, row, g);
        }
    }
}

/// Read-only view over raw tables, used so the training inner loop and the
/// public `EmbeddingModel` methods share one scoring implementation.
struct TableView<'a> {
    cfg: &'a ModelConfig,
    entity: &'a [f64],
    relation: &'a [f64],
}

impl TableView<'_> {
    fn ent_row(&self, id: u32) -> &[f64] {
        let s = self.cfg.stride();
        &self.entity[id as usize * s..(id as usize + 1) * s]
    }

    fn rel_row(&self, id: u32) -> &[f64] {
        let s = self.cfg.stride();
        &self.relation[id as usize * s..(id as usize + 1) * s]
    }

    fn score(&self, s: u32, r: u32, o: u32) -> f64 {
        score_rows(self.cfg, self.ent_row(s), self.rel_row(r), self.ent_row(o))
    }
}

fn grad_with_weights_view(
    view: &TableView,
    pos: &EntityTriple,
    neg_heads: &[u32],
    neg_tails: &[u32],
    weights: &[f64],
    l2: f64,
    grads: &mut GradAccum,
) -> f64 {
    let cfg = view.cfg;
    let stride = cfg.stride();
    let (s, r, o) = (pos.subject.0, pos.relation.0, pos.object.0);
    let pos_score = view.score(s, r, o);
    let mut loss = softplus_neg(pos_score);
    let stage = |view: &TableView,
                     grads: &mut GradAccum,
                     ns: u32,
                     no: u32,
                     coeff: f64| {
        let mut gs = vec![0.0; stride];
        let mut gr = vec![0.0; stride];
        let mut go = vec![0.0; stride];
        add_score_grads(
            cfg,
            view.ent_row(ns),
            view.rel_row(r),
            view.ent_row(no),
            coeff,
            &mut gs,
            &mut gr,
            &mut go,
        );
        merge(grads.ent(ns, stride), &gs);
        merge(grads.rel(r, stride), &gr);
        merge(grads.ent(no, stride), &go);
    };
    stage(view, grads, s, o, sigmoid(pos_score) - 1.0);
    for (j, &n) in neg_heads.iter().chain(neg_tails.iter()).enumerate() {
        let (ns, no) = if j < neg_heads.len() { (n, o) } else { (s, n) };
        let psi = view.score(ns, r, no);
        loss += weights[j] * softplus_neg(-psi);
        stage(view, grads, ns, no, weights[j] * sigmoid(psi));
    }
    if l2 > 0.0 {
        for (is_entity, row) in [(true, s), (false, r), (true, o)] {
            let vals: Vec<f64> =
                if is_entity { view.ent_row(row).to_vec() } else { view.rel_row(row).to_vec() };
            loss += l2 * vals.iter().map(|v| v * v).sum::<f64>();
            let g = if is_entity { grads.ent(row, stride) } else { grads.rel(row, stride) };
            for (gv, v) in g.iter_mut().zip(&vals) {
                *gv += 2.0 * l2 * v;
            }
        }
    }
    loss
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary with a sha256 trailer.
//
//   magic "KGACHKPT" | version u32 | kind u8 | p_norm u8 | pad u16
//   dim u32 | n_entities u64 | n_relations u64 | vocab_hash u64
//   config JSON (u32 length + bytes)
//   entity f64s | relation f64s | sha256 of everything above
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"KGACHKPT";
const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(
        64 + 8 * (model.entity.len() + model.relation.len()),
    );
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(model.config.model.tag());
    buf.push(model.config.p_norm);
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(model.config.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(model.n_entities as u64).to_le_bytes());
    buf.extend_from_slice(&(model.n_relations as u64).to_le_bytes());
    buf.extend_from_slice(&model.vocab_hash.to_le_bytes());
    let config_json = serde_json::to_vec(&model.config).expect("config serialize");
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    for v in model.entity.iter().chain(&model.relation) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Load a checkpoint, verifying its checksum, and — when
/// `expected_vocab_hash` is given — that it was trained on the same
/// vocabulary the caller is about to use it with.
pub fn load_checkpoint(path: &Path, expected_vocab_hash: Option<u64>) -> Result<EmbeddingModel> {
    let bad = |msg: &str| Error::Checkpoint(format!("{}: {msg}", path.display()));
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 78 {
        return Err(bad("file too short"));
    }
    let (body, trailer) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(bad("checksum mismatch (file corrupted or truncated)"));
    }
    if &body[0..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let kind = ModelKind::from_tag(body[12]).ok_or_else(|| bad("unknown model tag"))?;
    let p_norm = body[13];
    let dim = u32::from_le_bytes(body[16..20].try_into().unwrap()) as usize;
    let n_entities = u64::from_le_bytes(body[20..28].try_into().unwrap()) as usize;
    let n_relations = u64::from_le_bytes(body[28..36].try_into().unwrap()) as usize;
    let vocab = u64::from_le_bytes(body[36..44].try_into().unwrap());
    let json_len = u32::from_le_bytes(body[44..48].try_into().unwrap()) as usize;
    let json_end = 48usize.checked_add(json_len).ok_or_else(|| bad("bad header"))?;
    if json_end > body.len() {
        return Err(bad("truncated config"));
    }
    let config: ModelConfig = serde_json::from_slice(&body[48..json_end])
        .map_err(|e| bad(&format!("bad embedded config: {e}")))?;
    if config.model != kind || config.dim != dim || config.p_norm != p_norm {
        return Err(bad("header disagrees with embedded config"));
    }
    let stride = config.stride();
    let expected_len = json_end + 8 * stride * (n_entities + n_relations);
    if body.len() != expected_len {
        return Err(bad("parameter table size mismatch"));
    }
    if let Some(expected) = expected_vocab_hash {
        if expected != vocab {
            return Err(bad(
                "vocabulary hash mismatch: checkpoint was trained on a different graph",
            ));
        }
    }
    let read_table = |offset: usize, n: usize| -> Vec<f64> {
        body[offset..offset + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let entity = read_table(json_end, stride * n_entities);
    let relation = read_table(json_end + 8 * stride * n_entities, stride * n_relations);
    Ok(EmbeddingModel { config, n_entities, n_relations, vocab_hash: vocab, entity, relation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{EntityId, RelationId};
    use proptest::prelude::*;
    // Both globs above export an `Rng`; name the one the tests mean.
    use rand::Rng;

    fn cfg(model: ModelKind, dim: usize) -> ModelConfig {
        ModelConfig { model, dim, negatives: 4, batch_size: 8, ..Default::default() }
    }

    fn triple(s: u32, r: u32, o: u32) -> EntityTriple {
        EntityTriple::new(EntityId(s), RelationId(r), EntityId(o))
    }

    #[test]
    fn init_is_deterministic_and_in_bounds() {
        let c = cfg(ModelKind::TransE, 8);
        let a = init_embeddings(10, 3, 7, &c).unwrap();
        let b = init_embeddings(10, 3, 7, &c).unwrap();
        assert_eq!(a.entity, b.entity);
        assert_eq!(a.relation, b.relation);
        assert_eq!(a.entity.len(), 80);
        let bound = 6.0 / (8.0f64).sqrt();
        assert!(a.entity.iter().all(|v| v.abs() <= bound));

        let complex = init_embeddings(10, 3, 7, &cfg(ModelKind::ComplEx, 8)).unwrap();
        assert_eq!(complex.entity.len(), 160);
        assert!(init_embeddings(10, 3, 7, &ModelConfig { dim: 0, ..c }).is_err());
    }

    #[test]
    fn transe_score_is_gamma_at_zero_translation() {
        for p in [1u8, 2] {
            let mut m = init_embeddings(2, 1, 0, &ModelConfig {
                p_norm: p,
                ..cfg(ModelKind::TransE, 4)
            })
            .unwrap();
            // e_o := e_s + e_r exactly.
            for i in 0..4 {
                m.entity[4 + i] = m.entity[i] + m.relation[i];
            }
            assert_eq!(m.score(0, 0, 1), m.config.gamma);
        }
    }

    #[test]
    fn distmult_zero_relation_scores_zero() {
        let mut m = init_embeddings(3, 1, 0, &cfg(ModelKind::DistMult, 8)).unwrap();
        m.relation.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..3 {
            for o in 0..3 {
                assert_eq!(m.score(s, 0, o), 0.0);
            }
        }
    }

    #[test]
    fn complex_with_real_embeddings_matches_distmult() {
        let d = 8;
        let dm = init_embeddings(6, 2, 0, &ModelConfig { seed: 5, ..cfg(ModelKind::DistMult, d) })
            .unwrap();
        let mut cx =
            init_embeddings(6, 2, 0, &ModelConfig { seed: 5, ..cfg(ModelKind::ComplEx, d) })
                .unwrap();
        // Copy the DistMult vectors into the real halves; zero the imaginary.
        for row in 0..6 {
            for i in 0..d {
                cx.entity[row * 2 * d + i] = dm.entity[row * d + i];
                cx.entity[row * 2 * d + d + i] = 0.0;
            }
        }
        for row in 0..2 {
            for i in 0..d {
                cx.relation[row * 2 * d + i] = dm.relation[row * d + i];
                cx.relation[row * 2 * d + d + i] = 0.0;
            }
        }
        for (s, r, o) in [(0, 0, 1), (2, 1, 3), (4, 0, 5), (1, 1, 1)] {
            assert_eq!(cx.score(s, r, o), dm.score(s, r, o));
        }
    }

    proptest! {
        #[test]
        fn distmult_is_symmetric(seed in 0u64..1000, s in 0u32..6, r in 0u32..3, o in 0u32..6) {
            let m = init_embeddings(6, 3, 0, &ModelConfig { seed, ..cfg(ModelKind::DistMult, 8) }).unwrap();
            let a = m.score(s, r, o);
            let b = m.score(o, r, s);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        }

        #[test]
        fn transe_is_translation_invariant(seed in 0u64..1000, shift in -5.0..5.0f64) {
            let mut m = init_embeddings(4, 2, 0, &ModelConfig { seed, ..cfg(ModelKind::TransE, 8) }).unwrap();
            let before = m.score(0, 1, 2);
            m.entity.iter_mut().for_each(|v| *v += shift);
            let after = m.score(0, 1, 2);
            prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
        }
    }

    /// Central finite difference of `loss_with_weights` against the analytic
    /// gradients, at every parameter the triple touches.
    fn fd_check(model: &EmbeddingModel, pos: &EntityTriple, l2: f64) -> f64 {
        let k = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let known = HashSet::new();
        let neg_heads = sample_negatives(pos, k, model.n_entities, &known, &mut rng, Side::Head);
        let neg_tails = sample_negatives(pos, k, model.n_entities, &known, &mut rng, Side::Tail);
        let neg_scores: Vec<f64> = neg_heads
            .iter()
            .map(|&n| model.score(n, pos.relation.0, pos.object.0))
            .chain(neg_tails.iter().map(|&n| model.score(pos.subject.0, pos.relation.0, n)))
            .collect();
        let weights = negative_weights(&neg_scores, model.config.alpha);

        let mut grads = GradAccum::default();
        grad_with_weights(model, pos, &neg_heads, &neg_tails, &weights, l2, &mut grads);

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let stride = model.stride();
        let rows: Vec<(bool, u32)> = grads
            .entity
            .keys()
            .map(|&r| (true, r))
            .chain(grads.relation.keys().map(|&r| (false, r)))
            .collect();
        for (is_entity, row) in rows {
            for j in 0..stride {
                let idx = row as usize * stride + j;
                let probe = |delta: f64| {
                    let mut m = model.clone();
                    if is_entity {
                        m.entity[idx] += delta;
                    } else {
                        m.relation[idx] += delta;
                    }
                    loss_with_weights(&m, pos, &neg_heads, &neg_tails, &weights, l2)
                };
                let fd = (probe(h) - probe(-h)) / (2.0 * h);
                let an = if is_entity {
                    grads.entity[&row][j]
                } else {
                    grads.relation[&row][j]
                };
                // Components below the floor are compared absolutely:
                // central-difference noise (~1e-9) would otherwise dominate
                // the quotient for near-zero gradients.
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx] {
            for p in [1u8, 2] {
                if kind != ModelKind::TransE && p == 2 {
                    continue;
                }
                let c = ModelConfig { p_norm: p, seed: 3, ..cfg(kind, 8) };
                let model = init_embeddings(12, 4, 0, &c).unwrap();
                for _ in 0..10 {
                    let pos = triple(
                        rng.gen_range(0..12),
                        rng.gen_range(0..4),
                        rng.gen_range(0..12),
                    );
                    let worst = fd_check(&model, &pos, 0.001);
                    assert!(worst < 1e-4, "{kind} p={p}: worst relative error {worst}");
                }
            }
        }
    }

    #[test]
    fn untouched_rows_have_no_gradient() {
        let model = init_embeddings(5, 2, 0, &cfg(ModelKind::DistMult, 4)).unwrap();
        let pos = triple(0, 0, 1);
        let mut grads = GradAccum::default();
        grad_with_weights(&model, &pos, &[2], &[3], &[0.5, 0.5], 0.0, &mut grads);
        assert!(!grads.entity.contains_key(&4));
        assert!(!grads.relation.contains_key(&1));
    }

    #[test]
    fn alpha_zero_gives_uniform_weights() {
        let w = negative_weights(&[1.0, 5.0, -3.0, 2.0], 0.0);
        assert_eq!(w, vec![0.25; 4]);
        let w = negative_weights(&[1.0, 5.0, -3.0, 2.0], 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[1] > w[0] && w[0] > w[2]);
    }

    #[test]
    fn two_entity_graph_has_one_possible_corruption() {
        let pos = triple(0, 0, 1);
        let known = known_triple_set(&[pos]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let negs = sample_negatives(&pos, 1, 2, &known, &mut rng, Side::Head);
            assert_eq!(negs, vec![1]); // (1, r, 1) is the only non-true corruption
        }
    }

    #[test]
    fn negatives_avoid_known_true_triples() {
        // Head corruptions of (0, r, 1): candidate 2 forms known-true
        // (2, r, 1), so nearly all draws must land on 1.
        let pos = triple(0, 0, 1);
        let known = known_triple_set(&[pos, triple(2, 0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let negs = sample_negatives(&pos, 200, 3, &known, &mut rng, Side::Head);
        let ones = negs.iter().filter(|&&n| n == 1).count();
        assert!(ones >= 195, "{ones}/200");
    }

    #[test]
    fn negative_sampling_is_roughly_uniform() {
        let pos = triple(0, 0, 1);
        let known = HashSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10usize;
        let draws = 20_000;
        let negs = sample_negatives(&pos, draws, n, &known, &mut rng, Side::Tail);
        let mut counts = vec![0usize; n];
        for &x in &negs {
            counts[x as usize] += 1;
        }
        let expect = draws as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 99.9th percentile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 27.88, "chi2 = {chi2}, counts = {counts:?}");
    }

    fn line_graph(n: u32) -> Vec<EntityTriple> {
        (0..n - 1).map(|i| triple(i, 0, i + 1)).collect()
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let triples = line_graph(6);
        let c = ModelConfig {
            learning_rate: f64::MIN_POSITIVE, // effectively zero, passes validation
            ..cfg(ModelKind::TransE, 8)
        };
        let model = init_embeddings(6, 1, 0, &c).unwrap();
        let before = model.clone();
        let mut tr = Trainer::new(model, &triples);
        let loss = tr.epoch(&triples, 1).unwrap();
        assert!(loss.is_finite());
        // Updates are scaled by ~5e-324: representable deltas round to 0.
        assert_eq!(tr.model.entity, before.entity);
        assert_eq!(tr.model.relation, before.relation);
    }

    #[test]
    fn loss_decreases_on_a_single_triple() {
        let triples = vec![triple(0, 0, 1)];
        let c = ModelConfig {
            dim: 4,
            learning_rate: 0.1,
            negatives: 2,
            batch_size: 1,
            ..cfg(ModelKind::TransE, 4)
        };
        let model = init_embeddings(4, 1, 0, &c).unwrap();
        let mut tr = Trainer::new(model, &triples);
        let first = tr.epoch(&triples, 1).unwrap();
        let mut last = first;
        for _ in 0..50 {
            last = tr.epoch(&triples, 1).unwrap();
        }
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn single_threaded_training_is_bitwise_deterministic() {
        let triples = line_graph(8);
        let c = ModelConfig { epochs: 2, ..cfg(ModelKind::DistMult, 8) };
        let run = || {
            let model = init_embeddings(8, 1, 0, &c).unwrap();
            let mut tr = Trainer::new(model, &triples);
            let mut losses = Vec::new();
            for _ in 0..2 {
                losses.push(tr.epoch(&triples, 1).unwrap());
            }
            (tr.model, losses)
        };
        let (m1, l1) = run();
        let (m2, l2) = run();
        assert_eq!(m1.entity, m2.entity);
        assert_eq!(m1.relation, m2.relation);
        assert_eq!(l1, l2);
    }

    #[test]
    fn exploding_learning_rate_reports_divergence() {
        let triples = line_graph(6);
        let c = ModelConfig {
            learning_rate: 1e12,
            ..cfg(ModelKind::DistMult, 8)
        };
        let model = init_embeddings(6, 1, 0, &c).unwrap();
        let mut tr = Trainer::new(model, &triples);
        let mut result = Ok(0.0);
        for _ in 0..20 {
            result = tr.epoch(&triples, 1);
            if result.is_err() {
                break;
            }
        }
        match result {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn hogwild_mode_still_learns() {
        let triples = line_graph(10);
        let c = ModelConfig { negatives: 2, batch_size: 4, ..cfg(ModelKind::TransE, 8) };
        let model = init_embeddings(10, 1, 0, &c).unwrap();
        let mut tr = Trainer::new(model, &triples);
        let first = tr.epoch(&triples, 2).unwrap();
        let mut last = first;
        for _ in 0..10 {
            last = tr.epoch(&triples, 2).unwrap();
        }
        assert!(last.is_finite() && last < first);
    }

    #[test]
    fn adaptive_scaling_trains() {
        let triples = line_graph(6);
        let c = ModelConfig { adaptive: true, ..cfg(ModelKind::DistMult, 8) };
        let model = init_embeddings(6, 1, 0, &c).unwrap();
        let before = model.entity.clone();
        let mut tr = Trainer::new(model, &triples);
        let loss = tr.epoch(&triples, 1).unwrap();
        assert!(loss.is_finite());
        assert_ne!(tr.model.entity, before);
    }

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        for kind in [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx] {
            let model = init_embeddings(7, 3, 0xABCD, &cfg(kind, 6)).unwrap();
            save_checkpoint(&model, &path).unwrap();
            let loaded = load_checkpoint(&path, Some(0xABCD)).unwrap();
            assert_eq!(model, loaded);
        }
    }

    #[test]
    fn tampered_checkpoint_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = init_embeddings(4, 2, 1, &cfg(ModelKind::TransE, 4)).unwrap();
        save_checkpoint(&model, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path, None) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("checksum"), "{msg}"),
            other => panic!("expected checksum error, got {other:?}"),
        }
    }

    #[test]
    fn vocab_mismatch_rejected_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = init_embeddings(4, 2, 111, &cfg(ModelKind::TransE, 4)).unwrap();
        save_checkpoint(&model, &path).unwrap();
        assert!(load_checkpoint(&path, Some(111)).is_ok());
        assert!(load_checkpoint(&path, None).is_ok());
        match load_checkpoint(&path, Some(222)) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("vocabulary"), "{msg}"),
            other => panic!("expected vocab mismatch, got {other:?}"),
        }
    }

    #[test]
    fn vocab_hash_tracks_content() {
        let mut e1 = Vocab::new();
        let mut r1 = Vocab::new();
        e1.intern("a");
        e1.intern("b");
        r1.intern("r");
        let mut e2 = e1.clone();
        let h1 = vocab_hash(&e1, &r1);
        assert_eq!(h1, vocab_hash(&e1, &r1));
        e2.intern("c");
        assert_ne!(h1, vocab_hash(&e2, &r1));
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let ok = ModelConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ModelConfig { p_norm: 3, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { gamma: 0.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { negatives: 0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { alpha: -1.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { label_smoothing: 1.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { batch_size: 0, ..ok }.validate().is_err());
    }
}
