//! Mini-batch training with reciprocal relations, negative sampling, SGD for
//! Euclidean parameters and Riemannian SGD for ball parameters.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, Metrics, TieMode, TruthIndex};
use crate::geometry::Curvature;
use crate::model::{GeometryKind, GradientBundle, GroupScratch, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Negative samples per positive triple.
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub dim: usize,
    pub geometry: GeometryKind,
    pub init_scale: f64,
    /// Number of gradient shards per batch; 1 is the determinism reference.
    pub workers: usize,
    /// Cap on base training triples used for the training-MRR trace; 0 means all.
    pub train_eval_limit: usize,
    pub ties: TieMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 50.0,
            batch_size: 128,
            negatives: 50,
            epochs: 500,
            seed: 0,
            eval_every: 5,
            dim: 40,
            geometry: GeometryKind::Poincare(Curvature::new(1.0).expect("c = 1")),
            init_scale: 1e-3,
            workers: 1,
            train_eval_limit: 1000,
            ties: TieMode::Mid,
        }
    }
}

impl TrainConfig {
    /// Check the configuration against a training set of `n_train` (augmented) triples.
    pub fn validate(&self, n_train: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return bad(format!("init scale must be positive, got {}", self.init_scale));
        }
        for (name, v) in [
            ("batch size", self.batch_size),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("eval_every", self.eval_every),
            ("dim", self.dim),
            ("workers", self.workers),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.batch_size > n_train {
            return bad(format!(
                "batch size {} exceeds the {n_train} training triples",
                self.batch_size
            ));
        }
        Ok(())
    }
}

/// Append `(o, r + n_base, s)` for every `(s, r, o)`.
pub fn augment_reciprocal(triples: &[Triple], n_base_relations: usize) -> Vec<Triple> {
    let mut out = Vec::with_capacity(2 * triples.len());
    out.extend_from_slice(triples);
    out.extend(
        triples
            .iter()
            .map(|t| Triple::new(t.object, t.relation + n_base_relations, t.subject)),
    );
    out
}

/// `k` corruptions of the object slot with entities drawn uniformly from all
/// entities except the true object.
pub fn sample_negatives<R: Rng + ?Sized>(positive: Triple, k: usize, n_entities: usize, rng: &mut R) -> Vec<Triple> {
    assert!(n_entities >= 2, "negative sampling needs at least two entities");
    (0..k)
        .map(|_| {
            let mut e = rng.gen_range(0..n_entities - 1);
            if e >= positive.object {
                e += 1;
            }
            Triple::new(positive.subject, positive.relation, e)
        })
        .collect()
}

/// Positives with their negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub positives: Vec<Triple>,
    /// `k` consecutive negatives per positive, in positive order.
    pub negatives: Vec<Triple>,
}

impl Batch {
    pub fn sample<R: Rng + ?Sized>(positives: &[Triple], k: usize, n_entities: usize, rng: &mut R) -> Self {
        let negatives = positives
            .iter()
            .flat_map(|p| sample_negatives(*p, k, n_entities, rng))
            .collect();
        Self {
            positives: positives.to_vec(),
            negatives,
        }
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn negatives_per_positive(&self) -> usize {
        if self.positives.is_empty() {
            0
        } else {
            self.negatives.len() / self.positives.len()
        }
    }

    /// Positive `i` followed by its negatives, as `(object, label)` pairs.
    /// All of them share the positive's subject and relation.
    pub fn group_into(&self, i: usize, out: &mut Vec<(usize, f64)>) {
        let k = self.negatives_per_positive();
        out.clear();
        out.push((self.positives[i].object, 1.0));
        out.extend(self.negatives[i * k..(i + 1) * k].iter().map(|t| (t.object, 0.0)));
    }

    /// Every sample with its label: 1 for positives, 0 for negatives.
    pub fn samples(&self) -> impl Iterator<Item = (Triple, f64)> + '_ {
        self.positives
            .iter()
            .map(|t| (*t, 1.0))
            .chain(self.negatives.iter().map(|t| (*t, 0.0)))
    }
}

/// Mean Bernoulli negative log-likelihood over a batch.
pub fn loss(batch: &Batch, params: &ModelParams) -> Result<f64> {
    let mut total = 0.0;
    for (t, y) in batch.samples() {
        let s = params.score(t.subject, t.relation, t.object)?.value();
        total += crate::model::sample_loss(s, y);
    }
    Ok(total / batch.len() as f64)
}

/// Sparse row-wise gradient storage.
#[derive(Debug, Clone)]
struct RowGrads {
    width: usize,
    slot: Vec<u32>,
    rows: Vec<usize>,
    data: Vec<f64>,
}

const NO_SLOT: u32 = u32::MAX;

impl RowGrads {
    fn new(n_rows: usize, width: usize) -> Self {
        Self {
            width,
            slot: vec![NO_SLOT; n_rows],
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.width;
        let mut s = self.slot[r];
        if s == NO_SLOT {
            s = self.rows.len() as u32;
            self.slot[r] = s;
            self.rows.push(r);
            self.data.resize(self.data.len() + w, 0.0);
        }
        let s = s as usize;
        &mut self.data[s * w..(s + 1) * w]
    }

    fn get(&self, r: usize) -> Option<&[f64]> {
        let s = self.slot[r];
        (s != NO_SLOT).then(|| &self.data[s as usize * self.width..(s as usize + 1) * self.width])
    }

    fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().copied().zip(self.data.chunks(self.width))
    }

    fn clear(&mut self) {
        for &r in &self.rows {
            self.slot[r] = NO_SLOT;
        }
        self.rows.clear();
        self.data.clear();
    }

    fn merge(&mut self, other: &RowGrads) {
        for (r, g) in other.iter() {
            self.row_mut(r).iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }

    fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Gradients accumulated over a batch.
///
/// Entity rows hold `[embedding (d), b_s, b_o]`; relation rows hold
/// `[diagonal (d), translation (d)]`.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    dim: usize,
    entity: RowGrads,
    relation: RowGrads,
    loss_sum: f64,
    samples: usize,
}

impl BatchGradients {
    pub fn new(params: &ModelParams) -> Self {
        let d = params.dim;
        Self {
            dim: d,
            entity: RowGrads::new(params.n_entities, d + 2),
            relation: RowGrads::new(params.n_relations, 2 * d),
            loss_sum: 0.0,
            samples: 0,
        }
    }

    pub fn clear(&mut self) {
        self.entity.clear();
        self.relation.clear();
        self.loss_sum = 0.0;
        self.samples = 0;
    }

    pub fn add(&mut self, g: &GradientBundle) {
        let d = self.dim;
        {
            let row = self.entity.row_mut(g.subject);
            row[..d].iter_mut().zip(&g.subject_emb).for_each(|(a, b)| *a += b);
            row[d] += g.bias_subject;
        }
        {
            let row = self.entity.row_mut(g.object);
            row[..d].iter_mut().zip(&g.object_emb).for_each(|(a, b)| *a += b);
            row[d + 1] += g.bias_object;
        }
        let row = self.relation.row_mut(g.relation);
        row[..d].iter_mut().zip(&g.rel_diag).for_each(|(a, b)| *a += b);
        row[d..].iter_mut().zip(&g.rel_trans).for_each(|(a, b)| *a += b);
        self.loss_sum += g.loss;
        self.samples += 1;
    }

    /// Add the gradients of one positive and its negatives (see [`Batch::group_into`]).
    /// Ids must be in range.
    pub fn add_group(
        &mut self,
        params: &ModelParams,
        s: usize,
        r: usize,
        samples: &[(usize, f64)],
        ws: &mut GroupScratch,
    ) {
        let d = self.dim;
        let entity = &mut self.entity;
        let loss = params.group_gradients(s, r, samples, ws, |o, g_obj, g_bias| {
            let row = entity.row_mut(o);
            row[..d].iter_mut().zip(g_obj).for_each(|(a, b)| *a += b);
            row[d + 1] += g_bias;
        });
        let row = self.entity.row_mut(s);
        row[..d].iter_mut().zip(&ws.subject_emb).for_each(|(a, b)| *a += b);
        row[d] += ws.bias_subject;
        let row = self.relation.row_mut(r);
        row[..d].iter_mut().zip(&ws.rel_diag).for_each(|(a, b)| *a += b);
        row[d..].iter_mut().zip(&ws.rel_trans).for_each(|(a, b)| *a += b);
        self.loss_sum += loss;
        self.samples += samples.len();
    }

    fn merge(&mut self, other: &BatchGradients) {
        self.entity.merge(&other.entity);
        self.relation.merge(&other.relation);
        self.loss_sum += other.loss_sum;
        self.samples += other.samples;
    }

    /// Divide by the number of samples, turning sums into means.
    pub fn into_mean(mut self) -> Self {
        if self.samples > 0 {
            let s = 1.0 / self.samples as f64;
            self.entity.scale(s);
            self.relation.scale(s);
        }
        self
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn loss_sum(&self) -> f64 {
        self.loss_sum
    }

    pub fn entity_embedding(&self, e: usize) -> Option<&[f64]> {
        self.entity.get(e).map(|r| &r[..self.dim])
    }

    pub fn bias_subject(&self, e: usize) -> Option<f64> {
        self.entity.get(e).map(|r| r[self.dim])
    }

    pub fn bias_object(&self, e: usize) -> Option<f64> {
        self.entity.get(e).map(|r| r[self.dim + 1])
    }

    pub fn rel_diag(&self, r: usize) -> Option<&[f64]> {
        self.relation.get(r).map(|row| &row[..self.dim])
    }

    pub fn rel_trans(&self, r: usize) -> Option<&[f64]> {
        self.relation.get(r).map(|row| &row[self.dim..])
    }
}

/// Gradient of the mean batch loss.
pub fn batch_gradients(batch: &Batch, params: &ModelParams) -> Result<BatchGradients> {
    for (t, _) in batch.samples() {
        params.check_ids(t.subject, t.relation, t.object)?;
    }
    let mut acc = BatchGradients::new(params);
    let mut ws = GroupScratch::new(params.dim);
    let mut group = Vec::new();
    for (i, p) in batch.positives.iter().enumerate() {
        batch.group_into(i, &mut group);
        acc.add_group(params, p.subject, p.relation, &group, &mut ws);
    }
    Ok(acc.into_mean())
}

/// One optimizer step: plain SGD for Euclidean parameters and RSGD
/// (`exp_θ(-η ∇/λ_θ²)`) for ball parameters.
pub fn apply_update(params: &mut ModelParams, grads: &BatchGradients, lr: f64) {
    let d = params.dim;
    let ball = params.geometry.ball();
    let sgd = |x: &mut [f64], g: &[f64]| x.iter_mut().zip(g).for_each(|(a, b)| *a -= lr * b);
    for (e, row) in grads.entity.iter() {
        match &ball {
            Some(b) => b.rsgd_step(params.entity_mut(e), &row[..d], lr),
            None => sgd(params.entity_mut(e), &row[..d]),
        }
        params.bias_subject[e] -= lr * row[d];
        params.bias_object[e] -= lr * row[d + 1];
    }
    for (r, row) in grads.relation.iter() {
        sgd(params.diag_mut(r), &row[..d]);
        match &ball {
            Some(b) => b.rsgd_step(params.translation_mut(r), &row[d..], lr),
            None => sgd(params.translation_mut(r), &row[d..]),
        }
    }
}

/// One evaluation point of the training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub split: &'static str,
    pub metrics: Metrics,
    /// Mean training loss over the epoch's batches.
    pub mean_loss: f64,
}

impl TraceRow {
    pub const TSV_HEADER: &'static str = "epoch\tsplit\tmrr\thits@1\thits@3\thits@10\tmean_loss";

    pub fn to_tsv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch, self.split, m.mrr, m.hits1, m.hits3, m.hits10, self.mean_loss
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub last: ModelParams,
    /// Parameters at the evaluation point with the best validation MRR
    /// (the last epoch if there is no validation split).
    pub best: ModelParams,
    pub best_epoch: usize,
    pub best_valid: Option<Metrics>,
    pub trace: Vec<TraceRow>,
}

struct Shard {
    rng: ChaCha8Rng,
    grads: BatchGradients,
    ws: GroupScratch,
    group: Vec<(usize, f64)>,
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for `(seed, epoch, stream)`; stream 0 shuffles, stream `1 + j` feeds shard `j`.
fn epoch_rng(seed: u64, epoch: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(epoch as u64)));
    rng.set_stream(stream);
    rng
}

/// The parameters [`train`] starts from for this graph and configuration.
pub fn initial_params(kg: &KnowledgeGraph, config: &TrainConfig) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ModelParams::init(
        config.geometry,
        kg.n_entities(),
        2 * kg.n_relations(),
        config.dim,
        config.init_scale,
        &mut rng,
    )
}

/// Train a model on `kg.train` and track validation MRR.
///
/// `on_eval` sees every trace row as it is produced.
pub fn train(kg: &KnowledgeGraph, config: &TrainConfig, on_eval: &mut dyn FnMut(&TraceRow)) -> Result<TrainOutcome> {
    let n_base = kg.n_relations();
    let n_e = kg.n_entities();
    let train_aug = augment_reciprocal(&kg.train, n_base);
    config.validate(train_aug.len())?;
    if n_e < 2 {
        return Err(Error::InvalidArgument("need at least two entities".into()));
    }

    let mut params = initial_params(kg, config);
    let mut probe_rng = epoch_rng(config.seed, 0, 0);
    let truth = TruthIndex::from_graph(kg);
    let train_probe: Vec<Triple> = if config.train_eval_limit > 0 && kg.train.len() > config.train_eval_limit {
        let mut picks = index::sample(&mut probe_rng, kg.train.len(), config.train_eval_limit).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| kg.train[i]).collect()
    } else {
        kg.train.clone()
    };

    let mut order: Vec<usize> = (0..train_aug.len()).collect();
    let mut shards: Vec<Shard> = (0..config.workers)
        .map(|_| Shard {
            rng: ChaCha8Rng::seed_from_u64(0),
            grads: BatchGradients::new(&params),
            ws: GroupScratch::new(config.dim),
            group: Vec::new(),
        })
        .collect();
    let mut total = BatchGradients::new(&params);
    let mut trace = Vec::new();
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_valid: Option<Metrics> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut epoch_rng(config.seed, epoch, 0));
        for (j, sh) in shards.iter_mut().enumerate() {
            sh.rng = epoch_rng(config.seed, epoch, 1 + j as u64);
        }
        let (mut loss_sum, mut n_batches) = (0.0, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let positives: Vec<Triple> = chunk.iter().map(|&i| train_aug[i]).collect();
            let per_shard = positives.len().div_ceil(config.workers);
            let work = |(sh, part): (&mut Shard, &[Triple])| {
                sh.grads.clear();
                let batch = Batch::sample(part, config.negatives, n_e, &mut sh.rng);
                for (i, p) in batch.positives.iter().enumerate() {
                    batch.group_into(i, &mut sh.group);
                    sh.grads
                        .add_group(&params, p.subject, p.relation, &sh.group, &mut sh.ws);
                }
            };
            if config.workers == 1 {
                work((&mut shards[0], &positives));
            } else {
                let parts: Vec<&[Triple]> = positives.chunks(per_shard).collect();
                for sh in shards.iter_mut().skip(parts.len()) {
                    sh.grads.clear();
                }
                shards.par_iter_mut().zip(parts.par_iter().copied()).for_each(work);
            }
            total.clear();
            for sh in &shards {
                total.merge(&sh.grads);
            }
            let batch_loss = total.loss_sum() / total.samples() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss;
            n_batches += 1;
            let mean = std::mem::replace(&mut total, BatchGradients::new(&params)).into_mean();
            apply_update(&mut params, &mean, config.learning_rate);
            total = mean;
        }
        debug_assert!(params.is_feasible(), "ball parameter left the ball in epoch {epoch}");

        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let mean_loss = loss_sum / n_batches as f64;
            let tr = evaluate(&params, &train_probe, &truth, n_base, config.ties)?;
            let row = TraceRow {
                epoch,
                split: "train",
                metrics: tr.overall,
                mean_loss,
            };
            on_eval(&row);
            trace.push(row);
            if !kg.valid.is_empty() {
                let va = evaluate(&params, &kg.valid, &truth, n_base, config.ties)?;
                let row = TraceRow {
                    epoch,
                    split: "valid",
                    metrics: va.overall,
                    mean_loss,
                };
                on_eval(&row);
                trace.push(row);
                if best_valid.is_none_or(|b| va.overall.mrr > b.mrr) {
                    best_valid = Some(va.overall);
                    best = params.clone();
                    best_epoch = epoch;
                }
            }
        }
    }
    if best_valid.is_none() {
        best = params.clone();
        best_epoch = config.epochs;
    }
    Ok(TrainOutcome {
        last: params,
        best,
        best_epoch,
        best_valid,
        trace,
    })
}
