//! Siamese training of the embedding network: shuffled mini-batches, Adam
//! over analytically derived gradients, best-by-validation-loss snapshots,
//! and the finite-difference check that keeps those gradients honest.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::compute_auc;
use crate::embed::{
    backward, forward, siamese_loss_from_sims, EmbedError, EmbeddingModel, ModelGrads,
    PreparedGraph,
};
use crate::rng::sub_rng;

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_pairs: usize,
    pub epochs: usize,
    pub embed_size: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.001,
            batch_pairs: 100,
            epochs: 50,
            embed_size: 64,
            depth: 1,
            seed: 0,
        }
    }
}

/// A labeled pair of graph indices; y is +1 (similar) or -1 (dissimilar).
pub type PairIdx = (usize, usize, i8);

#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub log: Vec<EpochLog>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Loss and parameter gradients over one mini-batch. Each distinct graph is
/// embedded once; pair gradients fan into the shared parameter set.
fn batch_step(
    model: &EmbeddingModel,
    graphs: &[PreparedGraph],
    batch: &[PairIdx],
    grads: Option<&mut ModelGrads>,
) -> Result<f64, EmbedError> {
    if batch.is_empty() {
        return Err(EmbedError::EmptyBatch);
    }
    let mut unique: Vec<usize> = batch.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    unique.sort_unstable();
    unique.dedup();
    let local_of = |g: usize| unique.binary_search(&g).expect("graph id in unique set");

    let caches: Vec<_> = unique.iter().map(|&g| forward(&graphs[g], model)).collect();
    let sims: Vec<(f64, i8)> = batch
        .iter()
        .map(|&(a, b, y)| {
            let (ca, cb) = (&caches[local_of(a)], &caches[local_of(b)]);
            let dot = ca.mu.iter().zip(&cb.mu).map(|(x, y)| x * y).sum::<f64>();
            (dot, y)
        })
        .collect();
    let loss = siamese_loss_from_sims(&sims)?;

    if let Some(grads) = grads {
        let n_pos = sims.iter().filter(|(_, y)| *y > 0).count();
        let n_neg = sims.len() - n_pos;
        let mut d_mu = vec![vec![0.0; model.p]; unique.len()];
        for &(a, b, y) in batch {
            let w = if y > 0 {
                -1.0 / n_pos as f64
            } else {
                1.0 / n_neg as f64
            };
            let (la, lb) = (local_of(a), local_of(b));
            for i in 0..model.p {
                d_mu[la][i] += w * caches[lb].mu[i];
                d_mu[lb][i] += w * caches[la].mu[i];
            }
        }
        for (l, &g) in unique.iter().enumerate() {
            backward(&graphs[g], model, &caches[l], &d_mu[l], grads);
        }
    }
    Ok(loss)
}

fn eval_pairs(
    model: &EmbeddingModel,
    graphs: &[PreparedGraph],
    pairs: &[PairIdx],
) -> (f64, f64) {
    let mut unique: Vec<usize> = pairs.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    unique.sort_unstable();
    unique.dedup();
    let mus: Vec<Vec<f64>> = unique.iter().map(|&g| forward(&graphs[g], model).mu).collect();
    let local_of = |g: usize| unique.binary_search(&g).unwrap();
    let sims: Vec<(f64, i8)> = pairs
        .iter()
        .map(|&(a, b, y)| {
            let dot =
                mus[local_of(a)].iter().zip(&mus[local_of(b)]).map(|(x, y)| x * y).sum::<f64>();
            (dot, y)
        })
        .collect();
    let loss = siamese_loss_from_sims(&sims).unwrap_or(f64::NAN);
    let scores: Vec<f64> = sims.iter().map(|(s, _)| *s).collect();
    let labels: Vec<i8> = sims.iter().map(|(_, y)| *y).collect();
    let auc = compute_auc(&scores, &labels).unwrap_or(f64::NAN);
    (loss, auc)
}

/// Trains from a fresh seeded initialization. Validation pairs drive the
/// best-model snapshot; when empty, the training pairs are used for the
/// validation metrics instead.
pub fn train(
    graphs: &[PreparedGraph],
    train_pairs: &[PairIdx],
    val_pairs: &[PairIdx],
    cfg: &TrainingConfig,
) -> Result<TrainOutcome, EmbedError> {
    if train_pairs.is_empty() {
        return Err(EmbedError::EmptyBatch);
    }
    let mut model = EmbeddingModel::init(cfg.embed_size, cfg.depth, cfg.seed);
    let mut log = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { model, log });
    }
    let val = if val_pairs.is_empty() { train_pairs } else { val_pairs };

    let mut shuffle_rng = sub_rng(cfg.seed, "shuffle");
    let mut adam = Adam::new(model.n_params());
    let mut params = model.flatten();
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_pairs.max(1)) {
            let batch: Vec<PairIdx> = chunk.iter().map(|&i| train_pairs[i]).collect();
            let mut grads = ModelGrads::zeros(&model);
            let loss = batch_step(&model, graphs, &batch, Some(&mut grads))?;
            if !loss.is_finite() {
                return Err(EmbedError::DivergedLoss { epoch, loss });
            }
            adam.step(&mut params, &grads.flatten(), cfg.learning_rate);
            model.assign_flat(&params);
            epoch_loss += loss;
            n_batches += 1;
        }
        let train_loss = epoch_loss / n_batches as f64;
        if !train_loss.is_finite() {
            return Err(EmbedError::DivergedLoss { epoch, loss: train_loss });
        }
        let (val_loss, val_auc) = eval_pairs(&model, graphs, val);
        log.push(EpochLog { epoch, train_loss, val_loss, val_auc });
        let better = match &best {
            None => true,
            Some((best_loss, _)) => val_loss < *best_loss,
        };
        if better {
            best = Some((val_loss, params.clone()));
        }
    }
    if let Some((_, best_params)) = best {
        model.assign_flat(&best_params);
    }
    Ok(TrainOutcome { model, log })
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares analytic gradients against central finite differences on a
/// random subsample of at least `min_coords` parameter coordinates.
/// Coordinates where both sides vanish are counted as skipped, not failed.
pub fn gradient_check(
    model: &EmbeddingModel,
    graphs: &[PreparedGraph],
    batch: &[PairIdx],
    h: f64,
    min_coords: usize,
    seed: u64,
) -> Result<GradCheck, EmbedError> {
    let mut grads = ModelGrads::zeros(model);
    batch_step(model, graphs, batch, Some(&mut grads))?;
    let analytic = grads.flatten();

    let n = model.n_params();
    let mut rng = sub_rng(seed, "gradcheck");
    let n_coords = min_coords.min(n);
    let mut coords: Vec<usize> = Vec::with_capacity(n_coords);
    while coords.len() < n_coords {
        let c = rng.random_range(0..n);
        if !coords.contains(&c) {
            coords.push(c);
        }
    }

    let mut probe = model.clone();
    let mut params = model.flatten();
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for &c in &coords {
        let orig = params[c];
        params[c] = orig + h;
        probe.assign_flat(&params);
        let loss_plus = batch_step(&probe, graphs, batch, None)?;
        params[c] = orig - h;
        probe.assign_flat(&params);
        let loss_minus = batch_step(&probe, graphs, batch, None)?;
        params[c] = orig;
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        // error relative to the finite-difference reference, so a gradient
        // scaled by k reads as |k - 1|. Coordinates below the cancellation
        // noise floor of the central difference are skipped, not failed.
        if analytic[c].abs().max(numeric.abs()) < 1e-6 {
            skipped += 1;
            continue;
        }
        let rel = (analytic[c] - numeric).abs() / numeric.abs();
        max_rel = max_rel.max(rel);
        checked += 1;
    }
    probe.assign_flat(&params);
    Ok(GradCheck { max_rel_error: max_rel, checked, skipped })
}
