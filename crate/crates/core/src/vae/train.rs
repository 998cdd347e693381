use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{elbo_graph, Result, VaeError, VaeModel};
use crate::motion::{MotionFrame, FRAME_DIM};
use crate::tensornet::{AdamState, Graph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub beta: f64,
    /// Predictions per training window.
    pub window: usize,
    /// Epochs of the supervised, transition and autoregressive stages.
    pub stages: [usize; 3],
    pub warmup_epochs: usize,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 3e-3,
            window: 30,
            stages: [50, 150, 200],
            warmup_epochs: 10,
            lr_start: 2e-6,
            lr_peak: 2e-5,
            lr_decay: 0.99,
            batch_size: 512,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Short schedule for single-machine runs.
    pub fn desk() -> Self {
        TrainConfig {
            stages: [5, 15, 20],
            batch_size: 64,
            ..Self::default()
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VaeError::Config(m.to_string()));
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.window == 0 || self.batch_size == 0 {
            return bad("window and batch_size must be positive");
        }
        if !(self.lr_start > 0.0 && self.lr_peak > 0.0 && self.lr_decay > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }

    /// Stage index (0, 1, 2) for a given epoch.
    pub fn stage(&self, epoch: f64) -> usize {
        let [s1, s2, _] = self.stages;
        if epoch < s1 as f64 {
            0
        } else if epoch < (s1 + s2) as f64 {
            1
        } else {
            2
        }
    }

    /// Probability of conditioning on the ground truth.
    pub fn sampling_prob(&self, epoch: f64) -> f64 {
        let [s1, s2, _] = self.stages;
        let (s1, s2) = (s1 as f64, s2 as f64);
        if epoch <= s1 {
            1.0
        } else if epoch >= s1 + s2 {
            0.0
        } else {
            1.0 - (epoch - s1) / s2
        }
    }

    pub fn learning_rate(&self, epoch: f64) -> f64 {
        let w = self.warmup_epochs as f64;
        if epoch < w {
            self.lr_start + (self.lr_peak - self.lr_start) * epoch / w
        } else {
            self.lr_peak * self.lr_decay.powf(epoch - w)
        }
    }
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub stage: usize,
    pub p: f64,
    pub lr: f64,
    pub loss_reconst: f64,
    pub loss_kl: f64,
}

fn windows(dataset: &[Vec<Vec<f64>>], len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (s, seq) in dataset.iter().enumerate() {
        let mut start = 0;
        while start + len < seq.len() {
            out.push((s, start));
            start += len;
        }
    }
    out
}

fn rows(frames: &[&[f64]]) -> Array2<f64> {
    let mut a = Array2::zeros((frames.len(), FRAME_DIM));
    for (i, f) in frames.iter().enumerate() {
        a.row_mut(i).assign(&ndarray::ArrayView1::from(*f));
    }
    a
}

/// Fit normalization statistics and train with scheduled sampling.
///
/// Sequences are cut into non-overlapping windows of `window + 1` frames.
/// Within a batch of windows, every step encodes `(x_t, condition)`,
/// decodes, and takes one Adam step; the next condition is the ground
/// truth with probability `p`, otherwise the detached prediction.
pub fn train(
    model: &mut VaeModel,
    dataset: &[Vec<MotionFrame>],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    model.normalizer = super::Normalizer::fit(dataset.iter().flatten());
    let data: Vec<Vec<Vec<f64>>> = dataset
        .iter()
        .map(|s| {
            s.iter()
                .map(|f| model.normalizer.normalize(f.as_slice()))
                .collect()
        })
        .collect();
    let mut wins = windows(&data, cfg.window);
    if wins.is_empty() {
        return Err(VaeError::Dataset(format!(
            "no sequence has the {} frames needed for one window",
            cfg.window + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&model.params);
    let latent = model.config.latent_dim;
    let mut history = Vec::new();
    let mut step = 0usize;

    for epoch in 0..cfg.total_epochs() {
        let e = epoch as f64;
        let (p, lr) = (cfg.sampling_prob(e), cfg.learning_rate(e));
        wins.shuffle(&mut rng);
        let (mut sum_rec, mut sum_kl, mut count) = (0.0, 0.0, 0usize);
        for batch in wins.chunks(cfg.batch_size) {
            let b = batch.len();
            let mut cond = rows(
                &batch
                    .iter()
                    .map(|&(s, t)| data[s][t].as_slice())
                    .collect::<Vec<_>>(),
            );
            for k in 1..=cfg.window {
                let target = rows(
                    &batch
                        .iter()
                        .map(|&(s, t)| data[s][t + k].as_slice())
                        .collect::<Vec<_>>(),
                );
                let eta = Array2::from_shape_simple_fn((b, latent), || rng.sample(StandardNormal));
                let (grads, pred, rec, kl) = {
                    let mut g = Graph::new(&model.params);
                    let xt = g.input(target.clone());
                    let xp = g.input(cond.clone());
                    let enc = model.encode_graph(&mut g, xt, xp)?;
                    let ev = g.input(eta);
                    let noise = g.mul(enc.sigma, ev)?;
                    let z = g.add(enc.mu, noise)?;
                    let (pred, _) = model.decode_graph(&mut g, z, xp)?;
                    let (total, rec, kl) = elbo_graph(&mut g, xt, pred, &enc, cfg.beta)?;
                    let (rec, kl) = (g.scalar(rec), g.scalar(kl));
                    if !(rec.is_finite() && kl.is_finite()) {
                        return Err(VaeError::NonFiniteLoss {
                            epoch,
                            step,
                            reconst: rec,
                            kl,
                        });
                    }
                    (g.backward(total)?, g.value(pred).clone(), rec, kl)
                };
                model.params.zero_grad();
                model.params.accumulate(&grads);
                adam.step(&mut model.params, lr);
                step += 1;
                sum_rec += rec;
                sum_kl += kl;
                count += 1;
                for i in 0..b {
                    if rng.random::<f64>() >= p {
                        cond.row_mut(i).assign(&pred.row(i));
                    } else {
                        cond.row_mut(i).assign(&target.row(i));
                    }
                }
            }
        }
        let stats = EpochStats {
            epoch,
            stage: cfg.stage(e) + 1,
            p,
            lr,
            loss_reconst: sum_rec / count as f64,
            loss_kl: sum_kl / count as f64,
        };
        log::info!(
            "epoch {epoch} stage {} p={p:.3} lr={lr:.3e} reconst={:.5} kl={:.4}",
            stats.stage,
            stats.loss_reconst,
            stats.loss_kl
        );
        history.push(stats);
        model.trained_epochs += 1;
    }
    Ok(history)
}

/// Teacher-forced reconstruction error in normalized units: every frame is
/// encoded against its ground-truth predecessor and decoded from the mean.
pub fn reconstruction_mse(model: &VaeModel, dataset: &[Vec<MotionFrame>]) -> Result<f64> {
    let (mut total, mut n) = (0.0, 0usize);
    for seq in dataset {
        if seq.len() < 2 {
            continue;
        }
        let norm: Vec<Vec<f64>> = seq
            .iter()
            .map(|f| model.normalizer.normalize(f.as_slice()))
            .collect();
        let prev: Vec<&[f64]> = norm[..norm.len() - 1].iter().map(|v| v.as_slice()).collect();
        let cur: Vec<&[f64]> = norm[1..].iter().map(|v| v.as_slice()).collect();
        let mut g = Graph::new(&model.params);
        let xt = g.input(rows(&cur));
        let xp = g.input(rows(&prev));
        let enc = model.encode_graph(&mut g, xt, xp)?;
        let (pred, _) = model.decode_graph(&mut g, enc.mu, xp)?;
        let diff = g.value(pred) - g.value(xt);
        total += diff.mapv(|d| d * d).sum();
        n += diff.len();
    }
    if n == 0 {
        return Err(VaeError::Dataset("no sequence with two frames".into()));
    }
    Ok(total / n as f64)
}

/// Write the loss history as CSV.
pub fn write_history(path: impl AsRef<std::path::Path>, history: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| VaeError::Format(e.to_string()))?;
    for h in history {
        w.serialize(h).map_err(|e| VaeError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
