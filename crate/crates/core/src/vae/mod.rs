//! Autoregressive beta-VAE over motion frames with a mixture-of-experts decoder.
//!
//! The encoder maps `[x_t, x_prev]` to a diagonal Gaussian over a 40-dim
//! latent. The decoder expands `z` to 240 dims, then a softmax gate and six
//! expert networks each read `[z_exp, x_prev]`; the prediction is the
//! gate-weighted sum of the expert outputs. Frames are standardized per
//! dimension with statistics stored in the model.

mod augment;
mod train;

pub use augment::{augment_sequence, refine_frame, AugmentConfig};
pub use train::{reconstruction_mse, train, write_history, EpochStats, TrainConfig};

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{MotionError, MotionFrame, FRAME_DIM};
use crate::tensornet::{Graph, ParamStore, ParamsFile, TensorError, Var};

pub const MODEL_FORMAT: &str = "kinaug-vae";
pub const MODEL_VERSION: u32 = 1;

const LOG_SIGMA_MIN: f64 = -13.815_510_557_964_274; // ln 1e-6
const LOG_SIGMA_MAX: f64 = 6.907_755_278_982_137; // ln 1e3
const STD_FLOOR: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum VaeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("sigma must be positive (entry {0})")]
    NonPositiveSigma(usize),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("non-finite loss at epoch {epoch}, step {step}: reconst={reconst}, kl={kl}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        reconst: f64,
        kl: f64,
    },
    #[error("model has not been trained")]
    Untrained,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VaeError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub expanded_dim: usize,
    pub hidden: usize,
    pub n_experts: usize,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            input_dim: FRAME_DIM,
            latent_dim: 40,
            expanded_dim: 240,
            hidden: 256,
            n_experts: 6,
            seed: 0,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim != FRAME_DIM {
            return Err(VaeError::Config(format!(
                "input_dim must be {FRAME_DIM}, got {}",
                self.input_dim
            )));
        }
        for (name, v) in [
            ("latent_dim", self.latent_dim),
            ("expanded_dim", self.expanded_dim),
            ("hidden", self.hidden),
            ("n_experts", self.n_experts),
        ] {
            if v == 0 {
                return Err(VaeError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Per-dimension standardization of motion frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Statistics over every frame of every sequence. Standard deviations
    /// are floored so near-constant dimensions stay well scaled.
    pub fn fit<'a>(frames: impl Iterator<Item = &'a MotionFrame>) -> Self {
        let mut sum = vec![0.0; FRAME_DIM];
        let mut sq = vec![0.0; FRAME_DIM];
        let mut n = 0usize;
        for f in frames {
            for (i, v) in f.as_slice().iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Self::identity(FRAME_DIM);
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(STD_FLOOR))
            .collect();
        Normalizer { mean, std }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Graph nodes produced by the encoder.
#[derive(Debug, Clone, Copy)]
pub struct EncodedVars {
    pub mu: Var,
    pub log_sigma: Var,
    pub sigma: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub config: VaeConfig,
    pub params: ParamStore,
    pub normalizer: Normalizer,
    /// Number of completed training epochs; zero means untrained.
    pub trained_epochs: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: VaeConfig,
    normalizer: Normalizer,
    trained_epochs: usize,
    params: ParamsFile,
}

impl VaeModel {
    pub fn new(config: VaeConfig) -> Result<Self> {
        config.validate()?;
        let (d, h, l, e) = (
            config.input_dim,
            config.hidden,
            config.latent_dim,
            config.expanded_dim,
        );
        let mut p = ParamStore::new();
        let mut seed = config.seed;
        let mut layer = |p: &mut ParamStore, name: &str, i: usize, o: usize| -> Result<()> {
            seed = seed.wrapping_add(1);
            p.add_linear(name, i, o, seed)?;
            Ok(())
        };
        layer(&mut p, "enc.fc1", 2 * d, h)?;
        layer(&mut p, "enc.fc2", h, h)?;
        layer(&mut p, "enc.fc3", h, h)?;
        layer(&mut p, "enc.fc4", h, h)?;
        layer(&mut p, "enc.mu", h, l)?;
        layer(&mut p, "enc.log_sigma", h, l)?;
        layer(&mut p, "dec.expand", l, e)?;
        layer(&mut p, "gate.fc1", e + d, h)?;
        layer(&mut p, "gate.fc2", h, config.n_experts)?;
        for k in 0..config.n_experts {
            layer(&mut p, &format!("expert{k}.fc1"), e + d, h)?;
            layer(&mut p, &format!("expert{k}.fc2"), h, h)?;
            layer(&mut p, &format!("expert{k}.out"), h, d)?;
        }
        Ok(VaeModel {
            normalizer: Normalizer::identity(d),
            config,
            params: p,
            trained_epochs: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    fn dense(&self, g: &mut Graph, name: &str, x: Var) -> Result<Var> {
        let w = g.param_by_name(&format!("{name}.w"))?;
        let b = g.param_by_name(&format!("{name}.b"))?;
        Ok(g.affine(x, w, b)?)
    }

    fn dense_elu(&self, g: &mut Graph, name: &str, x: Var) -> Result<Var> {
        let y = self.dense(g, name, x)?;
        Ok(g.elu(y)?)
    }

    /// Encoder on normalized frames (`n x 240` each).
    pub fn encode_graph(&self, g: &mut Graph, x_t: Var, x_prev: Var) -> Result<EncodedVars> {
        let x = g.concat(x_t, x_prev)?;
        let h1 = self.dense_elu(g, "enc.fc1", x)?;
        let r1 = self.dense_elu(g, "enc.fc2", h1)?;
        let h2 = g.add(h1, r1)?;
        let h3 = self.dense_elu(g, "enc.fc3", h2)?;
        let r2 = self.dense_elu(g, "enc.fc4", h3)?;
        let h4 = g.add(h3, r2)?;
        let mu = self.dense(g, "enc.mu", h4)?;
        let raw = self.dense(g, "enc.log_sigma", h4)?;
        let log_sigma = g.clamp(raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX)?;
        let sigma = g.exp(log_sigma)?;
        Ok(EncodedVars {
            mu,
            log_sigma,
            sigma,
        })
    }

    /// Decoder on a latent batch and normalized condition frames. Returns
    /// the prediction and the gate weights.
    pub fn decode_graph(&self, g: &mut Graph, z: Var, x_prev: Var) -> Result<(Var, Var)> {
        let z_exp = self.dense_elu(g, "dec.expand", z)?;
        let input = g.concat(z_exp, x_prev)?;
        let gh = self.dense_elu(g, "gate.fc1", input)?;
        let logits = self.dense(g, "gate.fc2", gh)?;
        let gate = g.softmax(logits)?;
        let mut out: Option<Var> = None;
        for k in 0..self.config.n_experts {
            let h1 = self.dense_elu(g, &format!("expert{k}.fc1"), input)?;
            let r = self.dense_elu(g, &format!("expert{k}.fc2"), h1)?;
            let h2 = g.add(h1, r)?;
            let y = self.dense(g, &format!("expert{k}.out"), h2)?;
            let weighted = g.column_scale(y, gate, k)?;
            out = Some(match out {
                None => weighted,
                Some(acc) => g.add(acc, weighted)?,
            });
        }
        Ok((out.expect("n_experts > 0"), gate))
    }

    fn check_frame(x: &[f64]) -> Result<()> {
        if x.len() != FRAME_DIM {
            return Err(VaeError::Dim {
                expected: FRAME_DIM,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn norm_row(&self, x: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((1, x.len()), self.normalizer.normalize(x)).expect("row")
    }

    /// Latent mean and standard deviation for a raw frame pair.
    pub fn encode(&self, x_t: &[f64], x_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Self::check_frame(x_t)?;
        Self::check_frame(x_prev)?;
        let mut g = Graph::new(&self.params);
        let a = g.input(self.norm_row(x_t));
        let b = g.input(self.norm_row(x_prev));
        let enc = self.encode_graph(&mut g, a, b)?;
        Ok((
            g.value(enc.mu).iter().copied().collect(),
            g.value(enc.sigma).iter().copied().collect(),
        ))
    }

    /// Decode a batch of latents (one per row) against one raw condition frame.
    /// Returns raw frames and gate weights per row.
    pub fn decode_batch(
        &self,
        z: &Array2<f64>,
        x_prev: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Array2<f64>)> {
        Self::check_frame(x_prev)?;
        if z.ncols() != self.config.latent_dim {
            return Err(VaeError::Dim {
                expected: self.config.latent_dim,
                got: z.ncols(),
            });
        }
        let n = z.nrows();
        let cond = self.norm_row(x_prev);
        let cond = Array2::from_shape_fn((n, FRAME_DIM), |(_, j)| cond[[0, j]]);
        let mut g = Graph::new(&self.params);
        let zv = g.input(z.clone());
        let cv = g.input(cond);
        let (out, gate) = self.decode_graph(&mut g, zv, cv)?;
        let frames = g
            .value(out)
            .rows()
            .into_iter()
            .map(|r| self.normalizer.denormalize(r.as_slice().expect("contiguous")))
            .collect();
        Ok((frames, g.value(gate).clone()))
    }

    pub fn decode(&self, z: &[f64], x_prev: &[f64]) -> Result<Vec<f64>> {
        let z = Array2::from_shape_vec((1, z.len()), z.to_vec()).expect("row");
        let (mut frames, _) = self.decode_batch(&z, x_prev)?;
        Ok(frames.remove(0))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            normalizer: self.normalizer.clone(),
            trained_epochs: self.trained_epochs,
            params: self.params.to_file(),
        };
        let text = serde_json::to_string(&file).map_err(|e| VaeError::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| VaeError::Format(format!("{}: {e}", path.display())))?;
        if file.format != MODEL_FORMAT {
            return Err(VaeError::Format(format!("unexpected format tag '{}'", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(VaeError::Format(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        file.config.validate()?;
        let params = ParamStore::from_file(file.params)?;
        let reference = VaeModel::new(file.config.clone())?;
        for ((_, na, ta), (_, nb, tb)) in params.iter().zip(reference.params.iter()) {
            if na != nb || ta.value.dim() != tb.value.dim() {
                return Err(VaeError::Format(format!(
                    "parameter '{na}' does not match the configured architecture"
                )));
            }
        }
        if params.len() != reference.params.len() {
            return Err(VaeError::Format("parameter list does not match architecture".into()));
        }
        if file.normalizer.mean.len() != FRAME_DIM || file.normalizer.std.len() != FRAME_DIM {
            return Err(VaeError::Format("normalizer has wrong dimension".into()));
        }
        log::info!("loaded model with {} parameters", params.param_count());
        Ok(VaeModel {
            config: file.config,
            params,
            normalizer: file.normalizer,
            trained_epochs: file.trained_epochs,
        })
    }
}

/// `z = mu + sigma * eta` with standard-normal `eta`.
pub fn reparameterize<R: Rng>(mu: &[f64], sigma: &[f64], rng: &mut R) -> Vec<f64> {
    mu.iter()
        .zip(sigma)
        .map(|(m, s)| {
            let eta: f64 = rng.sample(StandardNormal);
            m + s * eta
        })
        .collect()
}

/// `0.5 * sum(mu^2 + sigma^2 - 1 - 2 ln sigma)`.
pub fn kl_divergence(mu: &[f64], sigma: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (i, (m, s)) in mu.iter().zip(sigma).enumerate() {
        if *s <= 0.0 {
            return Err(VaeError::NonPositiveSigma(i));
        }
        kl += m * m + s * s - 1.0 - 2.0 * s.ln();
    }
    Ok(0.5 * kl)
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Reconstruction MSE plus `beta` times the KL term.
pub fn elbo_loss(x_true: &[f64], x_pred: &[f64], mu: &[f64], sigma: &[f64], beta: f64) -> Result<f64> {
    if x_true.len() != x_pred.len() {
        return Err(VaeError::Dim {
            expected: x_true.len(),
            got: x_pred.len(),
        });
    }
    if mu.len() != sigma.len() {
        return Err(VaeError::Dim {
            expected: mu.len(),
            got: sigma.len(),
        });
    }
    Ok(mse(x_true, x_pred) + beta * kl_divergence(mu, sigma)?)
}

/// Graph form of the loss for a batch: mean squared error over all entries
/// plus `beta` times the batch-mean KL. Returns `(total, reconst, kl)`.
pub fn elbo_graph(
    g: &mut Graph,
    x_true: Var,
    x_pred: Var,
    enc: &EncodedVars,
    beta: f64,
) -> Result<(Var, Var, Var)> {
    let n = g.shape(enc.mu).0 as f64;
    let diff = g.sub(x_pred, x_true)?;
    let sq = g.square(diff)?;
    let reconst = g.mean_all(sq)?;
    let mu2 = g.square(enc.mu)?;
    let s2 = g.square(enc.sigma)?;
    let a = g.add(mu2, s2)?;
    let two_log = g.mul_scalar(enc.log_sigma, 2.0)?;
    let b = g.sub(a, two_log)?;
    let c = g.add_scalar(b, -1.0)?;
    let sum = g.sum_all(c)?;
    let kl = g.mul_scalar(sum, 0.5 / n)?;
    let weighted = g.mul_scalar(kl, beta)?;
    let total = g.add(reconst, weighted)?;
    Ok((total, reconst, kl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::grad_check_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_config() -> VaeConfig {
        VaeConfig {
            latent_dim: 4,
            hidden: 8,
            ..VaeConfig::default()
        }
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..FRAME_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn encode_dims_and_positive_sigma() {
        let m = VaeModel::new(VaeConfig {
            hidden: 32,
            ..VaeConfig::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mu, s) = m.encode(&random_frame(&mut rng), &random_frame(&mut rng)).unwrap();
        assert_eq!((mu.len(), s.len()), (40, 40));
        assert!(mu.iter().all(|v| v.is_finite()));
        for _ in 0..1000 {
            let (_, s) = m
                .encode(&random_frame(&mut rng), &random_frame(&mut rng))
                .unwrap();
            assert!(s.iter().all(|v| *v > 0.0));
        }
        assert!(matches!(
            m.encode(&[0.0; 3], &random_frame(&mut rng)),
            Err(VaeError::Dim { expected: 240, got: 3 })
        ));
    }

    #[test]
    fn reparameterize_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = [0.5, -1.0];
        assert_eq!(reparameterize(&mu, &[0.0, 0.0], &mut rng), mu);
        let a = reparameterize(&mu, &[1.0, 1.0], &mut ChaCha8Rng::seed_from_u64(3));
        let b = reparameterize(&mu, &[1.0, 1.0], &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);

        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| reparameterize(&[0.0], &[1.0], &mut rng)[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((0.97..=1.03).contains(&var), "{var}");
    }

    #[test]
    fn decode_gate_and_output_shape() {
        let m = VaeModel::new(tiny_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Array2::from_shape_fn((5, 4), |_| rng.random_range(-2.0..2.0));
        let (frames, gate) = m.decode_batch(&z, &random_frame(&mut rng)).unwrap();
        assert_eq!(frames.len(), 5);
        assert!(frames.iter().all(|f| f.len() == 240));
        for row in gate.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_experts_collapse() {
        let mut m = VaeModel::new(tiny_config()).unwrap();
        for part in ["fc1", "fc2", "out"] {
            for suffix in ["w", "b"] {
                let src = m.params.id(&format!("expert0.{part}.{suffix}")).unwrap();
                let v = m.params.value(src).value.clone();
                for k in 1..6 {
                    let id = m.params.id(&format!("expert{k}.{part}.{suffix}")).unwrap();
                    m.params.value_mut(id).value = v.clone();
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xp: Vec<f64> = random_frame(&mut rng);
        let z = [0.3, -0.2, 0.9, 0.0];
        let out = m.decode(&z, &xp).unwrap();
        // evaluate expert 0 alone
        let mut g = Graph::new(&m.params);
        let zv = g.row(&z);
        let cv = g.row(&xp);
        let ze = m.dense_elu(&mut g, "dec.expand", zv).unwrap();
        let inp = g.concat(ze, cv).unwrap();
        let h1 = m.dense_elu(&mut g, "expert0.fc1", inp).unwrap();
        let r = m.dense_elu(&mut g, "expert0.fc2", h1).unwrap();
        let h2 = g.add(h1, r).unwrap();
        let y = m.dense(&mut g, "expert0.out", h2).unwrap();
        for (a, b) in out.iter().zip(g.value(y).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn elbo_examples() {
        let x = vec![0.3; 240];
        assert_eq!(elbo_loss(&x, &x, &[0.0; 40], &[1.0; 40], 3e-3).unwrap(), 0.0);
        let mut mu = [0.0; 40];
        mu[0] = 1.0;
        let l = elbo_loss(&x, &x, &mu, &[1.0; 40], 3e-3).unwrap();
        assert!((l - 3e-3 * 0.5).abs() < 1e-18);
        assert!(matches!(
            elbo_loss(&x, &x, &[0.0], &[0.0], 1.0),
            Err(VaeError::NonPositiveSigma(0))
        ));
    }

    #[test]
    fn elbo_random_case_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xt: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xp: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sg: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let beta = 0.37;
        let mut oracle_mse = 0.0;
        for i in 0..12 {
            oracle_mse += (xt[i] - xp[i]).powi(2);
        }
        oracle_mse /= 12.0;
        let mut oracle_kl = 0.0;
        for i in 0..5 {
            let var = sg[i] * sg[i];
            oracle_kl += 0.5 * (mu[i] * mu[i] + var - 1.0 - var.ln());
        }
        let want = oracle_mse + beta * oracle_kl;
        assert!((elbo_loss(&xt, &xp, &mu, &sg, beta).unwrap() - want).abs() < 1e-14);

        let mut g = Graph::detached();
        let a = g.row(&xt);
        let b = g.row(&xp);
        let m = g.row(&mu);
        let ls = g.row(&sg.iter().map(|s| s.ln()).collect::<Vec<_>>());
        let s = g.exp(ls).unwrap();
        let enc = EncodedVars {
            mu: m,
            log_sigma: ls,
            sigma: s,
        };
        let (total, _, _) = elbo_graph(&mut g, a, b, &enc, beta).unwrap();
        assert!((g.scalar(total) - want).abs() < 1e-13);
    }

    #[test]
    fn kl_zero_iff_standard_normal() {
        assert_eq!(kl_divergence(&[0.0; 3], &[1.0; 3]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..3.0)).collect();
            assert!(kl_divergence(&mu, &s).unwrap() > 0.0);
        }
        assert!(kl_divergence(&[1e-4], &[1.0]).unwrap() > 0.0);
        assert!(kl_divergence(&[0.0], &[1.0 + 1e-4]).unwrap() > 0.0);
    }

    #[test]
    fn training_step_gradient_check() {
        let m = VaeModel::new(tiny_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xt = Array2::from_shape_fn((3, 240), |_| rng.random_range(-1.0..1.0));
        let xp = Array2::from_shape_fn((3, 240), |_| rng.random_range(-1.0..1.0));
        let eta = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let r = grad_check_params(
            &m.params,
            |g| {
                let a = g.input(xt.clone());
                let b = g.input(xp.clone());
                let enc = m.encode_graph(g, a, b)?;
                let e = g.input(eta.clone());
                let noise = g.mul(enc.sigma, e)?;
                let z = g.add(enc.mu, noise)?;
                let (pred, _) = m.decode_graph(g, z, b)?;
                let (total, _, _) = elbo_graph(g, a, pred, &enc, 3e-3)?;
                Ok::<_, VaeError>(total)
            },
            1e-6,
            600,
        )
        .unwrap();
        assert!(r.max_rel < 1e-5, "{r:?}");
        assert!(r.checked >= 500);
    }

    #[test]
    fn save_load_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.vae.json");
        let mut m = VaeModel::new(tiny_config()).unwrap();
        m.trained_epochs = 3;
        m.normalizer.mean[7] = 0.123456789012345;
        m.save(&p).unwrap();
        let back = VaeModel::load(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.param_count(), m.params.flatten().len());

        let text = fs::read_to_string(&p)
            .unwrap()
            .replacen("\"version\":1", "\"version\":7", 1);
        fs::write(&p, text).unwrap();
        let e = VaeModel::load(&p).unwrap_err().to_string();
        assert!(e.contains("version"), "{e}");

        fs::write(&p, "{\"format\":").unwrap();
        assert!(matches!(VaeModel::load(&p), Err(VaeError::Format(_))));
    }

    #[test]
    fn param_count_matches_layer_shapes() {
        let c = VaeConfig::default();
        let (d, h, l, e, k) = (240, c.hidden, 40, 240, 6);
        let lin = |i: usize, o: usize| i * o + o;
        let want = lin(2 * d, h)
            + 3 * lin(h, h)
            + 2 * lin(h, l)
            + lin(l, e)
            + lin(e + d, h)
            + lin(h, k)
            + k * (lin(e + d, h) + lin(h, h) + lin(h, d));
        assert_eq!(VaeModel::new(c).unwrap().param_count(), want);
    }
}
