use std::path::Path;

use rand::Rng;

use super::window::{window_starts, WindowBatch};
use super::{SpmConfig, WINDOW};
use crate::envs::{EnvSpec, Trajectory};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, sigmoid, sinusoidal_encode_into, LayerStack, ParamSlot, Parameterized, Real, Tensor};
use crate::param::ParamVector;

/// Output probabilities are kept this far from 0 and 1.
const PROB_EPS: f64 = 1e-9;

/// Rows per head forward pass during inference.
const INFER_CHUNK: usize = 512;

/// Shared frame encoder followed by one binary head per parameter.
#[derive(Clone, Debug)]
pub struct SpmModel<T: Real = f32> {
    config: SpmConfig,
    frame_size: usize,
    action_dim: usize,
    p_max: Vec<f64>,
    encoder: LayerStack<T>,
    heads: Vec<LayerStack<T>>,
}

impl<T: Real> SpmModel<T> {
    /// Builds a model for `spec`; the encoding scale of each parameter is
    /// fixed at twice its initial mean.
    pub fn new<R: Rng + ?Sized>(
        config: SpmConfig,
        spec: &EnvSpec,
        initial_mean: &ParamVector,
        rng: &mut R,
    ) -> Result<Self> {
        spec.schema.validate(initial_mean)?;
        if config.levels == 0 || config.hidden == 0 || config.encoder_dim == 0 {
            return Err(Error::Config("levels, hidden and encoder_dim must be positive".into()));
        }
        let s = spec.frame_size;
        let encoder = LayerStack::new(&[3 * WINDOW, s, s], &config.encoder_specs(), rng)?;
        let head_in = config.encoder_dim + WINDOW * spec.action_dim + config.extra_features + 2 * config.levels;
        let heads = (0..spec.num_params())
            .map(|_| {
                let mut head = LayerStack::new(&[head_in], &config.head_specs(1), rng)?;
                let last = head.last_dense_mut().expect("head ends in a dense layer");
                last.weight_mut().fill(T::zero());
                last.bias_mut().fill(T::zero());
                Ok(head)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            frame_size: s,
            action_dim: spec.action_dim,
            p_max: initial_mean.iter().map(|m| 2.0 * m).collect(),
            encoder,
            heads,
        })
    }

    pub fn config(&self) -> &SpmConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.heads.len()
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }

    /// Head input width: encoder features, window actions, extra features and
    /// the candidate's encoding.
    pub fn head_input_dim(&self) -> usize {
        self.context_dim() + 2 * self.config.levels
    }

    fn context_dim(&self) -> usize {
        self.config.encoder_dim + WINDOW * self.action_dim + self.config.extra_features
    }

    fn check_batch(&self, batch: &WindowBatch<T>) -> Result<()> {
        let b = batch.len();
        let s = self.frame_size;
        if batch.frames.shape() != [b, 3 * WINDOW, s, s]
            || batch.actions.shape() != [b, WINDOW * self.action_dim]
            || batch.extra.shape() != [b, self.config.extra_features]
        {
            return Err(Error::Shape(format!(
                "window batch frames {:?}, actions {:?}, extra {:?} do not fit the model",
                batch.frames.shape(),
                batch.actions.shape(),
                batch.extra.shape()
            )));
        }
        Ok(())
    }

    /// Encoder output joined with actions and extra features, `[B, context_dim]`.
    fn context(&mut self, batch: &WindowBatch<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        let enc = self.encoder.forward(batch.frames.clone())?;
        Tensor::concat_features(&[&enc, &batch.actions, &batch.extra])
    }

    /// Candidates above `p_max` are encoded as `p_max`: past the top of the
    /// range the higher frequencies alias onto small values.
    fn encode_candidates(&self, param: usize, candidates: impl Iterator<Item = f64>) -> Result<Tensor<T>> {
        let width = 2 * self.config.levels;
        let p_max = self.p_max[param];
        let mut buf = vec![0.0; width];
        let mut data = Vec::new();
        let mut rows = 0;
        for c in candidates {
            sinusoidal_encode_into(c.min(p_max), p_max, &mut buf)?;
            data.extend(buf.iter().map(|&v| T::of(v)));
            rows += 1;
        }
        Tensor::new(vec![rows, width], data)
    }

    fn check_candidates(&self, candidates: &[Vec<f64>]) -> Result<()> {
        if let Some(c) = candidates.iter().find(|c| c.len() != self.num_params()) {
            return Err(Error::Shape(format!(
                "candidate has {} values, model has {} heads",
                c.len(),
                self.num_params()
            )));
        }
        Ok(())
    }

    /// Logits `[B, N]` for one candidate per window. Caches activations for
    /// [`SpmModel::backward`].
    pub fn forward_logits(&mut self, batch: &WindowBatch<T>, candidates: &[Vec<f64>]) -> Result<Tensor<T>> {
        self.check_candidates(candidates)?;
        if candidates.len() != batch.len() {
            return Err(Error::Shape(format!(
                "{} candidates for {} windows",
                candidates.len(),
                batch.len()
            )));
        }
        let ctx = self.context(batch)?;
        let n = self.num_params();
        let b = batch.len();
        let mut logits = vec![T::zero(); b * n];
        for i in 0..n {
            let enc = self.encode_candidates(i, candidates.iter().map(|c| c[i]))?;
            let input = Tensor::concat_features(&[&ctx, &enc])?;
            let out = self.heads[i].forward(input)?;
            for (row, &v) in out.data().iter().enumerate() {
                logits[row * n + i] = v;
            }
        }
        Tensor::new(vec![b, n], logits)
    }

    /// Accumulates parameter gradients for `grad_logits` from the last
    /// [`SpmModel::forward_logits`] call.
    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<()> {
        let n = self.num_params();
        let [b, cols] = *grad_logits.shape() else {
            return Err(Error::Shape(format!(
                "logit gradient must be 2-D, got {:?}",
                grad_logits.shape()
            )));
        };
        if cols != n {
            return Err(Error::Shape(format!("logit gradient has {cols} columns, expected {n}")));
        }
        let enc_dim = self.config.encoder_dim;
        let mut enc_grad = vec![T::zero(); b * enc_dim];
        for i in 0..n {
            let g = grad_logits.slice_features(i, 1)?;
            let dx = self.heads[i].backward(&g, true)?.expect("input gradient requested");
            let width = dx.shape()[1];
            for (row, acc) in enc_grad.chunks_exact_mut(enc_dim).enumerate() {
                for (a, &v) in acc.iter_mut().zip(&dx.data()[row * width..row * width + enc_dim]) {
                    *a += v;
                }
            }
        }
        self.encoder
            .backward(&Tensor::new(vec![b, enc_dim], enc_grad)?, false)?;
        Ok(())
    }

    fn probabilities(logits: &Tensor<T>) -> Vec<f64> {
        logits
            .data()
            .iter()
            .map(|z| sigmoid(z.as_f64()).clamp(PROB_EPS, 1.0 - PROB_EPS))
            .collect()
    }

    /// Probabilities that the generating parameters exceed `candidate`, for a
    /// single batch of windows (one candidate per window).
    pub fn forward_window(&mut self, batch: &WindowBatch<T>, candidates: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let logits = self.forward_logits(batch, candidates)?;
        let n = self.num_params();
        Ok(Self::probabilities(&logits).chunks(n).map(<[f64]>::to_vec).collect())
    }

    /// Window-averaged probabilities over a full trajectory.
    pub fn predict(&mut self, traj: &Trajectory, candidate: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_many(traj, &[candidate.to_vec()])?.remove(0))
    }

    /// [`SpmModel::predict`] for several candidates; each window is encoded once.
    pub fn predict_many(&mut self, traj: &Trajectory, candidates: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_candidates(candidates)?;
        if traj.len() < WINDOW {
            return Err(Error::InsufficientData(format!(
                "trajectory of length {} is shorter than the {WINDOW}-frame window",
                traj.len()
            )));
        }
        let starts = window_starts(traj.len(), WINDOW);
        let items: Vec<_> = starts.iter().map(|&s| (traj, s)).collect();
        let batch = WindowBatch::gather(&items, WINDOW)?;
        self.predict_windows(&batch, candidates)
    }

    /// Averages over all windows of `batch` for each candidate.
    pub fn predict_windows(&mut self, batch: &WindowBatch<T>, candidates: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_candidates(candidates)?;
        let ctx = self.context(batch)?;
        let windows = batch.len();
        let n = self.num_params();
        let cdim = self.context_dim();
        let mut out = vec![vec![0.0; n]; candidates.len()];
        let per_chunk = (INFER_CHUNK / windows.max(1)).max(1);
        for (chunk_idx, chunk) in candidates.chunks(per_chunk).enumerate() {
            let rows = chunk.len() * windows;
            let mut ctx_rep = Vec::with_capacity(rows * cdim);
            for _ in chunk {
                ctx_rep.extend_from_slice(ctx.data());
            }
            let ctx_rep = Tensor::new(vec![rows, cdim], ctx_rep)?;
            for i in 0..n {
                let values = chunk.iter().flat_map(|c| std::iter::repeat_n(c[i], windows));
                let enc = self.encode_candidates(i, values)?;
                let logits = self.heads[i].forward(Tensor::concat_features(&[&ctx_rep, &enc])?)?;
                let probs = Self::probabilities(&logits);
                for (k, per_window) in probs.chunks(windows).enumerate() {
                    out[chunk_idx * per_chunk + k][i] = per_window.iter().sum::<f64>() / windows as f64;
                }
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&mut self) -> Vec<u8> {
        checkpoint::to_bytes(self)
    }

    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        checkpoint::from_bytes(self, bytes)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(&mut self, path: &Path) -> Result<()> {
        checkpoint::load(self, path)
    }
}

impl<T: Real> Parameterized<T> for SpmModel<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        self.encoder.visit_params(f);
        for head in &mut self.heads {
            head.visit_params(f);
        }
    }
}
