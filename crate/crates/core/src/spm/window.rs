use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// Start indices of the non-overlapping windows used for prediction; a
/// trailing partial window is dropped.
pub fn window_starts(len: usize, window: usize) -> Vec<usize> {
    (0..len / window).map(|k| k * window).collect()
}

/// Encoder inputs for a batch of windows.
#[derive(Clone, Debug)]
pub struct WindowBatch<T> {
    /// `[B, 3 * window, S, S]`, frame-major then R, G, B planes, scaled to [0, 1].
    pub frames: Tensor<T>,
    /// `[B, window * action_dim]`, unscaled.
    pub actions: Tensor<T>,
    /// `[B, extra_dim]`; zero width unless state features are enabled.
    pub extra: Tensor<T>,
}

impl<T: Real> WindowBatch<T> {
    pub fn len(&self) -> usize {
        self.frames.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gathers the windows `(trajectory, start)`; all trajectories must share
    /// frame size and action dimension.
    pub fn gather(items: &[(&Trajectory, usize)], window: usize) -> Result<Self> {
        let Some((first, _)) = items.first() else {
            return Err(Error::InsufficientData("no windows to gather".into()));
        };
        let first_frame = first
            .frames
            .first()
            .ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
        let size = first_frame.width;
        let action_dim = first.actions.first().map_or(0, |a| a.len());
        let plane = size * size;
        let lut: Vec<T> = (0..256).map(|b| T::of(b as f64 / 255.0)).collect();

        let mut frames = Vec::with_capacity(items.len() * 3 * window * plane);
        let mut actions = Vec::with_capacity(items.len() * window * action_dim);
        for &(traj, start) in items {
            if start + window > traj.len() || traj.actions.len() != traj.len() {
                return Err(Error::InsufficientData(format!(
                    "window {start}..{} exceeds trajectory of length {}",
                    start + window,
                    traj.len()
                )));
            }
            for frame in &traj.frames[start..start + window] {
                if frame.width != size || frame.height != size {
                    return Err(Error::Shape(format!(
                        "mixed frame sizes {}x{} and {size}x{size}",
                        frame.width, frame.height
                    )));
                }
                let base = frames.len();
                frames.resize(base + 3 * plane, T::zero());
                let (r, rest) = frames[base..].split_at_mut(plane);
                let (g, b) = rest.split_at_mut(plane);
                for (i, px) in frame.data.chunks_exact(3).enumerate() {
                    r[i] = lut[px[0] as usize];
                    g[i] = lut[px[1] as usize];
                    b[i] = lut[px[2] as usize];
                }
            }
            for a in &traj.actions[start..start + window] {
                if a.len() != action_dim {
                    return Err(Error::Shape("inconsistent action dimension".into()));
                }
                actions.extend(a.iter().map(|&v| T::of(v as f64)));
            }
        }
        let b = items.len();
        Ok(Self {
            frames: Tensor::new(vec![b, 3 * window, size, size], frames)?,
            actions: Tensor::new(vec![b, window * action_dim], actions)?,
            extra: Tensor::zeros(vec![b, 0]),
        })
    }

    /// Attaches `[B, extra_dim]` state features.
    pub fn with_extra(mut self, extra: Tensor<T>) -> Result<Self> {
        if extra.shape().len() != 2 || extra.batch() != self.len() {
            return Err(Error::Shape(format!(
                "extra features must be [{}, n], got {:?}",
                self.len(),
                extra.shape()
            )));
        }
        self.extra = extra;
        Ok(self)
    }
}
