use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scalar::{matmul, MatRef};
use super::{Real, Tensor};

/// Layer description used to build a [`LayerStack`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        out_dim: usize,
    },
    Relu,
    Flatten,
}

/// Trainable parameter tensor paired with its accumulated gradient.
pub struct ParamSlot<'a, T> {
    pub value: &'a mut [T],
    pub grad: &'a mut [T],
    pub shape: &'a [usize],
}

/// Anything that owns trainable tensors. Visiting order is fixed and defines
/// the layout of optimizer state and checkpoints.
pub trait Parameterized<T: Real> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamSlot<'_, T>));

    fn zero_grad(&mut self) {
        self.visit_params(&mut |s| s.grad.fill(T::zero()));
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |s| n += s.value.len());
        n
    }

    fn params_finite(&mut self) -> bool {
        let mut ok = true;
        self.visit_params(&mut |s| ok &= s.value.iter().all(|v| v.is_finite()));
        ok
    }
}

fn he_uniform<T: Real, R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| T::of(rng.random_range(-limit..=limit))).collect()
}

#[derive(Clone, Debug)]
pub struct Dense<T> {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<T>,
    bias: Vec<T>,
    weight_shape: [usize; 2],
    bias_shape: [usize; 1],
    grad_weight: Vec<T>,
    grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: he_uniform(in_dim * out_dim, in_dim, rng),
            bias: vec![T::zero(); out_dim],
            weight_shape: [out_dim, in_dim],
            bias_shape: [out_dim],
            grad_weight: vec![T::zero(); in_dim * out_dim],
            grad_bias: vec![T::zero(); out_dim],
            input: None,
        }
    }

    /// Row-major `[out_dim, in_dim]` weights.
    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let batch = x.batch();
        let mut out = vec![T::zero(); batch * self.out_dim];
        for row in out.chunks_exact_mut(self.out_dim) {
            row.copy_from_slice(&self.bias);
        }
        matmul(
            MatRef::rows(x.data(), batch, self.in_dim),
            MatRef::rows(&self.weight, self.out_dim, self.in_dim).t(),
            &mut out,
            true,
        );
        self.input = Some(x);
        Tensor::new(vec![batch, self.out_dim], out).expect("dense output shape")
    }

    fn backward(&mut self, grad: &Tensor<T>, want_input: bool) -> Option<Tensor<T>> {
        let x = self.input.as_ref().expect("forward cached");
        let batch = x.batch();
        let g = MatRef::rows(grad.data(), batch, self.out_dim);
        matmul(
            g.t(),
            MatRef::rows(x.data(), batch, self.in_dim),
            &mut self.grad_weight,
            true,
        );
        for row in grad.data().chunks_exact(self.out_dim) {
            for (gb, &v) in self.grad_bias.iter_mut().zip(row) {
                *gb += v;
            }
        }
        want_input.then(|| {
            let mut dx = vec![T::zero(); batch * self.in_dim];
            matmul(g, MatRef::rows(&self.weight, self.out_dim, self.in_dim), &mut dx, false);
            Tensor::new(vec![batch, self.in_dim], dx).expect("dense input grad shape")
        })
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    in_c: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    weight: Vec<T>,
    bias: Vec<T>,
    weight_shape: [usize; 4],
    bias_shape: [usize; 1],
    grad_weight: Vec<T>,
    grad_bias: Vec<T>,
    /// im2col matrix of the last forward pass, `[in_c*k*k, batch*out_h*out_w]`.
    cols: Vec<T>,
    batch: usize,
}

impl<T: Real> Conv2d<T> {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng + ?Sized>(
        in_shape: &[usize],
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let [in_c, in_h, in_w] = *in_shape else {
            return Err(Error::Shape(format!(
                "conv2d expects [c, h, w] input, got {in_shape:?}"
            )));
        };
        if kernel == 0 || stride == 0 || in_h + 2 * padding < kernel || in_w + 2 * padding < kernel {
            return Err(Error::Shape(format!(
                "conv2d kernel {kernel} stride {stride} does not fit input {in_shape:?}"
            )));
        }
        let out_h = (in_h + 2 * padding - kernel) / stride + 1;
        let out_w = (in_w + 2 * padding - kernel) / stride + 1;
        let fan_in = in_c * kernel * kernel;
        Ok(Self {
            in_c,
            out_c,
            kernel,
            stride,
            padding,
            in_h,
            in_w,
            out_h,
            out_w,
            weight: he_uniform(out_c * fan_in, fan_in, rng),
            bias: vec![T::zero(); out_c],
            weight_shape: [out_c, in_c, kernel, kernel],
            bias_shape: [out_c],
            grad_weight: vec![T::zero(); out_c * fan_in],
            grad_bias: vec![T::zero(); out_c],
            cols: Vec::new(),
            batch: 0,
        })
    }

    /// Row-major `[out_c, in_c, k, k]` weights.
    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Valid output columns `[lo, hi)` for kernel column `kx`, i.e. those
    /// whose source column `ox * stride + kx - padding` lies inside the image.
    fn valid_cols(&self, kx: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = self.padding.saturating_sub(kx).div_ceil(s);
        let hi = if self.in_w + self.padding > kx {
            ((self.in_w + self.padding - kx - 1) / s + 1).min(self.out_w)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    /// Unfolds one sample into columns `offset..offset + positions` of the
    /// `[in_c*k*k, row_stride]` matrix `col`.
    fn im2col(&self, img: &[T], col: &mut [T], row_stride: usize, offset: usize) {
        let (k, s, pad) = (self.kernel, self.stride, self.padding);
        let plane = self.in_h * self.in_w;
        for c in 0..self.in_c {
            let src = &img[c * plane..(c + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let (lo, hi) = self.valid_cols(kx);
                    let dst = &mut col[row * row_stride + offset..row * row_stride + offset + self.positions()];
                    for (oy, out_row) in dst.chunks_exact_mut(self.out_w).enumerate() {
                        let y = (oy * s + ky).wrapping_sub(pad);
                        if y >= self.in_h {
                            out_row.fill(T::zero());
                            continue;
                        }
                        out_row[..lo].fill(T::zero());
                        out_row[hi..].fill(T::zero());
                        let line = &src[y * self.in_w..(y + 1) * self.in_w];
                        let x0 = lo * s + kx - pad;
                        for (o, x) in out_row[lo..hi].iter_mut().zip((x0..).step_by(s)) {
                            *o = line[x];
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Conv2d::im2col`]: accumulates columns back into `img`.
    fn col2im(&self, col: &[T], row_stride: usize, offset: usize, img: &mut [T]) {
        let (k, s, pad) = (self.kernel, self.stride, self.padding);
        let plane = self.in_h * self.in_w;
        for c in 0..self.in_c {
            let dst = &mut img[c * plane..(c + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let (lo, hi) = self.valid_cols(kx);
                    let src = &col[row * row_stride + offset..row * row_stride + offset + self.positions()];
                    for (oy, in_row) in src.chunks_exact(self.out_w).enumerate() {
                        let y = (oy * s + ky).wrapping_sub(pad);
                        if y >= self.in_h {
                            continue;
                        }
                        let line = &mut dst[y * self.in_w..(y + 1) * self.in_w];
                        let x0 = lo * s + kx - pad;
                        for (&v, x) in in_row[lo..hi].iter().zip((x0..).step_by(s)) {
                            line[x] += v;
                        }
                    }
                }
            }
        }
    }

    /// All samples share one GEMM: `W [out_c, kk] x cols [kk, B*p]`.
    fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let batch = x.batch();
        let (kk, p) = (self.patch_len(), self.positions());
        let n = batch * p;
        let in_len = self.in_c * self.in_h * self.in_w;
        let mut cols = std::mem::take(&mut self.cols);
        cols.resize(kk * n, T::zero());
        for b in 0..batch {
            self.im2col(&x.data()[b * in_len..(b + 1) * in_len], &mut cols, n, b * p);
        }
        let mut wide = vec![T::zero(); self.out_c * n];
        matmul(
            MatRef::rows(&self.weight, self.out_c, kk),
            MatRef::rows(&cols, kk, n),
            &mut wide,
            false,
        );
        let mut out = vec![T::zero(); batch * self.out_c * p];
        for (oc, row) in wide.chunks_exact(n).enumerate() {
            let bias = self.bias[oc];
            for (b, chunk) in row.chunks_exact(p).enumerate() {
                let dst = &mut out[(b * self.out_c + oc) * p..(b * self.out_c + oc + 1) * p];
                for (d, &v) in dst.iter_mut().zip(chunk) {
                    *d = v + bias;
                }
            }
        }
        self.cols = cols;
        self.batch = batch;
        Tensor::new(vec![batch, self.out_c, self.out_h, self.out_w], out).expect("conv output shape")
    }

    fn backward(&mut self, grad: &Tensor<T>, want_input: bool) -> Option<Tensor<T>> {
        let batch = self.batch;
        let (kk, p) = (self.patch_len(), self.positions());
        let n = batch * p;
        // Regroup the gradient as [out_c, B*p] to match the column layout.
        let mut wide = vec![T::zero(); self.out_c * n];
        for (b, sample) in grad.data().chunks_exact(self.out_c * p).enumerate() {
            for (oc, chunk) in sample.chunks_exact(p).enumerate() {
                wide[oc * n + b * p..oc * n + (b + 1) * p].copy_from_slice(chunk);
                self.grad_bias[oc] += chunk.iter().copied().sum::<T>();
            }
        }
        let g = MatRef::rows(&wide, self.out_c, n);
        matmul(g, MatRef::rows(&self.cols, kk, n).t(), &mut self.grad_weight, true);
        want_input.then(|| {
            let mut dcol = vec![T::zero(); kk * n];
            matmul(MatRef::rows(&self.weight, self.out_c, kk).t(), g, &mut dcol, false);
            let in_len = self.in_c * self.in_h * self.in_w;
            let mut dx = vec![T::zero(); batch * in_len];
            for (b, img) in dx.chunks_exact_mut(in_len).enumerate() {
                self.col2im(&dcol, n, b * p, img);
            }
            Tensor::new(vec![batch, self.in_c, self.in_h, self.in_w], dx).expect("conv input grad shape")
        })
    }
}

#[derive(Clone, Debug)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    Dense(Dense<T>),
    Relu { active: Vec<bool> },
    Flatten { in_shape: Vec<usize> },
}

impl<T: Real> Layer<T> {
    fn visit(&mut self, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        match self {
            Layer::Conv2d(c) => {
                f(ParamSlot {
                    value: &mut c.weight,
                    grad: &mut c.grad_weight,
                    shape: &c.weight_shape,
                });
                f(ParamSlot {
                    value: &mut c.bias,
                    grad: &mut c.grad_bias,
                    shape: &c.bias_shape,
                });
            }
            Layer::Dense(d) => {
                f(ParamSlot {
                    value: &mut d.weight,
                    grad: &mut d.grad_weight,
                    shape: &d.weight_shape,
                });
                f(ParamSlot {
                    value: &mut d.bias,
                    grad: &mut d.grad_bias,
                    shape: &d.bias_shape,
                });
            }
            Layer::Relu { .. } | Layer::Flatten { .. } => {}
        }
    }
}

/// Sequential network over per-sample tensors of shape `input_shape`.
#[derive(Clone, Debug)]
pub struct LayerStack<T> {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
    forwarded: bool,
}

impl<T: Real> LayerStack<T> {
    pub fn new<R: Rng + ?Sized>(input_shape: &[usize], specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let c = Conv2d::new(&shape, out_channels, kernel, stride, padding, rng)?;
                    shape = vec![c.out_c, c.out_h, c.out_w];
                    Layer::Conv2d(c)
                }
                LayerSpec::Dense { out_dim } => {
                    let [in_dim] = *shape.as_slice() else {
                        return Err(Error::Shape(format!("dense expects a flat input, got {shape:?}")));
                    };
                    shape = vec![out_dim];
                    Layer::Dense(Dense::new(in_dim, out_dim, rng))
                }
                LayerSpec::Relu => Layer::Relu { active: Vec::new() },
                LayerSpec::Flatten => {
                    let in_shape = shape.clone();
                    shape = vec![shape.iter().product()];
                    Layer::Flatten { in_shape }
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            output_shape: shape,
            layers,
            forwarded: false,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn output_dim(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Last dense layer, if any.
    pub fn last_dense_mut(&mut self) -> Option<&mut Dense<T>> {
        self.layers.iter_mut().rev().find_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    /// Batched forward pass; caches what [`LayerStack::backward`] needs.
    pub fn forward(&mut self, input: Tensor<T>) -> Result<Tensor<T>> {
        if input.sample_shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "expected per-sample input {:?}, got {:?}",
                self.input_shape,
                input.sample_shape()
            )));
        }
        let batch = input.batch();
        let mut x = input;
        for layer in &mut self.layers {
            x = match layer {
                Layer::Conv2d(c) => c.forward(x),
                Layer::Dense(d) => d.forward(x),
                Layer::Relu { active } => {
                    active.clear();
                    active.extend(x.data().iter().map(|&v| v > T::zero()));
                    let mut x = x;
                    for v in x.data_mut() {
                        if *v <= T::zero() {
                            *v = T::zero();
                        }
                    }
                    x
                }
                Layer::Flatten { in_shape } => {
                    let n = in_shape.iter().product();
                    x.reshape(vec![batch, n])?
                }
            };
        }
        self.forwarded = true;
        Ok(x)
    }

    /// Accumulates parameter gradients for `grad_output` (shaped like the
    /// last forward output) and returns the gradient with respect to the
    /// input when `want_input_grad` is set.
    pub fn backward(&mut self, grad_output: &Tensor<T>, want_input_grad: bool) -> Result<Option<Tensor<T>>> {
        if !self.forwarded {
            return Err(Error::Shape("backward called before forward".into()));
        }
        if grad_output.sample_shape() != self.output_shape.as_slice() {
            return Err(Error::Shape(format!(
                "expected output gradient {:?}, got {:?}",
                self.output_shape,
                grad_output.sample_shape()
            )));
        }
        let batch = grad_output.batch();
        let mut g = grad_output.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let need = want_input_grad || i > 0;
            let next = match layer {
                Layer::Conv2d(c) => c.backward(&g, need),
                Layer::Dense(d) => d.backward(&g, need),
                Layer::Relu { active } => {
                    for (v, &on) in g.data_mut().iter_mut().zip(active.iter()) {
                        if !on {
                            *v = T::zero();
                        }
                    }
                    Some(g)
                }
                Layer::Flatten { in_shape } => {
                    let mut shape = vec![batch];
                    shape.extend_from_slice(in_shape);
                    Some(g.reshape(shape)?)
                }
            };
            match next {
                Some(n) => g = n,
                None => return Ok(None),
            }
        }
        Ok(want_input_grad.then_some(g))
    }
}

impl<T: Real> Parameterized<T> for LayerStack<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        for layer in &mut self.layers {
            layer.visit(f);
        }
    }
}
