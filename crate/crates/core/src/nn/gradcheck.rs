//! Central finite-difference checks of every layer type's backward pass.

use rand::Rng as _;
use serde::Serialize;

use crate::error::Result;
use crate::seed::rng_for;

use super::{LayerSpec, LayerStack, Parameterized, Tensor};

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub layer: &'static str,
    pub param_probes: usize,
    pub input_probes: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn probes(&self) -> usize {
        self.param_probes + self.input_probes
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn fixtures() -> Vec<(&'static str, Vec<usize>, Vec<LayerSpec>)> {
    vec![
        (
            "conv2d",
            vec![3, 9, 9],
            vec![LayerSpec::Conv2d {
                out_channels: 4,
                kernel: 3,
                stride: 2,
                padding: 1,
            }],
        ),
        ("dense", vec![10], vec![LayerSpec::Dense { out_dim: 6 }]),
        ("relu", vec![24], vec![LayerSpec::Relu]),
        ("flatten", vec![2, 3, 3], vec![LayerSpec::Flatten]),
    ]
}

fn weighted_sum(y: &Tensor<f64>, w: &[f64]) -> f64 {
    y.data().iter().zip(w).map(|(a, b)| a * b).sum()
}

fn param_get(stack: &mut LayerStack<f64>, flat: usize) -> f64 {
    let mut seen = 0;
    let mut out = 0.0;
    stack.visit_params(&mut |s| {
        if (seen..seen + s.value.len()).contains(&flat) {
            out = s.value[flat - seen];
        }
        seen += s.value.len();
    });
    out
}

fn param_set(stack: &mut LayerStack<f64>, flat: usize, v: f64) {
    let mut seen = 0;
    stack.visit_params(&mut |s| {
        if (seen..seen + s.value.len()).contains(&flat) {
            s.value[flat - seen] = v;
        }
        seen += s.value.len();
    });
}

/// Checks one layer type against central differences with step `h`,
/// probing `probes` random parameters (if the layer has any) and `probes`
/// random input entries.
pub fn check_layer(
    name: &'static str,
    input_shape: &[usize],
    specs: &[LayerSpec],
    probes: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = rng_for(seed, &[]);
    let mut stack = LayerStack::<f64>::new(input_shape, specs, &mut rng)?;
    let batch = 2;
    let n_in: usize = batch * input_shape.iter().product::<usize>();
    // Inputs stay clear of the relu kink so a step of h cannot cross it.
    let x: Vec<f64> = (0..n_in)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let mut shape = vec![batch];
    shape.extend_from_slice(input_shape);
    let input = Tensor::new(shape.clone(), x.clone())?;

    let y = stack.forward(input.clone())?;
    let w: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    stack.zero_grad();
    let dx = stack
        .backward(&Tensor::new(y.shape().to_vec(), w.clone())?, true)?
        .expect("input gradient requested");
    let mut grads = Vec::new();
    stack.visit_params(&mut |s| grads.extend_from_slice(s.grad));

    let mut worst: f64 = 0.0;
    let param_probes = if grads.is_empty() { 0 } else { probes };
    for _ in 0..param_probes {
        let j = rng.random_range(0..grads.len());
        let orig = param_get(&mut stack, j);
        param_set(&mut stack, j, orig + h);
        let up = weighted_sum(&stack.forward(input.clone())?, &w);
        param_set(&mut stack, j, orig - h);
        let down = weighted_sum(&stack.forward(input.clone())?, &w);
        param_set(&mut stack, j, orig);
        worst = worst.max(relative_error(grads[j], (up - down) / (2.0 * h)));
    }
    for _ in 0..probes {
        let j = rng.random_range(0..n_in);
        let mut xp = x.clone();
        xp[j] += h;
        let up = weighted_sum(&stack.forward(Tensor::new(shape.clone(), xp)?)?, &w);
        let mut xm = x.clone();
        xm[j] -= h;
        let down = weighted_sum(&stack.forward(Tensor::new(shape.clone(), xm)?)?, &w);
        worst = worst.max(relative_error(dx.data()[j], (up - down) / (2.0 * h)));
    }
    Ok(GradCheckReport {
        layer: name,
        param_probes,
        input_probes: probes,
        max_rel_error: worst,
    })
}

/// Runs [`check_layer`] for conv2d, dense, relu and flatten.
pub fn check_all_layers(probes: usize, h: f64, seed: u64) -> Result<Vec<GradCheckReport>> {
    fixtures()
        .into_iter()
        .enumerate()
        .map(|(i, (name, shape, specs))| check_layer(name, &shape, &specs, probes, h, seed.wrapping_add(i as u64)))
        .collect()
}
