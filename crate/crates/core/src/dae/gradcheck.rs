use ndarray::{Array1, ArrayView1, Axis};

use super::{DaeParams, Gradients};

/// Which loss a gradient check differentiates.
#[derive(Debug, Clone)]
pub enum GradTarget {
    /// `||target - reconstruct(input)||^2 + delta ||W||^2` over all layers.
    Reconstruction(Array1<f64>),
    /// `||target - encode(input)||^2` over the encoder layers.
    Code(Array1<f64>),
}

const STEP: f64 = 1e-5;
/// Gradients below this magnitude on both sides count as agreeing.
const ZERO_FLOOR: f64 = 1e-8;

/// Largest relative disagreement between the backpropagated gradient and a
/// central finite difference (step `1e-5`) over every parameter the loss
/// depends on. Meant for tiny networks.
pub fn gradient_check(params: &DaeParams, input: ArrayView1<'_, f64>, target: &GradTarget) -> f64 {
    check_impl(params, input, target, None)
}

pub(crate) fn check_impl(
    params: &DaeParams,
    input: ArrayView1<'_, f64>,
    target: &GradTarget,
    flip_layer: Option<usize>,
) -> f64 {
    let input = input.insert_axis(Axis(0));
    let eval = |p: &DaeParams, flip: Option<usize>| -> (f64, Gradients) {
        match target {
            GradTarget::Reconstruction(t) => {
                p.reconstruction_loss_grad(t.view().insert_axis(Axis(0)), input, flip)
            }
            GradTarget::Code(t) => p.code_loss_grad(input, t.view().insert_axis(Axis(0)), flip),
        }
    };
    let (_, grads) = eval(params, flip_layer);
    let layers = grads.weights.len();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs());
        if scale >= ZERO_FLOOR {
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    };
    for l in 0..layers {
        let (rows, cols) = params.weights[l].dim();
        for (a, b) in (0..rows).flat_map(|a| (0..cols).map(move |b| (a, b))) {
            let numeric = central_difference(&mut probe, |p| &mut p.weights[l][(a, b)], &eval);
            compare(grads.weights[l][(a, b)], numeric);
        }
        for idx in 0..params.biases[l].len() {
            let numeric = central_difference(&mut probe, |p| &mut p.biases[l][idx], &eval);
            compare(grads.biases[l][idx], numeric);
        }
    }
    worst
}

fn central_difference<A, E>(probe: &mut DaeParams, mut access: A, eval: &E) -> f64
where
    A: FnMut(&mut DaeParams) -> &mut f64,
    E: Fn(&DaeParams, Option<usize>) -> (f64, Gradients),
{
    let original = *access(probe);
    *access(probe) = original + STEP;
    let plus = eval(probe, None).0;
    *access(probe) = original - STEP;
    let minus = eval(probe, None).0;
    *access(probe) = original;
    (plus - minus) / (2.0 * STEP)
}
