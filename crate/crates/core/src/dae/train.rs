use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DaeParams;
use crate::model::CodeMatrix;
use crate::{DphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 16,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(DphError::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(DphError::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Zeroes each coordinate independently with probability `q`.
pub fn corrupt(x: ArrayView1<'_, f64>, q: f64, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.to_owned();
    mask_in_place(out.view_mut().insert_axis(Axis(0)), q, &mut rng);
    out
}

fn mask_in_place(mut rows: ndarray::ArrayViewMut2<'_, f64>, q: f64, rng: &mut ChaCha8Rng) {
    if q <= 0.0 {
        return;
    }
    for v in rows.iter_mut() {
        if rng.random::<f64>() < q {
            *v = 0.0;
        }
    }
}

/// Runs one SGD epoch over `rows` in a shuffled order, returning the
/// sample-weighted mean batch loss.
fn run_epoch<F>(
    params: &mut DaeParams,
    rows: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    epoch: usize,
    mut step: F,
) -> Result<f64>
where
    F: FnMut(&DaeParams, &[usize], Array2<f64>) -> (f64, super::Gradients),
{
    let mut order: Vec<usize> = (0..rows.nrows()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let mut input = rows.select(Axis(0), batch);
        mask_in_place(input.view_mut(), params.corruption, rng);
        let (loss, grads) = step(params, batch, input);
        if !loss.is_finite() {
            return Err(DphError::Divergence {
                epoch,
                detail: format!("non-finite loss {loss}"),
            });
        }
        params.apply_gradients(&grads, cfg.learning_rate);
        if !params.is_finite() {
            return Err(DphError::Divergence {
                epoch,
                detail: "non-finite weights after update".into(),
            });
        }
        total += loss * batch.len() as f64;
    }
    Ok(total / rows.nrows().max(1) as f64)
}

/// Mini-batch SGD on the denoising reconstruction objective through all
/// layers. Returns the mean loss of every epoch.
pub fn pretrain(
    params: &mut DaeParams,
    rows: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if rows.ncols() != params.input_dim() {
        return Err(DphError::Dimension(format!(
            "content has {} columns, autoencoder expects {}",
            rows.ncols(),
            params.input_dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss = run_epoch(params, rows, cfg, &mut rng, epoch, |p, batch, input| {
            let clean = rows.select(Axis(0), batch);
            p.reconstruction_loss_grad(clean.view(), input.view(), None)
        })?;
        log::debug!("dae pretrain epoch {epoch}: loss {loss:.6}");
        trace.push(loss);
    }
    Ok(trace)
}

/// Supervised SGD pulling the encoder output of each (corrupted) content row
/// toward the matching item code. Only encoder layers change.
pub fn finetune(
    params: &mut DaeParams,
    rows: ArrayView2<'_, f64>,
    codes: &CodeMatrix,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if codes.count() != rows.nrows() || codes.r() != params.code_len() {
        return Err(DphError::Dimension(format!(
            "{} codes of length {} for {} rows and code layer {}",
            codes.count(),
            codes.r(),
            rows.nrows(),
            params.code_len()
        )));
    }
    if rows.ncols() != params.input_dim() {
        return Err(DphError::Dimension(format!(
            "content has {} columns, autoencoder expects {}",
            rows.ncols(),
            params.input_dim()
        )));
    }
    let targets = Array2::from_shape_fn((codes.count(), codes.r()), |(i, k)| {
        f64::from(codes.get(i, k))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss = run_epoch(params, rows, cfg, &mut rng, epoch, |p, batch, input| {
            let t = targets.select(Axis(0), batch);
            let (loss, mut grads) = p.code_loss_grad(input.view(), t.view(), None);
            // decoder layers get zero updates
            for l in p.encoder_layers()..p.total_layers() {
                grads.weights.push(Array2::zeros(p.weights[l].dim()));
                grads.biases.push(Array1::zeros(p.biases[l].len()));
            }
            (loss, grads)
        })?;
        log::debug!("dae finetune epoch {epoch}: loss {loss:.6}");
        trace.push(loss);
    }
    Ok(trace)
}
