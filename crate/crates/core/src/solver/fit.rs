use std::time::{Duration, Instant};

use ndarray::{ArrayView2, Axis};

use super::projection::project_dense;
use super::{SolverState, CONVERGENCE_PATIENCE, CONVERGENCE_TOL};
use crate::dae::{finetune, DaeParams, TrainConfig};
use crate::model::{sgn, CodeMatrix, HyperParams, InteractionSet};
use crate::{DphError, Result};

/// Cumulative wall time spent in each phase of the outer loop.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub initialize: Duration,
    pub user_codes: Duration,
    pub item_codes: Duration,
    pub delegates: Duration,
    pub finetune: Duration,
    pub loss: Duration,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub state: SolverState,
    pub dae: DaeParams,
    pub iterations: usize,
    pub converged: bool,
    pub times: PhaseTimes,
}

impl FitOutput {
    pub fn users(&self) -> CodeMatrix {
        self.state.users()
    }

    pub fn items(&self) -> CodeMatrix {
        self.state.items()
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.state.loss_trace
    }
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

/// Alternating optimization: user codes, item codes, both delegates, encoder
/// finetune, embedding refresh. Every item in `interactions` is trained.
pub fn fit(
    interactions: &InteractionSet,
    content: ArrayView2<'_, f64>,
    dae: &DaeParams,
    hp: &HyperParams,
    dae_cfg: &TrainConfig,
) -> Result<FitOutput> {
    hp.validate()?;
    dae_cfg.validate()?;
    let mut times = PhaseTimes::default();
    let mut dae = dae.clone();
    let mut state = timed(&mut times.initialize, || {
        SolverState::initialize(interactions, content, &dae, hp, hp.seed)
    })?;
    let mut iterations = 0;
    let mut converged = false;
    let mut calm = 0;
    for iter in 0..hp.outer_iters {
        let flips_b = timed(&mut times.user_codes, || state.update_user_codes(interactions, hp))?;
        let flips_d = timed(&mut times.item_codes, || state.update_item_codes(interactions, hp))?;
        timed(&mut times.delegates, || -> Result<()> {
            let salt = (iter as u64) << 1;
            state.x = project_dense(&state.b, hp.seed ^ 0x5851_f42d ^ salt)?;
            state.y = project_dense(&state.d, hp.seed ^ 0x14057b7e ^ (salt | 1))?;
            Ok(())
        })?;
        timed(&mut times.finetune, || -> Result<()> {
            if dae_cfg.epochs > 0 {
                let cfg = TrainConfig {
                    seed: dae_cfg.seed.wrapping_add(iter as u64),
                    ..dae_cfg.clone()
                };
                finetune(&mut dae, content, &state.items(), &cfg)?;
                state.refresh_embeddings(&dae, content)?;
            }
            Ok(())
        })?;
        let loss = timed(&mut times.loss, || state.objective(interactions, hp));
        iterations = iter + 1;
        if !loss.is_finite() {
            return Err(DphError::Divergence {
                epoch: iter,
                detail: format!("objective became {loss}; trace so far {:?}", state.loss_trace),
            });
        }
        log::info!("iteration {iterations}: loss {loss:.6e}, flips B {flips_b}, D {flips_d}");
        if let Some(&prev) = state.loss_trace.last() {
            let rel = (loss - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            calm = if rel < CONVERGENCE_TOL { calm + 1 } else { 0 };
        }
        state.loss_trace.push(loss);
        if calm >= CONVERGENCE_PATIENCE {
            converged = true;
            break;
        }
    }
    Ok(FitOutput {
        state,
        dae,
        iterations,
        converged,
        times,
    })
}

/// Runs [`fit`] on every item except `excluded`, then gives each excluded
/// item the sign of its encoded content under the final encoder.
///
/// Excluded items must have no training interactions; this is how cold
/// items get codes without acting as universal negatives during training.
pub fn fit_excluding(
    interactions: &InteractionSet,
    content: ArrayView2<'_, f64>,
    excluded: &[usize],
    dae: &DaeParams,
    hp: &HyperParams,
    dae_cfg: &TrainConfig,
) -> Result<(FitOutput, CodeMatrix)> {
    let m = interactions.n_items();
    let mut skip = vec![false; m];
    for &i in excluded {
        if i >= m {
            return Err(DphError::InvalidArgument(format!("excluded item {i} out of range")));
        }
        if !interactions.item_positives(i).is_empty() {
            return Err(DphError::InvalidArgument(format!(
                "excluded item {i} has training interactions"
            )));
        }
        skip[i] = true;
    }
    let kept: Vec<usize> = (0..m).filter(|&i| !skip[i]).collect();
    let mut compact = vec![usize::MAX; m];
    for (new, &old) in kept.iter().enumerate() {
        compact[old] = new;
    }
    let sub = InteractionSet::from_pairs(
        interactions.n_users(),
        kept.len(),
        interactions.pairs().map(|(u, i)| (u, compact[i])),
    )?;
    let sub_content = content.select(Axis(0), &kept);
    let out = fit(&sub, sub_content.view(), dae, hp, dae_cfg)?;

    let encoded = out.dae.encode_batch(content)?;
    let trained = out.state.item_signs();
    let mut signs = vec![0i8; hp.r * m];
    for i in 0..m {
        for k in 0..hp.r {
            signs[i * hp.r + k] = if skip[i] {
                sgn(encoded[(i, k)])
            } else {
                sgn(trained[(k, compact[i])])
            };
        }
    }
    let items = CodeMatrix::from_signs(hp.r, m, &signs)?;
    Ok((out, items))
}
