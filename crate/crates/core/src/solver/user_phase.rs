use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{dcd_bit, SolverState};
use crate::model::{pairwise_loss, HyperParams, InteractionSet};
use crate::{DphError, Result};

/// Item-side sums that stay fixed while user codes move.
pub(crate) struct ItemSums {
    /// `S = D 1`
    sum: DVector<f64>,
    /// `G = D D^T`
    gram: DMatrix<f64>,
}

impl ItemSums {
    pub(crate) fn new(d: &DMatrix<f64>) -> Self {
        Self {
            sum: d.column_sum(),
            gram: d * d.transpose(),
        }
    }
}

/// Running quantities for one user's bitwise descent.
///
/// With `s_i = b.d_i` over the user's positives, every pair sum in `b_hat`
/// reduces to sums over positives and the item-side `S`, `G`; a bit flip
/// updates the `s_i`, `b.P_u`, `b.S` and `G b` in `O(|I_u^+| + r)`.
struct UserScratch<'a> {
    positives: &'a [usize],
    d: &'a DMatrix<f64>,
    sums: &'a ItemSums,
    b: DVector<f64>,
    r: f64,
    p: f64,
    q: f64,
    z: f64,
    s: Vec<f64>,
    pos_sum: DVector<f64>,
    b_pos: f64,
    b_all: f64,
    gb: DVector<f64>,
}

impl<'a> UserScratch<'a> {
    fn new(
        b: DVector<f64>,
        positives: &'a [usize],
        d: &'a DMatrix<f64>,
        sums: &'a ItemSums,
        z: f64,
    ) -> Self {
        let r = b.len();
        let mut pos_sum = DVector::zeros(r);
        let s = positives
            .iter()
            .map(|&i| {
                let col = d.column(i);
                pos_sum += &col;
                b.dot(&col)
            })
            .collect();
        let p = positives.len() as f64;
        Self {
            positives,
            d,
            sums,
            r: r as f64,
            p,
            q: d.ncols() as f64 - p,
            z,
            s,
            b_pos: b.dot(&pos_sum),
            b_all: b.dot(&sums.sum),
            gb: &sums.gram * &b,
            pos_sum,
            b,
        }
    }

    /// `sum_{i+, j-} z [ (t_i - t_j)(d_ik - d_jk) - 2r (d_ik - d_jk) ] - alpha x_uk`
    /// where `t_i = b.d_i - b_k d_ik`.
    fn b_hat(&self, k: usize, alpha_x: f64) -> f64 {
        if self.z == 0.0 {
            return -alpha_x;
        }
        let bk = self.b[k];
        let (p, q) = (self.p, self.q);
        let h: f64 = self
            .positives
            .iter()
            .zip(&self.s)
            .map(|(&i, &s)| s * self.d[(k, i)])
            .sum();
        let pk = self.pos_sum[k];
        let neg_d = self.sums.sum[k] - pk;
        let pos_t_d = h - p * bk;
        let pos_t = self.b_pos - bk * pk;
        let neg_t = (self.b_all - self.b_pos) - bk * neg_d;
        let neg_t_d = self.gb[k] - h - q * bk;
        let quad = q * pos_t_d - pos_t * neg_d - pk * neg_t + p * neg_t_d;
        let lin = -2.0 * self.r * (q * pk - p * neg_d);
        self.z * (quad + lin) - alpha_x
    }

    fn set_bit(&mut self, k: usize, value: f64) {
        let delta = value - self.b[k];
        if delta == 0.0 {
            return;
        }
        for (s, &i) in self.s.iter_mut().zip(self.positives) {
            *s += delta * self.d[(k, i)];
        }
        self.b_pos += delta * self.pos_sum[k];
        self.b_all += delta * self.sums.sum[k];
        self.gb.axpy(delta, &self.sums.gram.column(k), 1.0);
        self.b[k] = value;
    }
}

fn descend_user(
    state: &SolverState,
    interactions: &InteractionSet,
    hp: &HyperParams,
    sums: &ItemSums,
    u: usize,
) -> (DVector<f64>, usize) {
    let mut scratch = UserScratch::new(
        state.b.column(u).into_owned(),
        interactions.user_positives(u),
        &state.d,
        sums,
        interactions.z(u),
    );
    let mut flips = 0;
    for _ in 0..hp.dcd_max_passes {
        let mut pass_flips = 0;
        for k in 0..state.r() {
            let hat = scratch.b_hat(k, hp.alpha * state.x[(k, u)]);
            let next = dcd_bit(hat, scratch.b[k]);
            if next != scratch.b[k] {
                scratch.set_bit(k, next);
                pass_flips += 1;
            }
        }
        flips += pass_flips;
        if pass_flips == 0 {
            break;
        }
    }
    (scratch.b, flips)
}

fn user_phase_objective(state: &SolverState, interactions: &InteractionSet, hp: &HyperParams) -> f64 {
    pairwise_loss(interactions, &state.b, &state.d) - 2.0 * hp.alpha * state.b.dot(&state.x)
}

impl SolverState {
    /// `b_hat_uk` for the current codes, through the same aggregate path
    /// the update uses.
    pub fn compute_b_hat(
        &self,
        interactions: &InteractionSet,
        hp: &HyperParams,
        u: usize,
        k: usize,
    ) -> f64 {
        let sums = ItemSums::new(&self.d);
        let scratch = UserScratch::new(
            self.b.column(u).into_owned(),
            interactions.user_positives(u),
            &self.d,
            &sums,
            interactions.z(u),
        );
        scratch.b_hat(k, hp.alpha * self.x[(k, u)])
    }

    /// One user-code phase: bitwise descent on every user (in parallel, item
    /// codes frozen). Returns the number of flipped bits.
    pub fn update_user_codes(&mut self, interactions: &InteractionSet, hp: &HyperParams) -> Result<usize> {
        let before = cfg!(debug_assertions).then(|| user_phase_objective(self, interactions, hp));
        let sums = ItemSums::new(&self.d);
        let updated: Vec<(DVector<f64>, usize)> = (0..interactions.n_users())
            .into_par_iter()
            .map(|u| descend_user(self, interactions, hp, &sums, u))
            .collect();
        let mut flips = 0;
        for (u, (code, f)) in updated.into_iter().enumerate() {
            self.b.set_column(u, &code);
            flips += f;
        }
        if let Some(before) = before {
            let after = user_phase_objective(self, interactions, hp);
            if after > before + 1e-9 * before.abs().max(1.0) {
                return Err(DphError::SolverInvariant(format!(
                    "user phase raised its objective from {before} to {after}"
                )));
            }
        }
        Ok(flips)
    }
}
