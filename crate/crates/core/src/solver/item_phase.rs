use nalgebra::{DMatrix, DVector};

use super::{dcd_bit, SolverState};
use crate::model::{pairwise_loss, HyperParams, InteractionSet};
use crate::{DphError, Result};

/// D-dependent sums plus the B-only user aggregates the item update needs.
///
/// With `p_u = |I_u^+|` and `bp_u = b_u.P_u`:
/// `a1 = sum_u z_u bp_u b_u`, `a2 = sum_u z_u p_u b_u b_u^T`,
/// `a3 = sum_u z_u p_u`, `a4 = sum_u z_u p_u b_u`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ItemAggregates {
    /// `S = D 1`
    pub(crate) sum: DVector<f64>,
    /// Column `u` is `P_u`, the sum of `u`'s positive item codes.
    pub(crate) pos_sum: DMatrix<f64>,
    pub(crate) b_pos: Vec<f64>,
    pub(crate) a1: DVector<f64>,
    pub(crate) a2: DMatrix<f64>,
    pub(crate) a3: f64,
    pub(crate) a4: DVector<f64>,
}

impl ItemAggregates {
    pub(crate) fn build(interactions: &InteractionSet, b: &DMatrix<f64>, d: &DMatrix<f64>) -> Self {
        let r = b.nrows();
        let n = interactions.n_users();
        let mut pos_sum = DMatrix::zeros(r, n);
        let mut b_pos = vec![0.0; n];
        let mut a1 = DVector::zeros(r);
        let mut a2 = DMatrix::zeros(r, r);
        let mut a3 = 0.0;
        let mut a4 = DVector::zeros(r);
        for u in 0..n {
            let mut col = pos_sum.column_mut(u);
            for &i in interactions.user_positives(u) {
                col += d.column(i);
            }
            let bu = b.column(u);
            b_pos[u] = bu.dot(&col);
            let z = interactions.z(u);
            if z == 0.0 {
                continue;
            }
            let zp = z * interactions.user_positives(u).len() as f64;
            a1.axpy(z * b_pos[u], &bu, 1.0);
            a2.ger(zp, &bu, &bu, 1.0);
            a3 += zp;
            a4.axpy(zp, &bu, 1.0);
        }
        Self {
            sum: d.column_sum(),
            pos_sum,
            b_pos,
            a1,
            a2,
            a3,
            a4,
        }
    }

    pub(crate) fn max_abs_diff(&self, other: &Self) -> f64 {
        let vec_diff = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        [
            vec_diff(self.sum.as_slice(), other.sum.as_slice()),
            vec_diff(self.pos_sum.as_slice(), other.pos_sum.as_slice()),
            vec_diff(&self.b_pos, &other.b_pos),
            vec_diff(self.a1.as_slice(), other.a1.as_slice()),
            vec_diff(self.a2.as_slice(), other.a2.as_slice()),
            (self.a3 - other.a3).abs(),
            vec_diff(self.a4.as_slice(), other.a4.as_slice()),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Per-item running values over `U_i^+`.
struct ItemScratch<'a> {
    item: usize,
    users: &'a [usize],
    /// `b_u.d_i`
    w: Vec<f64>,
    /// `b_u.S - bp_u`, i.e. `b_u` dotted with the sum of `u`'s negatives;
    /// unchanged by flips of this item's own bits.
    neg_dot: Vec<f64>,
    /// `A2 d_i`
    a2d: DVector<f64>,
    code: DVector<f64>,
}

impl<'a> ItemScratch<'a> {
    fn new(
        item: usize,
        interactions: &'a InteractionSet,
        b: &DMatrix<f64>,
        d: &DMatrix<f64>,
        agg: &ItemAggregates,
    ) -> Self {
        let users = interactions.item_positives(item);
        let code = d.column(item).into_owned();
        let w = users.iter().map(|&u| b.column(u).dot(&code)).collect();
        let neg_dot = users
            .iter()
            .map(|&u| b.column(u).dot(&agg.sum) - agg.b_pos[u])
            .collect();
        Self {
            item,
            users,
            w,
            neg_dot,
            a2d: &agg.a2 * &code,
            code,
        }
    }

    fn d_hat(
        &self,
        k: usize,
        interactions: &InteractionSet,
        b: &DMatrix<f64>,
        agg: &ItemAggregates,
        content_term: f64,
    ) -> f64 {
        let r2 = 2.0 * b.nrows() as f64;
        let m = interactions.n_items() as f64;
        let dk = self.code[k];
        let (mut own, mut own_as_negative) = (0.0, 0.0);
        for (idx, &u) in self.users.iter().enumerate() {
            let z = interactions.z(u);
            if z == 0.0 {
                continue;
            }
            let bk = b[(k, u)];
            let p = interactions.user_positives(u).len() as f64;
            let t = self.w[idx] - bk * dk;
            own += z * bk * ((m - p) * (t - r2) - self.neg_dot[idx]);
            own_as_negative += z * bk * (agg.b_pos[u] - p * (t + r2));
        }
        let global = agg.a1[k] - self.a2d[k] + agg.a3 * dk - r2 * agg.a4[k];
        own - (global - own_as_negative) - content_term
    }

    fn set_bit(
        &mut self,
        k: usize,
        value: f64,
        interactions: &InteractionSet,
        b: &DMatrix<f64>,
        agg: &mut ItemAggregates,
    ) {
        let delta = value - self.code[k];
        if delta == 0.0 {
            return;
        }
        agg.sum[k] += delta;
        for (idx, &u) in self.users.iter().enumerate() {
            let bu = b.column(u);
            let step = bu[k] * delta;
            agg.pos_sum[(k, u)] += delta;
            agg.b_pos[u] += step;
            self.w[idx] += step;
            let z = interactions.z(u);
            if z != 0.0 {
                agg.a1.axpy(z * step, &bu, 1.0);
            }
        }
        self.a2d.axpy(delta, &agg.a2.column(k), 1.0);
        self.code[k] = value;
    }
}

fn item_phase_objective(state: &SolverState, interactions: &InteractionSet, hp: &HyperParams) -> f64 {
    pairwise_loss(interactions, &state.b, &state.d) + hp.lambda * (&state.d - &state.f).norm_squared()
        - 2.0 * hp.beta * state.d.dot(&state.y)
}

impl SolverState {
    /// `d_hat_ik` for the current codes via the cached-aggregate path.
    pub fn compute_d_hat(
        &self,
        interactions: &InteractionSet,
        hp: &HyperParams,
        i: usize,
        k: usize,
    ) -> f64 {
        let agg = ItemAggregates::build(interactions, &self.b, &self.d);
        let scratch = ItemScratch::new(i, interactions, &self.b, &self.d, &agg);
        let content = hp.lambda * self.f[(k, i)] + hp.beta * self.y[(k, i)];
        scratch.d_hat(k, interactions, &self.b, &agg, content)
    }

    /// One item-code phase: bitwise descent on items in ascending id order,
    /// keeping the D-dependent aggregates current after every flip.
    pub fn update_item_codes(&mut self, interactions: &InteractionSet, hp: &HyperParams) -> Result<usize> {
        let before = cfg!(debug_assertions).then(|| item_phase_objective(self, interactions, hp));
        let mut agg = ItemAggregates::build(interactions, &self.b, &self.d);
        let mut flips = 0;
        for i in 0..interactions.n_items() {
            let mut scratch = ItemScratch::new(i, interactions, &self.b, &self.d, &agg);
            for _ in 0..hp.dcd_max_passes {
                let mut pass_flips = 0;
                for k in 0..self.r() {
                    let content = hp.lambda * self.f[(k, i)] + hp.beta * self.y[(k, i)];
                    let hat = scratch.d_hat(k, interactions, &self.b, &agg, content);
                    let next = dcd_bit(hat, scratch.code[k]);
                    if next != scratch.code[k] {
                        scratch.set_bit(k, next, interactions, &self.b, &mut agg);
                        pass_flips += 1;
                    }
                }
                flips += pass_flips;
                if pass_flips == 0 {
                    break;
                }
            }
            self.d.set_column(scratch.item, &scratch.code);
        }
        if let Some(before) = before {
            let fresh = ItemAggregates::build(interactions, &self.b, &self.d);
            let drift = agg.max_abs_diff(&fresh);
            if drift > 1e-6 * (1.0 + fresh.a2.amax()) {
                return Err(DphError::SolverInvariant(format!(
                    "item aggregates drifted by {drift} during the phase"
                )));
            }
            let after = item_phase_objective(self, interactions, hp);
            if after > before + 1e-9 * before.abs().max(1.0) {
                return Err(DphError::SolverInvariant(format!(
                    "item phase raised its objective from {before} to {after}"
                )));
            }
        }
        Ok(flips)
    }
}
