use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{CodeMatrix, DelegateMatrix};
use crate::{DphError, Result};

/// Singular values at or below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Maximizes `tr(M^T X)` subject to `X 1 = 0` and `X X^T = count I`.
///
/// `seed` drives the random completion vectors used when the centered code
/// matrix is rank deficient.
pub fn project_delegate(codes: &CodeMatrix, seed: u64) -> Result<DelegateMatrix> {
    project_dense(&codes.to_dense(), seed).map(DelegateMatrix::new)
}

pub(crate) fn project_dense(m: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>> {
    let (r, count) = m.shape();
    if count <= r {
        return Err(DphError::Infeasible(format!(
            "{count} codes cannot carry a centered delegate with {r} orthogonal rows"
        )));
    }
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    // Only U and the singular values are taken from the SVD; the right
    // vectors are rebuilt as `M^T u / sigma`, which keeps them exactly
    // centered even when the decomposition's own V drifts on
    // rank-deficient input.
    let svd = centered.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| sigma_max > 0.0 && svd.singular_values[i] > RANK_TOLERANCE * sigma_max)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left: Vec<DVector<f64>> = kept.iter().map(|&i| u.column(i).into_owned()).collect();
    complete_basis(&mut left, &[], r, r, &mut rng);
    let ones = DVector::from_element(count, 1.0 / (count as f64).sqrt());
    let mut right: Vec<DVector<f64>> = Vec::with_capacity(r);
    for &i in &kept {
        let mut v = centered.tr_mul(&u.column(i)) / svd.singular_values[i];
        orthogonalize(&mut v, std::slice::from_ref(&ones), &right);
        right.push(v.normalize());
    }
    complete_basis(&mut right, &[ones], r, count, &mut rng);

    let left = DMatrix::from_columns(&left);
    let right = DMatrix::from_columns(&right);
    Ok((count as f64).sqrt() * left * right.transpose())
}

/// Extends orthonormal `basis` to `target` vectors in `R^dim`, each also
/// orthogonal to `fixed`, by Gram-Schmidt (run twice) on Gaussian draws.
fn complete_basis(
    basis: &mut Vec<DVector<f64>>,
    fixed: &[DVector<f64>],
    target: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) {
    while basis.len() < target {
        let mut v = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        orthogonalize(&mut v, fixed, basis);
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
}

/// Two rounds of Gram-Schmidt against `fixed` then `basis`.
fn orthogonalize(v: &mut DVector<f64>, fixed: &[DVector<f64>], basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for e in fixed.iter().chain(basis) {
            let c = e.dot(v);
            v.axpy(-c, e, 1.0);
        }
    }
}
