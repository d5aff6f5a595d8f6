use dph_core::model::{CodeMatrix, HyperParams, InteractionSet};
use dph_core::solver::{project_delegate, SolverState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    set: InteractionSet,
    state: SolverState,
}

fn random_signs(rng: &mut ChaCha8Rng, len: usize) -> Vec<i8> {
    (0..len).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
}

fn random_instance(seed: u64, n: usize, m: usize, r: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for u in 0..n {
        for i in 0..m {
            if rng.random_bool(0.35) {
                pairs.push((u, i));
            }
        }
    }
    let set = InteractionSet::from_pairs(n, m, pairs).unwrap();
    let users = CodeMatrix::from_signs(r, n, &random_signs(&mut rng, r * n)).unwrap();
    let items = CodeMatrix::from_signs(r, m, &random_signs(&mut rng, r * m)).unwrap();
    let mut gauss = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let x = gauss(r, n);
    let y = gauss(r, m);
    let f = gauss(r, m);
    let state = SolverState::from_parts(&users, &items, x, y, f).unwrap();
    Instance { set, state }
}

fn hp(r: usize) -> HyperParams {
    HyperParams {
        r,
        alpha: 0.3,
        beta: 0.2,
        lambda: 0.7,
        ..HyperParams::default()
    }
}

/// Objective by enumerating every (user, positive, negative) triple.
fn naive_objective(set: &InteractionSet, b: &DMatrix<f64>, d: &DMatrix<f64>, st: &SolverState, hp: &HyperParams) -> f64 {
    let r = b.nrows() as f64;
    let mut pair = 0.0;
    for u in 0..set.n_users() {
        let pos = set.user_positives(u);
        let q = set.n_items() - pos.len();
        if pos.is_empty() || q == 0 {
            continue;
        }
        let z = 1.0 / (set.n_users() as f64 * pos.len() as f64 * q as f64);
        for &i in pos {
            for j in (0..set.n_items()).filter(|j| !set.contains(u, *j)) {
                let diff: f64 = (0..b.nrows()).map(|k| b[(k, u)] * (d[(k, i)] - d[(k, j)])).sum();
                pair += z * (2.0 * r - diff).powi(2);
            }
        }
    }
    let content: f64 = (d - st.embeddings()).norm_squared();
    let xs = st.user_delegate();
    let ys = st.item_delegate();
    pair + hp.lambda * content - 2.0 * hp.alpha * b.dot(xs.values()) - 2.0 * hp.beta * d.dot(ys.values())
}

/// The objective is affine in any one bit: `const + 2 * hat * bit`.
fn slope_b(inst: &Instance, hp: &HyperParams, u: usize, k: usize) -> f64 {
    let st = &inst.state;
    let mut b = st.user_signs().clone();
    b[(k, u)] = 1.0;
    let up = naive_objective(&inst.set, &b, st.item_signs(), st, hp);
    b[(k, u)] = -1.0;
    let down = naive_objective(&inst.set, &b, st.item_signs(), st, hp);
    (up - down) / 4.0
}

fn slope_d(inst: &Instance, hp: &HyperParams, i: usize, k: usize) -> f64 {
    let st = &inst.state;
    let mut d = st.item_signs().clone();
    d[(k, i)] = 1.0;
    let up = naive_objective(&inst.set, st.user_signs(), &d, st, hp);
    d[(k, i)] = -1.0;
    let down = naive_objective(&inst.set, st.user_signs(), &d, st, hp);
    (up - down) / 4.0
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn b_hat_matches_triple_enumeration() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (n, m, r) = (rng.random_range(1..=8), rng.random_range(2..=8), rng.random_range(1..=8));
        let inst = random_instance(seed, n, m, r);
        let hp = hp(r);
        for u in 0..n {
            for k in 0..r {
                let fast = inst.state.compute_b_hat(&inst.set, &hp, u, k);
                let slow = slope_b(&inst, &hp, u, k);
                assert!(close(fast, slow), "seed {seed} u {u} k {k}: {fast} vs {slow}");
            }
        }
    }
}

#[test]
fn d_hat_matches_triple_enumeration() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let (n, m, r) = (rng.random_range(1..=8), rng.random_range(2..=8), rng.random_range(1..=8));
        let inst = random_instance(seed, n, m, r);
        let hp = hp(r);
        for i in 0..m {
            for k in 0..r {
                let fast = inst.state.compute_d_hat(&inst.set, &hp, i, k);
                let slow = slope_d(&inst, &hp, i, k);
                assert!(close(fast, slow), "seed {seed} i {i} k {k}: {fast} vs {slow}");
            }
        }
    }
}

#[test]
fn b_hat_hand_example() {
    // one user, positive 0, negative 1, r = 2, alpha = 0
    let set = InteractionSet::from_pairs(1, 2, [(0, 0)]).unwrap();
    let users = CodeMatrix::from_signs(2, 1, &[1, -1]).unwrap();
    let items = CodeMatrix::from_signs(2, 2, &[1, 1, -1, 1]).unwrap();
    let z = DMatrix::zeros(2, 1);
    let state = SolverState::from_parts(&users, &items, z, DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
    let hp = HyperParams { r: 2, alpha: 0.0, ..HyperParams::default() };
    // k = 0: other bit (k=1) has d_i - d_j = 0, so only -2r(d_i0 - d_j0) = -4 * 2 = -8
    assert_eq!(state.compute_b_hat(&set, &hp, 0, 0), -8.0);
    // k = 1: (d_i0 - d_j0) b_0 (d_i1 - d_j1) - 2r (d_i1 - d_j1) = 0
    assert_eq!(state.compute_b_hat(&set, &hp, 0, 1), 0.0);
}

#[test]
fn identical_items_leave_only_the_delegate_term() {
    let set = InteractionSet::from_pairs(2, 3, [(0, 0), (1, 2)]).unwrap();
    let users = CodeMatrix::from_signs(3, 2, &[1, -1, 1, -1, -1, 1]).unwrap();
    let items = CodeMatrix::from_signs(3, 3, &[1, -1, -1, 1, -1, -1, 1, -1, -1]).unwrap();
    let x = DMatrix::from_row_slice(3, 2, &[0.5, -1.0, 2.0, 0.25, -0.75, 1.5]);
    let state = SolverState::from_parts(&users, &items, x.clone(), DMatrix::zeros(3, 3), DMatrix::zeros(3, 3)).unwrap();
    let hp = HyperParams { r: 3, alpha: 0.4, ..HyperParams::default() };
    for u in 0..2 {
        for k in 0..3 {
            assert_eq!(state.compute_b_hat(&set, &hp, u, k), -0.4 * x[(k, u)]);
        }
    }
}

#[test]
fn item_without_interactions_matches_oracle() {
    let mut inst = random_instance(7, 5, 6, 4);
    let pairs: Vec<_> = inst.set.pairs().filter(|&(_, i)| i != 2).collect();
    inst.set = InteractionSet::from_pairs(5, 6, pairs).unwrap();
    let hp = HyperParams { lambda: 0.0, beta: 0.0, ..hp(4) };
    for k in 0..4 {
        let fast = inst.state.compute_d_hat(&inst.set, &hp, 2, k);
        assert!(close(fast, slope_d(&inst, &hp, 2, k)));
    }
}

#[test]
fn large_lambda_makes_codes_follow_content() {
    let inst = random_instance(3, 4, 6, 5);
    let empty = InteractionSet::from_pairs(4, 6, []).unwrap();
    let hp = HyperParams { lambda: 1e6, beta: 0.0, ..hp(5) };
    let f = inst.state.embeddings().clone();
    for i in 0..6 {
        for k in 0..5 {
            assert_eq!(inst.state.compute_d_hat(&empty, &hp, i, k), -1e6 * f[(k, i)]);
        }
    }
    let mut state = inst.state.clone();
    state.update_item_codes(&inst.set, &hp).unwrap();
    assert_eq!(state.item_signs(), &f.map(|v| if v >= 0.0 { 1.0 } else { -1.0 }));
}

/// Exhaustive comparison of a DCD fixed point against all `2^r` codes for
/// one free code vector.
fn exhaustive_rank(values: &[f64], reached: f64) -> (f64, bool) {
    let tol = 1e-9 * reached.abs().max(1.0);
    let no_better = values.iter().filter(|&&v| v >= reached - tol).count();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (no_better as f64 / values.len() as f64, reached <= min + tol)
}

fn all_codes(r: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1u32 << r).map(move |mask| (0..r).map(|k| if mask >> k & 1 == 1 { 1.0 } else { -1.0 }).collect())
}

#[test]
fn user_dcd_against_exhaustive_search() {
    let mut optimal = 0;
    for seed in 0..50 {
        let r = 3 + (seed as usize % 6);
        let mut inst = random_instance(500 + seed, 3, 8, r);
        let hp = hp(r);
        inst.state.update_user_codes(&inst.set, &hp).unwrap();
        let st = &inst.state;
        let reached = naive_objective(&inst.set, st.user_signs(), st.item_signs(), st, &hp);
        let values: Vec<f64> = all_codes(r)
            .map(|code| {
                let mut b = st.user_signs().clone();
                b.column_mut(0).copy_from_slice(&code);
                naive_objective(&inst.set, &b, st.item_signs(), st, &hp)
            })
            .collect();
        let (share, is_min) = exhaustive_rank(&values, reached);
        assert!(share >= 0.95, "seed {seed}: beats only {share}");
        optimal += usize::from(is_min);
    }
    assert!(optimal >= 40, "exact minimum in {optimal} / 50");
}

#[test]
fn item_dcd_against_exhaustive_search() {
    let mut optimal = 0;
    for seed in 0..50 {
        let r = 3 + (seed as usize % 6);
        let mut inst = random_instance(900 + seed, 5, 7, r);
        let hp = hp(r);
        inst.state.update_item_codes(&inst.set, &hp).unwrap();
        let st = &inst.state;
        let last = 6;
        let reached = naive_objective(&inst.set, st.user_signs(), st.item_signs(), st, &hp);
        let values: Vec<f64> = all_codes(r)
            .map(|code| {
                let mut d = st.item_signs().clone();
                d.column_mut(last).copy_from_slice(&code);
                naive_objective(&inst.set, st.user_signs(), &d, st, &hp)
            })
            .collect();
        let (share, is_min) = exhaustive_rank(&values, reached);
        assert!(share >= 0.95, "seed {seed}: beats only {share}");
        optimal += usize::from(is_min);
    }
    assert!(optimal >= 40, "exact minimum in {optimal} / 50");
}

#[test]
fn phases_never_raise_the_objective() {
    for seed in 0..20 {
        let mut inst = random_instance(3000 + seed, 6, 8, 6);
        let hp = hp(6);
        let st = &inst.state;
        let before = naive_objective(&inst.set, st.user_signs(), st.item_signs(), st, &hp);
        inst.state.update_user_codes(&inst.set, &hp).unwrap();
        let st = &inst.state;
        let mid = naive_objective(&inst.set, st.user_signs(), st.item_signs(), st, &hp);
        inst.state.update_item_codes(&inst.set, &hp).unwrap();
        let st = &inst.state;
        let after = naive_objective(&inst.set, st.user_signs(), st.item_signs(), st, &hp);
        assert!(mid <= before + 1e-9 && after <= mid + 1e-9, "{before} {mid} {after}");
        assert!(st.user_signs().iter().chain(st.item_signs().iter()).all(|v| v.abs() == 1.0));
    }
}

/// Polar factor through the `r x r` eigendecomposition, independent of the
/// SVD used by the solver.
fn feasible_projection(z: &DMatrix<f64>) -> DMatrix<f64> {
    let c = z.ncols() as f64;
    let mut centered = z.clone();
    for mut row in centered.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    let eig = (&centered * centered.transpose()).symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    c.sqrt() * &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * centered
}

fn projected_gradient_trace(m: &DMatrix<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = feasible_projection(&DMatrix::from_fn(m.nrows(), m.ncols(), |_, _| rng.random_range(-1.0..1.0)));
    for _ in 0..1000 {
        x = feasible_projection(&(&x + 0.05 * m));
    }
    m.dot(&x)
}

#[test]
fn projection_satisfies_constraints_and_maximizes_trace() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = (6, 20);
        let mut signs = random_signs(&mut rng, r * c);
        if seed % 2 == 0 {
            // duplicate codes make the centered matrix rank deficient
            let first: Vec<i8> = signs[..r].to_vec();
            for code in signs.chunks_mut(r).skip(1).step_by(2) {
                code.copy_from_slice(&first);
            }
            for code in signs.chunks_mut(r).skip(2).step_by(2) {
                code.iter_mut().zip(&first).for_each(|(s, f)| *s = -f);
            }
        }
        let codes = CodeMatrix::from_signs(r, c, &signs).unwrap();
        let x = project_delegate(&codes, seed).unwrap();
        assert!(x.row_sum_residual() < 1e-9, "seed {seed}: {}", x.row_sum_residual());
        assert!(x.orthogonality_residual() < 1e-6);
        let m = codes.to_dense();
        let ours = m.dot(x.values());
        let oracle = projected_gradient_trace(&m, seed + 77);
        assert!((ours - oracle).abs() <= 1e-3 * oracle.abs(), "seed {seed}: {ours} vs {oracle}");
    }
}

#[test]
fn projection_rejects_too_few_codes() {
    let codes = CodeMatrix::new(8, 8);
    assert!(project_delegate(&codes, 0).is_err());
}
