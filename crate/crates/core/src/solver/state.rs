use nalgebra::DMatrix;
use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dae::DaeParams;
use crate::model::{dense_objective, sgn, CodeMatrix, DelegateMatrix, HyperParams, InteractionSet};
use crate::{DphError, Result};

/// Everything the alternating loop updates.
///
/// Codes are held as dense `±1.0` matrices (`r x n` users, `r x m` items) so
/// the inner loops run on plain floats; they never hold anything but `±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub(crate) b: DMatrix<f64>,
    pub(crate) d: DMatrix<f64>,
    pub(crate) x: DMatrix<f64>,
    pub(crate) y: DMatrix<f64>,
    /// Encoder outputs, `r x m`.
    pub(crate) f: DMatrix<f64>,
    pub loss_trace: Vec<f64>,
}

fn to_sign_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| f64::from(sgn(v)))
}

impl SolverState {
    /// Gaussian delegates, `B = sgn(X)`, and item codes from the signs of the
    /// encoded content.
    pub fn initialize(
        interactions: &InteractionSet,
        content: ArrayView2<'_, f64>,
        dae: &DaeParams,
        hp: &HyperParams,
        seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        if content.nrows() != interactions.n_items() {
            return Err(DphError::Dimension(format!(
                "content has {} rows, interactions have {} items",
                content.nrows(),
                interactions.n_items()
            )));
        }
        if dae.code_len() != hp.r {
            return Err(DphError::Dimension(format!(
                "encoder code layer has {} units, r = {}",
                dae.code_len(),
                hp.r
            )));
        }
        let (r, n, m) = (hp.r, interactions.n_users(), interactions.n_items());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(r, n, |_, _| StandardNormal.sample(&mut rng));
        let y = DMatrix::from_fn(r, m, |_, _| StandardNormal.sample(&mut rng));
        let f = encode_items(dae, content)?;
        Ok(Self {
            b: to_sign_matrix(&x),
            d: to_sign_matrix(&f),
            x,
            y,
            f,
            loss_trace: Vec::new(),
        })
    }

    /// Builds a state from explicit parts (codes are re-signed).
    pub fn from_parts(
        users: &CodeMatrix,
        items: &CodeMatrix,
        user_delegate: DMatrix<f64>,
        item_delegate: DMatrix<f64>,
        embeddings: DMatrix<f64>,
    ) -> Result<Self> {
        let r = users.r();
        if items.r() != r
            || user_delegate.shape() != (r, users.count())
            || item_delegate.shape() != (r, items.count())
            || embeddings.shape() != (r, items.count())
        {
            return Err(DphError::Dimension("inconsistent solver state parts".into()));
        }
        Ok(Self {
            b: users.to_dense(),
            d: items.to_dense(),
            x: user_delegate,
            y: item_delegate,
            f: embeddings,
            loss_trace: Vec::new(),
        })
    }

    pub fn r(&self) -> usize {
        self.b.nrows()
    }

    pub fn users(&self) -> CodeMatrix {
        CodeMatrix::from_dense(&self.b)
    }

    pub fn items(&self) -> CodeMatrix {
        CodeMatrix::from_dense(&self.d)
    }

    pub fn user_delegate(&self) -> DelegateMatrix {
        DelegateMatrix::new(self.x.clone())
    }

    pub fn item_delegate(&self) -> DelegateMatrix {
        DelegateMatrix::new(self.y.clone())
    }

    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn user_signs(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn item_signs(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Sets one user bit. Nothing is cached between phases, so the state
    /// stays consistent.
    pub fn set_user_bit(&mut self, u: usize, k: usize, sign: i8) {
        self.b[(k, u)] = f64::from(sgn(f64::from(sign)));
    }

    pub fn set_item_bit(&mut self, i: usize, k: usize, sign: i8) {
        self.d[(k, i)] = f64::from(sgn(f64::from(sign)));
    }

    pub fn refresh_embeddings(&mut self, dae: &DaeParams, content: ArrayView2<'_, f64>) -> Result<()> {
        self.f = encode_items(dae, content)?;
        Ok(())
    }

    /// Full objective: pairwise + content - delegate traces.
    pub fn objective(&self, interactions: &InteractionSet, hp: &HyperParams) -> f64 {
        dense_objective(interactions, &self.b, &self.d, &self.x, &self.y, &self.f, hp)
    }
}

/// Encoder outputs as an `r x m` matrix.
pub(crate) fn encode_items(dae: &DaeParams, content: ArrayView2<'_, f64>) -> Result<DMatrix<f64>> {
    let encoded = dae.encode_batch(content)?;
    let (m, r) = encoded.dim();
    Ok(DMatrix::from_fn(r, m, |k, i| encoded[(i, k)]))
}
