use nalgebra::DMatrix;

/// Real-valued relaxation of a code matrix: `r` rows, one column per entity.
///
/// After projection it satisfies `X 1 = 0` and `X X^T = count * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelegateMatrix {
    values: DMatrix<f64>,
}

impl DelegateMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn r(&self) -> usize {
        self.values.nrows()
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Largest row sum, relative to `sqrt(count)` (the row norm).
    pub fn row_sum_residual(&self) -> f64 {
        let scale = (self.count() as f64).sqrt().max(1.0);
        self.values
            .row_iter()
            .map(|row| row.sum().abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// `max |X X^T - count * I|` relative to `count`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.count() as f64;
        let gram = &self.values * self.values.transpose();
        let mut worst = 0.0f64;
        for a in 0..self.r() {
            for b in 0..self.r() {
                let target = if a == b { n } else { 0.0 };
                worst = worst.max((gram[(a, b)] - target).abs());
            }
        }
        worst / n.max(1.0)
    }
}
