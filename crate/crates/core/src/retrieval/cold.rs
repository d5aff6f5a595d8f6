use ndarray::{ArrayView1, ArrayView2};

use crate::dae::DaeParams;
use crate::model::{sgn, CodeMatrix};
use crate::{DphError, Result};

/// `sgn(encode(c))`: the code of an item known only by its content.
pub fn encode_cold_item(dae: &DaeParams, content: ArrayView1<'_, f64>) -> Result<Vec<i8>> {
    Ok(dae.encode(content)?.iter().map(|&v| sgn(v)).collect())
}

/// Replaces the codes of `cold` items in `items` with their content codes.
pub fn encode_cold_items(
    dae: &DaeParams,
    content: ArrayView2<'_, f64>,
    items: &CodeMatrix,
    cold: &[usize],
) -> Result<CodeMatrix> {
    if items.r() != dae.code_len() || content.nrows() != items.count() {
        return Err(DphError::Dimension(format!(
            "{} codes of length {} vs {} content rows and code layer {}",
            items.count(),
            items.r(),
            content.nrows(),
            dae.code_len()
        )));
    }
    if let Some(&bad) = cold.iter().find(|&&i| i >= items.count()) {
        return Err(DphError::InvalidArgument(format!("cold item {bad} out of range")));
    }
    let mut out = items.clone();
    for &i in cold {
        let code = encode_cold_item(dae, content.row(i))?;
        for (k, s) in code.into_iter().enumerate() {
            out.set(i, k, s);
        }
    }
    Ok(out)
}
