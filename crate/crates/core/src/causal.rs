//! Causal merging and unmerging for decoder stacks.
//!
//! With `k = 1` only the pairs `(2i, 2i + 1)` can merge, so every merged
//! token covers one contiguous run of original positions and the output
//! remains ordered in time. Unmerging clones each token back onto the
//! positions it covers.

use crate::error::{Error, Result};
use crate::merge::{merge_apply, select_top_r, similarity_banded};
use crate::seqcore::{MergePlan, Metric, TokenMatrix};

/// Merges the `r` most similar adjacent pairs, keeping at least `q` tokens.
/// With an odd token count the most recent token never merges.
pub fn causal_merge(
    x: &TokenMatrix,
    r: usize,
    q: usize,
    metric: Metric,
) -> Result<(TokenMatrix, MergePlan)> {
    if x.len() < 2 {
        let mut plan = MergePlan::empty(1);
        plan.requested_r = r;
        return Ok((x.clone(), plan));
    }
    let sim = similarity_banded(x, &x.partition(), 1, metric)?;
    let plan = select_top_r(&sim, r, q);
    let merged = merge_apply(x, &plan)?;
    Ok((merged, plan))
}

/// Replaces every token of size `s` with `s` size-1 copies at the original
/// positions it covers. The output length is the sum of sizes.
pub fn unmerge(x: &TokenMatrix) -> Result<TokenMatrix> {
    let n = x.original_len();
    let d = x.dim();
    let mut data = vec![0.0; n * d];
    let mut seen = vec![false; n];
    for (i, origin) in x.origins().iter().enumerate() {
        if origin.width() != x.sizes()[i] {
            return Err(Error::Corruption(format!(
                "token {i} has size {} but covers {} positions",
                x.sizes()[i],
                origin.width()
            )));
        }
        for p in origin.positions() {
            if p >= n {
                return Err(Error::Corruption(format!(
                    "token {i} covers position {p}, beyond the original length {n}"
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Corruption(format!("position {p} covered twice")));
            }
            data[p * d..(p + 1) * d].copy_from_slice(x.row(i));
        }
    }
    TokenMatrix::new(data, d)
}
