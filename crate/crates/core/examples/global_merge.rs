//! Global bipartite merging on a handful of tokens, with provenance.

use tokmerge::merge::{merge_apply, select_top_r, similarity_banded};
use tokmerge::{Metric, TokenMatrix};

fn main() -> tokmerge::Result<()> {
    let x = TokenMatrix::from_rows(&[
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.9, 0.1],
        vec![1.0, 0.05],
        vec![0.1, 1.0],
        vec![0.0, 0.9],
    ])?;
    let t = x.len();
    let sim = similarity_banded(&x, &x.partition(), t / 2, Metric::Cosine)?;
    println!("{} similarity evaluations for t = {t}", sim.evaluations());

    let plan = select_top_r(&sim, 2, 1);
    for e in &plan.edges {
        println!("merge A-position {} into B-position {} (cos {:.3})", e.a, e.b, e.similarity);
    }
    let y = merge_apply(&x, &plan)?;
    for (i, row) in y.rows().enumerate() {
        println!("token {i}: size {} origin {:?} value {row:.3?}", y.sizes()[i], y.origins()[i].spans());
    }
    Ok(())
}
