//! The same edges applied as merges and as prunes.

use tokmerge::merge::{expand_pruned, merge_apply, prune_apply, select_top_r, similarity_banded};
use tokmerge::causal::unmerge;
use tokmerge::{Metric, TokenMatrix};

fn main() -> tokmerge::Result<()> {
    let signal: Vec<f64> = (0..32).map(|i| (i as f64 / 3.0).sin() + 0.2 * (i as f64 * 1.7).cos()).collect();
    let x = TokenMatrix::from_rows(&signal.iter().map(|&v| vec![v, 1.0]).collect::<Vec<_>>())?;
    let sim = similarity_banded(&x, &x.partition(), 1, Metric::L2)?;

    for r in [4, 8, 12] {
        let plan = select_top_r(&sim, r, 1);
        let merged = unmerge(&merge_apply(&x, &plan)?)?;
        let pruned = prune_apply(&x, &plan)?;
        let restored = expand_pruned(&pruned.tokens, &pruned.orphaned, x.len())?;
        let err = |v: &[f64]| -> f64 {
            v.chunks(2).zip(&signal).map(|(a, b)| (a[0] - b).powi(2)).sum::<f64>().sqrt()
        };
        println!("r = {r:>2}: merge error {:.4}, prune error {:.4}", err(merged.as_slice()), err(&restored));
    }
    Ok(())
}
