//! Follows every original position through a three-layer merge stack.

use tokmerge::merge::merge_with_schedule;
use tokmerge::{LayerSchedule, Locality, MergeTrace, TokenMatrix};

fn main() -> tokmerge::Result<()> {
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i / 3) as f64, 1.0 + (i % 2) as f64 * 0.01]).collect();
    let mut x = TokenMatrix::from_rows(&rows)?;
    let mut trace = MergeTrace::identity(x.len());
    for layer in 0..3 {
        let step = merge_with_schedule(&x, &LayerSchedule::fixed(2, Locality::Band(2)))?;
        trace = trace.compose(&step.plan)?;
        x = step.tokens;
        println!("layer {layer}: {} tokens, map {:?}", x.len(), trace.final_map);
    }
    for (i, pre) in trace.preimages().iter().enumerate() {
        println!("surviving token {i} <- {pre:?}");
    }
    println!("{}", trace.to_json()?);
    Ok(())
}
