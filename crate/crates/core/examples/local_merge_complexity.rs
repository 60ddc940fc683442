//! Cost of banded similarity as the locality k grows.

use tokmerge::merge::{band_size, similarity_banded};
use tokmerge::{Metric, TokenMatrix};

fn main() -> tokmerge::Result<()> {
    let (t, d) = (512, 16);
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|i| (0..d).map(|j| ((i * 7 + j * 3) as f64 * 0.01).sin()).collect())
        .collect();
    let x = TokenMatrix::from_rows(&rows)?;
    println!("{:>5} {:>10} {:>10}", "k", "evals", "predicted");
    for k in [1, 2, 4, 16, 64, t / 2] {
        let sim = similarity_banded(&x, &x.partition(), k, Metric::Cosine)?;
        println!("{k:>5} {:>10} {:>10}", sim.evaluations(), band_size(t, k));
    }
    Ok(())
}
