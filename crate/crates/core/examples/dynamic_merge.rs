//! Threshold-driven merge counts: redundant batches merge more.

use tokmerge::merge::dynamic_r;
use tokmerge::{Locality, Metric, TokenMatrix};

fn batch(period: f64, noise: f64) -> Vec<TokenMatrix> {
    (0..4)
        .map(|b| {
            let rows: Vec<Vec<f64>> = (0..64)
                .map(|i| {
                    let phase = i as f64 / period;
                    let jitter = noise * ((i * 31 + b * 17) as f64).sin();
                    vec![phase.sin() + jitter, phase.cos() - jitter, 1.0]
                })
                .collect();
            TokenMatrix::from_rows(&rows).unwrap()
        })
        .collect()
}

fn main() -> tokmerge::Result<()> {
    for (label, period, noise) in [("slow, clean", 20.0, 0.0), ("fast, noisy", 1.3, 0.8)] {
        let b = batch(period, noise);
        for tau in [0.99, 0.9, 0.5] {
            let r = dynamic_r(&b, tau, Locality::Band(1), 1, Metric::Cosine)?;
            println!("{label:<12} tau {tau:<4} -> r = {r}");
        }
    }
    Ok(())
}
