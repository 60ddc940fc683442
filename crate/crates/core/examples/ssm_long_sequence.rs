//! Gated long-convolution stack on a long sequence, with adjacent merging.

use std::time::Instant;

use tokmerge::toymodels::{tokenize_timestep, MergeHook, ModelConfig, SequenceModel};
use tokmerge::{LayerSchedule, Locality, Series};

fn main() -> tokmerge::Result<()> {
    let m = 8192;
    let mut cfg = ModelConfig::new(2, 8, 16, 1, m, 1, 16);
    cfg.merge_hook = MergeHook::AfterOperator;
    let series = Series::univariate((0..m).map(|i| (i as f64 / 50.0).sin()).collect());
    let x = tokenize_timestep(&series, cfg.d, cfg.seed)?;
    let model = SequenceModel::from_config(&cfg)?;

    for r in [0, m / 4] {
        let start = Instant::now();
        let out = model.forward(&x, &[LayerSchedule::fixed(r, Locality::Band(1))])?;
        println!(
            "r = {r:>5}: tokens {:?}, speed-up {:.3}, {:.2} s",
            out.tokens_per_layer(),
            out.ledger.speedup(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
