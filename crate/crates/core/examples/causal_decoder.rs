//! Adjacent-only merging inside a causal decoder, then unmerging the
//! forecast tokens back to the horizon.

use tokmerge::causal::{causal_merge, unmerge};
use tokmerge::toymodels::{tokenize_timestep, Decoder, ModelConfig};
use tokmerge::{LayerSchedule, Metric, Series};

fn main() -> tokmerge::Result<()> {
    let mut cfg = ModelConfig::new(1, 8, 16, 2, 32, 1, 12);
    cfg.seed = 4;
    let past = Series::univariate((0..cfg.m).map(|i| (i as f64 / 4.0).sin()).collect());
    let future = Series::univariate(vec![0.0; cfg.p]);
    let enc = tokenize_timestep(&past, cfg.d, cfg.seed)?;
    let dec_in = tokenize_timestep(&future, cfg.d, cfg.seed)?;

    let (merged, plan) = causal_merge(&dec_in, 3, 1, Metric::Cosine)?;
    println!("adjacent merge: {} -> {} tokens, pairs {:?}", dec_in.len(), merged.len(),
        plan.edges.iter().map(|e| (e.a, e.b)).collect::<Vec<_>>());
    println!("unmerged back to {} positions", unmerge(&merged)?.len());

    let decoder = Decoder::new(&cfg, 1);
    let reference = decoder.forward_reference(&dec_in, &enc)?;
    let out = decoder.forward(&dec_in, &enc, &[LayerSchedule::causal(3)])?;
    let delta: f64 = out.forecast.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    println!("horizon {} forecast, L2 change from merging {delta:.4}", out.horizon());
    Ok(())
}
