//! Library version of `tokmerge bench --r-sweep` on the bundled data.

use std::path::Path;

use tokmerge::cli::{bench, ingest_csv, RSweep};
use tokmerge::toymodels::ModelConfig;

fn main() -> tokmerge::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let cfg = ModelConfig::from_path(&dir.join("encoder.json"))?;
    let data_path = dir.join("sine.csv");
    let data = ingest_csv(&data_path)?;
    let sweep = RSweep { start: 0, end: 24, step: 6 };
    let (report, _) = bench(&cfg, &data, &data_path, Some(sweep), Path::new("report.json"))?;
    println!("{:>3} {:>8} {:>10} {:>20}", "r", "speedup", "delta L2", "tokens");
    for p in &report.points {
        println!(
            "{:>3} {:>8.3} {:>10.4} {:>20}",
            p.r.unwrap_or(0),
            p.speedup,
            p.output_delta_l2,
            format!("{:?}", p.tokens_per_layer)
        );
    }
    Ok(())
}
