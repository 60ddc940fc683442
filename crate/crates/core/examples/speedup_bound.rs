//! Mixer speed-up from halving the tokens at every layer, against its limit.

use tokmerge::toymodels::{speedup_bound, FlopLedger, FlopModel};

fn main() -> tokmerge::Result<()> {
    let model = FlopModel::attention(64, 64);
    let t0 = 4096;
    println!("{:>2} {:>10} {:>10}", "L", "measured", "bound");
    for layers in 1..=8u32 {
        let mut ledger = FlopLedger::new(model);
        let mut t = t0;
        for _ in 0..layers {
            ledger.record(t0, t, t / 2, 0, 0);
            t /= 2;
        }
        println!("{layers:>2} {:>10.4} {:>10.4}", ledger.mixer_speedup(), speedup_bound(layers)?);
    }
    println!("the bound grows like 3L/4");
    Ok(())
}
