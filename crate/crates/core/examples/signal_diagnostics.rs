//! Spectral entropy, THD and redundancy for a few textbook signals.

use std::f64::consts::PI;

use tokmerge::signals::{describe, gaussian_lowpass, spectral_entropy};

fn main() -> tokmerge::Result<()> {
    let m = 512;
    let w = |i: usize| 2.0 * PI * 8.0 * i as f64 / m as f64;
    let signals: Vec<(&str, Vec<f64>)> = vec![
        ("sine", (0..m).map(|i| w(i).sin()).collect()),
        ("square", (0..m).map(|i| w(i).sin().signum()).collect()),
        ("sine + noise", (0..m).map(|i| w(i).sin() + 0.4 * ((i * i) as f64 * 0.37).sin()).collect()),
    ];
    for (name, s) in &signals {
        let r = describe(s, 2.0)?;
        println!(
            "{name:<13} entropy {:.3}  thd {}  lowpass entropy {:.3}",
            r.spectral_entropy,
            r.thd.map_or("n/a".to_string(), |v| format!("{v:.1}%")),
            r.lowpass_spectral_entropy,
        );
    }
    let noisy = &signals[2].1;
    for sigma in [0.5, 2.0, 8.0] {
        println!("sigma {sigma}: entropy {:.3}", spectral_entropy(&gaussian_lowpass(noisy, sigma)?)?);
    }
    Ok(())
}
