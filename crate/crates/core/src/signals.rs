//! Spectral diagnostics for deciding how much a series will profit from
//! merging: spectral entropy, total harmonic distortion, a Gaussian
//! low-pass reference filter and the redundancy profile of its tokens.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge::similarity_banded;
use crate::seqcore::{Locality, Metric, TokenMatrix};

/// Harmonics `2f ..= 5f` enter the THD.
pub const THD_ORDER: usize = 5;

/// Spectral magnitudes below this fraction of the largest non-DC magnitude
/// are treated as round-off and zeroed.
pub const SPECTRAL_FLOOR: f64 = 1e-10;

/// Magnitudes `|X_f|` for `f = 0 ..= m/2`, with the round-off floor applied
/// to the non-DC bins.
pub fn amplitude_spectrum(series: &[f64]) -> Vec<f64> {
    let m = series.len();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mut mags: Vec<f64> = buf[..=m / 2].iter().map(|c| c.norm()).collect();
    let peak = mags[1..].iter().copied().fold(0.0, f64::max);
    for v in &mut mags[1..] {
        if *v <= SPECTRAL_FLOOR * peak {
            *v = 0.0;
        }
    }
    mags
}

/// Shannon entropy (nats) of the normalised power over the positive,
/// non-DC frequencies. A constant series has entropy 0.
pub fn spectral_entropy(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::Parameter(format!(
            "spectral entropy needs at least 2 samples, got {}",
            series.len()
        )));
    }
    let power: Vec<f64> = amplitude_spectrum(series)[1..]
        .iter()
        .map(|a| a * a)
        .collect();
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let h = power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let p = p / total;
            -p * p.ln()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// THD in percent with harmonics `2f ..= 5f`.
pub fn thd(series: &[f64], fundamental_bin: usize) -> Result<f64> {
    thd_with_order(series, fundamental_bin, THD_ORDER)
}

/// THD in percent over harmonics `2f ..= order·f`:
/// `100 · sqrt(Σ |X_hf|²) / |X_f|`.
pub fn thd_with_order(series: &[f64], fundamental_bin: usize, order: usize) -> Result<f64> {
    let nyquist = series.len() / 2;
    if fundamental_bin == 0 {
        return Err(Error::Parameter("fundamental bin must be >= 1".into()));
    }
    if order < 2 {
        return Err(Error::Parameter("harmonic order must be >= 2".into()));
    }
    if fundamental_bin * order > nyquist {
        return Err(Error::Parameter(format!(
            "harmonic {order} of bin {fundamental_bin} exceeds the Nyquist bin {nyquist}"
        )));
    }
    let mags = amplitude_spectrum(series);
    let fundamental = mags[fundamental_bin];
    if fundamental == 0.0 {
        return Err(Error::UndefinedThd(fundamental_bin));
    }
    let harmonic_power: f64 = (2..=order)
        .map(|h| mags[h * fundamental_bin].powi(2))
        .sum();
    Ok(100.0 * harmonic_power.sqrt() / fundamental)
}

/// Non-DC bin with the largest magnitude, lowest bin on ties. `None` for a
/// constant series.
pub fn dominant_bin(series: &[f64]) -> Option<usize> {
    if series.len() < 2 {
        return None;
    }
    let mags = amplitude_spectrum(series);
    let mut best = None;
    for (f, &a) in mags.iter().enumerate().skip(1) {
        if a > 0.0 && best.is_none_or(|b: usize| a > mags[b]) {
            best = Some(f);
        }
    }
    best
}

/// Gaussian kernel truncated at radius `⌈4σ⌉`, normalised to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Index into `0..m` after mirroring at the edges (half-sample symmetric:
/// `... b a | a b c ... | c b ...`).
fn reflect(i: isize, m: usize) -> usize {
    let period = 2 * m as isize;
    let r = i.rem_euclid(period);
    if r < m as isize {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}

/// Convolution with [`gaussian_kernel`], reflecting at the boundaries.
pub fn gaussian_lowpass(series: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let kernel = gaussian_kernel(sigma)?;
    let m = series.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let radius = (kernel.len() / 2) as isize;
    Ok((0..m as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(o, w)| w * series[reflect(i + o as isize - radius, m)])
                .sum()
        })
        .collect())
}

/// One point of a redundancy curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedundancyPoint {
    pub threshold: f64,
    pub fraction: f64,
}

/// For each threshold, the fraction of the `⌊t/2⌋` best-per-A proposals
/// whose similarity reaches it. Thresholds are expected in ascending order,
/// which makes the curve non-increasing.
pub fn redundancy_profile(
    x: &TokenMatrix,
    thresholds: &[f64],
    k: Locality,
    metric: Metric,
) -> Result<Vec<RedundancyPoint>> {
    let kk = k.resolve(x.len());
    if kk == 0 {
        return Ok(thresholds
            .iter()
            .map(|&threshold| RedundancyPoint {
                threshold,
                fraction: 0.0,
            })
            .collect());
    }
    let sim = similarity_banded(x, &x.partition(), kk, metric)?;
    let mut best: Vec<f64> = sim.best_per_a().iter().map(|e| e.similarity).collect();
    best.sort_by(f64::total_cmp);
    let half = best.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let below = best.partition_point(|&s| s < threshold);
            RedundancyPoint {
                threshold,
                fraction: (best.len() - below) as f64 / half,
            }
        })
        .collect())
}

/// `count` evenly spaced thresholds from `lo` to `hi` inclusive.
pub fn threshold_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Diagnostics for one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalReport {
    pub spectral_entropy: f64,
    /// `None` when no fundamental exists or its harmonics lie above Nyquist.
    pub thd: Option<f64>,
    pub fundamental_bin: Option<usize>,
    pub redundancy_curve: Vec<RedundancyPoint>,
    pub gaussian_sigma: f64,
    pub lowpass_spectral_entropy: f64,
}

/// Series-level part of a [`SignalReport`]; the redundancy curve needs
/// tokens and is filled by the caller.
pub fn describe(series: &[f64], sigma: f64) -> Result<SignalReport> {
    let entropy = spectral_entropy(series)?;
    let fundamental_bin = dominant_bin(series);
    let thd = match fundamental_bin {
        Some(f) => {
            let order = (series.len() / 2 / f).min(THD_ORDER);
            if order >= 2 {
                Some(thd_with_order(series, f, order)?)
            } else {
                None
            }
        }
        None => None,
    };
    let filtered = gaussian_lowpass(series, sigma)?;
    Ok(SignalReport {
        spectral_entropy: entropy,
        thd,
        fundamental_bin,
        redundancy_curve: Vec::new(),
        gaussian_sigma: sigma,
        lowpass_spectral_entropy: spectral_entropy(&filtered)?,
    })
}
