//! Gated long-convolution blocks standing in for Hyena/Mamba operators.
//!
//! Each channel owns an implicit filter `h[l] = (1 - e^-a) · e^(-a·l) · cos(w·l)`
//! defined for any length, so the operator keeps working as merging shrinks
//! the sequence. The convolution is causal and computed by FFT.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::merge::merge_with_schedule;
use crate::seqcore::{LayerSchedule, MergeTrace, TokenMatrix};

use super::flops::{conv_fft_len, FlopLedger, FlopModel};
use super::layers::{add_in_place, component_rng, layer_norm, sigmoid, Linear, Mlp};
use super::{ModelConfig, ModelOutput};

const STREAM: u64 = 0x73_73;

/// `y[i] = Σ_{s ≤ i} h[i - s] · u[s]`, by direct summation. Taps beyond
/// the end of `h` are zero.
pub fn causal_conv_direct(u: &[f64], h: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            (0..=i)
                .filter(|&s| i - s < h.len())
                .map(|s| h[i - s] * u[s])
                .sum()
        })
        .collect()
}

/// Same as [`causal_conv_direct`] via zero-padded FFTs.
pub fn causal_conv_fft(u: &[f64], h: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let t = u.len();
    let n = conv_fft_len(t);
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| -> Vec<Complex<f64>> {
        let mut b: Vec<Complex<f64>> = v[..t.min(v.len())].iter().map(|&x| Complex::new(x, 0.0)).collect();
        b.resize(n, Complex::new(0.0, 0.0));
        b
    };
    let mut fu = pad(u);
    let mut fh = pad(h);
    fwd.process(&mut fu);
    fwd.process(&mut fh);
    for (a, b) in fu.iter_mut().zip(&fh) {
        *a *= b;
    }
    inv.process(&mut fu);
    let scale = 1.0 / n as f64;
    fu[..t].iter().map(|c| c.re * scale).collect()
}

#[derive(Clone, Debug, PartialEq)]
struct SsmLayer {
    w_in: Linear,
    w_gate: Linear,
    w_out: Linear,
    decay: Vec<f64>,
    freq: Vec<f64>,
    mlp: Mlp,
}

impl SsmLayer {
    fn filter(&self, channel: usize, t: usize) -> Vec<f64> {
        let (a, w) = (self.decay[channel], self.freq[channel]);
        let gain = 1.0 - (-a).exp();
        (0..t)
            .map(|l| gain * (-a * l as f64).exp() * (w * l as f64).cos())
            .collect()
    }
}

/// Stack of gated long-convolution blocks with causal merging after the
/// operator.
#[derive(Clone, Debug, PartialEq)]
pub struct SsmModel {
    layers: Vec<SsmLayer>,
    d: usize,
    h: usize,
}

impl SsmModel {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut rng = component_rng(cfg.seed, STREAM);
        let d = cfg.d;
        SsmModel {
            layers: (0..cfg.layers)
                .map(|_| SsmLayer {
                    w_in: Linear::random(d, d, &mut rng),
                    w_gate: Linear::random(d, d, &mut rng),
                    w_out: Linear::random(d, d, &mut rng),
                    decay: (0..d).map(|_| rng.random_range(0.02..0.5)).collect(),
                    freq: (0..d)
                        .map(|_| rng.random_range(0.0..std::f64::consts::PI))
                        .collect(),
                    mlp: Mlp::random(d, cfg.h, &mut rng),
                })
                .collect(),
            d,
            h: cfg.h,
        }
    }

    fn operator(
        &self,
        layer: &SsmLayer,
        x: &TokenMatrix,
        planner: &mut FftPlanner<f64>,
    ) -> Result<TokenMatrix> {
        let (t, d) = (x.len(), self.d);
        let normed = layer_norm(x.as_slice(), d);
        let value = layer.w_in.apply(&normed);
        let gate = layer.w_gate.apply(&normed);
        let mut mixed = vec![0.0; t * d];
        for c in 0..d {
            let column: Vec<f64> = (0..t).map(|i| value[i * d + c]).collect();
            let conv = causal_conv_fft(&column, &layer.filter(c, t), planner);
            for i in 0..t {
                mixed[i * d + c] = conv[i] * sigmoid(gate[i * d + c]);
            }
        }
        let mut out = x.as_slice().to_vec();
        add_in_place(&mut out, &layer.w_out.apply(&mixed));
        x.map_values(out)
    }

    fn feed_forward(&self, layer: &SsmLayer, x: &TokenMatrix) -> Result<TokenMatrix> {
        let delta = layer.mlp.apply(&layer_norm(x.as_slice(), self.d));
        let mut out = x.as_slice().to_vec();
        add_in_place(&mut out, &delta);
        x.map_values(out)
    }

    fn check_input(&self, x: &TokenMatrix) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::Shape(format!(
                "state-space model expects dimension {}, got {}",
                self.d,
                x.dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &TokenMatrix, schedule: &[LayerSchedule]) -> Result<ModelOutput> {
        self.check_input(x)?;
        let schedule = super::expand_schedule(schedule, self.layers.len());
        if schedule.len() != self.layers.len() {
            return Err(Error::Schedule(format!(
                "{} schedule entries for {} layers",
                schedule.len(),
                self.layers.len()
            )));
        }
        // Quadratic similarity pools are not allowed in a linear-time model.
        if let Some(s) = schedule.iter().find(|s| !s.is_causal()) {
            return Err(Error::Contract(format!(
                "state-space layers only merge with k = 1, got {:?}",
                s.k
            )));
        }
        let mut planner = FftPlanner::new();
        let mut ledger = FlopLedger::new(FlopModel::long_convolution(self.d, self.h));
        let mut trace = MergeTrace::identity(x.len());
        let mut cur = x.clone();
        for (layer, sched) in self.layers.iter().zip(&schedule) {
            let t_in = cur.len();
            let mixed = self.operator(layer, &cur, &mut planner)?;
            let step = merge_with_schedule(&mixed, sched)?;
            trace = trace.compose(&step.plan)?;
            cur = self.feed_forward(layer, &step.tokens)?;
            ledger.record(x.len(), t_in, cur.len(), step.evaluations, step.plan.r());
        }
        Ok(ModelOutput {
            tokens: cur,
            trace,
            ledger,
        })
    }

    pub fn forward_reference(&self, x: &TokenMatrix) -> Result<TokenMatrix> {
        self.check_input(x)?;
        let mut planner = FftPlanner::new();
        let mut cur = x.clone();
        for layer in &self.layers {
            let mixed = self.operator(layer, &cur, &mut planner)?;
            cur = self.feed_forward(layer, &mixed)?;
        }
        Ok(cur)
    }
}

/// Builds the state-space stack from `config` and runs its schedule.
pub fn ssm_forward(
    x: &TokenMatrix,
    config: &ModelConfig,
) -> Result<(TokenMatrix, MergeTrace, FlopLedger)> {
    if let Some(s) = config.schedule.iter().find(|s| !s.is_causal()) {
        return Err(Error::Contract(format!(
            "state-space layers only merge with k = 1, got {:?}",
            s.k
        )));
    }
    let mut cfg = config.clone();
    cfg.merge_hook = super::MergeHook::AfterOperator;
    cfg.validate()?;
    let out = SsmModel::new(&cfg).forward(x, &cfg.layer_schedules())?;
    Ok((out.tokens, out.trace, out.ledger))
}
