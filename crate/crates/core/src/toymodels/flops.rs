//! Analytic FLOP accounting.
//!
//! One multiply-accumulate counts as 2 FLOPs. Per layer with `t` tokens
//! entering and `t'` leaving the merge:
//!
//! | part            | attention block            | long-convolution block                 |
//! |-----------------|----------------------------|----------------------------------------|
//! | mixer           | `2·t²·d + 2·t²·d`          | `d·(3·5·N·log2 N + 6·N) + t·d`, `N = pow2 ≥ 2t` |
//! | projections     | `4 · 2·t·d²` (Q, K, V, out) | `3 · 2·t·d²` (in, gate, out)           |
//! | MLP             | `2 · 2·t'·d·h`             | `2 · 2·t'·d·h`                         |
//! | merge overhead  | `2·d` per similarity evaluation + `3·d` per merged edge | same      |
//!
//! The MLP runs after the merge, so it sees `t'` tokens.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixerKind {
    Attention,
    LongConvolution,
}

/// Cost model of one block type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopModel {
    pub mixer: MixerKind,
    pub d: u64,
    pub h: u64,
}

/// FLOPs of one layer, split by part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerFlops {
    pub tokens_in: usize,
    pub tokens_out: usize,
    pub similarity_evaluations: usize,
    pub merged_edges: usize,
    pub mixer: u64,
    pub projection: u64,
    pub mlp: u64,
    pub merge_overhead: u64,
}

impl LayerFlops {
    pub fn total(&self) -> u64 {
        self.mixer + self.projection + self.mlp + self.merge_overhead
    }
}

/// `5·N·log2 N` for one complex FFT of power-of-two length `N`.
fn fft_flops(n: u64) -> u64 {
    5 * n * u64::from(n.trailing_zeros())
}

/// FFT length used for a causal convolution over `t` tokens.
pub fn conv_fft_len(t: usize) -> usize {
    (2 * t).next_power_of_two()
}

impl FlopModel {
    pub fn attention(d: usize, h: usize) -> Self {
        FlopModel {
            mixer: MixerKind::Attention,
            d: d as u64,
            h: h as u64,
        }
    }

    pub fn long_convolution(d: usize, h: usize) -> Self {
        FlopModel {
            mixer: MixerKind::LongConvolution,
            d: d as u64,
            h: h as u64,
        }
    }

    pub fn mixer_flops(&self, t: usize) -> u64 {
        let t = t as u64;
        match self.mixer {
            MixerKind::Attention => 2 * t * t * self.d + 2 * t * t * self.d,
            MixerKind::LongConvolution => {
                let n = conv_fft_len(t as usize) as u64;
                self.d * (3 * fft_flops(n) + 6 * n) + t * self.d
            }
        }
    }

    pub fn projection_flops(&self, t: usize) -> u64 {
        let count = match self.mixer {
            MixerKind::Attention => 4,
            MixerKind::LongConvolution => 3,
        };
        count * 2 * t as u64 * self.d * self.d
    }

    pub fn mlp_flops(&self, t: usize) -> u64 {
        2 * 2 * t as u64 * self.d * self.h
    }

    pub fn merge_overhead(&self, evaluations: usize, edges: usize) -> u64 {
        2 * self.d * evaluations as u64 + 3 * self.d * edges as u64
    }

    pub fn layer(
        &self,
        tokens_in: usize,
        tokens_out: usize,
        evaluations: usize,
        edges: usize,
    ) -> LayerFlops {
        LayerFlops {
            tokens_in,
            tokens_out,
            similarity_evaluations: evaluations,
            merged_edges: edges,
            mixer: self.mixer_flops(tokens_in),
            projection: self.projection_flops(tokens_in),
            mlp: self.mlp_flops(tokens_out),
            merge_overhead: self.merge_overhead(evaluations, edges),
        }
    }
}

/// Per-run ledger with the merge-free reference alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopLedger {
    pub model: FlopModel,
    pub layers: Vec<LayerFlops>,
    pub reference: Vec<LayerFlops>,
}

impl FlopLedger {
    pub fn new(model: FlopModel) -> Self {
        FlopLedger {
            model,
            layers: Vec::new(),
            reference: Vec::new(),
        }
    }

    /// Records a layer; the reference layer sees `reference_tokens` and
    /// merges nothing.
    pub fn record(
        &mut self,
        reference_tokens: usize,
        tokens_in: usize,
        tokens_out: usize,
        evaluations: usize,
        edges: usize,
    ) {
        self.layers
            .push(self.model.layer(tokens_in, tokens_out, evaluations, edges));
        self.reference
            .push(self.model.layer(reference_tokens, reference_tokens, 0, 0));
    }

    pub fn total(&self) -> u64 {
        self.layers.iter().map(LayerFlops::total).sum()
    }

    pub fn reference_total(&self) -> u64 {
        self.reference.iter().map(LayerFlops::total).sum()
    }

    pub fn mixer_total(&self) -> u64 {
        self.layers.iter().map(|l| l.mixer).sum()
    }

    pub fn reference_mixer_total(&self) -> u64 {
        self.reference.iter().map(|l| l.mixer).sum()
    }

    pub fn merge_overhead_total(&self) -> u64 {
        self.layers.iter().map(|l| l.merge_overhead).sum()
    }

    /// Reference FLOPs over merged FLOPs, all parts included.
    pub fn speedup(&self) -> f64 {
        self.reference_total() as f64 / self.total() as f64
    }

    /// Speed-up counting only the token mixer (attention).
    pub fn mixer_speedup(&self) -> f64 {
        self.reference_mixer_total() as f64 / self.mixer_total() as f64
    }
}

/// Upper bound on the attention speed-up of an `L`-layer model that halves
/// its tokens after every attention: `3·L·4^(L-1) / (4^L - 1)`.
pub fn speedup_bound(layers: u32) -> Result<f64> {
    if layers < 1 {
        return Err(Error::Parameter("speed-up bound needs L >= 1".into()));
    }
    let l = f64::from(layers);
    let four_l = 4f64.powi(layers as i32);
    Ok(3.0 * l * (four_l / 4.0) / (four_l - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_values() {
        assert_eq!(speedup_bound(1).unwrap(), 1.0);
        assert!((speedup_bound(2).unwrap() - 1.6).abs() < 1e-15);
        assert!((speedup_bound(4).unwrap() - 3.0 * 4.0 * 64.0 / 255.0).abs() < 1e-15);
        assert!(speedup_bound(0).is_err());
    }

    #[test]
    fn bound_per_layer_tends_to_three_quarters() {
        let per_layer = speedup_bound(30).unwrap() / 30.0;
        assert!((per_layer - 0.75).abs() < 1e-12);
    }

    #[test]
    fn attention_layer_counts() {
        let m = FlopModel::attention(8, 32);
        let l = m.layer(16, 12, 64, 4);
        assert_eq!(l.mixer, 4 * 16 * 16 * 8);
        assert_eq!(l.projection, 8 * 16 * 64);
        assert_eq!(l.mlp, 4 * 12 * 8 * 32);
        assert_eq!(l.merge_overhead, 2 * 8 * 64 + 3 * 8 * 4);
        assert_eq!(l.total(), l.mixer + l.projection + l.mlp + l.merge_overhead);
    }

    #[test]
    fn fft_length() {
        assert_eq!(conv_fft_len(1), 2);
        assert_eq!(conv_fft_len(5), 16);
        assert_eq!(conv_fft_len(16000), 32768);
        assert_eq!(fft_flops(8), 5 * 8 * 3);
    }
}
