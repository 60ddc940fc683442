use crate::causal::unmerge;
use crate::error::{Error, Result};
use crate::merge::merge_with_schedule;
use crate::seqcore::{LayerSchedule, MergeTrace, TokenMatrix};

use super::encoder::log_sizes;
use super::layers::{
    add_in_place, component_rng, layer_norm, Linear, Mlp, MultiHeadAttention, Visibility,
};
use super::ModelConfig;

const STREAM: u64 = 0x64_65;

#[derive(Clone, Debug, PartialEq)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    cross_attn: MultiHeadAttention,
    mlp: Mlp,
}

/// Causal decoder: masked self-attention, causal merge, cross-attention
/// over the encoder output, MLP. Tokens are unmerged once after the last
/// layer and mapped to `n` variates by a linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    layers: Vec<DecoderLayer>,
    head: Linear,
    d: usize,
    proportional_attention: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderOutput {
    /// `p × n`, row-major.
    pub forecast: Vec<f64>,
    pub variates: usize,
    pub trace: MergeTrace,
}

impl DecoderOutput {
    pub fn horizon(&self) -> usize {
        self.forecast.len() / self.variates
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.forecast[i * self.variates..(i + 1) * self.variates]
    }
}

/// Key `j` is visible to query `i` when it starts no later than `i` ends.
/// For order-preserving contiguous spans this is `j <= i`.
fn span_causal(x: &TokenMatrix) -> impl Fn(usize, usize) -> bool + '_ {
    move |i, j| x.origins()[j].lo() <= x.origins()[i].hi()
}

impl Decoder {
    pub fn new(cfg: &ModelConfig, num_layers: usize) -> Self {
        let mut rng = component_rng(cfg.seed, STREAM);
        Decoder {
            layers: (0..num_layers)
                .map(|_| DecoderLayer {
                    self_attn: MultiHeadAttention::random(cfg.d, cfg.heads, &mut rng),
                    cross_attn: MultiHeadAttention::random(cfg.d, cfg.heads, &mut rng),
                    mlp: Mlp::random(cfg.d, cfg.h, &mut rng),
                })
                .collect(),
            head: Linear::random(cfg.d, cfg.n, &mut rng),
            d: cfg.d,
            proportional_attention: cfg.proportional_attention,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn self_attend(&self, layer: &DecoderLayer, x: &TokenMatrix) -> Result<TokenMatrix> {
        let normed = layer_norm(x.as_slice(), self.d);
        let bias = self.proportional_attention.then(|| log_sizes(x));
        let mask = span_causal(x);
        let delta =
            layer
                .self_attn
                .forward(&normed, &normed, bias.as_deref(), &Visibility::Masked(&mask));
        let mut out = x.as_slice().to_vec();
        add_in_place(&mut out, &delta);
        x.map_values(out)
    }

    fn cross_and_mlp(
        &self,
        layer: &DecoderLayer,
        x: &TokenMatrix,
        enc_normed: &[f64],
        enc_bias: Option<&[f64]>,
    ) -> Result<TokenMatrix> {
        let normed = layer_norm(x.as_slice(), self.d);
        let cross = layer
            .cross_attn
            .forward(&normed, enc_normed, enc_bias, &Visibility::All);
        let mut out = x.as_slice().to_vec();
        add_in_place(&mut out, &cross);
        let ff = layer.mlp.apply(&layer_norm(&out, self.d));
        add_in_place(&mut out, &ff);
        x.map_values(out)
    }

    fn check(&self, x_dec: &TokenMatrix, enc_out: &TokenMatrix) -> Result<()> {
        if x_dec.dim() != self.d || enc_out.dim() != self.d {
            return Err(Error::Shape(format!(
                "decoder expects dimension {}, got {} (decoder) and {} (encoder)",
                self.d,
                x_dec.dim(),
                enc_out.dim()
            )));
        }
        Ok(())
    }

    fn head(&self, tokens: &TokenMatrix) -> Vec<f64> {
        self.head.apply(tokens.as_slice())
    }

    pub fn forward(
        &self,
        x_dec: &TokenMatrix,
        enc_out: &TokenMatrix,
        schedule: &[LayerSchedule],
    ) -> Result<DecoderOutput> {
        self.check(x_dec, enc_out)?;
        let schedule = super::expand_schedule(schedule, self.layers.len());
        if schedule.len() != self.layers.len() {
            return Err(Error::Schedule(format!(
                "{} decoder schedule entries for {} layers",
                schedule.len(),
                self.layers.len()
            )));
        }
        if let Some(s) = schedule.iter().find(|s| !s.is_causal()) {
            return Err(Error::Contract(format!(
                "decoder merging must be causal (k = 1), got {:?}",
                s.k
            )));
        }
        let enc_normed = layer_norm(enc_out.as_slice(), self.d);
        // Encoder sizes pass through unchanged into cross-attention.
        let enc_bias = self.proportional_attention.then(|| log_sizes(enc_out));
        let mut trace = MergeTrace::identity(x_dec.len());
        let mut cur = x_dec.clone();
        for (layer, sched) in self.layers.iter().zip(&schedule) {
            let attended = self.self_attend(layer, &cur)?;
            let step = merge_with_schedule(&attended, sched)?;
            trace = trace.compose(&step.plan)?;
            cur = self.cross_and_mlp(layer, &step.tokens, &enc_normed, enc_bias.as_deref())?;
        }
        let restored = unmerge(&cur)?;
        Ok(DecoderOutput {
            forecast: self.head(&restored),
            variates: self.head.fan_out(),
            trace,
        })
    }

    /// The same layers with no merge or unmerge step.
    pub fn forward_reference(&self, x_dec: &TokenMatrix, enc_out: &TokenMatrix) -> Result<Vec<f64>> {
        self.check(x_dec, enc_out)?;
        let enc_normed = layer_norm(enc_out.as_slice(), self.d);
        let enc_bias = self.proportional_attention.then(|| log_sizes(enc_out));
        let mut cur = x_dec.clone();
        for layer in &self.layers {
            let attended = self.self_attend(layer, &cur)?;
            cur = self.cross_and_mlp(layer, &attended, &enc_normed, enc_bias.as_deref())?;
        }
        Ok(self.head(&cur))
    }
}

/// Single-layer decoder built from `config`, run with its decoder schedule.
/// Returns the `p × n` forecast.
pub fn decoder_forward(
    x_dec: &TokenMatrix,
    enc_out: &TokenMatrix,
    config: &ModelConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if x_dec.len() != config.p {
        return Err(Error::Shape(format!(
            "decoder input has {} tokens, horizon p = {}",
            x_dec.len(),
            config.p
        )));
    }
    let out = Decoder::new(config, 1).forward(x_dec, enc_out, &config.decoder_schedule)?;
    Ok(out.forecast)
}
