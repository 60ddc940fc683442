//! Toy sequence models with merge hooks, built from fixed seeded weights.
//!
//! - [`Encoder`]: transformer encoder, merging between self-attention and
//!   the MLP of every layer.
//! - [`Decoder`]: causal decoder, merging adjacent tokens between
//!   self-attention and cross-attention, unmerged once after the stack.
//! - [`SsmModel`]: gated long-convolution blocks, merging adjacent tokens
//!   after the operator.

mod decoder;
mod encoder;
pub mod flops;
pub mod layers;
mod ssm;
mod tokenizer;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::causal::unmerge;
use crate::error::{Error, Result};
use crate::seqcore::{LayerSchedule, MergeTrace, TokenMatrix};

pub use decoder::{decoder_forward, Decoder, DecoderOutput};
pub use encoder::{encoder_forward, Encoder};
pub use flops::{speedup_bound, FlopLedger, FlopModel, LayerFlops, MixerKind};
pub use ssm::{causal_conv_direct, causal_conv_fft, ssm_forward, SsmModel};
pub use tokenizer::{
    sinusoidal_embedding, tokenize_patch, tokenize_timestep, PatchTokenizer, TimestepTokenizer,
};

/// Where the merge sits inside each block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeHook {
    /// Transformer block: attention, merge, MLP.
    #[default]
    AfterAttention,
    /// State-space block: long convolution, merge, MLP.
    AfterOperator,
}

/// Model hyper-parameters, read from JSON with the field names below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of encoder (or state-space) layers.
    #[serde(rename = "L")]
    pub layers: usize,
    pub d: usize,
    /// MLP hidden width.
    pub h: usize,
    pub heads: usize,
    /// Input time stamps.
    pub m: usize,
    /// Variates.
    pub n: usize,
    /// Prediction horizon.
    pub p: usize,
    /// Empty: no merging. One entry: applied to every layer. Otherwise one
    /// entry per layer.
    #[serde(default)]
    pub schedule: Vec<LayerSchedule>,
    #[serde(default)]
    pub merge_hook: MergeHook,
    #[serde(default)]
    pub proportional_attention: bool,
    #[serde(default)]
    pub seed: u64,
    /// Schedule of the single decoder layer; must be causal (`k = 1`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decoder_schedule: Vec<LayerSchedule>,
}

impl ModelConfig {
    /// A small transformer configuration without merging.
    pub fn new(layers: usize, d: usize, h: usize, heads: usize, m: usize, n: usize, p: usize) -> Self {
        ModelConfig {
            layers,
            d,
            h,
            heads,
            m,
            n,
            p,
            schedule: Vec::new(),
            merge_hook: MergeHook::AfterAttention,
            proportional_attention: false,
            seed: 0,
            decoder_schedule: Vec::new(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate_as_config()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layers < 1 {
            return bad("L must be >= 1".into());
        }
        if self.d < 1 || self.h < 1 || self.heads < 1 {
            return bad("d, h and heads must be >= 1".into());
        }
        if self.d % self.heads != 0 {
            return bad(format!("d = {} is not divisible by heads = {}", self.d, self.heads));
        }
        if self.m < 1 || self.n < 1 || self.p < 1 {
            return bad("m, n and p must be >= 1".into());
        }
        if !matches!(self.schedule.len(), 0 | 1) && self.schedule.len() != self.layers {
            return bad(format!(
                "schedule has {} entries for {} layers",
                self.schedule.len(),
                self.layers
            ));
        }
        for s in self.schedule.iter().chain(&self.decoder_schedule) {
            s.validate()?;
        }
        if self.merge_hook == MergeHook::AfterOperator {
            if let Some(s) = self.schedule.iter().find(|s| !s.is_causal()) {
                return Err(Error::Contract(format!(
                    "state-space layers only merge with k = 1, got {:?}",
                    s.k
                )));
            }
        }
        if let Some(s) = self.decoder_schedule.iter().find(|s| !s.is_causal()) {
            return Err(Error::Contract(format!(
                "decoder merging must be causal (k = 1), got {:?}",
                s.k
            )));
        }
        Ok(())
    }

    /// [`ModelConfig::validate`] for user-supplied configs: a broken model
    /// contract is reported as a config error.
    pub(crate) fn validate_as_config(&self) -> Result<()> {
        self.validate().map_err(|e| match e {
            Error::Contract(_) => Error::Config(e.to_string()),
            e => e,
        })
    }

    /// `m · n`, the flattened input size.
    pub fn input_size(&self) -> usize {
        self.m * self.n
    }

    /// One schedule per layer, expanding the broadcast forms.
    pub fn layer_schedules(&self) -> Vec<LayerSchedule> {
        expand_schedule(&self.schedule, self.layers)
    }

    pub fn flop_model(&self) -> FlopModel {
        match self.merge_hook {
            MergeHook::AfterAttention => FlopModel::attention(self.d, self.h),
            MergeHook::AfterOperator => FlopModel::long_convolution(self.d, self.h),
        }
    }
}

pub(crate) fn expand_schedule(schedule: &[LayerSchedule], layers: usize) -> Vec<LayerSchedule> {
    match schedule {
        [] => vec![LayerSchedule::default(); layers],
        [one] => vec![*one; layers],
        many => many.to_vec(),
    }
}

/// Result of a forward pass through a merging stack.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub tokens: TokenMatrix,
    pub trace: MergeTrace,
    pub ledger: FlopLedger,
}

impl ModelOutput {
    /// Tokens cloned back onto every original position.
    pub fn unmerged(&self) -> Result<TokenMatrix> {
        unmerge(&self.tokens)
    }

    /// Token count entering each layer, followed by the final count.
    pub fn tokens_per_layer(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.ledger.layers.iter().map(|l| l.tokens_in).collect();
        v.push(self.tokens.len());
        v
    }
}

/// The stack selected by a config's merge hook.
#[derive(Clone, Debug, PartialEq)]
pub enum SequenceModel {
    Transformer(Encoder),
    StateSpace(SsmModel),
}

impl SequenceModel {
    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.merge_hook {
            MergeHook::AfterAttention => SequenceModel::Transformer(Encoder::new(cfg)),
            MergeHook::AfterOperator => SequenceModel::StateSpace(SsmModel::new(cfg)),
        })
    }

    pub fn forward(&self, x: &TokenMatrix, schedule: &[LayerSchedule]) -> Result<ModelOutput> {
        match self {
            SequenceModel::Transformer(m) => m.forward(x, schedule),
            SequenceModel::StateSpace(m) => m.forward(x, schedule),
        }
    }

    /// Forward pass with no merge step at all.
    pub fn forward_reference(&self, x: &TokenMatrix) -> Result<TokenMatrix> {
        match self {
            SequenceModel::Transformer(m) => m.forward_reference(x),
            SequenceModel::StateSpace(m) => m.forward_reference(x),
        }
    }
}
