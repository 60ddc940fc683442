use crate::error::{Error, Result};
use crate::merge::{expand_pruned, merge_with_schedule, plan_with_schedule, prune_apply};
use crate::seqcore::{LayerSchedule, MergeTrace, TokenMatrix};

use super::flops::FlopLedger;
use super::layers::{add_in_place, component_rng, layer_norm, Mlp, MultiHeadAttention, Visibility};
use super::{ModelConfig, ModelOutput};

const STREAM: u64 = 0x65_6e;

#[derive(Clone, Debug, PartialEq)]
struct EncoderLayer {
    attn: MultiHeadAttention,
    mlp: Mlp,
}

/// Pre-norm transformer encoder. Each layer: `x + Attn(LN x)`, merge,
/// `x + MLP(LN x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    layers: Vec<EncoderLayer>,
    d: usize,
    h: usize,
    proportional_attention: bool,
}

/// Log-size logit bias for proportional attention.
pub(crate) fn log_sizes(x: &TokenMatrix) -> Vec<f64> {
    x.sizes().iter().map(|&s| (s as f64).ln()).collect()
}

impl Encoder {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut rng = component_rng(cfg.seed, STREAM);
        Encoder {
            layers: (0..cfg.layers)
                .map(|_| EncoderLayer {
                    attn: MultiHeadAttention::random(cfg.d, cfg.heads, &mut rng),
                    mlp: Mlp::random(cfg.d, cfg.h, &mut rng),
                })
                .collect(),
            d: cfg.d,
            h: cfg.h,
            proportional_attention: cfg.proportional_attention,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn check_input(&self, x: &TokenMatrix) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::Shape(format!(
                "encoder expects tokens of dimension {}, got {}",
                self.d,
                x.dim()
            )));
        }
        Ok(())
    }

    fn attend(&self, layer: &EncoderLayer, x: &TokenMatrix) -> Result<TokenMatrix> {
        let normed = layer_norm(x.as_slice(), self.d);
        let bias = self.proportional_attention.then(|| log_sizes(x));
        let delta = layer.attn.forward(&normed, &normed, bias.as_deref(), &Visibility::All);
        let mut out = x.as_slice().to_vec();
        add_in_place(&mut out, &delta);
        x.map_values(out)
    }

    fn feed_forward(&self, layer: &EncoderLayer, x: &TokenMatrix) -> Result<TokenMatrix> {
        let delta = layer.mlp.apply(&layer_norm(x.as_slice(), self.d));
        let mut out = x.as_slice().to_vec();
        add_in_place(&mut out, &delta);
        x.map_values(out)
    }

    /// Forward pass merging between attention and MLP of each layer.
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
        let mut ledger = FlopLedger::new(super::FlopModel::attention(self.d, self.h));
        let mut trace = MergeTrace::identity(x.len());
        let mut cur = x.clone();
        for (layer, sched) in self.layers.iter().zip(&schedule) {
            let t_in = cur.len();
            let attended = self.attend(layer, &cur)?;
            let step = merge_with_schedule(&attended, sched)?;
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

    /// Pruning baseline: the same plans as [`Encoder::forward`] would
    /// select, but the B-side tokens are dropped. The output is expanded
    /// back to the input length, dropped positions copying their partner.
    pub fn forward_pruned(&self, x: &TokenMatrix, schedule: &[LayerSchedule]) -> Result<TokenMatrix> {
        self.check_input(x)?;
        let schedule = super::expand_schedule(schedule, self.layers.len());
        if schedule.len() != self.layers.len() {
            return Err(Error::Schedule(format!(
                "{} schedule entries for {} layers",
                schedule.len(),
                self.layers.len()
            )));
        }
        let mut orphaned = Vec::new();
        let mut cur = x.clone();
        for (layer, sched) in self.layers.iter().zip(&schedule) {
            let attended = self.attend(layer, &cur)?;
            let (plan, _) = plan_with_schedule(&attended, sched)?;
            let pruned = prune_apply(&attended, &plan)?;
            orphaned.extend(pruned.orphaned);
            cur = self.feed_forward(layer, &pruned.tokens)?;
        }
        TokenMatrix::new(expand_pruned(&cur, &orphaned, x.len())?, self.d)
    }

    /// The same layers with no merge step.
    pub fn forward_reference(&self, x: &TokenMatrix) -> Result<TokenMatrix> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            let attended = self.attend(layer, &cur)?;
            cur = self.feed_forward(layer, &attended)?;
        }
        Ok(cur)
    }
}

/// Builds the encoder from `config` and runs it with the config's schedule.
pub fn encoder_forward(
    x: &TokenMatrix,
    config: &ModelConfig,
) -> Result<(TokenMatrix, MergeTrace, FlopLedger)> {
    config.validate()?;
    let out = Encoder::new(config).forward(x, &config.layer_schedules())?;
    Ok((out.tokens, out.trace, out.ledger))
}
