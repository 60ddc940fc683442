//! Dense building blocks shared by the toy models. Matrices are row-major
//! `f64` slices; a sequence of `t` vectors of width `w` is a `t·w` slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic weight source: one ChaCha stream per model component.
pub(crate) fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Bias-free linear map `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    weight: Vec<f64>,
    fan_in: usize,
    fan_out: usize,
}

impl Linear {
    /// Uniform init with unit output variance for unit-variance inputs.
    pub fn random(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (3.0 / fan_in as f64).sqrt();
        Linear {
            weight: (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
            fan_in,
            fan_out,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len() % self.fan_in, 0);
        let mut out = Vec::with_capacity(x.len() / self.fan_in * self.fan_out);
        for row in x.chunks_exact(self.fan_in) {
            for w in self.weight.chunks_exact(self.fan_in) {
                out.push(dot(w, row));
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameter-free layer norm over each row of width `w`.
pub fn layer_norm(x: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(w) {
        let mean = row.iter().sum::<f64>() / w as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64;
        let inv = 1.0 / (var + 1e-5).sqrt();
        out.extend(row.iter().map(|v| (v - mean) * inv));
    }
    out
}

pub fn gelu(v: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * v * (1.0 + (C * (v + 0.044_715 * v * v * v)).tanh())
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub(crate) fn add_in_place(acc: &mut [f64], delta: &[f64]) {
    for (a, d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}

/// Two-layer GELU MLP `d → h → d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    up: Linear,
    down: Linear,
}

impl Mlp {
    pub fn random(d: usize, h: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            up: Linear::random(d, h, rng),
            down: Linear::random(h, d, rng),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self.up.apply(x).into_iter().map(gelu).collect();
        self.down.apply(&hidden)
    }
}

/// Which keys a query may see.
pub enum Visibility<'a> {
    All,
    /// `allowed(query, key)`.
    Masked(&'a dyn Fn(usize, usize) -> bool),
}

/// Softmax attention for one head. `q` is `tq × dh`, `k` and `v` are
/// `tk × dh`. `key_bias` is added to every logit of that key. Masked keys
/// get exactly zero weight. Returns the `tq × dh` output and the
/// `tq × tk` weights.
pub fn scaled_dot_attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    dh: usize,
    key_bias: Option<&[f64]>,
    visibility: &Visibility<'_>,
) -> (Vec<f64>, Vec<f64>) {
    let tq = q.len() / dh;
    let tk = k.len() / dh;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; tq * dh];
    let mut weights = vec![0.0; tq * tk];
    let mut logits = vec![f64::NEG_INFINITY; tk];
    for i in 0..tq {
        let qi = &q[i * dh..(i + 1) * dh];
        let mut max = f64::NEG_INFINITY;
        for j in 0..tk {
            let visible = match visibility {
                Visibility::All => true,
                Visibility::Masked(f) => f(i, j),
            };
            logits[j] = if visible {
                let l = dot(qi, &k[j * dh..(j + 1) * dh]) * scale
                    + key_bias.map_or(0.0, |b| b[j]);
                max = max.max(l);
                l
            } else {
                f64::NEG_INFINITY
            };
        }
        if max == f64::NEG_INFINITY {
            continue;
        }
        let row = &mut weights[i * tk..(i + 1) * tk];
        let mut sum = 0.0;
        for j in 0..tk {
            if logits[j] > f64::NEG_INFINITY {
                row[j] = (logits[j] - max).exp();
                sum += row[j];
            }
        }
        let oi = &mut out[i * dh..(i + 1) * dh];
        for j in 0..tk {
            if row[j] == 0.0 {
                continue;
            }
            row[j] /= sum;
            for (o, vv) in oi.iter_mut().zip(&v[j * dh..(j + 1) * dh]) {
                *o += row[j] * vv;
            }
        }
    }
    (out, weights)
}

/// Multi-head attention with separate Q/K/V/output projections.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadAttention {
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    heads: usize,
}

impl MultiHeadAttention {
    pub fn random(d: usize, heads: usize, rng: &mut impl Rng) -> Self {
        MultiHeadAttention {
            wq: Linear::random(d, d, rng),
            wk: Linear::random(d, d, rng),
            wv: Linear::random(d, d, rng),
            wo: Linear::random(d, d, rng),
            heads,
        }
    }

    /// Attends from `queries` (`tq × d`) to `keys_values` (`tk × d`).
    pub fn forward(
        &self,
        queries: &[f64],
        keys_values: &[f64],
        key_bias: Option<&[f64]>,
        visibility: &Visibility<'_>,
    ) -> Vec<f64> {
        let d = self.wq.fan_out();
        let dh = d / self.heads;
        let q = self.wq.apply(queries);
        let k = self.wk.apply(keys_values);
        let v = self.wv.apply(keys_values);
        let tq = q.len() / d;
        let tk = k.len() / d;
        let mut concat = vec![0.0; tq * d];
        let head_slice = |m: &[f64], t: usize, h: usize| -> Vec<f64> {
            (0..t)
                .flat_map(|i| m[i * d + h * dh..i * d + (h + 1) * dh].iter().copied())
                .collect()
        };
        for h in 0..self.heads {
            let (o, _) = scaled_dot_attention(
                &head_slice(&q, tq, h),
                &head_slice(&k, tk, h),
                &head_slice(&v, tk, h),
                dh,
                key_bias,
                visibility,
            );
            for i in 0..tq {
                concat[i * d + h * dh..i * d + (h + 1) * dh]
                    .copy_from_slice(&o[i * dh..(i + 1) * dh]);
            }
        }
        self.wo.apply(&concat)
    }
}
