//! Two tokenizers from `m × n` series to `t × d` tokens: one token per time
//! stamp, or one token per patch of time stamps. Both add a sinusoidal
//! positional embedding and use a fixed seeded linear map without bias.

use crate::error::{Error, Result};
use crate::seqcore::TokenMatrix;
use crate::series::Series;

use super::layers::{component_rng, Linear};

const STREAM: u64 = 0x70_6b;

/// `t × d` sinusoidal positional embedding: `sin` on even and `cos` on odd
/// dimensions with wavelengths growing geometrically up to `10000·2π`.
pub fn sinusoidal_embedding(t: usize, d: usize) -> Vec<f64> {
    let mut pe = Vec::with_capacity(t * d);
    for pos in 0..t {
        for i in 0..d {
            let rate = 10000f64.powf(-((i / 2 * 2) as f64) / d as f64);
            let angle = pos as f64 * rate;
            pe.push(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    pe
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimestepTokenizer {
    proj: Linear,
}

impl TimestepTokenizer {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = component_rng(seed, STREAM);
        TimestepTokenizer {
            proj: Linear::random(n, d, &mut rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.proj.fan_out()
    }

    /// One token per time stamp: `t = m`.
    pub fn tokenize(&self, u: &Series) -> Result<TokenMatrix> {
        let (m, n) = (u.len(), u.variates());
        if m == 0 {
            return Err(Error::EmptySequence);
        }
        if n != self.proj.fan_in() {
            return Err(Error::Shape(format!(
                "tokenizer expects {} variates, series has {n}",
                self.proj.fan_in()
            )));
        }
        let flat: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |j| u.at(i, j))).collect();
        let mut tokens = self.proj.apply(&flat);
        for (v, p) in tokens.iter_mut().zip(sinusoidal_embedding(m, self.dim())) {
            *v += p;
        }
        TokenMatrix::new(tokens, self.dim())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchTokenizer {
    proj: Linear,
    patch_len: usize,
}

impl PatchTokenizer {
    pub fn new(n: usize, d: usize, patch_len: usize, seed: u64) -> Result<Self> {
        if patch_len == 0 {
            return Err(Error::Parameter("patch length must be >= 1".into()));
        }
        let mut rng = component_rng(seed, STREAM + 1);
        Ok(PatchTokenizer {
            proj: Linear::random(n * patch_len, d, &mut rng),
            patch_len,
        })
    }

    pub fn dim(&self) -> usize {
        self.proj.fan_out()
    }

    /// One token per patch of `patch_len` time stamps: `t = m / patch_len`.
    pub fn tokenize(&self, u: &Series) -> Result<TokenMatrix> {
        let m = u.len();
        let n = u.variates();
        if m == 0 {
            return Err(Error::EmptySequence);
        }
        if m % self.patch_len != 0 {
            return Err(Error::Shape(format!(
                "patch length {} does not divide {m} time stamps",
                self.patch_len
            )));
        }
        if n * self.patch_len != self.proj.fan_in() {
            return Err(Error::Shape(format!(
                "tokenizer expects {} variates, series has {n}",
                self.proj.fan_in() / self.patch_len
            )));
        }
        let t = m / self.patch_len;
        let flat: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |j| u.at(i, j))).collect();
        let mut tokens = self.proj.apply(&flat);
        for (v, p) in tokens.iter_mut().zip(sinusoidal_embedding(t, self.dim())) {
            *v += p;
        }
        TokenMatrix::new(tokens, self.dim())
    }
}

/// Timestep tokenization with a tokenizer seeded from `seed`.
pub fn tokenize_timestep(u: &Series, d: usize, seed: u64) -> Result<TokenMatrix> {
    TimestepTokenizer::new(u.variates(), d, seed).tokenize(u)
}

/// Patch tokenization with a tokenizer seeded from `seed`.
pub fn tokenize_patch(u: &Series, patch_len: usize, d: usize, seed: u64) -> Result<TokenMatrix> {
    PatchTokenizer::new(u.variates(), d, patch_len, seed)?.tokenize(u)
}
