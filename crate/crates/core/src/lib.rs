//! Token merging for sequence models.
//!
//! Tokens are split in alternation into subsets A (even positions) and B
//! (odd positions). Similarities are scored only inside a band
//! `|i - j| < k` of subset indices, so the cost ranges from linear
//! (`k = 1`, adjacent pairs only) to quadratic (`k = t/2`, the global pool).
//! The `r` best correspondences are merged into size-weighted means.
//!
//! - [`seqcore`]: token matrices with provenance, plans, traces, schedules.
//! - [`merge`]: banded similarity, top-r selection, merging, dynamic `r`,
//!   the pruning baseline.
//! - [`causal`]: adjacent-only merging for decoders and the final unmerge.
//! - [`toymodels`]: seeded transformer encoder/decoder and a gated
//!   long-convolution model with merge hooks, plus FLOP accounting.
//! - [`signals`]: spectral entropy, THD, Gaussian low-pass, redundancy.
//! - [`cli`]: CSV ingestion, benchmark sweeps and reports.
//!
//! ```
//! use tokmerge::{merge, seqcore::{Metric, TokenMatrix}};
//!
//! let x = TokenMatrix::from_rows(&[
//!     vec![1.0, 0.0], vec![1.0, 0.1], vec![0.0, 1.0], vec![0.5, 0.5],
//! ]).unwrap();
//! let sim = merge::similarity_banded(&x, &x.partition(), 1, Metric::Cosine).unwrap();
//! assert_eq!(sim.evaluations(), 2);
//! let plan = merge::select_top_r(&sim, 1, 1);
//! let y = merge::merge_apply(&x, &plan).unwrap();
//! assert_eq!(y.len(), 3);
//! assert_eq!(y.sizes(), &[2, 1, 1]);
//! ```

pub mod causal;
pub mod cli;
mod error;
pub mod merge;
pub mod seqcore;
pub mod series;
pub mod signals;
pub mod toymodels;

pub use error::{Error, Result};
pub use seqcore::{
    LayerSchedule, Locality, MergePlan, MergeTrace, Metric, Origin, Span, TokenMatrix,
};
pub use series::Series;
