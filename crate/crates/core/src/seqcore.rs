//! Value types shared across the crate: token matrices with provenance,
//! merge plans, merge traces and per-layer schedules.
//!
//! Positions in a [`MergePlan`] always refer to the token order of the
//! matrix the plan is applied to. Provenance ([`Origin`]) refers to
//! positions of the original, unmerged input.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Inclusive interval `[lo, hi]` of original positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi);
        Span { lo, hi }
    }

    pub fn point(pos: usize) -> Self {
        Span { lo: pos, hi: pos }
    }

    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }
}

/// The original positions absorbed by one token, kept as sorted, disjoint,
/// coalesced intervals. Causal (adjacent) merging always yields a single
/// interval; wider bands can absorb non-adjacent tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Origin {
    spans: Vec<Span>,
}

impl Origin {
    pub fn point(pos: usize) -> Self {
        Origin {
            spans: vec![Span::point(pos)],
        }
    }

    pub fn from_span(span: Span) -> Self {
        Origin { spans: vec![span] }
    }

    /// Builds an origin from arbitrary spans, sorting and coalescing them.
    /// Overlapping spans are rejected.
    pub fn from_spans(mut spans: Vec<Span>) -> Result<Self> {
        if spans.is_empty() {
            return Err(Error::Corruption("origin without any span".into()));
        }
        if spans.iter().any(|s| s.lo > s.hi) {
            return Err(Error::Corruption("span with lo > hi".into()));
        }
        spans.sort();
        let mut out: Vec<Span> = Vec::with_capacity(spans.len());
        for s in spans {
            match out.last_mut() {
                Some(last) if s.lo <= last.hi => {
                    return Err(Error::Corruption(format!(
                        "overlapping spans [{}, {}] and [{}, {}]",
                        last.lo, last.hi, s.lo, s.hi
                    )))
                }
                Some(last) if s.lo == last.hi + 1 => last.hi = s.hi,
                _ => out.push(s),
            }
        }
        Ok(Origin { spans: out })
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn lo(&self) -> usize {
        self.spans[0].lo
    }

    pub fn hi(&self) -> usize {
        self.spans[self.spans.len() - 1].hi
    }

    pub fn width(&self) -> usize {
        self.spans.iter().map(Span::width).sum()
    }

    pub fn is_contiguous(&self) -> bool {
        self.spans.len() == 1
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.spans.iter().flat_map(|s| s.lo..=s.hi)
    }

    /// Union of disjoint origins.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a Origin>) -> Result<Origin> {
        let spans = parts
            .into_iter()
            .flat_map(|o| o.spans.iter().copied())
            .collect();
        Origin::from_spans(spans)
    }
}

/// An ordered sequence of `t` tokens of dimension `d`, stored row-major,
/// together with the number of original tokens each one absorbed and the
/// original positions it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix {
    data: Vec<f64>,
    dim: usize,
    sizes: Vec<usize>,
    origins: Vec<Origin>,
}

impl TokenMatrix {
    /// Fresh tokens: every token has size 1 and covers its own position.
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("token dimension must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptySequence);
        }
        if data.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not split into rows of dimension {dim}",
                data.len()
            )));
        }
        check_finite(&data)?;
        let t = data.len() / dim;
        Ok(TokenMatrix {
            data,
            dim,
            sizes: vec![1; t],
            origins: (0..t).map(Origin::point).collect(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptySequence)?;
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Shape(format!(
                "row {i} has dimension {}, expected {dim}",
                r.len()
            )));
        }
        TokenMatrix::new(rows.concat(), dim)
    }

    /// Tokens with explicit provenance. Origins must be pairwise disjoint,
    /// sorted by their first position, and each must cover exactly
    /// `sizes[i]` original positions.
    pub fn with_provenance(
        data: Vec<f64>,
        dim: usize,
        sizes: Vec<usize>,
        origins: Vec<Origin>,
    ) -> Result<Self> {
        let mut x = TokenMatrix::new(data, dim)?;
        let t = x.len();
        if sizes.len() != t || origins.len() != t {
            return Err(Error::Corruption(format!(
                "{t} tokens but {} sizes and {} origins",
                sizes.len(),
                origins.len()
            )));
        }
        for (i, (s, o)) in sizes.iter().zip(&origins).enumerate() {
            if *s == 0 {
                return Err(Error::Corruption(format!("token {i} has size 0")));
            }
            if o.width() != *s {
                return Err(Error::Corruption(format!(
                    "token {i} has size {s} but covers {} positions",
                    o.width()
                )));
            }
        }
        for (i, w) in origins.windows(2).enumerate() {
            if w[0].lo() >= w[1].lo() {
                return Err(Error::Corruption(format!(
                    "origins of tokens {i} and {} are not sorted",
                    i + 1
                )));
            }
        }
        // Disjointness across tokens.
        Origin::union(&origins)?;
        x.sizes = sizes;
        x.origins = origins;
        Ok(x)
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    /// Number of original tokens represented, i.e. the sum of sizes.
    pub fn original_len(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn partition(&self) -> Partition {
        // A TokenMatrix is never empty.
        partition(self.len()).expect("non-empty token matrix")
    }

    /// Same provenance, new values. Used by layers that transform tokens
    /// without changing their count.
    pub fn map_values(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "replacement has {} values, expected {}",
                data.len(),
                self.data.len()
            )));
        }
        check_finite(&data)?;
        Ok(TokenMatrix {
            data,
            dim: self.dim,
            sizes: self.sizes.clone(),
            origins: self.origins.clone(),
        })
    }

    pub(crate) fn from_parts_unchecked(
        data: Vec<f64>,
        dim: usize,
        sizes: Vec<usize>,
        origins: Vec<Origin>,
    ) -> Self {
        debug_assert_eq!(data.len(), dim * sizes.len());
        debug_assert_eq!(sizes.len(), origins.len());
        TokenMatrix {
            data,
            dim,
            sizes,
            origins,
        }
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Parameter(format!(
            "token value at flat index {i} is not finite"
        ))),
        None => Ok(()),
    }
}

/// Alternating bipartite split of a sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Even positions among the first `2⌊t/2⌋` tokens.
    pub a: Vec<usize>,
    /// Odd positions among the first `2⌊t/2⌋` tokens.
    pub b: Vec<usize>,
    /// The most recent token when `t` is odd; it never takes part in merging.
    pub excluded: Option<usize>,
}

impl Partition {
    /// `⌊t/2⌋`, the size of each subset.
    pub fn half(&self) -> usize {
        self.a.len()
    }

    pub fn len(&self) -> usize {
        2 * self.a.len() + usize::from(self.excluded.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn partition(t: usize) -> Result<Partition> {
    if t == 0 {
        return Err(Error::EmptySequence);
    }
    let half = t / 2;
    Ok(Partition {
        a: (0..half).map(|i| 2 * i).collect(),
        b: (0..half).map(|i| 2 * i + 1).collect(),
        excluded: (t % 2 == 1).then_some(t - 1),
    })
}

/// One merge correspondence between an A-token and a B-token, in the
/// token order of the matrix the plan applies to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub similarity: f64,
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.a, self.b, self.similarity).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (a, b, similarity) = <(usize, usize, f64)>::deserialize(d)?;
        Ok(Edge { a, b, similarity })
    }
}

/// Where a merged group lands in the output sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Destination {
    /// The earliest position among the merged tokens.
    #[default]
    EarlierPosition,
}

/// The merges selected for one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PlanRecord", into = "PlanRecord")]
pub struct MergePlan {
    pub edges: Vec<Edge>,
    /// Locality bound: an edge between `A[i]` and `B[j]` needs `|i - j| < k`.
    pub k: usize,
    /// Merge count asked for before clipping to the floor `q`.
    pub requested_r: usize,
    pub destination: Destination,
}

#[derive(Serialize, Deserialize)]
struct PlanRecord {
    edges: Vec<Edge>,
    k: usize,
    r: usize,
}

impl From<MergePlan> for PlanRecord {
    fn from(p: MergePlan) -> Self {
        PlanRecord {
            r: p.edges.len(),
            edges: p.edges,
            k: p.k,
        }
    }
}

impl From<PlanRecord> for MergePlan {
    fn from(p: PlanRecord) -> Self {
        MergePlan {
            requested_r: p.r,
            edges: p.edges,
            k: p.k,
            destination: Destination::EarlierPosition,
        }
    }
}

/// Output layout of a plan: each output token lists the input positions it
/// absorbs, sorted ascending; output order follows the first position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanLayout {
    pub groups: Vec<Vec<usize>>,
}

impl MergePlan {
    pub fn empty(k: usize) -> Self {
        MergePlan {
            edges: Vec::new(),
            k,
            requested_r: 0,
            destination: Destination::EarlierPosition,
        }
    }

    /// Number of merges actually applied.
    pub fn r(&self) -> usize {
        self.edges.len()
    }

    /// True if the requested count was reduced to respect the token floor.
    pub fn clipped(&self) -> bool {
        self.requested_r > self.edges.len()
    }

    /// Checks the plan against a sequence of `t` tokens and groups the
    /// positions that collapse into each output token. Several A-tokens may
    /// share one B-token; each A-token is a source at most once.
    pub fn layout(&self, t: usize) -> Result<PlanLayout> {
        let half = t / 2;
        if self.k == 0 {
            return Err(Error::InvalidPlan("locality bound k must be >= 1".into()));
        }
        // For every B-index, the A-indices merging into it.
        let mut into_b: Vec<Vec<usize>> = vec![Vec::new(); half];
        let mut used_a = vec![false; half];
        for e in &self.edges {
            if e.a >= 2 * half || e.a % 2 != 0 {
                return Err(Error::InvalidPlan(format!(
                    "edge source {} is not in subset A of a {t}-token sequence",
                    e.a
                )));
            }
            if e.b >= 2 * half || e.b % 2 != 1 {
                return Err(Error::InvalidPlan(format!(
                    "edge destination {} is not in subset B of a {t}-token sequence",
                    e.b
                )));
            }
            let (i, j) = (e.a / 2, e.b / 2);
            if i.abs_diff(j) >= self.k {
                return Err(Error::InvalidPlan(format!(
                    "edge ({}, {}) lies outside the band k = {}",
                    e.a, e.b, self.k
                )));
            }
            if std::mem::replace(&mut used_a[i], true) {
                return Err(Error::InvalidPlan(format!(
                    "token {} is the source of more than one edge",
                    e.a
                )));
            }
            into_b[j].push(e.a);
        }
        let mut owner: Vec<Option<usize>> = vec![None; t];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (j, sources) in into_b.into_iter().enumerate() {
            if sources.is_empty() {
                continue;
            }
            let mut g = sources;
            g.push(2 * j + 1);
            g.sort_unstable();
            let gi = groups.len();
            for &p in &g {
                owner[p] = Some(gi);
            }
            groups.push(g);
        }
        let mut out = Vec::with_capacity(t - self.edges.len());
        for (p, o) in owner.iter().enumerate() {
            match *o {
                None => out.push(vec![p]),
                Some(gi) if groups[gi].first() == Some(&p) => {
                    out.push(std::mem::take(&mut groups[gi]))
                }
                Some(_) => {}
            }
        }
        Ok(PlanLayout { groups: out })
    }
}

/// Cumulative record of merges across layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub layers: Vec<MergePlan>,
    /// `final_map[p]` is the index of the surviving token holding original
    /// position `p`.
    pub final_map: Vec<usize>,
}

impl MergeTrace {
    pub fn identity(t: usize) -> Self {
        MergeTrace {
            layers: Vec::new(),
            final_map: (0..t).collect(),
        }
    }

    pub fn original_len(&self) -> usize {
        self.final_map.len()
    }

    pub fn surviving_len(&self) -> usize {
        self.final_map.iter().max().map_or(0, |m| m + 1)
    }

    /// Original positions grouped by surviving token.
    pub fn preimages(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.surviving_len()];
        for (p, &s) in self.final_map.iter().enumerate() {
            out[s].push(p);
        }
        out
    }

    pub fn compose(&self, plan: &MergePlan) -> Result<MergeTrace> {
        trace_compose(self, plan)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Appends `plan` to the trace and re-points every original position that
/// belonged to a merged token at the token's new index.
pub fn trace_compose(trace: &MergeTrace, plan: &MergePlan) -> Result<MergeTrace> {
    let t = trace.surviving_len();
    if let Some(e) = plan.edges.iter().find(|e| e.a >= t || e.b >= t) {
        return Err(Error::TraceMismatch(format!(
            "edge ({}, {}) out of bounds for {t} surviving tokens",
            e.a, e.b
        )));
    }
    let layout = plan.layout(t).map_err(|e| match e {
        Error::InvalidPlan(m) => Error::TraceMismatch(m),
        other => other,
    })?;
    let mut remap = vec![0usize; t];
    for (out_idx, g) in layout.groups.iter().enumerate() {
        for &p in g {
            remap[p] = out_idx;
        }
    }
    let mut layers = trace.layers.clone();
    layers.push(plan.clone());
    Ok(MergeTrace {
        layers,
        final_map: trace.final_map.iter().map(|&s| remap[s]).collect(),
    })
}

/// Token similarity measure. Distances are negated so that larger always
/// means more similar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    L1,
    L2,
}

impl Metric {
    pub fn score(self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self {
            Metric::Cosine => {
                let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
                for (a, b) in u.iter().zip(v) {
                    dot += a * b;
                    nu += a * a;
                    nv += b * b;
                }
                if nu == 0.0 || nv == 0.0 {
                    0.0
                } else {
                    // sqrt(n * n) == n exactly, so identical tokens score exactly 1.
                    (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0)
                }
            }
            Metric::L1 => -u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>(),
            Metric::L2 => -u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            other => Err(Error::Parameter(format!("unknown metric '{other}'"))),
        }
    }
}

/// Band width of the merge neighbourhood. `Global` resolves to `⌊t/2⌋`
/// for whatever token count a layer sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Locality {
    #[default]
    Global,
    Band(usize),
}

impl Locality {
    /// Effective `k` for `t` tokens. Bands wider than `⌊t/2⌋` saturate at
    /// the global pool. Returns 0 when no merge is possible.
    pub fn resolve(self, t: usize) -> usize {
        let half = t / 2;
        match self {
            Locality::Global => half,
            Locality::Band(k) => k.min(half),
        }
    }
}

impl Serialize for Locality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Locality::Global => s.serialize_str("global"),
            Locality::Band(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Locality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(0) => Err(serde::de::Error::custom("k must be >= 1")),
            Raw::Num(k) => Ok(Locality::Band(k)),
            Raw::Str(s) if s == "global" => Ok(Locality::Global),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "k must be a positive integer or \"global\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Merge a fixed `r` tokens.
    #[default]
    Fixed,
    /// Derive `r` from a similarity threshold `tau`.
    Dynamic,
}

/// Merging policy for one layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerSchedule {
    pub mode: ScheduleMode,
    pub r: usize,
    pub tau: f64,
    pub k: Locality,
    /// Minimum number of tokens left after merging.
    pub q: usize,
    pub metric: Metric,
}

impl Default for LayerSchedule {
    fn default() -> Self {
        LayerSchedule {
            mode: ScheduleMode::Fixed,
            r: 0,
            tau: 1.0,
            k: Locality::Global,
            q: 1,
            metric: Metric::Cosine,
        }
    }
}

impl LayerSchedule {
    pub fn fixed(r: usize, k: Locality) -> Self {
        LayerSchedule {
            r,
            k,
            ..Default::default()
        }
    }

    pub fn causal(r: usize) -> Self {
        Self::fixed(r, Locality::Band(1))
    }

    pub fn dynamic(tau: f64, k: Locality) -> Self {
        LayerSchedule {
            mode: ScheduleMode::Dynamic,
            tau,
            k,
            ..Default::default()
        }
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Schedule("token floor q must be >= 1".into()));
        }
        if self.k == Locality::Band(0) {
            return Err(Error::Schedule("locality k must be >= 1".into()));
        }
        if self.mode == ScheduleMode::Dynamic
            && self.metric == Metric::Cosine
            && !(-1.0..=1.0).contains(&self.tau)
        {
            return Err(Error::Schedule(format!(
                "cosine threshold tau = {} outside [-1, 1]",
                self.tau
            )));
        }
        if !self.tau.is_finite() {
            return Err(Error::Schedule("threshold tau must be finite".into()));
        }
        Ok(())
    }

    /// True when the schedule only ever merges adjacent tokens.
    pub fn is_causal(&self) -> bool {
        self.k == Locality::Band(1)
    }
}
