//! Banded similarity, top-r selection, merge application, dynamic merge
//! counts and the pruning baseline.
//!
//! Similarities are computed only between `A[i]` and `B[j]` with
//! `|i - j| < k`. With `k = ⌊t/2⌋` this is the full bipartite matrix; with
//! `k = 1` only adjacent pairs `(2i, 2i + 1)` are scored.

use crate::error::{Error, Result};
use crate::seqcore::{
    Destination, Edge, Locality, MergePlan, Metric, Origin, Partition, ScheduleMode,
    LayerSchedule, TokenMatrix,
};

/// One row of the band: scores of `A[i]` against `B[j_start..j_start + len]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandRow {
    pub j_start: usize,
    pub scores: Vec<f64>,
}

/// The sparse band `S_loc`, stored as one short row per A-token.
#[derive(Clone, Debug, PartialEq)]
pub struct BandSimilarity {
    t: usize,
    k: usize,
    metric: Metric,
    rows: Vec<BandRow>,
    evaluations: usize,
}

impl BandSimilarity {
    /// Token count of the scored sequence.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn rows(&self) -> &[BandRow] {
        &self.rows
    }

    /// Number of pairwise similarity evaluations performed.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Score of `A[i]` against `B[j]`, if that pair lies in the band.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let row = self.rows.get(i)?;
        j.checked_sub(row.j_start)
            .and_then(|off| row.scores.get(off))
            .copied()
    }

    /// All band entries as `(i, j, score)` in subset coordinates.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.scores
                .iter()
                .enumerate()
                .map(move |(off, &s)| (i, row.j_start + off, s))
        })
    }

    /// One proposal per A-token: its most similar in-band B-token, lower
    /// B index on ties. Edges are in sequence positions.
    pub fn best_per_a(&self) -> Vec<Edge> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut best = 0;
                for (off, s) in row.scores.iter().enumerate().skip(1) {
                    if *s > row.scores[best] {
                        best = off;
                    }
                }
                Edge {
                    a: 2 * i,
                    b: 2 * (row.j_start + best) + 1,
                    similarity: row.scores[best],
                }
            })
            .collect()
    }

    /// Number of best-per-A proposals scoring at least `tau`.
    pub fn count_at_least(&self, tau: f64) -> usize {
        self.best_per_a()
            .iter()
            .filter(|e| e.similarity >= tau)
            .count()
    }
}

/// Scores every in-band `(A[i], B[j])` pair.
pub fn similarity_banded(
    x: &TokenMatrix,
    part: &Partition,
    k: usize,
    metric: Metric,
) -> Result<BandSimilarity> {
    if part.len() != x.len() {
        return Err(Error::Shape(format!(
            "partition covers {} tokens, matrix has {}",
            part.len(),
            x.len()
        )));
    }
    let half = part.half();
    if k < 1 || k > half {
        return Err(Error::Parameter(format!(
            "locality k = {k} outside [1, {half}] for {} tokens",
            x.len()
        )));
    }
    let mut evaluations = 0;
    let rows = part
        .a
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let j_start = i.saturating_sub(k - 1);
            let j_end = (i + k - 1).min(half - 1);
            let scores = part.b[j_start..=j_end]
                .iter()
                .map(|&b| {
                    evaluations += 1;
                    metric.score(x.row(a), x.row(b))
                })
                .collect();
            BandRow { j_start, scores }
        })
        .collect();
    Ok(BandSimilarity {
        t: x.len(),
        k,
        metric,
        rows,
        evaluations,
    })
}

/// `t'/2 + (k - 1)(t' - k)` with `t' = 2⌊t/2⌋`: the size of the band.
pub fn band_size(t: usize, k: usize) -> usize {
    let even = 2 * (t / 2);
    if k == 0 || even == 0 {
        return 0;
    }
    even / 2 + (k - 1) * (even - k)
}

/// Picks the `r` most similar best-per-A proposals. `r` is clipped so that
/// at least `q` tokens remain; ties go to the lower A index.
pub fn select_top_r(sim: &BandSimilarity, r: usize, q: usize) -> MergePlan {
    let allowed = r.min(sim.t.saturating_sub(q));
    let mut candidates = sim.best_per_a();
    // Stable sort keeps ascending A order among equal scores.
    candidates.sort_by(|x, y| y.similarity.total_cmp(&x.similarity));
    candidates.truncate(allowed);
    MergePlan {
        edges: candidates,
        k: sim.k,
        requested_r: r,
        destination: Destination::EarlierPosition,
    }
}

/// Replaces every merged group with its size-weighted mean, placed at the
/// group's earliest position. Sizes add and provenance is united.
pub fn merge_apply(x: &TokenMatrix, plan: &MergePlan) -> Result<TokenMatrix> {
    if plan.edges.is_empty() {
        return Ok(x.clone());
    }
    let layout = plan.layout(x.len())?;
    let d = x.dim();
    let mut data = Vec::with_capacity(layout.groups.len() * d);
    let mut sizes = Vec::with_capacity(layout.groups.len());
    let mut origins = Vec::with_capacity(layout.groups.len());
    for g in &layout.groups {
        if let [p] = g.as_slice() {
            data.extend_from_slice(x.row(*p));
            sizes.push(x.sizes()[*p]);
            origins.push(x.origins()[*p].clone());
            continue;
        }
        // Running weighted mean: m += (v - m) * s / S. Equal inputs give the
        // input back exactly.
        let mut mean = x.row(g[0]).to_vec();
        let mut total = x.sizes()[g[0]];
        for &p in &g[1..] {
            let s = x.sizes()[p];
            total += s;
            let w = s as f64 / total as f64;
            for (m, v) in mean.iter_mut().zip(x.row(p)) {
                *m += (v - *m) * w;
            }
        }
        data.extend(mean);
        sizes.push(total);
        origins.push(Origin::union(g.iter().map(|&p| &x.origins()[p]))?);
    }
    Ok(TokenMatrix::from_parts_unchecked(data, d, sizes, origins))
}

/// Merge count for a batch from a similarity threshold: each element counts
/// its best-per-A proposals scoring at least `tau`, the counts are averaged
/// (round half to even) and clipped to `[0, t - q]`.
pub fn dynamic_r(
    batch: &[TokenMatrix],
    tau: f64,
    k: Locality,
    q: usize,
    metric: Metric,
) -> Result<usize> {
    let first = batch
        .first()
        .ok_or_else(|| Error::Parameter("dynamic merging needs a non-empty batch".into()))?;
    let t = first.len();
    if let Some((index, x)) = batch.iter().enumerate().find(|(_, x)| x.len() != t) {
        return Err(Error::BatchShape {
            expected: t,
            got: x.len(),
            index,
        });
    }
    let k = k.resolve(t);
    if k == 0 {
        return Ok(0);
    }
    let mut total = 0usize;
    for x in batch {
        let sim = similarity_banded(x, &x.partition(), k, metric)?;
        total += sim.count_at_least(tau);
    }
    let mean = total as f64 / batch.len() as f64;
    let r = mean.round_ties_even() as usize;
    Ok(r.min(t.saturating_sub(q)))
}

/// A position that was dropped by pruning, with a surviving position whose
/// value stands in for it on expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct Orphan {
    pub origin: Origin,
    /// An original position held by the A-side partner.
    pub partner: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub tokens: TokenMatrix,
    pub orphaned: Vec<Orphan>,
}

/// Pruning baseline: same edges as merging, but the B-side token of each
/// edge is dropped instead of averaged in. Survivors keep their values,
/// sizes and provenance. When several edges share one B-token it is
/// dropped once.
pub fn prune_apply(x: &TokenMatrix, plan: &MergePlan) -> Result<Pruned> {
    if plan.edges.is_empty() {
        return Ok(Pruned {
            tokens: x.clone(),
            orphaned: Vec::new(),
        });
    }
    // Validates the plan exactly as merging would.
    plan.layout(x.len())?;
    let mut partner_of: Vec<Option<usize>> = vec![None; x.len()];
    for e in &plan.edges {
        partner_of[e.b].get_or_insert(e.a);
    }
    let d = x.dim();
    let mut data = Vec::new();
    let mut sizes = Vec::new();
    let mut origins = Vec::new();
    let mut orphaned = Vec::new();
    for (p, partner) in partner_of.iter().enumerate() {
        match *partner {
            Some(a) => orphaned.push(Orphan {
                origin: x.origins()[p].clone(),
                partner: x.origins()[a].lo(),
            }),
            None => {
                data.extend_from_slice(x.row(p));
                sizes.push(x.sizes()[p]);
                origins.push(x.origins()[p].clone());
            }
        }
    }
    Ok(Pruned {
        tokens: TokenMatrix::from_parts_unchecked(data, d, sizes, origins),
        orphaned,
    })
}

/// Expands pruned tokens back to `original_len` positions. Survivors fill
/// their own positions; orphans (listed oldest first, possibly accumulated
/// over several layers) copy their partner.
pub fn expand_pruned(
    tokens: &TokenMatrix,
    orphaned: &[Orphan],
    original_len: usize,
) -> Result<Vec<f64>> {
    let d = tokens.dim();
    let mut out: Vec<Option<usize>> = vec![None; original_len];
    let mut values: Vec<f64> = vec![0.0; original_len * d];
    fn fill(
        p: usize,
        src: &[f64],
        out: &mut [Option<usize>],
        values: &mut [f64],
    ) -> Result<()> {
        let d = src.len();
        let n = out.len();
        let slot = out
            .get_mut(p)
            .ok_or_else(|| Error::Corruption(format!("position {p} beyond {n}")))?;
        if slot.replace(p).is_some() {
            return Err(Error::Corruption(format!("position {p} filled twice")));
        }
        values[p * d..(p + 1) * d].copy_from_slice(src);
        Ok(())
    }
    for (i, o) in tokens.origins().iter().enumerate() {
        for p in o.positions() {
            fill(p, tokens.row(i), &mut out, &mut values)?;
        }
    }
    // A partner orphaned in a later layer must be resolved first.
    for orphan in orphaned.iter().rev() {
        if out.get(orphan.partner).copied().flatten().is_none() {
            return Err(Error::Corruption(format!(
                "partner position {} unresolved",
                orphan.partner
            )));
        }
        let src = values[orphan.partner * d..(orphan.partner + 1) * d].to_vec();
        for p in orphan.origin.positions() {
            fill(p, &src, &mut out, &mut values)?;
        }
    }
    if let Some(p) = out.iter().position(Option::is_none) {
        return Err(Error::Corruption(format!("position {p} not covered")));
    }
    Ok(values)
}

/// Outcome of one scheduled merge step.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeStep {
    pub tokens: TokenMatrix,
    pub plan: MergePlan,
    /// Similarity evaluations spent selecting the plan.
    pub evaluations: usize,
}

/// Selects one layer's plan: resolve `k` for the current length, determine
/// `r` (fixed or from the threshold) and pick the edges. Returns the plan
/// and the number of similarity evaluations spent. A fixed `r = 0`, or a
/// sequence already at the floor, scores nothing.
pub fn plan_with_schedule(x: &TokenMatrix, schedule: &LayerSchedule) -> Result<(MergePlan, usize)> {
    schedule.validate()?;
    let k = schedule.k.resolve(x.len());
    let idle = schedule.mode == ScheduleMode::Fixed && schedule.r == 0;
    if k == 0 || idle || x.len() <= schedule.q {
        return Ok((MergePlan::empty(k.max(1)), 0));
    }
    let sim = similarity_banded(x, &x.partition(), k, schedule.metric)?;
    let r = match schedule.mode {
        ScheduleMode::Fixed => schedule.r,
        ScheduleMode::Dynamic => {
            let r = sim.count_at_least(schedule.tau);
            r.min(x.len().saturating_sub(schedule.q))
        }
    };
    Ok((select_top_r(&sim, r, schedule.q), sim.evaluations()))
}

/// Runs one layer's merge: [`plan_with_schedule`] followed by
/// [`merge_apply`].
pub fn merge_with_schedule(x: &TokenMatrix, schedule: &LayerSchedule) -> Result<MergeStep> {
    let (plan, evaluations) = plan_with_schedule(x, schedule)?;
    let tokens = merge_apply(x, &plan)?;
    Ok(MergeStep {
        tokens,
        plan,
        evaluations,
    })
}
