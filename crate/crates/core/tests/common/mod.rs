#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokmerge::{Origin, Span, TokenMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut impl Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn random_tokens(rng: &mut impl Rng, t: usize, d: usize) -> TokenMatrix {
    TokenMatrix::from_rows(&random_rows(rng, t, d)).unwrap()
}

/// Random tokens with random sizes in `1..=max_size` and contiguous,
/// ascending origins.
pub fn random_sized_tokens(rng: &mut impl Rng, rows: Vec<Vec<f64>>, max_size: usize) -> TokenMatrix {
    let d = rows[0].len();
    let sizes: Vec<usize> = rows.iter().map(|_| rng.random_range(1..=max_size)).collect();
    let mut lo = 0;
    let origins = sizes
        .iter()
        .map(|&s| {
            let o = Origin::from_span(Span::new(lo, lo + s - 1));
            lo += s;
            o
        })
        .collect();
    TokenMatrix::with_provenance(rows.concat(), d, sizes, origins).unwrap()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|b| b * b).sum();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0)
}

/// One surviving token of the brute-force merge.
#[derive(Debug)]
pub struct OracleToken {
    pub first: usize,
    pub size: usize,
    pub value: Vec<f64>,
}

/// Brute-force global merge: score every (even, odd) pair among the first
/// `2⌊t/2⌋` positions, keep each even token's best odd partner (lowest odd
/// position on ties), take the `min(r, t - q)` strongest (lowest even
/// position on ties), and average every group weighted by size.
pub fn oracle_merge(
    rows: &[Vec<f64>],
    sizes: &[usize],
    r: usize,
    q: usize,
) -> Vec<OracleToken> {
    let t = rows.len();
    let half = t / 2;
    let mut proposals: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..half {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..half {
            let s = cosine(&rows[2 * i], &rows[2 * j + 1]);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        if let Some((j, s)) = best {
            proposals.push((2 * i, 2 * j + 1, s));
        }
    }
    proposals.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap().then(x.0.cmp(&y.0)));
    proposals.truncate(r.min(t.saturating_sub(q)));

    let mut group_of: Vec<usize> = (0..t).collect();
    for &(a, b, _) in &proposals {
        group_of[a] = b;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); t];
    for p in 0..t {
        members[group_of[p]].push(p);
    }
    let mut out: Vec<OracleToken> = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let d = rows[0].len();
            let size: usize = m.iter().map(|&p| sizes[p]).sum();
            let mut value = vec![0.0; d];
            for &p in &m {
                for (v, x) in value.iter_mut().zip(&rows[p]) {
                    *v += sizes[p] as f64 * x;
                }
            }
            for v in &mut value {
                *v /= size as f64;
            }
            OracleToken {
                first: *m.iter().min().unwrap(),
                size,
                value,
            }
        })
        .collect();
    out.sort_by_key(|o| o.first);
    out
}

/// PASS/FAIL line for one acceptance criterion.
pub fn verdict(id: u32, name: &str, pass: bool, elapsed: std::time::Duration, limit_s: f64, detail: &str) -> bool {
    let in_time = elapsed.as_secs_f64() < limit_s;
    let ok = pass && in_time;
    println!(
        "[{}] #{id:02} {name}: {detail} ({:.2} s, limit {limit_s} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}
