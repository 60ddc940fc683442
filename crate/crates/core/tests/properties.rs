mod common;

use proptest::prelude::*;
use tokmerge::causal::{causal_merge, unmerge};
use tokmerge::merge::{
    dynamic_r, merge_apply, merge_with_schedule, select_top_r, similarity_banded,
};
use tokmerge::seqcore::partition;
use tokmerge::signals::{gaussian_lowpass, redundancy_profile};
use tokmerge::toymodels::{causal_conv_direct, causal_conv_fft};
use tokmerge::{LayerSchedule, Locality, MergeTrace, Metric, TokenMatrix};

use common::{oracle_merge, random_sized_tokens, rng};

fn rows_strategy(max_t: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_t, 1..=max_d).prop_flat_map(|(t, d)| {
        prop::collection::vec(prop::collection::vec(-4.0..4.0f64, d), t)
    })
}

fn tokens(rows: &[Vec<f64>]) -> TokenMatrix {
    TokenMatrix::from_rows(rows).unwrap()
}

fn metric_strategy() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::Cosine), Just(Metric::L1), Just(Metric::L2)]
}

fn schedule_strategy() -> impl Strategy<Value = LayerSchedule> {
    let k = prop_oneof![Just(Locality::Global), (1usize..6).prop_map(Locality::Band)];
    (0usize..40, k, 1usize..6, metric_strategy(), prop::option::of(-1.0..1.0f64)).prop_map(
        |(r, k, q, metric, tau)| {
            let s = match tau {
                Some(tau) => LayerSchedule::dynamic(tau, k),
                None => LayerSchedule::fixed(r, k),
            };
            s.with_q(q).with_metric(metric)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn partition_is_a_disjoint_cover(t in 1usize..200) {
        let p = partition(t).unwrap();
        let mut seen = vec![0u8; t];
        for &i in p.a.iter().chain(&p.b).chain(p.excluded.iter()) {
            seen[i] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(p.a.len(), t / 2);
        prop_assert_eq!(p.b.len(), t / 2);
        prop_assert!(p.a.iter().all(|i| i % 2 == 0) && p.b.iter().all(|i| i % 2 == 1));
    }

    #[test]
    fn global_merge_matches_brute_force(
        rows in rows_strategy(32, 8).prop_filter("t >= 2", |r| r.len() >= 2),
        r in 0usize..40,
        q in 1usize..40,
        seed in any::<u64>(),
    ) {
        let x = random_sized_tokens(&mut rng(seed), rows.clone(), 3);
        let t = x.len();
        let sim = similarity_banded(&x, &x.partition(), t / 2, Metric::Cosine).unwrap();
        let y = merge_apply(&x, &select_top_r(&sim, r, q)).unwrap();
        let expect = oracle_merge(&rows, x.sizes(), r, q);
        prop_assert_eq!(y.len(), expect.len());
        for (i, o) in expect.iter().enumerate() {
            prop_assert_eq!(y.sizes()[i], o.size);
            for (a, b) in y.row(i).iter().zip(&o.value) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn edges_stay_in_band_and_wider_bands_select_no_less(
        rows in rows_strategy(40, 4).prop_filter("t >= 2", |r| r.len() >= 2),
        k in 1usize..20,
        extra in 1usize..20,
        r in 0usize..30,
        metric in metric_strategy(),
    ) {
        let x = tokens(&rows);
        let half = x.len() / 2;
        let (k, wide) = (k.min(half), (k + extra).min(half));
        let score = |k: usize| {
            let sim = similarity_banded(&x, &x.partition(), k, metric).unwrap();
            let plan = select_top_r(&sim, r, 1);
            for e in &plan.edges {
                assert!((e.a / 2).abs_diff(e.b / 2) < k);
            }
            plan.edges.iter().map(|e| e.similarity).sum::<f64>()
        };
        prop_assert!(score(wide) >= score(k) - 1e-9);
    }

    #[test]
    fn merged_tokens_lie_in_the_hull_of_their_constituents(
        rows in rows_strategy(32, 6),
        schedules in prop::collection::vec(schedule_strategy(), 1..4),
    ) {
        let x = tokens(&rows);
        let mut y = x.clone();
        for s in &schedules {
            y = merge_with_schedule(&y, s).unwrap().tokens;
        }
        for (i, o) in y.origins().iter().enumerate() {
            for c in 0..x.dim() {
                let vals: Vec<f64> = o.positions().map(|p| x.row(p)[c]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = y.row(i)[c];
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
        prop_assert_eq!(y.sizes().iter().sum::<usize>(), x.len());
    }

    #[test]
    fn constant_sequences_stay_constant(
        v in prop::collection::vec(-3.0..3.0f64, 1..6),
        t in 1usize..40,
        schedules in prop::collection::vec(schedule_strategy(), 1..4),
    ) {
        let rows = vec![v.clone(); t];
        let x = tokens(&rows);
        let mut y = x.clone();
        for s in &schedules {
            y = merge_with_schedule(&y, s).unwrap().tokens;
        }
        for row in y.rows() {
            prop_assert_eq!(row, v.as_slice());
        }
        let restored = unmerge(&y).unwrap();
        prop_assert_eq!(restored.as_slice(), x.as_slice());
    }

    #[test]
    fn causal_layers_keep_reachability_ordered(
        rows in rows_strategy(48, 4),
        rs in prop::collection::vec(0usize..20, 1..5),
        q in 1usize..8,
    ) {
        let x = tokens(&rows);
        let mut y = x.clone();
        let mut trace = MergeTrace::identity(x.len());
        for &r in &rs {
            let (next, plan) = causal_merge(&y, r, q, Metric::Cosine).unwrap();
            trace = trace.compose(&plan).unwrap();
            y = next;
        }
        for o in y.origins() {
            prop_assert!(o.is_contiguous());
            prop_assert_eq!(o.hi() - o.lo() + 1, o.width());
        }
        for w in y.origins().windows(2) {
            prop_assert!(w[0].hi() < w[1].lo());
        }
        // The trace agrees with the provenance carried by the tokens.
        let pre = trace.preimages();
        prop_assert_eq!(pre.len(), y.len());
        for (o, p) in y.origins().iter().zip(&pre) {
            prop_assert_eq!(&o.positions().collect::<Vec<_>>(), p);
            prop_assert!(p.windows(2).all(|w| w[1] == w[0] + 1));
        }
        prop_assert_eq!(unmerge(&y).unwrap().len(), x.len());
        prop_assert!(y.len() >= q.min(x.len()));
    }

    #[test]
    fn traces_are_total_and_surjective(
        rows in rows_strategy(40, 3),
        schedules in prop::collection::vec(schedule_strategy(), 1..5),
    ) {
        let x = tokens(&rows);
        let mut y = x.clone();
        let mut trace = MergeTrace::identity(x.len());
        for s in &schedules {
            let step = merge_with_schedule(&y, s).unwrap();
            trace = trace.compose(&step.plan).unwrap();
            y = step.tokens;
        }
        prop_assert_eq!(trace.final_map.len(), x.len());
        prop_assert_eq!(trace.surviving_len(), y.len());
        prop_assert!(trace.preimages().iter().all(|p| !p.is_empty()));
        for (o, p) in y.origins().iter().zip(trace.preimages()) {
            prop_assert_eq!(o.positions().collect::<Vec<_>>(), p);
        }
        let back = MergeTrace::from_json(&trace.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.final_map, trace.final_map);
    }

    #[test]
    fn dynamic_r_stays_within_the_floor(
        rows in rows_strategy(24, 3).prop_filter("t >= 2", |r| r.len() >= 2),
        tau in -1.0..1.0f64,
        q in 1usize..30,
    ) {
        let x = tokens(&rows);
        let t = x.len();
        let r = dynamic_r(&[x.clone(), x], tau, Locality::Global, q, Metric::Cosine).unwrap();
        prop_assert!(r <= t.saturating_sub(q) && r <= t / 2);
    }

    #[test]
    fn lowpass_commutes_with_offsets(
        series in prop::collection::vec(-10.0..10.0f64, 2..300),
        c in -100.0..100.0f64,
        sigma in 0.3..6.0f64,
    ) {
        let shifted: Vec<f64> = series.iter().map(|v| v + c).collect();
        let a = gaussian_lowpass(&shifted, sigma).unwrap();
        let b = gaussian_lowpass(&series, sigma).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - (y + c)).abs() <= 1e-9);
        }
    }

    #[test]
    fn redundancy_is_a_non_increasing_fraction(
        rows in rows_strategy(40, 4).prop_filter("t >= 2", |r| r.len() >= 2),
        mut thresholds in prop::collection::vec(-1.2..1.2f64, 1..20),
        k in 1usize..8,
    ) {
        thresholds.sort_by(f64::total_cmp);
        let x = tokens(&rows);
        let curve = redundancy_profile(&x, &thresholds, Locality::Band(k), Metric::Cosine).unwrap();
        for p in &curve {
            prop_assert!((0.0..=1.0).contains(&p.fraction));
        }
        for w in curve.windows(2) {
            prop_assert!(w[1].fraction <= w[0].fraction);
        }
    }

    #[test]
    fn global_redundancy_ignores_order_within_subsets(
        rows in rows_strategy(30, 3).prop_filter("t >= 4", |r| r.len() >= 4),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let x = tokens(&rows);
        let t2 = 2 * (x.len() / 2);
        // Shuffle the A tokens among themselves and the B tokens among themselves.
        let mut g = rng(seed);
        let mut a: Vec<usize> = (0..t2).step_by(2).collect();
        let mut b: Vec<usize> = (1..t2).step_by(2).collect();
        a.shuffle(&mut g);
        b.shuffle(&mut g);
        let mut order: Vec<usize> = a.iter().zip(&b).flat_map(|(&i, &j)| [i, j]).collect();
        order.extend(t2..x.len());
        let y = tokens(&order.iter().map(|&p| rows[p].clone()).collect::<Vec<_>>());
        let th: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let px = redundancy_profile(&x, &th, Locality::Global, Metric::Cosine).unwrap();
        let py = redundancy_profile(&y, &th, Locality::Global, Metric::Cosine).unwrap();
        prop_assert_eq!(px, py);
    }

    #[test]
    fn fft_convolution_matches_direct(
        u in prop::collection::vec(-1.0..1.0f64, 1..200),
        h in prop::collection::vec(-1.0..1.0f64, 1..200),
    ) {
        let mut planner = rustfft::FftPlanner::new();
        let a = causal_conv_fft(&u, &h, &mut planner);
        let b = causal_conv_direct(&u, &h);
        prop_assert_eq!(a.len(), u.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn merging_is_not_permutation_invariant() {
    let v = vec![1.0, 0.0];
    let w = vec![0.0, 1.0];
    let u = vec![0.6, 0.8];
    // Same multiset of tokens, different order.
    let x = tokens(&[v.clone(), v.clone(), w.clone(), u.clone()]);
    let y = tokens(&[v.clone(), w.clone(), v.clone(), u.clone()]);
    let merge = |x: &TokenMatrix| {
        let sim = similarity_banded(x, &x.partition(), 1, Metric::Cosine).unwrap();
        merge_apply(x, &select_top_r(&sim, 1, 1)).unwrap()
    };
    let (mx, my) = (merge(&x), merge(&y));
    let mut a: Vec<Vec<f64>> = mx.rows().map(<[f64]>::to_vec).collect();
    let mut b: Vec<Vec<f64>> = my.rows().map(<[f64]>::to_vec).collect();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    assert_ne!(a, b);
    assert_eq!(mx.row(0), v.as_slice());
}
