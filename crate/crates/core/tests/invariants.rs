// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use proptest::prelude::*;
use rdpg_cpd::io::{decode_jsonl, decode_packed, encode_jsonl, encode_packed};
use rdpg_cpd::metrics::ExtReal;
use rdpg_cpd::theory::{brute_force_graph_law, DiscreteLatentLaw};
use rdpg_cpd::{
    bic_score, cusum_at, cusum_sup, draw_intervals, hausdorff_one_sided, nonpar_rdpg_cpd, pair_scores, pair_set,
    scaled_pca, weights, AdjacencySeries, ChangePointSet, LatentSeries, PairSeries, Snapshot, SymmetricMatrix,
};

/// `T x m` rows with values on a coarse lattice, so ties are common.
fn pair_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..14, 1usize..7).prop_flat_map(|(t, m)| {
        prop::collection::vec(prop::collection::vec((0u8..12).prop_map(|v| v as f64 / 8.0 - 0.2), m), t)
    })
}

fn triple(t_len: usize) -> impl Strategy<Value = (usize, usize, usize)> {
    (2..=t_len).prop_flat_map(|e| (0..e - 1).prop_flat_map(move |s| (Just(s), s + 1..e, Just(e))))
}

fn rows_and_triple() -> impl Strategy<Value = (Vec<Vec<f64>>, (usize, usize, usize))> {
    pair_rows().prop_flat_map(|rows| {
        let t = rows.len();
        (Just(rows), triple(t))
    })
}

fn series() -> impl Strategy<Value = AdjacencySeries> {
    (1usize..12, 1usize..6).prop_flat_map(|(n, t)| {
        let pairs = n * (n - 1) / 2;
        prop::collection::vec(prop::collection::vec(any::<bool>(), pairs), t).prop_map(move |bits| {
            let snaps = bits
                .iter()
                .map(|b| {
                    let mut s = Snapshot::empty(n);
                    let mut k = 0;
                    for i in 0..n {
                        for j in i + 1..n {
                            s.set(i, j, b[k]);
                            k += 1;
                        }
                    }
                    s
                })
                .collect();
            AdjacencySeries::new(n, snaps).unwrap()
        })
    })
}

fn point_set() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(1usize..60, 0..6).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn squared_weights_sum_to_one(m in 1usize..400, e in 2usize..500, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = ((e - 1) as f64 * a) as usize;
        let t = s + 1 + ((e - s - 1) as f64 * b) as usize;
        let t = t.min(e - 1);
        let (wl, wr) = weights(m, s, t, e);
        let total = (t - s) as f64 * m as f64 * wl * wl + (e - t) as f64 * m as f64 * wr * wr;
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sup_is_bounded((rows, (s, t, e)) in rows_and_triple()) {
        let y = PairSeries::from_rows(&rows).unwrap();
        let v = cusum_sup(&y, s, t, e).unwrap().value;
        let m = y.m() as f64;
        let bound = (2.0 * m * (t - s) as f64 * (e - t) as f64 / (e - s) as f64).sqrt();
        prop_assert!(v >= 0.0);
        prop_assert!(v <= bound + 1e-12);
    }

    #[test]
    fn sup_is_the_max_over_sample_values((rows, (s, t, e)) in rows_and_triple(), extra in prop::collection::vec(-1.0f64..1.5, 0..8)) {
        let y = PairSeries::from_rows(&rows).unwrap();
        let sup = cusum_sup(&y, s, t, e).unwrap();
        let mut best = 0.0f64;
        for z in rows[s..e].iter().flatten() {
            best = best.max(cusum_at(&y, s, t, e, *z).unwrap());
        }
        prop_assert!((sup.value - best).abs() <= 1e-12);
        prop_assert!((cusum_at(&y, s, t, e, sup.argmax_z).unwrap() - sup.value).abs() <= 1e-12);
        for z in extra {
            prop_assert!(cusum_at(&y, s, t, e, z).unwrap() <= sup.value + 1e-12);
        }
    }

    #[test]
    fn time_reversal_maps_t_to_mirror((rows, (s, t, e)) in rows_and_triple()) {
        let t_len = rows.len();
        let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let y = PairSeries::from_rows(&rows).unwrap();
        let r = PairSeries::from_rows(&reversed).unwrap();
        // row k maps to T-1-k, so (s, e] maps to (T-e, T-s] and t to T-e+(e-t)
        let (rs, re) = (t_len - e, t_len - s);
        let rt = rs + (e - t);
        let a = cusum_sup(&y, s, t, e).unwrap().value;
        let b = cusum_sup(&r, rs, rt, re).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn pair_permutation_leaves_cusum_unchanged((rows, (s, t, e)) in rows_and_triple(), seed in any::<u64>()) {
        let m = rows[0].len();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut state = seed;
        for i in (1..m).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let permuted: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&k| r[k]).collect()).collect();
        let a = cusum_sup(&PairSeries::from_rows(&rows).unwrap(), s, t, e).unwrap().value;
        let b = cusum_sup(&PairSeries::from_rows(&permuted).unwrap(), s, t, e).unwrap().value;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn one_sided_hausdorff_is_zero_iff_covered(a in point_set(), b in point_set()) {
        let d = hausdorff_one_sided(&a, &b);
        let covered = b.iter().all(|x| a.contains(x));
        if b.is_empty() {
            prop_assert_eq!(d, ExtReal::NEG_INF);
        } else {
            prop_assert_eq!(d.0 == 0.0, covered);
        }
    }

    #[test]
    fn adding_estimates_never_hurts_coverage(a in point_set(), extra in point_set(), b in point_set()) {
        let mut bigger = a.clone();
        bigger.extend(extra);
        bigger.sort_unstable();
        bigger.dedup();
        prop_assert!(hausdorff_one_sided(&bigger, &b).0 <= hausdorff_one_sided(&a, &b).0);
    }

    #[test]
    fn packed_round_trip(s in series()) {
        let bytes = encode_packed(&s);
        prop_assert_eq!(&decode_packed(&bytes).unwrap(), &s);
        prop_assert_eq!(encode_packed(&decode_packed(&bytes).unwrap()), bytes);
    }

    #[test]
    fn jsonl_round_trip(s in series()) {
        let text = encode_jsonl(&s);
        prop_assert_eq!(&decode_jsonl(&text).unwrap(), &s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_reconstructs_low_rank_psd(n in 2usize..40, d in 1usize..5, seed in any::<u64>()) {
        let d = d.min(n);
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let x = DMatrix::from_fn(n, d, |_, _| next() / (d as f64).sqrt());
        let p = &x * x.transpose();
        let xh = scaled_pca(&SymmetricMatrix::new(p.clone()).unwrap(), d).unwrap();
        prop_assert_eq!(xh.ncols(), d);
        prop_assert!((&xh * xh.transpose() - &p).norm() <= 1e-8);
        let again = scaled_pca(&SymmetricMatrix::new(p).unwrap(), d).unwrap();
        prop_assert_eq!(xh, again);
    }

    #[test]
    fn pair_scores_are_rotation_invariant(n in 2usize..30, d in 1usize..5, t in 1usize..4, seed in any::<u64>()) {
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let positions: Vec<DMatrix<f64>> = (0..t).map(|_| DMatrix::from_fn(n, d, |_, _| next())).collect();
        let w = DMatrix::from_fn(d, d, |_, _| next()).qr().q();
        let rotated: Vec<DMatrix<f64>> = positions.iter().map(|x| x * &w).collect();
        let pairs = pair_set(n).unwrap();
        let a = pair_scores(&LatentSeries::new(positions).unwrap(), &pairs).unwrap();
        let b = pair_scores(&LatentSeries::new(rotated).unwrap(), &pairs).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn detections_shrink_as_tau_grows(rows in pair_rows(), seed in any::<u64>(), taus in prop::collection::vec(0.01f64..3.0, 2..6)) {
        prop_assume!(rows.len() >= 3);
        let y = PairSeries::from_rows(&rows).unwrap();
        let intervals = draw_intervals(y.len(), 20, seed).unwrap();
        let mut taus = taus;
        taus.sort_by(f64::total_cmp);
        let mut last = usize::MAX;
        for tau in taus {
            let points = nonpar_rdpg_cpd(&y, &intervals, tau, 0, y.len()).unwrap();
            prop_assert!(points.len() <= last);
            last = points.len();
            for p in points.points() {
                let (s, e) = p.interval.unwrap();
                // location b + 1 with s < b < e
                prop_assert!(s < p.location - 1 && p.location - 1 < e);
            }
        }
    }

    #[test]
    fn noiseless_segments_are_recovered_exactly(
        lens in prop::collection::vec(4usize..10, 1..4),
        levels in prop::collection::vec(prop::collection::vec(0u8..6, 3), 4),
        seed in any::<u64>(),
    ) {
        // segment k repeats the same multiset of values in every snapshot
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        let mut prev: Option<Vec<u8>> = None;
        for (k, &len) in lens.iter().chain(std::iter::once(&5)).enumerate() {
            let mut v = levels[k % levels.len()].clone();
            v.sort_unstable();
            if prev.as_ref() == Some(&v) {
                v[0] = (v[0] + 1) % 7;
                v.sort_unstable();
            }
            if k > 0 && prev.as_ref() != Some(&v) {
                truth.push(rows.len() + 1);
            }
            for _ in 0..len {
                rows.push(v.iter().map(|&x| x as f64 / 6.0).collect::<Vec<f64>>());
            }
            prev = Some(v);
        }
        let y = PairSeries::from_rows(&rows).unwrap();
        let intervals = draw_intervals(y.len(), 400, seed).unwrap();
        let points = nonpar_rdpg_cpd(&y, &intervals, 1e-9, 0, y.len()).unwrap();
        prop_assert_eq!(points.locations(), truth);
    }

    #[test]
    fn constant_columns_pay_xi_per_column_per_point(m in 1usize..5, t_len in 4usize..30, loc in 0.0f64..1.0, xi in 0.1f64..20.0) {
        let rows: Vec<Vec<f64>> = vec![(0..m).map(|j| j as f64 / 10.0).collect(); t_len];
        let y = PairSeries::from_rows(&rows).unwrap();
        let p = 2 + ((t_len - 2) as f64 * loc) as usize;
        let p = p.min(t_len);
        let none = bic_score(&y, &ChangePointSet::default(), xi).unwrap();
        let one = bic_score(&y, &ChangePointSet::from_locations(&[p]).unwrap(), xi).unwrap();
        let slack = 2.0 * m as f64 * (2.0 * t_len as f64).ln();
        prop_assert!((one - none - xi * m as f64).abs() <= slack);
    }

    #[test]
    fn graph_laws_sum_to_one(atoms in prop::collection::vec((0.0f64..1.0, 0.1f64..1.0), 1..4), n in 2usize..5) {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut probs: Vec<f64> = atoms.iter().map(|a| a.1 / total).collect();
        let head: f64 = probs[..probs.len() - 1].iter().sum();
        *probs.last_mut().unwrap() = 1.0 - head;
        let law = DiscreteLatentLaw::scalar(&atoms.iter().zip(&probs).map(|(a, &p)| (a.0, p)).collect::<Vec<_>>()).unwrap();
        let g = brute_force_graph_law(&law, n).unwrap();
        prop_assert!((g.total() - 1.0).abs() <= 1e-10);
        let same = brute_force_graph_law(&law.clone(), n).unwrap();
        prop_assert_eq!(g.max_abs_diff(&same), 0.0);
    }
}
