use hankel_les::ensemble::{
    build_hankel, sample_batch, trace_formula, trace_power_direct, EntryDistribution,
};
use hankel_les::integrals::{indicator_product, IntegrandSpec};
use hankel_les::parallel::with_workers;
use hankel_les::partitions::{
    brute_force_labellings, build_graph, count_labellings, pair_partition_count, LabellingTarget,
    PairPartition, PartitionGraph,
};
use hankel_les::stats::empirical_moment;
use proptest::prelude::*;

/// A pair partition of `{0..m}` from a permutation: consecutive entries pair up.
fn partition_from_perm(perm: &[usize]) -> PairPartition {
    PairPartition::new(perm.len(), perm.chunks(2).map(|c| (c[0], c[1]))).unwrap()
}

fn perm_strategy(m: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..m).collect::<Vec<_>>()).prop_shuffle()
}

/// Direct evaluation of the integrand from the partition labels, independent
/// of the crate's precomputed factor lists.
fn reference_indicator(pi: &PairPartition, degrees: &[usize], y: &[f64]) -> bool {
    let labels = pi.labels();
    let mut offset = 0;
    for &p in degrees {
        let signed: Vec<f64> = (1..=p)
            .map(|q| {
                let v = y[labels[offset + q - 1]];
                if q % 2 == 1 {
                    -v
                } else {
                    v
                }
            })
            .collect();
        let x = 0.5 * (signed.iter().sum::<f64>() + 1.0);
        let mut partial = 0.0;
        for s in signed {
            partial += s;
            if !(0.0..=1.0).contains(&(x - partial)) {
                return false;
            }
        }
        offset += p;
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_formula_matches_direct(
        n in 1usize..8,
        p in 1u32..6,
        raw in proptest::collection::vec(-3.0f64..3.0, 15),
    ) {
        let entries = &raw[..2 * n - 1];
        let h = build_hankel(entries, n).unwrap();
        let direct = trace_power_direct(&h, p).unwrap();
        let formula = trace_formula(entries, n, p).unwrap();
        prop_assert!((formula - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn graph_ignores_block_order(perm in perm_strategy(8), rot in 0usize..4) {
        let pi = partition_from_perm(&perm);
        let mut blocks: Vec<(usize, usize)> = pi.blocks().iter().map(|&(a, b)| (b, a)).collect();
        blocks.rotate_left(rot);
        let shuffled = PairPartition::new(8, blocks).unwrap();
        prop_assert_eq!(&pi, &shuffled);
        for degrees in [[1usize, 3, 3, 1], [3, 5, 0, 0], [2, 2, 2, 2]] {
            let d: Vec<usize> = degrees.into_iter().filter(|&x| x > 0).collect();
            prop_assert_eq!(build_graph(&pi, &d).unwrap(), build_graph(&shuffled, &d).unwrap());
        }
    }

    #[test]
    fn indicator_matches_reference(
        perm in perm_strategy(6),
        y in proptest::collection::vec(-1.0f64..1.0, 3),
        split in 0usize..3,
    ) {
        let pi = partition_from_perm(&perm);
        let degrees = [vec![3, 3], vec![1, 5], vec![1, 1, 3, 1]][split].clone();
        let spec = IntegrandSpec::new(pi.clone(), &degrees).unwrap();
        prop_assert_eq!(indicator_product(&spec, &y), reference_indicator(&pi, &degrees, &y));
    }

    #[test]
    fn labelling_formula_matches_brute_force(
        v in 1usize..7,
        raw_edges in proptest::collection::vec((0usize..6, 0usize..6), 0..14),
    ) {
        let edges: Vec<(usize, usize)> = raw_edges
            .into_iter()
            .map(|(a, b)| (a % v, b % v))
            .filter(|(a, b)| a != b)
            .collect();
        let g = PartitionGraph::from_edges(v, edges).unwrap();
        for target in [LabellingTarget::AllOdd, LabellingTarget::AllEven] {
            let brute = brute_force_labellings(&g, target).unwrap() as u128;
            prop_assert_eq!(count_labellings(&g, target), Some(brute));
        }
    }

    #[test]
    fn partition_count_recurrence(half in 1usize..10) {
        let m = 2 * half;
        prop_assert_eq!(pair_partition_count(m), (m as u128 - 1) * pair_partition_count(m - 2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn batch_is_independent_of_workers(n in 2usize..20, seed in any::<u64>(), dist_ix in 0usize..3) {
        let dist = EntryDistribution::ALL[dist_ix];
        let runs: Vec<_> = [1usize, 2, 8]
            .into_iter()
            .map(|w| with_workers(Some(w), || sample_batch(dist, n, &[1, 3, 4], 40, seed).unwrap()))
            .collect();
        prop_assert_eq!(&runs[0], &runs[1]);
        prop_assert_eq!(&runs[0], &runs[2]);
    }

    #[test]
    fn w1_has_unit_variance(n in 2usize..60, seed in any::<u64>(), dist_ix in 0usize..3) {
        let dist = EntryDistribution::ALL[dist_ix];
        let b = sample_batch(dist, n, &[1], 4000, seed).unwrap();
        let m = empirical_moment(&b, 1, 2).unwrap();
        prop_assert!((m.value - 1.0).abs() <= 4.0 * m.stderr, "{:?}", m);
    }
}
