use proptest::prelude::*;

use thompson_holo::dyadic::{common_refinement, refines, DyadicPartition, DyadicRational, TTree};

fn tree(max_leaves: usize) -> impl Strategy<Value = TTree> {
    (1..=max_leaves).prop_flat_map(|n| {
        let all = TTree::enumerate(n);
        (0..all.len()).prop_map(move |k| all[k].clone())
    })
}

fn partition(max_leaves: usize) -> impl Strategy<Value = DyadicPartition> {
    tree(max_leaves).prop_map(|t| t.to_partition())
}

fn dyadic() -> impl Strategy<Value = DyadicRational> {
    (-4096i64..4096, 0u32..16).prop_map(|(a, e)| DyadicRational::new(a, e))
}

#[test]
fn enumeration_counts_are_catalan() {
    let counts: Vec<usize> = (1..=8).map(|n| TTree::enumerate(n).len()).collect();
    assert_eq!(counts, [1, 1, 2, 5, 14, 42, 132, 429]);
}

proptest! {
    #[test]
    fn rational_text_round_trip(x in dyadic()) {
        let back: DyadicRational = x.to_string().parse().unwrap();
        prop_assert_eq!(&back, &x);
        prop_assert_eq!(DyadicRational::from_f64(x.to_f64()), Some(x));
    }

    #[test]
    fn rational_field_laws(x in dyadic(), y in dyadic(), z in dyadic()) {
        prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&(&x - &y) + &y, x.clone());
        prop_assert_eq!((&x + &y).to_f64(), x.to_f64() + y.to_f64());
        prop_assert_eq!(x < y, x.to_f64() < y.to_f64());
    }

    #[test]
    fn tree_partition_bijection(t in tree(8)) {
        let p = t.to_partition();
        prop_assert_eq!(p.len(), t.leaf_count());
        prop_assert_eq!(TTree::from_partition(&p).unwrap(), t.clone());
        let text = t.to_string();
        prop_assert_eq!(text.parse::<TTree>().unwrap(), t.clone());
        prop_assert_eq!(TTree::from_json(&t.to_json()).unwrap(), t);
        prop_assert_eq!(DyadicPartition::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn refinement_is_a_partial_order(a in partition(6), b in partition(6), c in partition(6)) {
        prop_assert!(refines(&a, &a));
        if refines(&a, &b) && refines(&b, &a) {
            prop_assert_eq!(&a, &b);
        }
        if refines(&a, &b) && refines(&b, &c) {
            prop_assert!(refines(&a, &c));
        }
    }

    #[test]
    fn common_refinement_is_a_join(a in partition(6), b in partition(6), c in partition(6)) {
        let j = common_refinement(&a, &b);
        prop_assert!(refines(&a, &j) && refines(&b, &j));
        prop_assert_eq!(&j, &common_refinement(&b, &a));
        prop_assert_eq!(&common_refinement(&a, &a), &a);
        prop_assert_eq!(
            common_refinement(&j, &c),
            common_refinement(&a, &common_refinement(&b, &c))
        );
        // least upper bound
        if refines(&a, &c) && refines(&b, &c) {
            prop_assert!(refines(&j, &c));
        }
        let (ta, tb) = (TTree::from_partition(&a).unwrap(), TTree::from_partition(&b).unwrap());
        prop_assert_eq!(ta.union(&tb).to_partition(), j);
    }

    #[test]
    fn intervals_tile_the_unit(p in partition(8)) {
        let ivs = p.intervals();
        let total = ivs
            .iter()
            .fold(DyadicRational::zero(), |acc, iv| &acc + &(&iv.right() - &iv.left()));
        prop_assert_eq!(total, DyadicRational::one());
        for w in ivs.windows(2) {
            prop_assert_eq!(w[0].right(), w[1].left());
        }
    }
}
