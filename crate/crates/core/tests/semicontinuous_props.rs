use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thompson_holo::dyadic::{DyadicPartition, TTree};
use thompson_holo::semicontinuous::{self as sc, BulkKet, CutoffState, Route, Theory};
use thompson_holo::tensor::DenseTensor;
use thompson_holo::thompson::{self, TreeDiagram};

fn word(max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop::sample::select(vec!['A', 'B', 'C', 'a', 'b', 'c']),
        0..=max,
    )
    .prop_map(|v| v.into_iter().collect())
}

fn tree(min: usize, max: usize) -> impl Strategy<Value = TTree> {
    (min..=max).prop_flat_map(|n| {
        let all = TTree::enumerate(n);
        (0..all.len()).prop_map(move |k| all[k].clone())
    })
}

fn random_state(t: &TTree, seed: u64, theory: &Arc<Theory>) -> CutoffState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = DenseTensor::random(vec![theory.d(); t.leaf_count()], &mut rng);
    CutoffState::new(t.to_partition(), amps.into_data(), theory.clone()).unwrap()
}

/// Squared distance in the direct limit, relative to the squared norms.
fn relative_gap(a: &CutoffState, b: &CutoffState) -> f64 {
    let aa = sc::inner_product(a, a).unwrap().re;
    let bb = sc::inner_product(b, b).unwrap().re;
    let ab = sc::inner_product(a, b).unwrap().re;
    (aa + bb - 2.0 * ab).abs() / (aa + bb)
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_is_a_representation(u in word(3), v in word(3), t in tree(2, 4), seed in any::<u64>()) {
        let theory = Theory::four_colour();
        let (f, g) = (thompson::word(&u).unwrap(), thompson::word(&v).unwrap());
        let s = random_state(&t, seed, &theory);
        let stepwise = sc::act(&f, &sc::act(&g, &s).unwrap()).unwrap();
        let direct = sc::act(&thompson::compose(&f, &g), &s).unwrap();
        prop_assert!(relative_gap(&stepwise, &direct) <= 1e-12);
        let back = sc::act(&thompson::inverse(&f), &sc::act(&f, &s).unwrap()).unwrap();
        prop_assert!(relative_gap(&back, &s) <= 1e-12);
    }

    #[test]
    fn unitarity(u in word(4), t1 in tree(2, 4), t2 in tree(2, 4), s1 in any::<u64>(), s2 in any::<u64>()) {
        let theory = Theory::four_colour();
        let f = thompson::word(&u).unwrap();
        let (a, b) = (random_state(&t1, s1, &theory), random_state(&t2, s2, &theory));
        let before = sc::inner_product(&a, &b).unwrap();
        let after = sc::inner_product(&sc::act(&f, &a).unwrap(), &sc::act(&f, &b).unwrap()).unwrap();
        prop_assert!(close(before, after));
    }

    #[test]
    fn refinement_does_not_change_the_class(t in tree(2, 3), extra in tree(1, 4), other in tree(2, 4), seed in any::<u64>()) {
        let theory = Theory::four_colour();
        let s = random_state(&t, seed, &theory);
        let target = t.union(&extra);
        let fine = s.refine_to(&target).unwrap();
        prop_assert!((fine.norm() - s.norm()).abs() <= 1e-12 * s.norm().max(1.0));
        let probe = random_state(&other, seed ^ 1, &theory);
        prop_assert!(close(sc::inner_product(&s, &probe).unwrap(), sc::inner_product(&fine, &probe).unwrap()));
        let fg = sc::fine_grainer(s.cutoff(), fine.cutoff(), &theory).unwrap();
        let via = fg.apply(&s).unwrap();
        prop_assert!(via.tensor().max_abs_diff(fine.tensor()) <= 1e-12);
        prop_assert!(CutoffState::from_text(&s.to_text()).unwrap().tensor().max_abs_diff(s.tensor()) <= 1e-15);
    }

    #[test]
    fn routes_agree(u in word(3)) {
        let theory = Theory::four_colour();
        let f = thompson::word(&u).unwrap();
        let a = sc::vacuum_matrix_element(&f, &theory, Route::Action).unwrap();
        let d = sc::vacuum_matrix_element(&f, &theory, Route::Diagram).unwrap();
        prop_assert!(close(a, d), "{}: {} vs {}", u, a, d);
        prop_assert!(a.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn bulk_kets_reproduce_matrix_elements(u in word(2), v in word(2)) {
        let theory = Theory::four_colour();
        let (f, g) = (thompson::word(&u).unwrap(), thompson::word(&v).unwrap());
        let (kf, kg) = (BulkKet::from_element(&f), BulkKet::from_element(&g));
        let joined = sc::bulk_inner(&kf, &kg, &theory).unwrap();
        let states = sc::inner_product(&kf.state(&theory).unwrap(), &kg.state(&theory).unwrap()).unwrap();
        let h = thompson::compose(&thompson::inverse(&f), &g);
        let vme = sc::vacuum_matrix_element(&h, &theory, Route::Diagram).unwrap();
        prop_assert!(close(joined, states) && close(joined, vme));
    }

    #[test]
    fn gram_matrices_are_positive(ws in proptest::collection::vec(word(3), 1..6)) {
        let theory = Theory::four_colour();
        let elems: Vec<TreeDiagram> = ws.iter().map(|w| thompson::word(w).unwrap()).collect();
        let g = sc::gram_matrix(&elems, &theory).unwrap();
        prop_assert!(sc::hermitian_defect(&g) <= 1e-12);
        prop_assert!(sc::hermitian_eigenvalues(&g)[0] >= -1e-10);
    }

    #[test]
    fn entropy_of_a_pure_state_is_symmetric(t in tree(2, 5), seed in any::<u64>(), mask in 1u32..31) {
        let theory = Theory::four_colour();
        let s = random_state(&t, seed, &theory).normalized();
        let n = s.leg_count();
        let a: Vec<usize> = (0..n).filter(|l| mask >> l & 1 == 1).collect();
        let b: Vec<usize> = (0..n).filter(|l| mask >> l & 1 == 0).collect();
        let (sa, sb) = (sc::state_entropy(&s, &a).unwrap(), sc::state_entropy(&s, &b).unwrap());
        prop_assert!((sa - sb).abs() <= 1e-10);
        let k = a.len().min(b.len()) as f64;
        prop_assert!(sa <= k * 3f64.ln() + 1e-10);
    }
}

#[test]
fn fine_grainer_chains_compose() {
    let theory = Theory::four_colour();
    let p = |s: &str| -> DyadicPartition { s.parse().unwrap() };
    let (a, b, c) = (
        p("0, 1/2, 1"),
        p("0, 1/4, 1/2, 1"),
        p("0, 1/8, 1/4, 1/2, 3/4, 1"),
    );
    let ab = sc::fine_grainer(&a, &b, &theory).unwrap();
    let bc = sc::fine_grainer(&b, &c, &theory).unwrap();
    let ac = sc::fine_grainer(&a, &c, &theory).unwrap();
    assert!(ab.then(&bc).unwrap().network_equals(&ac).unwrap());
    assert!(ac.isometry_defect().unwrap() <= 1e-12);
    assert!(sc::fine_grainer(&b, &a, &theory).is_err());
}

#[test]
fn amplitude_cap_is_enforced() {
    let theory = Theory::four_colour();
    assert!(matches!(
        sc::vacuum(&DyadicPartition::uniform(5), &theory),
        Err(sc::SemiError::ResourceLimit { .. })
    ));
}
