use std::io::Write;

use proptest::prelude::*;

use thompson_holo::approximation::{self, CircleMap};
use thompson_holo::dyadic::DyadicRational;
use thompson_holo::thompson;

fn mobius() -> impl Strategy<Value = CircleMap> {
    (0.0f64..0.7, 0.0f64..std::f64::consts::TAU)
        .prop_map(|(r, phi)| CircleMap::mobius(r * phi.cos(), r * phi.sin()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn approximants_are_valid(f in mobius(), n in 1u32..=7) {
        let r = approximation::approximate(&f, n).unwrap();
        let pieces = 1usize << n;
        prop_assert_eq!(r.range_partition.len(), pieces);
        prop_assert_eq!(r.domain_partition.len(), pieces);
        prop_assert!(r.sup_error >= 0.0);
        prop_assert!(r.ties.len() < pieces);
        // breakpoints go to the left ends of the assigned range intervals
        let range = r.range_partition.intervals();
        for j in 0..pieces {
            let x = DyadicRational::new(j as i64, n);
            let want = range[(r.marker_interval + j) % pieces].left();
            prop_assert_eq!(thompson::eval(&r.element, &x), want);
        }
        // f(0) lies in the marked interval
        let m = &range[r.marker_interval];
        let a0 = f.eval(0.0);
        prop_assert!(m.left().to_f64() <= a0 && a0 < m.right().to_f64());
        // a bijection of the circle: the image pieces tile it exactly once
        let pl = thompson::to_pl_map(&r.element);
        let mut images: Vec<DyadicRational> = pl.breakpoints.iter().map(|(_, y)| y.clone()).collect();
        images.sort();
        images.dedup();
        prop_assert_eq!(images.len(), pieces);
    }

    #[test]
    fn deterministic(f in mobius(), n in 1u32..=6) {
        let a = approximation::approximate(&f, n).unwrap();
        let b = approximation::approximate(&f, n).unwrap();
        prop_assert_eq!(a.element, b.element);
        prop_assert_eq!(a.sup_error, b.sup_error);
        prop_assert_eq!(a.ties, b.ties);
    }

    #[test]
    fn finer_grids_never_lower_the_sup(f in mobius(), n in 2u32..=5, k in 6u32..=10) {
        let g = approximation::approximate(&f, n).unwrap().element;
        let coarse = approximation::sup_norm_error(&f, &g, 1 << k);
        let fine = approximation::sup_norm_error(&f, &g, 1 << (k + 1));
        prop_assert!(fine >= coarse);
    }

    #[test]
    fn fine_rotations_are_exact(a in 0i64..64, n in 6u32..=8) {
        let f = CircleMap::rotation(&DyadicRational::new(a, 6));
        let r = approximation::approximate(&f, n).unwrap();
        prop_assert_eq!(r.sup_error, 0.0);
    }
}

#[test]
fn convex_map_ties() {
    let wobble = CircleMap::new("wobble", |x| {
        x + 0.2 * (6.0 * std::f64::consts::PI * x).sin()
    });
    assert!(matches!(
        approximation::approximate(&wobble, 4),
        Err(approximation::ApproximationError::NotMonotone(_))
    ));
    // the leftmost rule applies to every reported tie
    let g = CircleMap::new("convex", |x| (x + x * x) / 2.0);
    for t in approximation::tie_break_report(&g, 6).unwrap() {
        assert_eq!(t.chosen, t.candidates[0]);
    }
}

#[test]
fn tabulated_file() {
    let m = CircleMap::mobius(0.2, -0.3).unwrap();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# x f(x)").unwrap();
    for k in 0..2048 {
        let x = k as f64 / 2048.0;
        writeln!(file, "{x} {}", m.eval(x)).unwrap();
    }
    let t = CircleMap::resolve(file.path().to_str().unwrap()).unwrap();
    let (a, b) = (
        approximation::approximate(&m, 5).unwrap(),
        approximation::approximate(&t, 5).unwrap(),
    );
    assert_eq!(a.element, b.element);
    assert!((a.sup_error - b.sup_error).abs() < 1e-5);
}

#[test]
fn sup_norm_of_a_half_turn() {
    let half = thompson::word("CC").unwrap();
    let err = approximation::sup_norm_error(&CircleMap::identity(), &half, 256);
    assert!(err > 0.0 && err <= 0.5);
    let r: thompson::TreeDiagram = "(..)|(..)@1".parse().unwrap();
    assert_eq!(
        approximation::sup_norm_error(&CircleMap::identity(), &r, 256),
        0.5
    );
}
