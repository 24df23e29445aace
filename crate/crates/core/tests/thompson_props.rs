use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thompson_holo::dyadic::DyadicRational;
use thompson_holo::thompson::{self, TreeDiagram};

fn d(s: &str) -> DyadicRational {
    s.parse().unwrap()
}

/// The generators written out piece by piece on `[0, 1)`.
fn oracle(g: char, x: &DyadicRational) -> DyadicRational {
    let (half, q3, q1, e7, e1) = (d("1/2"), d("3/4"), d("1/4"), d("7/8"), d("1/8"));
    let two = |x: &DyadicRational| x.mul_pow2(1);
    let one = DyadicRational::one();
    match g {
        'A' if *x < half => x.half(),
        'A' if *x < q3 => x - &q1,
        'A' => &two(x) - &one,
        'B' if *x < half => x.clone(),
        'B' if *x < q3 => &x.half() + &q1,
        'B' if *x < e7 => x - &e1,
        'B' => &two(x) - &one,
        'C' if *x < half => &x.half() + &q3,
        'C' if *x < q3 => &two(x) - &one,
        'C' => x - &q1,
        _ => unreachable!(),
    }
}

fn point() -> impl Strategy<Value = DyadicRational> {
    (0u32..12).prop_flat_map(|e| (0i64..(1i64 << e)).prop_map(move |a| DyadicRational::new(a, e)))
}

fn word(max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop::sample::select(vec!['A', 'B', 'C', 'a', 'b', 'c']),
        0..=max,
    )
    .prop_map(|v| v.into_iter().collect())
}

fn f_word(max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['A', 'B', 'a', 'b']), 0..=max)
        .prop_map(|v| v.into_iter().collect())
}

#[test]
fn generators_match_their_formulas_on_a_grid() {
    for g in ['A', 'B', 'C'] {
        let f = thompson::generator(g).unwrap();
        for k in 0..1024 {
            let x = DyadicRational::new(k, 10);
            assert_eq!(thompson::eval(&f, &x), oracle(g, &x).mod_one(), "{g}({x})");
        }
    }
}

#[test]
fn there_are_37_reduced_words_of_length_two() {
    let ws = thompson::reduced_words(2);
    assert_eq!(ws.len(), 1 + 6 + 30);
    assert!(ws.iter().all(|w| !w.contains("Aa") && !w.contains("aA")));
}

proptest! {
    #[test]
    fn evaluation_is_a_homomorphism(u in word(5), v in word(5), x in point()) {
        let (f, g) = (thompson::word(&u).unwrap(), thompson::word(&v).unwrap());
        let fg = thompson::compose(&f, &g);
        prop_assert_eq!(thompson::eval(&fg, &x), thompson::eval(&f, &thompson::eval(&g, &x)));
        let inv = thompson::inverse(&f);
        prop_assert_eq!(thompson::eval(&inv, &thompson::eval(&f, &x)), x);
    }

    #[test]
    fn words_agree_with_the_formula_oracle(w in word(4), x in point()) {
        let f = thompson::word(&w).unwrap();
        let mut y = x.clone();
        for c in w.chars().rev() {
            y = if c.is_ascii_uppercase() {
                oracle(c, &y).mod_one()
            } else {
                thompson::eval(&thompson::letter(c).unwrap(), &y)
            };
        }
        prop_assert_eq!(thompson::eval(&f, &x), y);
    }

    #[test]
    fn group_axioms(u in word(6), v in word(6), w in word(6)) {
        let (f, g, h) = (
            thompson::word(&u).unwrap(),
            thompson::word(&v).unwrap(),
            thompson::word(&w).unwrap(),
        );
        prop_assert_eq!(
            thompson::compose(&thompson::compose(&f, &g), &h),
            thompson::compose(&f, &thompson::compose(&g, &h))
        );
        let id = TreeDiagram::identity();
        prop_assert_eq!(thompson::compose(&f, &id), f.clone());
        prop_assert!(thompson::compose(&thompson::inverse(&f), &f).is_identity());
        prop_assert_eq!(thompson::inverse(&thompson::inverse(&f)), f);
    }

    #[test]
    fn f_is_closed_and_fixes_zero(u in f_word(6), v in f_word(6)) {
        let (f, g) = (thompson::word(&u).unwrap(), thompson::word(&v).unwrap());
        let fg = thompson::compose(&f, &g);
        prop_assert!(f.is_in_f() && fg.is_in_f() && thompson::inverse(&f).is_in_f());
        prop_assert_eq!(thompson::eval(&fg, &DyadicRational::zero()), DyadicRational::zero());
    }

    #[test]
    fn pl_maps_have_dyadic_breaks_and_power_two_slopes(w in word(6)) {
        let f = thompson::word(&w).unwrap();
        let pl = thompson::to_pl_map(&f);
        let n = pl.pieces();
        prop_assert_eq!(n, f.leaf_count());
        let mut total = DyadicRational::zero();
        for j in 0..n {
            let (x0, _) = &pl.breakpoints[j];
            let x1 = if j + 1 < n { pl.breakpoints[j + 1].0.clone() } else { DyadicRational::one() };
            // each piece is affine with slope 2^k on its interval
            let width = &x1 - x0;
            total = &total + &width.mul_pow2(pl.slope_exponents[j]);
            let mid = x0.midpoint(&x1);
            let want = (&pl.breakpoints[j].1 + &(&mid - x0).mul_pow2(pl.slope_exponents[j])).mod_one();
            prop_assert_eq!(thompson::eval(&f, &mid), want);
        }
        // the image intervals cover the circle once
        prop_assert_eq!(total, DyadicRational::one());
    }

    #[test]
    fn reduction_is_confluent(w in word(6), carets in proptest::collection::vec(0usize..64, 1..5), seed in any::<u64>()) {
        let mut f = thompson::word(&w).unwrap();
        for c in carets {
            f = thompson::adjoin_caret(&f, c % f.leaf_count()).unwrap();
        }
        let r = thompson::reduce(&f);
        prop_assert!(thompson::is_reduced(&r));
        prop_assert_eq!(thompson::reduce(&r), r.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other = thompson::reduce_with(&f, |opts| rng.random_range(0..opts.len()));
        prop_assert_eq!(&other, &r);
        prop_assert!(thompson::equals(&f, &r));
    }

    #[test]
    fn diagram_text_round_trip(w in word(6)) {
        let f = thompson::word(&w).unwrap();
        let text = f.to_string();
        prop_assert_eq!(text.parse::<TreeDiagram>().unwrap(), f.clone());
        prop_assert_eq!(TreeDiagram::from_json(&f.to_json()).unwrap(), f);
    }
}
