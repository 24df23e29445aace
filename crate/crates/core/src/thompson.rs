//! Elements of Thompson's groups F and T as tree diagrams `(R, S, marker)`.
//!
//! The `j`-th leaf of the domain tree `R` is mapped affinely onto leaf
//! `(marker + j) mod n` of the range tree `S`. `compose(f, g)` applies `g`
//! first.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::dyadic::{DyadicError, DyadicRational, StdDyadicInterval, TTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThompsonError {
    #[error("LeafCountMismatch: domain has {domain} leaves, range has {range}")]
    LeafCountMismatch { domain: usize, range: usize },
    #[error("MarkerOutOfRange: marker {marker} with {leaves} leaves")]
    MarkerOutOfRange { marker: usize, leaves: usize },
    #[error("IndexOutOfRange: leaf {index} of {count}")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("UnknownGenerator: {0:?}")]
    UnknownGenerator(String),
    #[error("Parse: {0}")]
    Parse(String),
}

impl From<DyadicError> for ThompsonError {
    fn from(e: DyadicError) -> Self {
        match e {
            DyadicError::IndexOutOfRange { index, count } => {
                ThompsonError::IndexOutOfRange { index, count }
            }
            other => ThompsonError::Parse(other.to_string()),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TreeDiagram {
    domain: TTree,
    range: TTree,
    marker: usize,
}

impl TreeDiagram {
    pub fn new(domain: TTree, range: TTree, marker: usize) -> Result<Self, ThompsonError> {
        let (nd, nr) = (domain.leaf_count(), range.leaf_count());
        if nd != nr {
            return Err(ThompsonError::LeafCountMismatch {
                domain: nd,
                range: nr,
            });
        }
        if marker >= nr {
            return Err(ThompsonError::MarkerOutOfRange { marker, leaves: nr });
        }
        Ok(Self {
            domain,
            range,
            marker,
        })
    }

    pub fn identity() -> Self {
        Self {
            domain: TTree::Leaf,
            range: TTree::Leaf,
            marker: 0,
        }
    }

    pub fn domain_tree(&self) -> &TTree {
        &self.domain
    }

    pub fn range_tree(&self) -> &TTree {
        &self.range
    }

    pub fn marker(&self) -> usize {
        self.marker
    }

    pub fn leaf_count(&self) -> usize {
        self.domain.leaf_count()
    }

    /// Range leaf receiving domain leaf `j`.
    pub fn image_leaf(&self, j: usize) -> usize {
        (self.marker + j) % self.leaf_count()
    }

    pub fn is_in_f(&self) -> bool {
        self.marker == 0
    }

    pub fn is_identity(&self) -> bool {
        let r = reduce(self);
        r.domain.is_leaf() && r.range.is_leaf()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "domain": self.domain.to_json(),
            "range": self.range.to_json(),
            "marker": self.marker,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, ThompsonError> {
        let domain = TTree::from_json(&v["domain"])?;
        let range = TTree::from_json(&v["range"])?;
        let marker = v["marker"]
            .as_u64()
            .ok_or_else(|| ThompsonError::Parse("missing marker".into()))?;
        Self::new(domain, range, marker as usize)
    }
}

impl fmt::Display for TreeDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}@{}", self.domain, self.range, self.marker)
    }
}

impl fmt::Debug for TreeDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for TreeDiagram {
    type Err = ThompsonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (trees, marker) = match s.split_once('@') {
            Some((t, m)) => (
                t,
                m.trim()
                    .parse::<usize>()
                    .map_err(|_| ThompsonError::Parse(format!("bad marker in {s:?}")))?,
            ),
            None => (s, 0),
        };
        let (d, r) = trees
            .split_once('|')
            .ok_or_else(|| ThompsonError::Parse(format!("expected 'R|S@k', got {s:?}")))?;
        Self::new(d.parse()?, r.parse()?, marker)
    }
}

/// Reduced diagrams of the three generators.
pub fn generator(name: char) -> Result<TreeDiagram, ThompsonError> {
    let text = match name {
        'A' => "(.(..))|((..).)@0",
        'B' => "(.(.(..)))|(.((..).))@0",
        'C' => "(.(..))|(.(..))@2",
        _ => return Err(ThompsonError::UnknownGenerator(name.to_string())),
    };
    Ok(text.parse().expect("builtin generator"))
}

/// Letter for a generator or its inverse (lowercase).
pub fn letter(c: char) -> Result<TreeDiagram, ThompsonError> {
    if c.is_ascii_lowercase() {
        Ok(inverse(&generator(c.to_ascii_uppercase())?))
    } else {
        generator(c)
    }
}

/// Evaluates a word over `{A,B,C,a,b,c}` right-to-left (lowercase is the
/// inverse). `""`, `"e"` and `"id"` denote the identity.
pub fn word(w: &str) -> Result<TreeDiagram, ThompsonError> {
    let w = w.trim();
    if w.is_empty() || w == "e" || w == "id" {
        return Ok(TreeDiagram::identity());
    }
    let mut acc = TreeDiagram::identity();
    for c in w.chars() {
        acc = compose(&acc, &letter(c)?);
    }
    Ok(acc)
}

/// A word or an explicit `R|S@k` diagram.
pub fn parse_element(s: &str) -> Result<TreeDiagram, ThompsonError> {
    if s.contains('|') {
        s.parse()
    } else {
        word(s)
    }
}

/// Subdivide domain leaf `leaf_index` and its image leaf simultaneously.
pub fn adjoin_caret(f: &TreeDiagram, leaf_index: usize) -> Result<TreeDiagram, ThompsonError> {
    let n = f.leaf_count();
    if leaf_index >= n {
        return Err(ThompsonError::IndexOutOfRange {
            index: leaf_index,
            count: n,
        });
    }
    let k = f.image_leaf(leaf_index);
    let m = f.marker;
    // leaf 0 is the left child when it is the split leaf itself
    let marker = if leaf_index != 0 && m > k { m + 1 } else { m };
    Ok(TreeDiagram {
        domain: f.domain.split_leaf(leaf_index)?,
        range: f.range.split_leaf(k)?,
        marker,
    })
}

/// Domain caret positions `j` that are matched by a range caret.
pub fn removable_carets(f: &TreeDiagram) -> Vec<usize> {
    let n = f.leaf_count();
    let range_carets = f.range.caret_positions();
    f.domain
        .caret_positions()
        .into_iter()
        .filter(|&j| {
            let k = f.image_leaf(j);
            k + 1 < n && range_carets.binary_search(&k).is_ok()
        })
        .collect()
}

fn remove_caret(f: &TreeDiagram, j: usize) -> TreeDiagram {
    let k = f.image_leaf(j);
    let m = f.marker;
    TreeDiagram {
        domain: f.domain.merge_caret(j).expect("domain caret"),
        range: f.range.merge_caret(k).expect("range caret"),
        marker: if m > k { m - 1 } else { m },
    }
}

pub fn reduce(f: &TreeDiagram) -> TreeDiagram {
    reduce_with(f, |_| 0)
}

/// Reduction with a caller-chosen removal order; `choose` receives the
/// currently removable positions and returns an index into them.
pub fn reduce_with(f: &TreeDiagram, mut choose: impl FnMut(&[usize]) -> usize) -> TreeDiagram {
    let mut cur = f.clone();
    loop {
        let options = removable_carets(&cur);
        if options.is_empty() {
            return cur;
        }
        let pick = choose(&options).min(options.len() - 1);
        cur = remove_caret(&cur, options[pick]);
    }
}

pub fn is_reduced(f: &TreeDiagram) -> bool {
    removable_carets(f).is_empty()
}

/// First leaf of `small` that is internal in `big`, if any.
fn first_split_needed(small: &TTree, big: &TTree) -> Option<usize> {
    small
        .leaf_intervals()
        .iter()
        .position(|iv| big.is_internal_at(iv))
}

/// Expand `f` by carets until its range tree is `target` (which must contain it).
pub fn expand_range_to(f: &TreeDiagram, target: &TTree) -> TreeDiagram {
    let mut cur = f.clone();
    while let Some(k) = first_split_needed(&cur.range, target) {
        let n = cur.leaf_count();
        let j = (k + n - cur.marker) % n;
        cur = adjoin_caret(&cur, j).expect("leaf in range");
    }
    cur
}

/// Expand `f` by carets until its domain tree is `target` (which must contain it).
pub fn expand_domain_to(f: &TreeDiagram, target: &TTree) -> TreeDiagram {
    let mut cur = f.clone();
    while let Some(j) = first_split_needed(&cur.domain, target) {
        cur = adjoin_caret(&cur, j).expect("leaf in domain");
    }
    cur
}

/// `f ∘ g`, reduced.
pub fn compose(f: &TreeDiagram, g: &TreeDiagram) -> TreeDiagram {
    reduce(&compose_unreduced(f, g))
}

pub fn compose_unreduced(f: &TreeDiagram, g: &TreeDiagram) -> TreeDiagram {
    let middle = g.range.union(&f.domain);
    let g2 = expand_range_to(g, &middle);
    let f2 = expand_domain_to(f, &middle);
    let n = middle.leaf_count();
    TreeDiagram {
        domain: g2.domain,
        range: f2.range,
        marker: (f2.marker + g2.marker) % n,
    }
}

pub fn inverse(f: &TreeDiagram) -> TreeDiagram {
    let n = f.leaf_count();
    TreeDiagram {
        domain: f.range.clone(),
        range: f.domain.clone(),
        marker: (n - f.marker) % n,
    }
}

pub fn equals(f: &TreeDiagram, g: &TreeDiagram) -> bool {
    reduce(f) == reduce(g)
}

const LETTERS: [char; 6] = ['A', 'B', 'C', 'a', 'b', 'c'];

/// Random word over the generators and their inverses; deterministic per seed.
pub fn random_word(word_length: usize, rng: &mut impl Rng) -> String {
    (0..word_length)
        .map(|_| LETTERS[rng.random_range(0..LETTERS.len())])
        .collect()
}

pub fn random_element(word_length: usize, seed: u64) -> TreeDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    word(&random_word(word_length, &mut rng)).expect("valid letters")
}

/// Every freely reduced word over `{A,B,C,a,b,c}` of length at most `max_len`,
/// shortest first.
pub fn reduced_words(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &c in &LETTERS {
                let cancels = w
                    .chars()
                    .last()
                    .is_some_and(|p| p != c && p.eq_ignore_ascii_case(&c));
                if !cancels {
                    next.push(format!("{w}{c}"));
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Piecewise-linear circle map with power-of-two slopes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PLMap {
    /// `(x_j, f(x_j))` at the left end of each piece; `x_0 = 0`.
    pub breakpoints: Vec<(DyadicRational, DyadicRational)>,
    /// Slope of piece `j` is `2^slope_exponents[j]`.
    pub slope_exponents: Vec<i64>,
}

impl PLMap {
    pub fn eval(&self, x: &DyadicRational) -> DyadicRational {
        let x = x.mod_one();
        let j = self.breakpoints.partition_point(|(b, _)| *b <= x) - 1;
        let (x0, y0) = &self.breakpoints[j];
        (y0 + &(&x - x0).mul_pow2(self.slope_exponents[j])).mod_one()
    }

    pub fn pieces(&self) -> usize {
        self.slope_exponents.len()
    }
}

pub fn to_pl_map(f: &TreeDiagram) -> PLMap {
    let dom = f.domain.leaf_intervals();
    let ran = f.range.leaf_intervals();
    let mut breakpoints = Vec::with_capacity(dom.len());
    let mut slope_exponents = Vec::with_capacity(dom.len());
    for (j, d) in dom.iter().enumerate() {
        let r: &StdDyadicInterval = &ran[f.image_leaf(j)];
        breakpoints.push((d.left(), r.left()));
        slope_exponents.push(d.level() as i64 - r.level() as i64);
    }
    PLMap {
        breakpoints,
        slope_exponents,
    }
}

/// Exact image of `x` (taken mod 1).
pub fn eval(f: &TreeDiagram, x: &DyadicRational) -> DyadicRational {
    let x = x.mod_one();
    let dom = f.domain.leaf_intervals();
    let j = dom.partition_point(|iv| iv.left() <= x) - 1;
    let d = &dom[j];
    let r = &f.range.leaf_intervals()[f.image_leaf(j)];
    (&r.left() + &(&x - &d.left()).mul_pow2(d.level() as i64 - r.level() as i64)).mod_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn generator_text_round_trip() {
        for g in ['A', 'B', 'C'] {
            let t = generator(g).unwrap();
            assert_eq!(t.to_string().parse::<TreeDiagram>().unwrap(), t);
            assert_eq!(TreeDiagram::from_json(&t.to_json()).unwrap(), t);
            assert!(is_reduced(&t));
        }
        assert!(generator('D').is_err());
    }

    #[test]
    fn generator_values() {
        let a = generator('A').unwrap();
        assert_eq!(eval(&a, &d("1/2")), d("1/4"));
        assert_eq!(
            eval(&generator('C').unwrap(), &DyadicRational::zero()),
            d("3/4")
        );
        assert_eq!(eval(&TreeDiagram::identity(), &d("5/2^4")), d("5/2^4"));
        let cc = compose(&generator('C').unwrap(), &generator('C').unwrap());
        assert_eq!(eval(&cc, &DyadicRational::zero()), d("1/2"));
    }

    #[test]
    fn b_pl_map_pieces() {
        let m = to_pl_map(&generator('B').unwrap());
        assert_eq!(m.pieces(), 4);
        assert_eq!(m.slope_exponents, vec![0, -1, 0, 1]);
        assert_eq!(m.eval(&d("13/2^4")), d("11/2^4"));
    }

    #[test]
    fn c_has_order_three() {
        let c = generator('C').unwrap();
        let c3 = compose(&c, &compose(&c, &c));
        assert!(c3.is_identity());
        for p in ["0", "1/2", "3/4"] {
            assert_eq!(eval(&c3, &d(p)), d(p));
        }
    }

    #[test]
    fn adjoin_at_marker_leaf_keeps_left_child() {
        let c = generator('C').unwrap();
        let c2 = adjoin_caret(&c, 0).unwrap();
        assert_eq!(c2.marker(), c.marker());
        assert_eq!(to_pl_map(&c2).breakpoints[0].1, d("3/4"));
        assert!(matches!(
            adjoin_caret(&c, 3),
            Err(ThompsonError::IndexOutOfRange { index: 3, count: 3 })
        ));
    }

    #[test]
    fn adjoin_then_reduce_is_identity_on_generators() {
        for g in ['A', 'B', 'C'] {
            let t = generator(g).unwrap();
            for j in 0..t.leaf_count() {
                let big = adjoin_caret(&t, j).unwrap();
                assert_eq!(reduce(&big), t);
                for k in 0..16u32 {
                    let x = DyadicRational::new(k, 4);
                    assert_eq!(eval(&big, &x), eval(&t, &x));
                }
            }
        }
    }

    #[test]
    fn identity_with_carets_reduces() {
        let mut t = TreeDiagram::identity();
        for k in 0..5 {
            t = adjoin_caret(&t, k % t.leaf_count()).unwrap();
            assert_eq!(reduce(&t), TreeDiagram::identity());
        }
    }

    #[test]
    fn unreduced_b_from_five_intervals() {
        let b = generator('B').unwrap();
        let big = adjoin_caret(&b, 0).unwrap();
        assert_eq!(big.leaf_count(), 5);
        assert_eq!(reduce(&big), b);
    }

    #[test]
    fn equality_examples() {
        let a = generator('A').unwrap();
        assert!(equals(
            &adjoin_caret(&TreeDiagram::identity(), 0).unwrap(),
            &TreeDiagram::identity()
        ));
        assert!(!equals(&a, &generator('B').unwrap()));
        assert!(equals(&compose(&a, &inverse(&a)), &TreeDiagram::identity()));
    }

    #[test]
    fn words_and_random_elements() {
        assert_eq!(word("").unwrap(), TreeDiagram::identity());
        assert_eq!(word("Aa").unwrap(), TreeDiagram::identity());
        assert_eq!(random_element(0, 7), TreeDiagram::identity());
        assert_eq!(reduced_words(1).len(), 7);
        assert_eq!(reduced_words(2).len(), 37);
        let found = (0..64).any(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            random_word(1, &mut rng) == "A" && random_element(1, s) == generator('A').unwrap()
        });
        assert!(found);
    }

    #[test]
    fn rotation_by_half_is_not_reducible() {
        let r: TreeDiagram = "(..)|(..)@1".parse().unwrap();
        assert!(is_reduced(&r));
        assert_eq!(eval(&r, &d("1/4")), d("3/4"));
    }
}
