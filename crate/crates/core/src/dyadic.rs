//! Exact dyadic rationals, standard dyadic intervals and partitions of the
//! unit interval, and the finite binary trees ("T-trees") that index them.
//!
//! Nothing in this module touches floating point except the explicit
//! [`DyadicRational::to_f64`] conversion used by renderers and samplers.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DyadicError {
    #[error("NotStandardDyadic: {0}")]
    NotStandardDyadic(String),
    #[error("Parse: {0}")]
    Parse(String),
    #[error("IndexOutOfRange: leaf {index} of {count}")]
    IndexOutOfRange { index: usize, count: usize },
}

/// A rational number `numerator / 2^exponent` kept in canonical form
/// (`exponent == 0` or `numerator` odd).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: BigInt,
    exponent: u32,
}

impl DyadicRational {
    pub fn new(numerator: impl Into<BigInt>, exponent: u32) -> Self {
        let mut numerator = numerator.into();
        let mut exponent = exponent;
        if numerator.is_zero() {
            return Self::zero();
        }
        while exponent > 0 && numerator.is_even() {
            numerator >>= 1;
            exponent -= 1;
        }
        Self {
            numerator,
            exponent,
        }
    }

    pub fn zero() -> Self {
        Self {
            numerator: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            numerator: BigInt::one(),
            exponent: 0,
        }
    }

    pub fn integer(n: i64) -> Self {
        Self::new(n, 0)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }

    /// Numerator rescaled to the common denominator `2^exponent`
    /// (`exponent >= self.exponent`).
    fn scaled_numerator(&self, exponent: u32) -> BigInt {
        debug_assert!(exponent >= self.exponent);
        &self.numerator << (exponent - self.exponent) as usize
    }

    /// Multiply by `2^k` for any integer `k`.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if k >= 0 {
            let k = k as u32;
            if k <= self.exponent {
                Self::new(self.numerator.clone(), self.exponent - k)
            } else {
                Self::new(&self.numerator << (k - self.exponent) as usize, 0)
            }
        } else {
            Self::new(self.numerator.clone(), self.exponent + (-k) as u32)
        }
    }

    pub fn half(&self) -> Self {
        self.mul_pow2(-1)
    }

    pub fn midpoint(&self, other: &Self) -> Self {
        (self + other).half()
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> BigInt {
        self.numerator
            .div_floor(&(BigInt::one() << self.exponent as usize))
    }

    /// Representative in `[0, 1)`; the circle-point reduction.
    pub fn mod_one(&self) -> Self {
        self - &Self::new(self.floor(), 0)
    }

    /// Normalises for the caller's context: circle points are reduced mod 1,
    /// interval points are returned unchanged.
    pub fn in_context(&self, circular: bool) -> Self {
        if circular {
            self.mod_one()
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        let n = self.numerator.to_f64().unwrap_or(f64::NAN);
        n / 2f64.powi(self.exponent as i32)
    }

    /// Exact conversion of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1i64 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exp) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        let num = BigInt::from(mantissa) * sign;
        Some(Self::new(num, 0).mul_pow2(exp))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.max(other.exponent);
        self.scaled_numerator(e).cmp(&other.scaled_numerator(e))
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::ops::Add for &DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: &DyadicRational) -> DyadicRational {
        let e = self.exponent.max(rhs.exponent);
        DyadicRational::new(self.scaled_numerator(e) + rhs.scaled_numerator(e), e)
    }
}

impl std::ops::Sub for &DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: &DyadicRational) -> DyadicRational {
        let e = self.exponent.max(rhs.exponent);
        DyadicRational::new(self.scaled_numerator(e) - rhs.scaled_numerator(e), e)
    }
}

impl std::ops::Mul for &DyadicRational {
    type Output = DyadicRational;
    fn mul(self, rhs: &DyadicRational) -> DyadicRational {
        DyadicRational::new(
            &self.numerator * &rhs.numerator,
            self.exponent + rhs.exponent,
        )
    }
}

impl std::ops::Add for DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: DyadicRational) -> DyadicRational {
        &self + &rhs
    }
}

impl std::ops::Sub for DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: DyadicRational) -> DyadicRational {
        &self - &rhs
    }
}

impl std::ops::Neg for &DyadicRational {
    type Output = DyadicRational;
    fn neg(self) -> DyadicRational {
        DyadicRational::new(-self.numerator.clone(), self.exponent)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for DyadicRational {
    type Err = DyadicError;

    /// Accepts `a/2^n`, a plain integer, or `a/b` with `b` a power of two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || DyadicError::Parse(format!("not a dyadic rational: {s:?}"));
        match s.split_once('/') {
            None => {
                let n: BigInt = s.parse().map_err(|_| bad())?;
                Ok(Self::new(n, 0))
            }
            Some((num, den)) => {
                let n: BigInt = num.trim().parse().map_err(|_| bad())?;
                let den = den.trim();
                if let Some(exp) = den.strip_prefix("2^") {
                    let e: u32 = exp.trim().parse().map_err(|_| bad())?;
                    Ok(Self::new(n, e))
                } else {
                    let d: BigUint = den.parse().map_err(|_| bad())?;
                    if d.is_zero() || (&d & (&d - 1u32)) != BigUint::zero() {
                        return Err(DyadicError::Parse(format!(
                            "denominator of {s:?} is not a power of two"
                        )));
                    }
                    Ok(Self::new(n, (d.bits() - 1) as u32))
                }
            }
        }
    }
}

/// The standard dyadic interval `[a/2^n, (a+1)/2^n]` with `a < 2^n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StdDyadicInterval {
    a: BigUint,
    n: u32,
}

impl StdDyadicInterval {
    pub fn new(a: impl Into<BigUint>, n: u32) -> Result<Self, DyadicError> {
        let a = a.into();
        if a >= (BigUint::one() << n as usize) {
            return Err(DyadicError::NotStandardDyadic(format!(
                "offset {a} is not below 2^{n}"
            )));
        }
        Ok(Self { a, n })
    }

    pub fn unit() -> Self {
        Self {
            a: BigUint::zero(),
            n: 0,
        }
    }

    pub fn offset(&self) -> &BigUint {
        &self.a
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    pub fn left(&self) -> DyadicRational {
        DyadicRational::new(BigInt::from(self.a.clone()), self.n)
    }

    pub fn right(&self) -> DyadicRational {
        DyadicRational::new(BigInt::from(&self.a + 1u32), self.n)
    }

    pub fn midpoint(&self) -> DyadicRational {
        DyadicRational::new(BigInt::from((&self.a << 1usize) + 1u32), self.n + 1)
    }

    pub fn left_child(&self) -> Self {
        Self {
            a: &self.a << 1usize,
            n: self.n + 1,
        }
    }

    pub fn right_child(&self) -> Self {
        Self {
            a: (&self.a << 1usize) + 1u32,
            n: self.n + 1,
        }
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        other.n >= self.n && (&other.a >> (other.n - self.n) as usize) == self.a
    }

    /// Recognises `[lo, hi]` as a standard dyadic interval.
    pub fn from_endpoints(lo: &DyadicRational, hi: &DyadicRational) -> Option<Self> {
        let len = hi - lo;
        if len.is_negative() || len.is_zero() || !len.numerator().is_one() {
            return None;
        }
        let n = len.exponent();
        let a = lo.mul_pow2(n as i64);
        if a.exponent() != 0 || a.is_negative() {
            return None;
        }
        Self::new(a.numerator().to_biguint()?, n).ok()
    }
}

impl fmt::Debug for StdDyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.left(), self.right())
    }
}

/// A standard dyadic partition of `[0, 1]`, stored by its sorted breakpoints
/// (always starting at 0 and ending at 1).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicPartition {
    breakpoints: Vec<DyadicRational>,
}

impl DyadicPartition {
    pub fn trivial() -> Self {
        Self {
            breakpoints: vec![DyadicRational::zero(), DyadicRational::one()],
        }
    }

    /// The uniform partition into `2^level` intervals.
    pub fn uniform(level: u32) -> Self {
        let count = 1u64 << level;
        Self {
            breakpoints: (0..=count).map(|k| DyadicRational::new(k, level)).collect(),
        }
    }

    pub fn from_breakpoints(breakpoints: Vec<DyadicRational>) -> Result<Self, DyadicError> {
        if breakpoints.first() != Some(&DyadicRational::zero())
            || breakpoints.last() != Some(&DyadicRational::one())
        {
            return Err(DyadicError::NotStandardDyadic(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if breakpoints.len() < 2 {
            return Err(DyadicError::NotStandardDyadic("empty partition".into()));
        }
        for w in breakpoints.windows(2) {
            if StdDyadicInterval::from_endpoints(&w[0], &w[1]).is_none() {
                return Err(DyadicError::NotStandardDyadic(format!(
                    "[{}, {}] is not a standard dyadic interval",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { breakpoints })
    }

    pub fn from_intervals(intervals: &[StdDyadicInterval]) -> Result<Self, DyadicError> {
        let mut breakpoints = vec![DyadicRational::zero()];
        for iv in intervals {
            if iv.left() != *breakpoints.last().unwrap() {
                return Err(DyadicError::NotStandardDyadic(
                    "intervals are not contiguous".into(),
                ));
            }
            breakpoints.push(iv.right());
        }
        Self::from_breakpoints(breakpoints)
    }

    pub fn breakpoints(&self) -> &[DyadicRational] {
        &self.breakpoints
    }

    /// Interior breakpoints plus 0, i.e. the partition's points on the circle.
    pub fn circle_points(&self) -> &[DyadicRational] {
        &self.breakpoints[..self.breakpoints.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intervals(&self) -> Vec<StdDyadicInterval> {
        self.breakpoints
            .windows(2)
            .map(|w| StdDyadicInterval::from_endpoints(&w[0], &w[1]).expect("validated"))
            .collect()
    }

    /// True iff every breakpoint of `self` is a breakpoint of `fine`.
    pub fn is_refined_by(&self, fine: &Self) -> bool {
        refines(self, fine)
    }

    pub fn max_level(&self) -> u32 {
        self.intervals()
            .iter()
            .map(|iv| iv.level())
            .max()
            .unwrap_or(0)
    }

    pub fn parse(s: &str) -> Result<Self, DyadicError> {
        let mut pts = Vec::new();
        for tok in s.split(',') {
            let tok = tok.trim();
            let p: DyadicRational = tok.parse().map_err(|e| match e {
                DyadicError::Parse(m) => DyadicError::NotStandardDyadic(m),
                other => other,
            })?;
            pts.push(p);
        }
        Self::from_breakpoints(pts)
    }
}

impl fmt::Display for DyadicPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.breakpoints.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for DyadicPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl FromStr for DyadicPartition {
    type Err = DyadicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

pub fn refines(coarse: &DyadicPartition, fine: &DyadicPartition) -> bool {
    // both lists are sorted, so a merge walk suffices
    let mut it = fine.breakpoints.iter().peekable();
    'outer: for p in &coarse.breakpoints {
        while let Some(q) = it.peek() {
            match (*q).cmp(p) {
                Ordering::Less => {
                    it.next();
                }
                Ordering::Equal => {
                    it.next();
                    continue 'outer;
                }
                Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

/// Coarsest standard dyadic partition refining both inputs: the sorted merge
/// of their breakpoints.
pub fn common_refinement(p1: &DyadicPartition, p2: &DyadicPartition) -> DyadicPartition {
    let (a, b) = (&p1.breakpoints, &p2.breakpoints);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => match x.cmp(y) {
                Ordering::Less => {
                    i += 1;
                    x
                }
                Ordering::Greater => {
                    j += 1;
                    y
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    x
                }
            },
            (Some(x), None) => {
                i += 1;
                x
            }
            (None, Some(y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next.clone());
    }
    DyadicPartition { breakpoints: out }
}

/// Finite ordered rooted binary tree; leaves carry no payload, their
/// intervals are determined by position.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum TTree {
    Leaf,
    Node(Box<TTree>, Box<TTree>),
}

impl TTree {
    pub fn leaf() -> Self {
        TTree::Leaf
    }

    pub fn caret() -> Self {
        Self::node(TTree::Leaf, TTree::Leaf)
    }

    pub fn node(left: TTree, right: TTree) -> Self {
        TTree::Node(Box::new(left), Box::new(right))
    }

    /// Complete binary tree with `2^depth` leaves.
    pub fn complete(depth: u32) -> Self {
        if depth == 0 {
            TTree::Leaf
        } else {
            Self::node(Self::complete(depth - 1), Self::complete(depth - 1))
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TTree::Leaf)
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TTree::Leaf => 1,
            TTree::Node(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            TTree::Leaf => 0,
            TTree::Node(l, r) => 1 + l.internal_count() + r.internal_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TTree::Leaf => 0,
            TTree::Node(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Standard dyadic intervals of the leaves, left to right.
    pub fn leaf_intervals(&self) -> Vec<StdDyadicInterval> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.collect_leaves(StdDyadicInterval::unit(), &mut out);
        out
    }

    fn collect_leaves(&self, at: StdDyadicInterval, out: &mut Vec<StdDyadicInterval>) {
        match self {
            TTree::Leaf => out.push(at),
            TTree::Node(l, r) => {
                l.collect_leaves(at.left_child(), out);
                r.collect_leaves(at.right_child(), out);
            }
        }
    }

    /// Intervals of the internal nodes in preorder.
    pub fn internal_intervals(&self) -> Vec<StdDyadicInterval> {
        let mut out = Vec::new();
        self.collect_internal(StdDyadicInterval::unit(), &mut out);
        out
    }

    fn collect_internal(&self, at: StdDyadicInterval, out: &mut Vec<StdDyadicInterval>) {
        if let TTree::Node(l, r) = self {
            l.collect_internal(at.left_child(), out);
            out.push(at.clone());
            r.collect_internal(at.right_child(), out);
        }
    }

    pub fn to_partition(&self) -> DyadicPartition {
        let mut breakpoints = vec![DyadicRational::zero()];
        breakpoints.extend(self.leaf_intervals().iter().map(|iv| iv.right()));
        DyadicPartition { breakpoints }
    }

    pub fn from_partition(p: &DyadicPartition) -> Result<Self, DyadicError> {
        let intervals = p.intervals();
        let mut pos = 0;
        let tree = Self::build(&StdDyadicInterval::unit(), &intervals, &mut pos)?;
        if pos != intervals.len() {
            return Err(DyadicError::NotStandardDyadic(
                "intervals do not nest dyadically".into(),
            ));
        }
        Ok(tree)
    }

    fn build(
        at: &StdDyadicInterval,
        intervals: &[StdDyadicInterval],
        pos: &mut usize,
    ) -> Result<Self, DyadicError> {
        let next = intervals.get(*pos).ok_or_else(|| {
            DyadicError::NotStandardDyadic("intervals do not nest dyadically".into())
        })?;
        if next == at {
            *pos += 1;
            Ok(TTree::Leaf)
        } else if at.contains_interval(next) {
            let l = Self::build(&at.left_child(), intervals, pos)?;
            let r = Self::build(&at.right_child(), intervals, pos)?;
            Ok(Self::node(l, r))
        } else {
            Err(DyadicError::NotStandardDyadic(format!(
                "{next:?} does not nest inside {at:?}"
            )))
        }
    }

    /// Replace leaf `index` by a caret.
    pub fn split_leaf(&self, index: usize) -> Result<Self, DyadicError> {
        let count = self.leaf_count();
        if index >= count {
            return Err(DyadicError::IndexOutOfRange { index, count });
        }
        let mut t = self.clone();
        t.split_leaf_in_place(index);
        Ok(t)
    }

    fn split_leaf_in_place(&mut self, index: usize) {
        match self {
            TTree::Leaf => *self = TTree::caret(),
            TTree::Node(l, r) => {
                let nl = l.leaf_count();
                if index < nl {
                    l.split_leaf_in_place(index)
                } else {
                    r.split_leaf_in_place(index - nl)
                }
            }
        }
    }

    /// Leaf indices `j` such that leaves `j` and `j + 1` hang off one node.
    pub fn caret_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_carets(0, &mut out);
        out
    }

    fn collect_carets(&self, offset: usize, out: &mut Vec<usize>) -> usize {
        match self {
            TTree::Leaf => 1,
            TTree::Node(l, r) => {
                if l.is_leaf() && r.is_leaf() {
                    out.push(offset);
                    2
                } else {
                    let nl = l.collect_carets(offset, out);
                    let nr = r.collect_carets(offset + nl, out);
                    nl + nr
                }
            }
        }
    }

    /// Collapse the caret whose left leaf has index `index`.
    pub fn merge_caret(&self, index: usize) -> Option<Self> {
        let mut t = self.clone();
        if t.merge_in_place(index, 0) {
            Some(t)
        } else {
            None
        }
    }

    fn merge_in_place(&mut self, index: usize, offset: usize) -> bool {
        match self {
            TTree::Leaf => false,
            TTree::Node(l, r) => {
                if l.is_leaf() && r.is_leaf() {
                    if offset == index {
                        *self = TTree::Leaf;
                        return true;
                    }
                    return false;
                }
                let nl = l.leaf_count();
                if index < offset + nl {
                    l.merge_in_place(index, offset)
                } else {
                    r.merge_in_place(index, offset + nl)
                }
            }
        }
    }

    /// Smallest tree containing both (the tree of the common refinement).
    pub fn union(&self, other: &Self) -> Self {
        match (self, other) {
            (TTree::Leaf, t) | (t, TTree::Leaf) => t.clone(),
            (TTree::Node(a, b), TTree::Node(c, d)) => Self::node(a.union(c), b.union(d)),
        }
    }

    /// True iff `other` is a rooted subtree of `self`.
    pub fn contains(&self, other: &Self) -> bool {
        match (self, other) {
            (_, TTree::Leaf) => true,
            (TTree::Leaf, TTree::Node(..)) => false,
            (TTree::Node(a, b), TTree::Node(c, d)) => a.contains(c) && b.contains(d),
        }
    }

    /// The subtree rooted at the node for `interval`, if that node exists.
    pub fn subtree_at(&self, interval: &StdDyadicInterval) -> Option<&TTree> {
        let mut node = self;
        for k in (0..interval.level()).rev() {
            match node {
                TTree::Leaf => return None,
                TTree::Node(l, r) => {
                    node = if interval.offset().bit(k as u64) {
                        r
                    } else {
                        l
                    };
                }
            }
        }
        Some(node)
    }

    /// Whether the node at `interval` exists and is internal.
    pub fn is_internal_at(&self, interval: &StdDyadicInterval) -> bool {
        self.subtree_at(interval).is_some_and(|t| !t.is_leaf())
    }

    /// Every tree with exactly `leaves` leaves, in a fixed order.
    pub fn enumerate(leaves: usize) -> Vec<Self> {
        if leaves == 0 {
            return Vec::new();
        }
        if leaves == 1 {
            return vec![TTree::Leaf];
        }
        let mut out = Vec::new();
        for k in 1..leaves {
            for l in Self::enumerate(k) {
                for r in Self::enumerate(leaves - k) {
                    out.push(Self::node(l.clone(), r));
                }
            }
        }
        out
    }

    /// Nested-array JSON: a leaf is `[]`, a node `[left, right]`.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            TTree::Leaf => serde_json::Value::Array(vec![]),
            TTree::Node(l, r) => serde_json::Value::Array(vec![l.to_json(), r.to_json()]),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, DyadicError> {
        match v.as_array().map(|a| a.as_slice()) {
            Some([]) => Ok(TTree::Leaf),
            Some([l, r]) => Ok(Self::node(Self::from_json(l)?, Self::from_json(r)?)),
            _ => Err(DyadicError::Parse(format!("bad tree JSON: {v}"))),
        }
    }
}

impl fmt::Display for TTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TTree::Leaf => f.write_str("."),
            TTree::Node(l, r) => write!(f, "({l}{r})"),
        }
    }
}

impl fmt::Debug for TTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for TTree {
    type Err = DyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes: Vec<u8> = s.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        let mut pos = 0;
        let t = parse_tree(&bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(DyadicError::Parse(format!("trailing input in tree {s:?}")));
        }
        Ok(t)
    }
}

fn parse_tree(b: &[u8], pos: &mut usize) -> Result<TTree, DyadicError> {
    match b.get(*pos) {
        Some(b'.') => {
            *pos += 1;
            Ok(TTree::Leaf)
        }
        Some(b'(') => {
            *pos += 1;
            let l = parse_tree(b, pos)?;
            let r = parse_tree(b, pos)?;
            if b.get(*pos) != Some(&b')') {
                return Err(DyadicError::Parse(format!("expected ')' at {}", *pos)));
            }
            *pos += 1;
            Ok(TTree::node(l, r))
        }
        _ => Err(DyadicError::Parse(format!(
            "expected '.' or '(' at {}",
            *pos
        ))),
    }
}

pub fn tree_to_partition(t: &TTree) -> DyadicPartition {
    t.to_partition()
}

pub fn partition_to_tree(p: &DyadicPartition) -> Result<TTree, DyadicError> {
    TTree::from_partition(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    fn part(s: &str) -> DyadicPartition {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        let x = DyadicRational::new(6, 3);
        assert_eq!(x.numerator(), &BigInt::from(3));
        assert_eq!(x.exponent(), 2);
        assert_eq!(x.to_string(), "3/2^2");
        assert_eq!(DyadicRational::new(4, 2).to_string(), "1");
        assert_eq!(DyadicRational::new(0, 7), DyadicRational::zero());
    }

    #[test]
    fn text_round_trip() {
        for s in ["0", "1", "3/2^2", "-5/2^7", "1/2^1"] {
            assert_eq!(d(s).to_string(), s);
        }
        assert_eq!(d("1/2"), d("1/2^1"));
        assert_eq!(d("6/8"), d("3/2^2"));
        assert!("1/3".parse::<DyadicRational>().is_err());
        assert!("x".parse::<DyadicRational>().is_err());
    }

    #[test]
    fn arithmetic_and_order() {
        assert_eq!(&d("1/2^1") + &d("1/2^2"), d("3/2^2"));
        assert_eq!(&d("1/2^1") - &d("3/2^2"), d("-1/2^2"));
        assert_eq!(d("5/2^2").mod_one(), d("1/2^2"));
        assert_eq!(d("-1/2^2").mod_one(), d("3/2^2"));
        assert_eq!(d("1").mod_one(), DyadicRational::zero());
        assert!(d("3/2^3") < d("1/2^1"));
        assert_eq!(d("3/2^2").in_context(false), d("3/2^2"));
        assert_eq!(d("7/2^2").in_context(true), d("3/2^2"));
        assert_eq!(DyadicRational::from_f64(0.375), Some(d("3/2^3")));
    }

    #[test]
    fn tree_to_partition_examples() {
        assert_eq!(TTree::Leaf.to_partition(), DyadicPartition::trivial());
        assert_eq!(
            TTree::complete(2).to_partition(),
            part("0, 1/2^2, 1/2, 3/2^2, 1")
        );
        let left_caret: TTree = "((..).)".parse().unwrap();
        assert_eq!(left_caret.to_partition(), part("0, 1/2^2, 1/2, 1"));
    }

    #[test]
    fn partition_to_tree_examples() {
        assert_eq!(
            partition_to_tree(&DyadicPartition::trivial()).unwrap(),
            TTree::Leaf
        );
        let comb: TTree = "(.(..))".parse().unwrap();
        assert_eq!(partition_to_tree(&part("0, 1/2, 3/4, 1")).unwrap(), comb);
        assert!(matches!(
            DyadicPartition::parse("0, 1/3, 1"),
            Err(DyadicError::NotStandardDyadic(_))
        ));
        // contiguous but [1/4, 1] is not standard
        assert!(matches!(
            DyadicPartition::parse("0, 1/4, 1"),
            Err(DyadicError::NotStandardDyadic(_))
        ));
    }

    #[test]
    fn common_refinement_examples() {
        let p = part("0, 1/2, 3/4, 1");
        assert_eq!(common_refinement(&p, &p), p);
        assert_eq!(
            common_refinement(&part("0, 1/2, 1"), &part("0, 1/4, 1/2, 1")),
            part("0, 1/4, 1/2, 1")
        );
        assert_eq!(common_refinement(&DyadicPartition::trivial(), &p), p);
    }

    #[test]
    fn refines_examples() {
        let p = part("0, 1/2, 3/4, 1");
        assert!(refines(&p, &p));
        assert!(refines(&part("0, 1/2, 1"), &part("0, 1/4, 1/2, 1")));
        assert!(!refines(&part("0, 1/4, 1/2, 1"), &part("0, 1/2, 1")));
    }

    #[test]
    fn partition_text_is_bit_exact() {
        let s = "0, 1/2^1, 3/2^2, 1";
        assert_eq!(part(s).to_string(), s);
    }

    #[test]
    fn tree_edits() {
        let t: TTree = "(.(..))".parse().unwrap();
        assert_eq!(t.split_leaf(0).unwrap().to_string(), "((..)(..))");
        assert!(matches!(
            t.split_leaf(3),
            Err(DyadicError::IndexOutOfRange { index: 3, count: 3 })
        ));
        assert_eq!(t.caret_positions(), vec![1]);
        assert_eq!(t.merge_caret(1).unwrap().to_string(), "(..)");
        assert!(t.merge_caret(0).is_none());
        let u: TTree = "((..).)".parse().unwrap();
        assert_eq!(t.union(&u).to_string(), "((..)(..))");
        assert!(t.union(&u).contains(&t));
        assert!(!t.contains(&u));
        assert_eq!(TTree::enumerate(4).len(), 5);
        assert_eq!(TTree::from_json(&t.to_json()).unwrap(), t);
    }
}
