//! Cutoff states, fine-graining isometries built from a perfect tensor, the
//! inner product of the direct limit, the unitary action of T, vacuum matrix
//! elements, bulk kets and the two-sided (BTZ) ring state.
//!
//! A cutoff is a standard dyadic partition with at least two intervals. Its
//! holographic state is the tree network of the partition: the root node is a
//! bent leg (the normalized cup `sum_i |ii>/sqrt(d)` across the root geodesic)
//! and every other internal node is a copy of `V`, input leg 0 towards the
//! root and legs 1, 2 towards the left and right child intervals.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::dyadic::{DyadicError, DyadicPartition, DyadicRational, StdDyadicInterval, TTree};
use crate::tensor::{self, contract, DenseTensor, Leg, TensorError, TensorNetwork};
use crate::thompson::{self, TreeDiagram};

pub const DEFAULT_MAX_AMPLITUDES: usize = 1 << 24;
pub const MAX_AMPLITUDES_ENV: &str = "THOMPSON_HOLO_MAX_AMPLITUDES";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemiError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error("NotARefinement: {0}")]
    NotARefinement(String),
    #[error("TheoryMismatch: states were built from different tensors")]
    TheoryMismatch,
    #[error("ResourceLimit: {requested} amplitudes requested, cap is {cap}")]
    ResourceLimit { requested: f64, cap: usize },
    #[error("CutoffTooCoarse: a cutoff needs at least two intervals")]
    CutoffTooCoarse,
    #[error("NotThreeLeg: fine-graining needs a 3-leg tensor, got {0} legs")]
    NotThreeLeg(usize),
    #[error("InvalidSubsystem: {0}")]
    InvalidSubsystem(String),
    #[error("InvalidGeometry: {0}")]
    InvalidGeometry(String),
    #[error("Parse: {0}")]
    Parse(String),
}

/// The amplitude cap, overridable through the environment.
pub fn max_amplitudes() -> usize {
    std::env::var(MAX_AMPLITUDES_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_AMPLITUDES)
}

fn check_size(d: usize, legs: usize) -> Result<(), SemiError> {
    let requested = (d as f64).powi(legs as i32);
    let cap = max_amplitudes();
    if requested > cap as f64 {
        return Err(SemiError::ResourceLimit { requested, cap });
    }
    Ok(())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A perfect 3-leg tensor normalized as an isometry from leg 0 to legs 1, 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Theory {
    pub name: String,
    v: DenseTensor,
    cup: DenseTensor,
    d: usize,
}

impl Theory {
    pub fn new(name: impl Into<String>, raw: &DenseTensor) -> Result<Arc<Self>, SemiError> {
        if raw.rank() != 3 {
            return Err(SemiError::NotThreeLeg(raw.rank()));
        }
        let v = tensor::normalized(raw)?;
        let d = v.dims()[0];
        let s = 1.0 / (d as f64).sqrt();
        let cup = DenseTensor::from_fn(vec![d, d], |i| c(if i[0] == i[1] { s } else { 0.0 }));
        Ok(Arc::new(Self {
            name: name.into(),
            v,
            cup,
            d,
        }))
    }

    /// A builtin tensor name or a tensor file path.
    pub fn resolve(name_or_path: &str) -> Result<Arc<Self>, SemiError> {
        Self::new(name_or_path, &tensor::resolve(name_or_path)?)
    }

    pub fn four_colour() -> Arc<Self> {
        Self::new("four-colour", &tensor::four_colour_tensor()).expect("builtin is perfect")
    }

    pub fn v(&self) -> &DenseTensor {
        &self.v
    }

    pub fn cup(&self) -> &DenseTensor {
        &self.cup
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn same(&self, other: &Self) -> bool {
        self.d == other.d && self.v == other.v
    }
}

/// Replace leg `leg` of `amps` by the two child legs of `V`.
fn split_leg(amps: &DenseTensor, leg: usize, v: &DenseTensor) -> DenseTensor {
    let d = v.dims()[0];
    let dims = amps.dims();
    let pre: usize = dims[..leg].iter().product();
    let post: usize = dims[leg + 1..].iter().product();
    let src = amps.data();
    let vd = v.data();
    let mut out = vec![Complex64::new(0.0, 0.0); pre * d * d * post];
    for p in 0..pre {
        for j in 0..d {
            let base_in = (p * d + j) * post;
            for kl in 0..d * d {
                let w = vd[j * d * d + kl];
                if w.re == 0.0 && w.im == 0.0 {
                    continue;
                }
                let base_out = (p * d * d + kl) * post;
                for q in 0..post {
                    out[base_out + q] += w * src[base_in + q];
                }
            }
        }
    }
    let mut new_dims = dims[..leg].to_vec();
    new_dims.extend([d, d]);
    new_dims.extend_from_slice(&dims[leg + 1..]);
    DenseTensor::new(new_dims, out).expect("shape")
}

/// A representative `(cutoff, amplitudes)` of an element of the direct limit.
#[derive(Debug, Clone)]
pub struct CutoffState {
    cutoff: DyadicPartition,
    tree: TTree,
    amplitudes: DenseTensor,
    theory: Arc<Theory>,
}

impl CutoffState {
    pub fn new(
        cutoff: DyadicPartition,
        amplitudes: Vec<Complex64>,
        theory: Arc<Theory>,
    ) -> Result<Self, SemiError> {
        let n = cutoff.len();
        if n < 2 {
            return Err(SemiError::CutoffTooCoarse);
        }
        check_size(theory.d, n)?;
        let amplitudes = DenseTensor::new(vec![theory.d; n], amplitudes)?;
        let tree = TTree::from_partition(&cutoff)?;
        Ok(Self {
            cutoff,
            tree,
            amplitudes,
            theory,
        })
    }

    fn from_parts(tree: TTree, amplitudes: DenseTensor, theory: Arc<Theory>) -> Self {
        Self {
            cutoff: tree.to_partition(),
            tree,
            amplitudes,
            theory,
        }
    }

    pub fn cutoff(&self) -> &DyadicPartition {
        &self.cutoff
    }

    pub fn tree(&self) -> &TTree {
        &self.tree
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amplitudes.data()
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.amplitudes
    }

    pub fn theory(&self) -> &Arc<Theory> {
        &self.theory
    }

    pub fn leg_count(&self) -> usize {
        self.cutoff.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            amplitudes: self.amplitudes.scale(1.0 / n),
            ..self.clone()
        }
    }

    /// Fine-grain to a larger tree.
    pub fn refine_to(&self, target: &TTree) -> Result<Self, SemiError> {
        if !target.contains(&self.tree) {
            return Err(SemiError::NotARefinement(format!(
                "{} does not refine {}",
                target.to_partition(),
                self.cutoff
            )));
        }
        check_size(self.theory.d, target.leaf_count())?;
        let mut tree = self.tree.clone();
        let mut amps = self.amplitudes.clone();
        while let Some(k) = tree
            .leaf_intervals()
            .iter()
            .position(|iv| target.is_internal_at(iv))
        {
            amps = split_leg(&amps, k, &self.theory.v);
            tree = tree.split_leaf(k)?;
        }
        Ok(Self::from_parts(tree, amps, self.theory.clone()))
    }

    /// Text form: a header line, then `index re im` per nonzero amplitude.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "cutoff: {}; d: {}; tensor: {}\n",
            self.cutoff, self.theory.d, self.theory.name
        );
        for (i, z) in self.amplitudes.data().iter().enumerate() {
            if z.norm_sqr() != 0.0 {
                let _ = writeln!(s, "{i} {:e} {:e}", z.re, z.im);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SemiError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SemiError::Parse("empty state file".into()))?;
        let mut cutoff = None;
        let mut d = None;
        let mut name = None;
        for field in header.split(';') {
            let (k, v) = field
                .split_once(':')
                .ok_or_else(|| SemiError::Parse(format!("bad header field {field:?}")))?;
            match k.trim() {
                "cutoff" => cutoff = Some(DyadicPartition::parse(v)?),
                "d" => {
                    d = Some(
                        v.trim()
                            .parse::<usize>()
                            .map_err(|_| SemiError::Parse("bad d".into()))?,
                    )
                }
                "tensor" => name = Some(v.trim().to_string()),
                other => return Err(SemiError::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let (cutoff, d, name) = match (cutoff, d, name) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(SemiError::Parse("header needs cutoff, d and tensor".into())),
        };
        let theory = Theory::resolve(&name)?;
        if theory.d != d {
            return Err(SemiError::TheoryMismatch);
        }
        check_size(d, cutoff.len())?;
        let size = d.pow(cutoff.len() as u32);
        let mut amps = vec![Complex64::new(0.0, 0.0); size];
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let bad = || SemiError::Parse(format!("bad amplitude line {line:?}"));
            if t.len() != 3 {
                return Err(bad());
            }
            let i: usize = t[0].parse().map_err(|_| bad())?;
            if i >= size {
                return Err(bad());
            }
            amps[i] = Complex64::new(
                t[1].parse().map_err(|_| bad())?,
                t[2].parse().map_err(|_| bad())?,
            );
        }
        Self::new(cutoff, amps, theory)
    }
}

/// The holographic state of the standard tessellation at `gamma`.
pub fn vacuum(gamma: &DyadicPartition, theory: &Arc<Theory>) -> Result<CutoffState, SemiError> {
    if gamma.len() < 2 {
        return Err(SemiError::CutoffTooCoarse);
    }
    let root = CutoffState::from_parts(TTree::caret(), theory.cup.clone(), theory.clone());
    root.refine_to(&TTree::from_partition(gamma)?)
}

fn vacuum_tree(tree: &TTree, theory: &Arc<Theory>) -> Result<CutoffState, SemiError> {
    vacuum(&tree.to_partition(), theory)
}

/// Inner product through the minimal common refinement.
pub fn inner_product(s1: &CutoffState, s2: &CutoffState) -> Result<Complex64, SemiError> {
    inner_product_at(s1, s2, &s1.tree.union(&s2.tree))
}

/// Inner product after fine-graining both states to `tree`.
pub fn inner_product_at(
    s1: &CutoffState,
    s2: &CutoffState,
    tree: &TTree,
) -> Result<Complex64, SemiError> {
    if !s1.theory.same(&s2.theory) {
        return Err(SemiError::TheoryMismatch);
    }
    let a = s1.refine_to(tree)?;
    let b = s2.refine_to(tree)?;
    Ok(a.amplitudes
        .data()
        .iter()
        .zip(b.amplitudes.data())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// `pi(f) s`: refine until the diagram's domain tree covers the cutoff, then
/// carry the amplitudes to the image cutoff, moving leg `j` to position
/// `(marker + j) mod n`.
pub fn act(f: &TreeDiagram, s: &CutoffState) -> Result<CutoffState, SemiError> {
    let f2 = thompson::expand_domain_to(f, &f.domain_tree().union(&s.tree));
    let refined = s.refine_to(f2.domain_tree())?;
    let n = f2.leaf_count();
    let m = f2.marker();
    let perm: Vec<usize> = (0..n).map(|p| (p + n - m) % n).collect();
    Ok(CutoffState::from_parts(
        f2.range_tree().clone(),
        refined.amplitudes.permute(&perm),
        s.theory.clone(),
    ))
}

/// Build the vacuum network of `tree` (at least two leaves) inside `net`;
/// returns the leaf legs left to right.
fn grow_vacuum(net: &mut TensorNetwork, tree: &TTree, theory: &Theory, conj: bool) -> Vec<Leg> {
    fn grow(
        net: &mut TensorNetwork,
        node: &TTree,
        stem: Leg,
        v: &DenseTensor,
        leaves: &mut Vec<Leg>,
    ) {
        match node {
            TTree::Leaf => leaves.push(stem),
            TTree::Node(l, r) => {
                let k = net.add(v.clone());
                net.bond(stem, (k, 0));
                grow(net, l, (k, 1), v, leaves);
                grow(net, r, (k, 2), v, leaves);
            }
        }
    }
    let (v, cup) = if conj {
        (theory.v.conj(), theory.cup.conj())
    } else {
        (theory.v.clone(), theory.cup.clone())
    };
    let TTree::Node(l, r) = tree else {
        panic!("vacuum network needs at least two leaves")
    };
    let root = net.add(cup);
    let mut leaves = Vec::new();
    grow(net, l, (root, 0), &v, &mut leaves);
    grow(net, r, (root, 1), &v, &mut leaves);
    leaves
}

fn padded(f: &TreeDiagram) -> TreeDiagram {
    if f.leaf_count() < 2 {
        thompson::adjoin_caret(f, 0).expect("leaf 0")
    } else {
        f.clone()
    }
}

/// Reflect-and-join network: domain-tree vacuum against the conjugated
/// range-tree vacuum, domain leaf `j` joined to range leaf `(marker + j) mod n`.
pub fn diagram_network(f: &TreeDiagram, theory: &Theory) -> TensorNetwork {
    let f = padded(&thompson::reduce(f));
    let mut net = TensorNetwork::new();
    let top = grow_vacuum(&mut net, f.domain_tree(), theory, false);
    let bottom = grow_vacuum(&mut net, f.range_tree(), theory, true);
    for (j, &leg) in top.iter().enumerate() {
        net.bond(leg, bottom[f.image_leaf(j)]);
    }
    net
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Action,
    Diagram,
}

/// `<Omega| pi(f) |Omega>`.
pub fn vacuum_matrix_element(
    f: &TreeDiagram,
    theory: &Arc<Theory>,
    route: Route,
) -> Result<Complex64, SemiError> {
    match route {
        Route::Action => {
            let omega = vacuum_tree(&TTree::caret(), theory)?;
            let moved = act(f, &omega)?;
            inner_product(&omega, &moved)
        }
        Route::Diagram => {
            let f = thompson::reduce(f);
            check_size(theory.d, f.leaf_count().max(2))?;
            Ok(contract(&diagram_network(&f, theory))?.data()[0])
        }
    }
}

/// Fine-graining isometry between nested cutoffs: one `V` per caret of the
/// target tree that is absent from the source tree.
#[derive(Debug, Clone)]
pub struct FineGrainer {
    pub source: DyadicPartition,
    pub target: DyadicPartition,
    /// Intervals split by the network, sorted.
    pub carets: Vec<StdDyadicInterval>,
    /// Open legs: target intervals, then source intervals.
    pub network: TensorNetwork,
}

pub fn fine_grainer(
    gamma: &DyadicPartition,
    gamma2: &DyadicPartition,
    theory: &Theory,
) -> Result<FineGrainer, SemiError> {
    if !gamma.is_refined_by(gamma2) {
        return Err(SemiError::NotARefinement(format!(
            "{gamma2} does not refine {gamma}"
        )));
    }
    let t1 = TTree::from_partition(gamma)?;
    let t2 = TTree::from_partition(gamma2)?;
    let d = theory.d;
    let identity = DenseTensor::from_fn(vec![d, d], |i| c(if i[0] == i[1] { 1.0 } else { 0.0 }));
    let mut net = TensorNetwork::new();
    let mut outputs = Vec::new();
    let mut inputs = Vec::new();
    let mut carets = Vec::new();
    fn grow(
        net: &mut TensorNetwork,
        node: &TTree,
        at: StdDyadicInterval,
        stem: Leg,
        v: &DenseTensor,
        outputs: &mut Vec<Leg>,
        carets: &mut Vec<StdDyadicInterval>,
    ) {
        match node {
            TTree::Leaf => outputs.push(stem),
            TTree::Node(l, r) => {
                let k = net.add(v.clone());
                net.bond(stem, (k, 0));
                grow(net, l, at.left_child(), (k, 1), v, outputs, carets);
                grow(net, r, at.right_child(), (k, 2), v, outputs, carets);
                carets.push(at);
            }
        }
    }
    for iv in t1.leaf_intervals() {
        let sub = t2.subtree_at(&iv).expect("refinement");
        match sub {
            TTree::Leaf => {
                let k = net.add(identity.clone());
                inputs.push((k, 0));
                outputs.push((k, 1));
            }
            TTree::Node(l, r) => {
                let k = net.add(theory.v.clone());
                inputs.push((k, 0));
                grow(
                    &mut net,
                    l,
                    iv.left_child(),
                    (k, 1),
                    &theory.v,
                    &mut outputs,
                    &mut carets,
                );
                grow(
                    &mut net,
                    r,
                    iv.right_child(),
                    (k, 2),
                    &theory.v,
                    &mut outputs,
                    &mut carets,
                );
                carets.push(iv);
            }
        }
    }
    net.open_legs = outputs.into_iter().chain(inputs).collect();
    carets.sort();
    Ok(FineGrainer {
        source: gamma.clone(),
        target: gamma2.clone(),
        carets,
        network: net,
    })
}

impl FineGrainer {
    /// Dense map, rows indexed by target legs and columns by source legs.
    pub fn matrix(&self) -> Result<DMatrix<Complex64>, SemiError> {
        let t = contract(&self.network)?;
        let nt = self.target.len();
        let rows: Vec<usize> = (0..nt).collect();
        let cols: Vec<usize> = (nt..t.rank()).collect();
        Ok(t.matrix(&rows, &cols))
    }

    /// Largest entry of `T^dagger T - I`.
    pub fn isometry_defect(&self) -> Result<f64, SemiError> {
        let m = self.matrix()?;
        let g = m.adjoint() * &m;
        let id = DMatrix::<Complex64>::identity(g.nrows(), g.ncols());
        Ok((g - id).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// The composite `next . self` as a network: outputs of `self` bonded to
    /// the inputs of `next`.
    pub fn then(&self, next: &FineGrainer) -> Result<FineGrainer, SemiError> {
        if self.target != next.source {
            return Err(SemiError::NotARefinement(
                "fine-grainers do not chain".into(),
            ));
        }
        let mut net = self.network.clone();
        let offset = net.tensors.len();
        for t in &next.network.tensors {
            net.add(t.clone());
        }
        let shift = |l: Leg| (l.0 + offset, l.1);
        for &(a, b) in &next.network.bonds {
            net.bond(shift(a), shift(b));
        }
        let n_mid = self.target.len();
        let n_out = next.target.len();
        let first_out: Vec<Leg> = self.network.open_legs[..n_mid].to_vec();
        let first_in: Vec<Leg> = self.network.open_legs[n_mid..].to_vec();
        let next_out: Vec<Leg> = next.network.open_legs[..n_out]
            .iter()
            .map(|&l| shift(l))
            .collect();
        let next_in: Vec<Leg> = next.network.open_legs[n_out..]
            .iter()
            .map(|&l| shift(l))
            .collect();
        for (a, b) in first_out.into_iter().zip(next_in) {
            net.bond(a, b);
        }
        net.open_legs = next_out.into_iter().chain(first_in).collect();
        let mut carets: Vec<StdDyadicInterval> =
            self.carets.iter().chain(&next.carets).cloned().collect();
        carets.sort();
        Ok(FineGrainer {
            source: self.source.clone(),
            target: next.target.clone(),
            carets,
            network: net,
        })
    }

    /// Same endpoints, same carets, and dense maps agreeing to `1e-12`.
    pub fn network_equals(&self, other: &FineGrainer) -> Result<bool, SemiError> {
        if self.source != other.source || self.target != other.target || self.carets != other.carets
        {
            return Ok(false);
        }
        let (a, b) = (self.matrix()?, other.matrix()?);
        Ok((a - b).iter().all(|z| z.norm() <= 1e-12))
    }

    pub fn apply(&self, s: &CutoffState) -> Result<CutoffState, SemiError> {
        if s.cutoff != self.source {
            return Err(SemiError::NotARefinement(
                "state is not at the source cutoff".into(),
            ));
        }
        s.refine_to(&TTree::from_partition(&self.target)?)
    }
}

/// `|R, S>` with marker: the vacuum network of `S` placed on cutoff `R`, leaf
/// `j` of `S` at position `(marker + j) mod n`; equals `pi((S, R, marker)) |Omega>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BulkKet {
    pub r: TTree,
    pub s: TTree,
    pub marker: usize,
}

impl BulkKet {
    pub fn new(r: TTree, s: TTree, marker: usize) -> Result<Self, SemiError> {
        TreeDiagram::new(s.clone(), r.clone(), marker)
            .map_err(|e| SemiError::Parse(e.to_string()))?;
        Ok(Self { r, s, marker })
    }

    /// The element `g` with `|R,S> = pi(g)|Omega>`.
    pub fn element(&self) -> TreeDiagram {
        TreeDiagram::new(self.s.clone(), self.r.clone(), self.marker).expect("validated")
    }

    pub fn from_element(g: &TreeDiagram) -> Self {
        Self {
            r: g.range_tree().clone(),
            s: g.domain_tree().clone(),
            marker: g.marker(),
        }
    }

    pub fn state(&self, theory: &Arc<Theory>) -> Result<CutoffState, SemiError> {
        act(&self.element(), &vacuum_tree(&TTree::caret(), theory)?)
    }
}

/// `<k1|k2>` by reflect-and-join: both kets are subdivided until their cutoff
/// trees agree, then the conjugated network of `k1` is joined to that of `k2`.
pub fn bulk_inner(
    k1: &BulkKet,
    k2: &BulkKet,
    theory: &Arc<Theory>,
) -> Result<Complex64, SemiError> {
    let common = k1.r.union(&k2.r).union(&TTree::caret());
    let g1 = thompson::expand_range_to(&padded(&k1.element()), &common);
    let g2 = thompson::expand_range_to(&padded(&k2.element()), &common);
    check_size(theory.d, common.leaf_count())?;
    let mut net = TensorNetwork::new();
    let bra = grow_vacuum(&mut net, g1.domain_tree(), theory, true);
    let ket = grow_vacuum(&mut net, g2.domain_tree(), theory, false);
    let n = common.leaf_count();
    for p in 0..n {
        let j1 = (p + n - g1.marker()) % n;
        let j2 = (p + n - g2.marker()) % n;
        net.bond(bra[j1], ket[j2]);
    }
    Ok(contract(&net)?.data()[0])
}

/// `G[i][j] = <Omega| pi(w_i^-1 w_j) |Omega>`.
pub fn gram_matrix(
    words: &[TreeDiagram],
    theory: &Arc<Theory>,
) -> Result<DMatrix<Complex64>, SemiError> {
    let n = words.len();
    let mut cache: HashMap<TreeDiagram, Complex64> = HashMap::new();
    let inverses: Vec<TreeDiagram> = words.iter().map(thompson::inverse).collect();
    let mut g = DMatrix::from_element(n, n, c(0.0));
    for i in 0..n {
        for j in 0..n {
            let h = thompson::compose(&inverses[i], &words[j]);
            let z = match cache.get(&h) {
                Some(z) => *z,
                None => {
                    let z = vacuum_matrix_element(&h, theory, Route::Diagram)?;
                    cache.insert(h, z);
                    z
                }
            };
            g[(i, j)] = z;
        }
    }
    Ok(g)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Von Neumann entropy (natural log) of the legs `subsystem` of a pure state.
pub fn entanglement_entropy(amps: &DenseTensor, subsystem: &[usize]) -> Result<f64, SemiError> {
    let n = amps.rank();
    let set: BTreeSet<usize> = subsystem.iter().copied().collect();
    if set.len() != subsystem.len() || set.iter().any(|&l| l >= n) {
        return Err(SemiError::InvalidSubsystem(format!(
            "{subsystem:?} is not a set of legs below {n}"
        )));
    }
    if set.is_empty() || set.len() == n {
        return Ok(0.0);
    }
    let rows: Vec<usize> = set.iter().copied().collect();
    let cols: Vec<usize> = (0..n).filter(|l| !set.contains(l)).collect();
    let m = amps.matrix(&rows, &cols);
    let rho = &m * m.adjoint();
    let tr: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
    let rho = rho / c(tr);
    Ok(hermitian_eigenvalues(&rho)
        .into_iter()
        .filter(|&l| l > 1e-14)
        .map(|l| -l * l.ln())
        .sum())
}

pub fn state_entropy(s: &CutoffState, subsystem: &[usize]) -> Result<f64, SemiError> {
    entanglement_entropy(&s.amplitudes, subsystem)
}

/// Vertex order on the circle with the convention that the vertex 1 closes
/// the arc `[lo, 1]` instead of reading as 0.
fn sorted3(a: &DyadicRational, b: &DyadicRational, x: &DyadicRational) -> [DyadicRational; 3] {
    let mut v = [a.clone(), b.clone(), x.clone()];
    v.sort();
    v
}

/// Leg of a triangle `{x < y < z}` for one of its edges: `(x, z)` is leg 0,
/// `(x, y)` leg 1, `(y, z)` leg 2.
fn triangle_leg(
    tri: &[DyadicRational; 3],
    p: &DyadicRational,
    q: &DyadicRational,
) -> Option<usize> {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let [x, y, z] = tri;
    if lo == x && hi == z {
        Some(0)
    } else if lo == x && hi == y {
        Some(1)
    } else if lo == y && hi == z {
        Some(2)
    } else {
        None
    }
}

/// The cylinder state from a zigzag strip of `2 * halfwidth` triangles whose
/// first and last edges are identified.
#[derive(Debug, Clone)]
pub struct BTZState {
    pub halfwidth: usize,
    pub cap_depth: u32,
    /// Strip vertices on the `A` side and the `B` side, in strip order.
    pub a_vertices: Vec<DyadicRational>,
    pub b_vertices: Vec<DyadicRational>,
    pub identified_edges: [(DyadicRational, DyadicRational); 2],
    pub network: TensorNetwork,
    pub amplitudes: DenseTensor,
    pub a_legs: Vec<usize>,
    pub b_legs: Vec<usize>,
    /// Size of the smallest bond cut separating `A` from `B`.
    pub cut_bonds: usize,
}

impl BTZState {
    pub fn entropy_a(&self) -> Result<f64, SemiError> {
        entanglement_entropy(&self.amplitudes, &self.a_legs)
    }

    pub fn entropy_b(&self) -> Result<f64, SemiError> {
        entanglement_entropy(&self.amplitudes, &self.b_legs)
    }

    /// Number of independent cycles of the network.
    pub fn cycle_rank(&self) -> usize {
        self.network.bonds.len() + 1 - self.network.tensors.len()
    }
}

pub fn btz_state(halfwidth: usize, theory: &Arc<Theory>) -> Result<BTZState, SemiError> {
    btz_state_with_caps(halfwidth, 0, theory)
}

/// As [`btz_state`], with every boundary leg further fine-grained by a
/// complete tree of `V`s of depth `cap_depth`.
pub fn btz_state_with_caps(
    halfwidth: usize,
    cap_depth: u32,
    theory: &Arc<Theory>,
) -> Result<BTZState, SemiError> {
    if halfwidth == 0 {
        return Err(SemiError::InvalidGeometry(
            "halfwidth must be at least 1".into(),
        ));
    }
    let columns = 2 * halfwidth;
    let legs = columns << cap_depth;
    check_size(theory.d, legs)?;
    // walk the strip from the edge (1/2, 1), alternately renewing each end
    let mut a = DyadicRational::one();
    let mut b = DyadicRational::new(1, 1);
    let mut a_vertices = vec![a.clone()];
    let mut b_vertices = vec![b.clone()];
    let first_edge = (b.clone(), a.clone());
    let mut triangles = Vec::with_capacity(columns);
    for k in 0..columns {
        let mid = a.midpoint(&b);
        let tri = sorted3(&a, &b, &mid);
        let entry = (a.clone(), b.clone());
        let (off, exit) = if k % 2 == 0 {
            a_vertices.push(mid.clone());
            let off = (a.clone(), mid.clone());
            a = mid;
            (off, (a.clone(), b.clone()))
        } else {
            b_vertices.push(mid.clone());
            let off = (b.clone(), mid.clone());
            b = mid;
            (off, (a.clone(), b.clone()))
        };
        let leg = |e: &(DyadicRational, DyadicRational)| {
            triangle_leg(&tri, &e.0, &e.1).expect("edge of triangle")
        };
        triangles.push((leg(&entry), leg(&off), leg(&exit)));
    }
    let last_edge = (a.clone(), b.clone());
    let mut net = TensorNetwork::new();
    for _ in 0..columns {
        net.add(theory.v.clone());
    }
    for k in 0..columns {
        let next = (k + 1) % columns;
        net.bond((k, triangles[k].2), (next, triangles[next].0));
    }
    let mut a_legs = Vec::new();
    let mut b_legs = Vec::new();
    let mut pos = 0;
    for (k, t) in triangles.iter().enumerate() {
        let mut frontier = vec![(k, t.1)];
        for _ in 0..cap_depth {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for stem in frontier {
                let id = net.add(theory.v.clone());
                net.bond(stem, (id, 0));
                next.push((id, 1));
                next.push((id, 2));
            }
            frontier = next;
        }
        for leg in frontier {
            net.open(leg);
            if k % 2 == 0 {
                a_legs.push(pos);
            } else {
                b_legs.push(pos);
            }
            pos += 1;
        }
    }
    let raw = contract(&net)?;
    let norm = raw.norm();
    if norm == 0.0 {
        return Err(SemiError::InvalidGeometry(
            "ring network contracts to zero".into(),
        ));
    }
    Ok(BTZState {
        halfwidth,
        cap_depth,
        a_vertices,
        b_vertices,
        identified_edges: [first_edge, last_edge],
        network: net,
        amplitudes: raw.scale(1.0 / norm),
        a_legs,
        b_legs,
        cut_bonds: halfwidth,
    })
}

/// State with the geometry of a triangulated cutoff polygon: the vertices are
/// the breakpoints of `frontier`, `diagonals` triangulate it, and each
/// triangle carries one `V` (legs assigned by [`triangle_leg`], the vertex 0
/// read as 1 for triangles lying in `[1/2, 1]`). Each diagonal is a plain bond
/// and the whole is scaled by `1/sqrt(d)`, which for the standard
/// triangulation is the vacuum.
pub fn geometry_state(
    frontier: &DyadicPartition,
    diagonals: &[(DyadicRational, DyadicRational)],
    theory: &Arc<Theory>,
) -> Result<CutoffState, SemiError> {
    let n = frontier.len();
    if n < 2 {
        return Err(SemiError::CutoffTooCoarse);
    }
    check_size(theory.d, n)?;
    let pts: Vec<DyadicRational> = frontier.breakpoints().to_vec();
    let norm_edge = |p: &DyadicRational, q: &DyadicRational| {
        if p < q {
            (p.clone(), q.clone())
        } else {
            (q.clone(), p.clone())
        }
    };
    // 0 and 1 are the same circle point; represent it by 0 for adjacency and
    // let triangle vertex lists use 1 where it closes an arc
    let mut edges: BTreeSet<(DyadicRational, DyadicRational)> = BTreeSet::new();
    let zero = DyadicRational::zero();
    let one = DyadicRational::one();
    let canon = |p: &DyadicRational| if *p == one { zero.clone() } else { p.clone() };
    for w in pts.windows(2) {
        edges.insert(norm_edge(&canon(&w[0]), &canon(&w[1])));
    }
    for (p, q) in diagonals {
        edges.insert(norm_edge(&canon(p), &canon(q)));
    }
    if n == 2 {
        // a single geodesic: the bent leg
        let amps = theory.cup.clone();
        return Ok(CutoffState::from_parts(
            TTree::caret(),
            amps,
            theory.clone(),
        ));
    }
    if edges.len() != 2 * n - 3 {
        return Err(SemiError::InvalidGeometry(format!(
            "{} diagonals do not triangulate a {n}-gon",
            diagonals.len()
        )));
    }
    let verts: Vec<DyadicRational> = pts[..n].to_vec();
    let half = DyadicRational::new(1, 1);
    let has = |p: &DyadicRational, q: &DyadicRational| edges.contains(&norm_edge(p, q));
    let mut triangles: Vec<[DyadicRational; 3]> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (x, y, z) = (&verts[i], &verts[j], &verts[k]);
                if has(x, y) && has(y, z) && has(x, z) {
                    // a triangle at 0 on the far side of 1/2 closes at 1
                    if x.is_zero() && *y >= half {
                        triangles.push([y.clone(), z.clone(), one.clone()]);
                    } else {
                        triangles.push([x.clone(), y.clone(), z.clone()]);
                    }
                }
            }
        }
    }
    if triangles.len() != n - 2 {
        return Err(SemiError::InvalidGeometry(format!(
            "found {} triangles, expected {}",
            triangles.len(),
            n - 2
        )));
    }
    let mut net = TensorNetwork::new();
    let mut owner: HashMap<(DyadicRational, DyadicRational), Vec<Leg>> = HashMap::new();
    for tri in &triangles {
        let id = net.add(theory.v.clone());
        for (p, q) in [(&tri[0], &tri[1]), (&tri[1], &tri[2]), (&tri[0], &tri[2])] {
            let leg = triangle_leg(tri, p, q).expect("edge");
            owner
                .entry(norm_edge(&canon(p), &canon(q)))
                .or_default()
                .push((id, leg));
        }
    }
    for (p, q) in diagonals {
        let e = norm_edge(&canon(p), &canon(q));
        let legs = owner.get(&e).cloned().unwrap_or_default();
        if legs.len() != 2 {
            return Err(SemiError::InvalidGeometry(format!(
                "diagonal {p}-{q} is not interior"
            )));
        }
        net.bond(legs[0], legs[1]);
    }
    for w in pts.windows(2) {
        let e = norm_edge(&canon(&w[0]), &canon(&w[1]));
        let legs = owner.get(&e).cloned().unwrap_or_default();
        if legs.len() != 1 {
            return Err(SemiError::InvalidGeometry(format!(
                "side {}-{} is not a boundary",
                w[0], w[1]
            )));
        }
        net.open(legs[0]);
    }
    let amps = contract(&net)?.scale(1.0 / (theory.d as f64).sqrt());
    Ok(CutoffState::from_parts(
        TTree::from_partition(frontier)?,
        amps,
        theory.clone(),
    ))
}
