//! Dense complex tensors, perfect-tensor certificates and a small
//! deterministic contraction engine.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("DimensionMismatch: bond {a:?}-{b:?} joins dimensions {da} and {db}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
        da: usize,
        db: usize,
    },
    #[error("InvalidNetwork: {0}")]
    InvalidNetwork(String),
    #[error("NotPerfect: split {legs:?} deviates by {deviation:e}")]
    NotPerfect { legs: Vec<usize>, deviation: f64 },
    #[error("UnequalLegDims: {0:?}")]
    UnequalLegDims(Vec<usize>),
    #[error("UnknownTensor: {0:?}")]
    UnknownTensor(String),
    #[error("Parse: {0}")]
    Parse(String),
    #[error("Io: {0}")]
    Io(String),
}

#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Mixed-radix counter over `dims`, row-major.
fn next_index(idx: &mut [usize], dims: &[usize]) -> bool {
    for i in (0..dims.len()).rev() {
        idx[i] += 1;
        if idx[i] < dims[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self, TensorError> {
        if dims.contains(&0) {
            return Err(TensorError::ShapeMismatch("zero leg dimension".into()));
        }
        let size: usize = dims.iter().product();
        if size != data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "{} entries for dims {dims:?}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(TensorError::ShapeMismatch("non-finite entry".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let size = dims.iter().product();
        Self {
            dims,
            data: vec![Complex64::new(0.0, 0.0); size],
        }
    }

    pub fn scalar(z: Complex64) -> Self {
        Self {
            dims: vec![],
            data: vec![z],
        }
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let mut t = Self::zeros(dims.clone());
        let mut idx = vec![0; dims.len()];
        let mut k = 0;
        loop {
            t.data[k] = f(&idx);
            k += 1;
            if !next_index(&mut idx, &dims) {
                break;
            }
        }
        t
    }

    pub fn random(dims: Vec<usize>, rng: &mut impl Rng) -> Self {
        Self::from_fn(dims, |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], z: Complex64) {
        let o = self.offset(idx);
        self.data[o] = z;
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|z| z.norm_sqr() != 0.0).count()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// New leg `i` is old leg `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank(), "permutation length");
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return self.clone();
        }
        let old_strides = strides(&self.dims);
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let st: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0; dims.len()];
        let mut off = 0usize;
        loop {
            data.push(self.data[off]);
            // advance the counter while maintaining the source offset
            let mut i = dims.len();
            loop {
                if i == 0 {
                    return Self { dims, data };
                }
                i -= 1;
                idx[i] += 1;
                off += st[i];
                if idx[i] < dims[i] {
                    break;
                }
                off -= st[i] * dims[i];
                idx[i] = 0;
            }
        }
    }

    /// Flattening with `rows` legs as the row index and `cols` legs as the column index.
    pub fn matrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
        let perm: Vec<usize> = rows.iter().chain(cols).copied().collect();
        let t = self.permute(&perm);
        let nr: usize = rows.iter().map(|&l| self.dims[l]).product();
        let nc: usize = cols.iter().map(|&l| self.dims[l]).product();
        DMatrix::from_row_slice(nr, nc, &t.data)
    }

    /// Sum over the diagonal of legs `a` and `b`.
    pub fn trace_pair(&self, a: usize, b: usize) -> Self {
        assert!(a != b && self.dims[a] == self.dims[b]);
        let keep: Vec<usize> = (0..self.rank()).filter(|&l| l != a && l != b).collect();
        let mut perm = keep.clone();
        perm.push(a);
        perm.push(b);
        let t = self.permute(&perm);
        let d = self.dims[a];
        let outer: usize = keep.iter().map(|&l| self.dims[l]).product();
        let mut data = vec![Complex64::new(0.0, 0.0); outer];
        for (o, slot) in data.iter_mut().enumerate() {
            let base = o * d * d;
            for i in 0..d {
                *slot += t.data[base + i * d + i];
            }
        }
        Self {
            dims: keep.iter().map(|&l| self.dims[l]).collect(),
            data,
        }
    }

    /// Contract legs `la` of `self` with legs `lb` of `other`; result legs are
    /// the free legs of `self` followed by the free legs of `other`.
    pub fn tensordot(&self, la: &[usize], other: &Self, lb: &[usize]) -> Self {
        assert_eq!(la.len(), lb.len());
        let free_a: Vec<usize> = (0..self.rank()).filter(|l| !la.contains(l)).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|l| !lb.contains(l)).collect();
        let pa: Vec<usize> = free_a.iter().chain(la).copied().collect();
        let pb: Vec<usize> = lb.iter().chain(&free_b).copied().collect();
        let a = self.permute(&pa);
        let b = other.permute(&pb);
        let m: usize = free_a.iter().map(|&l| self.dims[l]).product();
        let k: usize = la.iter().map(|&l| self.dims[l]).product();
        let n: usize = free_b.iter().map(|&l| other.dims[l]).product();
        let mut data = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            let arow = &a.data[i * k..(i + 1) * k];
            let out = &mut data[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av.re == 0.0 && av.im == 0.0 {
                    continue;
                }
                let brow = &b.data[p * n..(p + 1) * n];
                for (o, &bv) in out.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        let dims = free_a
            .iter()
            .map(|&l| self.dims[l])
            .chain(free_b.iter().map(|&l| other.dims[l]))
            .collect();
        Self { dims, data }
    }

    pub fn outer(&self, other: &Self) -> Self {
        self.tensordot(&[], other, &[])
    }

    /// Text form: `dims: d1 .. dn`, then `i1 .. in  re im` per nonzero entry.
    pub fn to_text(&self) -> String {
        let mut s = String::from("dims:");
        for d in &self.dims {
            s.push_str(&format!(" {d}"));
        }
        s.push('\n');
        let mut idx = vec![0; self.rank()];
        for z in &self.data {
            if z.norm_sqr() != 0.0 {
                let ix: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                s.push_str(&format!("{}  {:e} {:e}\n", ix.join(" "), z.re, z.im));
            }
            next_index(&mut idx, &self.dims);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TensorError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| TensorError::Parse("empty tensor file".into()))?;
        let dims: Vec<usize> = header
            .strip_prefix("dims:")
            .ok_or_else(|| TensorError::Parse("expected 'dims:' header".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| TensorError::Parse(format!("bad dim {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        let mut t = Self::zeros(dims);
        if t.dims.contains(&0) {
            return Err(TensorError::ShapeMismatch("zero leg dimension".into()));
        }
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != t.rank() + 2 {
                return Err(TensorError::Parse(format!("bad entry line {line:?}")));
            }
            let idx: Vec<usize> = toks[..t.rank()]
                .iter()
                .map(|x| {
                    x.parse()
                        .map_err(|_| TensorError::Parse(format!("bad index in {line:?}")))
                })
                .collect::<Result<_, _>>()?;
            if idx.iter().zip(&t.dims).any(|(i, d)| i >= d) {
                return Err(TensorError::Parse(format!(
                    "index out of range in {line:?}"
                )));
            }
            let num = |x: &str| {
                x.parse::<f64>()
                    .map_err(|_| TensorError::Parse(format!("bad number {x:?}")))
            };
            let z = Complex64::new(num(toks[t.rank()])?, num(toks[t.rank() + 1])?);
            t.set(&idx, z);
        }
        Self::new(t.dims, t.data)
    }

    pub fn load(path: &Path) -> Result<Self, TensorError> {
        let text = std::fs::read_to_string(path).map_err(|e| TensorError::Io(e.to_string()))?;
        Self::from_text(&text)
    }
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseTensor{:?}", self.dims)
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Three legs of dimension 3: entry 1 iff the indices are pairwise distinct.
pub fn four_colour_tensor() -> DenseTensor {
    DenseTensor::from_fn(vec![3, 3, 3], |i| {
        c(if i[0] != i[1] && i[1] != i[2] && i[0] != i[2] {
            1.0
        } else {
            0.0
        })
    })
}

/// Three legs of dimension 4, each a pair of qubits (index `2x + y`); leg 0
/// `|j k>` is sent to `1/2 |j> |singlet> |k>` across legs 1 and 2.
pub fn singlet_tensor() -> DenseTensor {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = |a: usize, b: usize| match (a, b) {
        (0, 1) => s,
        (1, 0) => -s,
        _ => 0.0,
    };
    DenseTensor::from_fn(vec![4, 4, 4], |i| {
        let (j, k) = (i[0] / 2, i[0] % 2);
        let (j2, a) = (i[1] / 2, i[1] % 2);
        let (b, k2) = (i[2] / 2, i[2] % 2);
        if j == j2 && k == k2 {
            c(0.5 * singlet(a, b))
        } else {
            c(0.0)
        }
    })
}

/// Four legs of dimension 3: `|x>|y> -> |2x+y mod 3>|x+y mod 3>`.
pub fn qutrit_code_tensor() -> DenseTensor {
    DenseTensor::from_fn(vec![3, 3, 3, 3], |i| {
        let (x, y) = (i[0], i[1]);
        c(if i[2] == (2 * x + y) % 3 && i[3] == (x + y) % 3 {
            1.0
        } else {
            0.0
        })
    })
}

pub fn builtin(name: &str) -> Result<DenseTensor, TensorError> {
    match name {
        "four-colour" | "four-color" => Ok(four_colour_tensor()),
        "singlet" => Ok(singlet_tensor()),
        "qutrit-code" => Ok(qutrit_code_tensor()),
        _ => Err(TensorError::UnknownTensor(name.to_string())),
    }
}

/// A builtin name, or a path to a tensor text file.
pub fn resolve(name_or_path: &str) -> Result<DenseTensor, TensorError> {
    match builtin(name_or_path) {
        Ok(t) => Ok(t),
        Err(_) if Path::new(name_or_path).exists() => DenseTensor::load(Path::new(name_or_path)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCheck {
    /// Input legs `A` of the flattening `A -> A^c`.
    pub legs: Vec<usize>,
    pub constant: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfectTensorCertificate {
    pub tensor: DenseTensor,
    pub splits: Vec<SplitCheck>,
    pub rotation_invariant: bool,
    pub tolerance: f64,
}

impl PerfectTensorCertificate {
    /// Constant for the first split with `|A| = size`.
    pub fn constant(&self, size: usize) -> Option<f64> {
        self.splits
            .iter()
            .find(|s| s.legs.len() == size)
            .map(|s| s.constant)
    }

    /// Constants grouped by `|A|` (the first of each class).
    pub fn constants_by_class(&self) -> BTreeMap<usize, f64> {
        let mut m = BTreeMap::new();
        for s in &self.splits {
            m.entry(s.legs.len()).or_insert(s.constant);
        }
        m
    }
}

/// Gram matrix of the flattening `A -> A^c`, its proportionality constant and
/// the relative Frobenius deviation from `c * I`.
pub fn split_check(t: &DenseTensor, legs: &[usize]) -> SplitCheck {
    let rest: Vec<usize> = (0..t.rank()).filter(|l| !legs.contains(l)).collect();
    let m = t.matrix(&rest, legs);
    let g = m.adjoint() * &m;
    let da = g.nrows();
    let constant = (0..da).map(|i| g[(i, i)].re).sum::<f64>() / da as f64;
    let mut dev = 0.0;
    for i in 0..da {
        for j in 0..da {
            let target = if i == j { constant } else { 0.0 };
            dev += (g[(i, j)] - c(target)).norm_sqr();
        }
    }
    let scale = constant.abs() * (da as f64).sqrt();
    let deviation = if scale > 0.0 {
        dev.sqrt() / scale
    } else {
        f64::INFINITY
    };
    SplitCheck {
        legs: legs.to_vec(),
        constant,
        deviation,
    }
}

pub fn is_rotation_invariant(t: &DenseTensor, tol: f64) -> bool {
    let n = t.rank();
    if n == 0 {
        return true;
    }
    let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    t.permute(&perm).max_abs_diff(t) <= tol
}

/// Checks every flattening `A -> A^c` with `1 <= |A| <= n/2`.
pub fn verify_perfect(t: &DenseTensor, tol: f64) -> Result<PerfectTensorCertificate, TensorError> {
    if t.dims.windows(2).any(|w| w[0] != w[1]) {
        return Err(TensorError::UnequalLegDims(t.dims.clone()));
    }
    let n = t.rank();
    let mut splits = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize * 2 > n {
            continue;
        }
        let legs: Vec<usize> = (0..n).filter(|&l| mask >> l & 1 == 1).collect();
        let chk = split_check(t, &legs);
        if chk.deviation.is_nan() || chk.deviation > tol {
            return Err(TensorError::NotPerfect {
                legs,
                deviation: chk.deviation,
            });
        }
        splits.push(chk);
    }
    splits.sort_by(|a, b| (a.legs.len(), &a.legs).cmp(&(b.legs.len(), &b.legs)));
    Ok(PerfectTensorCertificate {
        tensor: t.clone(),
        rotation_invariant: is_rotation_invariant(t, tol),
        splits,
        tolerance: tol,
    })
}

/// Rescale so the flattening with input legs `split` is an exact isometry.
pub fn normalize_isometry(t: &DenseTensor, split: &[usize]) -> Result<DenseTensor, TensorError> {
    let chk = split_check(t, split);
    if chk.deviation.is_nan() || chk.deviation > 1e-10 || chk.constant <= 0.0 {
        return Err(TensorError::NotPerfect {
            legs: split.to_vec(),
            deviation: chk.deviation,
        });
    }
    Ok(t.scale(1.0 / chk.constant.sqrt()))
}

/// Verify, then normalize on the default split (leg 0 as input).
pub fn normalized(t: &DenseTensor) -> Result<DenseTensor, TensorError> {
    verify_perfect(t, 1e-10)?;
    normalize_isometry(t, &[0])
}

pub type Leg = (usize, usize);

#[derive(Debug, Clone, Default)]
pub struct TensorNetwork {
    pub tensors: Vec<DenseTensor>,
    pub bonds: Vec<(Leg, Leg)>,
    pub open_legs: Vec<Leg>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetworkWarning {
    /// The network had several connected components, contracted separately.
    Disconnected { components: usize },
}

impl fmt::Display for NetworkWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkWarning::Disconnected { components } => write!(
                f,
                "DisconnectedNetworkWarning: {components} components contracted independently"
            ),
        }
    }
}

struct Item {
    tensor: DenseTensor,
    labels: Vec<Leg>,
}

impl TensorNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: DenseTensor) -> usize {
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn bond(&mut self, a: Leg, b: Leg) {
        self.bonds.push((a, b));
    }

    pub fn open(&mut self, leg: Leg) {
        self.open_legs.push(leg);
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let mut seen: BTreeMap<Leg, usize> = BTreeMap::new();
        let dim = |l: Leg| -> Result<usize, TensorError> {
            self.tensors
                .get(l.0)
                .and_then(|t| t.dims.get(l.1).copied())
                .ok_or_else(|| TensorError::InvalidNetwork(format!("no leg {l:?}")))
        };
        for &(a, b) in &self.bonds {
            let (da, db) = (dim(a)?, dim(b)?);
            if da != db {
                return Err(TensorError::DimensionMismatch { a, b, da, db });
            }
            *seen.entry(a).or_default() += 1;
            *seen.entry(b).or_default() += 1;
        }
        for &l in &self.open_legs {
            dim(l)?;
            *seen.entry(l).or_default() += 1;
        }
        for (n, t) in self.tensors.iter().enumerate() {
            for l in 0..t.rank() {
                match seen.get(&(n, l)) {
                    Some(1) => {}
                    Some(k) => {
                        return Err(TensorError::InvalidNetwork(format!(
                            "leg {:?} used {k} times",
                            (n, l)
                        )))
                    }
                    None => {
                        return Err(TensorError::InvalidNetwork(format!(
                            "leg {:?} is neither bonded nor open",
                            (n, l)
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    fn partners(&self) -> BTreeMap<Leg, Leg> {
        let mut m = BTreeMap::new();
        for &(a, b) in &self.bonds {
            m.insert(a, b);
            m.insert(b, a);
        }
        m
    }

    fn initial_items(&self, partner: &BTreeMap<Leg, Leg>) -> Vec<Item> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(n, t)| {
                let mut item = Item {
                    tensor: t.clone(),
                    labels: (0..t.rank()).map(|l| (n, l)).collect(),
                };
                self_trace(&mut item, partner);
                item
            })
            .collect()
    }

    fn finish(&self, mut items: Vec<Item>) -> (DenseTensor, Option<NetworkWarning>) {
        let components = items.len();
        let mut acc = items.remove(0);
        for it in items {
            acc = Item {
                tensor: acc.tensor.outer(&it.tensor),
                labels: acc.labels.into_iter().chain(it.labels).collect(),
            };
        }
        let perm: Vec<usize> = self
            .open_legs
            .iter()
            .map(|l| acc.labels.iter().position(|x| x == l).expect("open leg"))
            .collect();
        let warning = (components > 1).then_some(NetworkWarning::Disconnected { components });
        (acc.tensor.permute(&perm), warning)
    }
}

fn self_trace(item: &mut Item, partner: &BTreeMap<Leg, Leg>) {
    loop {
        let pair = item.labels.iter().enumerate().find_map(|(i, l)| {
            let p = partner.get(l)?;
            let j = item.labels.iter().position(|x| x == p)?;
            (j != i).then_some((i, j))
        });
        let Some((i, j)) = pair else { return };
        item.tensor = item.tensor.trace_pair(i, j);
        item.labels = item
            .labels
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i && k != j)
            .map(|(_, &l)| l)
            .collect();
    }
}

fn merge(a: Item, b: Item, partner: &BTreeMap<Leg, Leg>) -> Item {
    let mut la = Vec::new();
    let mut lb = Vec::new();
    for (i, l) in a.labels.iter().enumerate() {
        if let Some(p) = partner.get(l) {
            if let Some(j) = b.labels.iter().position(|x| x == p) {
                la.push(i);
                lb.push(j);
            }
        }
    }
    let tensor = a.tensor.tensordot(&la, &b.tensor, &lb);
    let labels = a
        .labels
        .iter()
        .enumerate()
        .filter(|(i, _)| !la.contains(i))
        .map(|(_, &l)| l)
        .chain(
            b.labels
                .iter()
                .enumerate()
                .filter(|(j, _)| !lb.contains(j))
                .map(|(_, &l)| l),
        )
        .collect();
    let mut item = Item { tensor, labels };
    self_trace(&mut item, partner);
    item
}

fn shared_dims(a: &Item, b: &Item, partner: &BTreeMap<Leg, Leg>) -> Option<usize> {
    let mut shared = 1usize;
    let mut any = false;
    for (i, l) in a.labels.iter().enumerate() {
        if let Some(p) = partner.get(l) {
            if b.labels.contains(p) {
                shared *= a.tensor.dims[i];
                any = true;
            }
        }
    }
    any.then_some(shared)
}

/// Contract greedily, smallest intermediate first.
pub fn contract(net: &TensorNetwork) -> Result<DenseTensor, TensorError> {
    contract_detailed(net).map(|(t, _)| t)
}

pub fn contract_detailed(
    net: &TensorNetwork,
) -> Result<(DenseTensor, Option<NetworkWarning>), TensorError> {
    net.validate()?;
    if net.tensors.is_empty() {
        return Ok((DenseTensor::scalar(c(1.0)), None));
    }
    let partner = net.partners();
    let mut items = net.initial_items(&partner);
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                if let Some(shared) = shared_dims(&items[i], &items[j], &partner) {
                    let size = items[i].tensor.len() / shared * (items[j].tensor.len() / shared);
                    if best.is_none_or(|(s, _, _)| size < s) {
                        best = Some((size, i, j));
                    }
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let b = items.remove(j);
        let a = items.remove(i);
        items.insert(i, merge(a, b, &partner));
    }
    Ok(net.finish(items))
}

/// Contract bonds in the given order (indices into `net.bonds`); a bond whose
/// legs already sit in one intermediate is traced or skipped.
pub fn contract_bonds_in_order(
    net: &TensorNetwork,
    order: &[usize],
) -> Result<DenseTensor, TensorError> {
    net.validate()?;
    if order.len() != net.bonds.len() {
        return Err(TensorError::InvalidNetwork(
            "order must list every bond".into(),
        ));
    }
    let partner = net.partners();
    let mut items: Vec<Option<Item>> = net.initial_items(&partner).into_iter().map(Some).collect();
    let find = |items: &[Option<Item>], l: Leg| {
        items
            .iter()
            .position(|it| it.as_ref().is_some_and(|it| it.labels.contains(&l)))
    };
    for &b in order {
        let (x, y) = net.bonds[b];
        let (Some(i), Some(j)) = (find(&items, x), find(&items, y)) else {
            continue;
        };
        if i == j {
            continue;
        }
        let a = items[i].take().unwrap();
        let bb = items[j].take().unwrap();
        items[i] = Some(merge(a, bb, &partner));
    }
    Ok(net.finish(items.into_iter().flatten().collect()).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn four_colour_entries() {
        let t = four_colour_tensor();
        assert_eq!(t.get(&[0, 1, 2]), c(1.0));
        assert_eq!(t.get(&[0, 0, 2]), c(0.0));
        assert_eq!(t.nonzero_count(), 6);
    }

    #[test]
    fn four_colour_certificate() {
        let cert = verify_perfect(&four_colour_tensor(), 1e-12).unwrap();
        assert!(cert.rotation_invariant);
        assert_eq!(cert.constant(1), Some(2.0));
        assert_eq!(cert.splits.len(), 3);
        // literal cyclic symmetry
        let t = four_colour_tensor();
        assert_eq!(t.permute(&[1, 2, 0]), t);
    }

    #[test]
    fn singlet_pattern() {
        let t = singlet_tensor();
        let v = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        for jk in 0..4 {
            let nz: Vec<f64> = (0..4)
                .flat_map(|a| (0..4).map(move |b| (a, b)))
                .map(|(a, b)| t.get(&[jk, a, b]).re)
                .filter(|x| *x != 0.0)
                .collect();
            assert_eq!(nz.len(), 2);
            assert!(nz.iter().all(|x| (x.abs() - v).abs() < 1e-15));
        }
        let chk = split_check(&t, &[0]);
        assert!(chk.deviation < 1e-12);
        assert!(verify_perfect(&t, 1e-12).is_ok());
    }

    #[test]
    fn qutrit_code() {
        let t = qutrit_code_tensor();
        assert_eq!(t.len(), 81);
        assert_eq!(t.nonzero_count(), 9);
        assert_eq!(t.get(&[1, 1, 0, 2]), c(1.0));
        let cert = verify_perfect(&t, 1e-12).unwrap();
        assert_eq!(cert.splits.len(), 4 + 6);
        let u = t.matrix(&[2, 3], &[0, 1]);
        assert!((u.adjoint() * &u - DMatrix::identity(9, 9)).norm() < 1e-15);
    }

    #[test]
    fn all_ones_is_not_perfect() {
        let t = DenseTensor::from_fn(vec![2, 2, 2], |_| c(1.0));
        assert!(matches!(
            verify_perfect(&t, 1e-12),
            Err(TensorError::NotPerfect { .. })
        ));
    }

    #[test]
    fn normalization() {
        let w = normalize_isometry(&four_colour_tensor(), &[0]).unwrap();
        let m = w.matrix(&[1, 2], &[0]);
        assert!((m.adjoint() * &m - DMatrix::identity(3, 3)).norm() < 1e-15);
        let w2 = normalize_isometry(&w, &[0]).unwrap();
        assert!(w2.max_abs_diff(&w) < 1e-15);
        // as a 0 -> 3 state, divided by sqrt(d)
        assert!((w.norm() / 3f64.sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_unitary_is_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseTensor::random(vec![4, 4], &mut rng).matrix(&[0], &[1]);
        let q = a.qr().q();
        let data: Vec<Complex64> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| q[(i, j)])
            .collect();
        let u = DenseTensor::new(vec![4, 4], data).unwrap();
        assert!(verify_perfect(&u, 1e-12).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let t = singlet_tensor();
        let back = DenseTensor::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(DenseTensor::from_text("dims: 2\n5 1 0\n").is_err());
    }

    #[test]
    fn single_node_network() {
        let mut net = TensorNetwork::new();
        let t = four_colour_tensor();
        net.add(t.clone());
        for l in 0..3 {
            net.open((0, l));
        }
        assert_eq!(contract(&net).unwrap(), t);
        net.open_legs.reverse();
        assert_eq!(contract(&net).unwrap(), t.permute(&[2, 1, 0]));
    }

    #[test]
    fn dimension_mismatch() {
        let mut net = TensorNetwork::new();
        net.add(DenseTensor::zeros(vec![2]));
        net.add(DenseTensor::zeros(vec![3]));
        net.bond((0, 0), (1, 0));
        assert!(matches!(
            contract(&net),
            Err(TensorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn disconnected_components_multiply() {
        let mut net = TensorNetwork::new();
        let v = normalize_isometry(&four_colour_tensor(), &[0]).unwrap();
        for _ in 0..2 {
            let a = net.add(v.clone());
            let b = net.add(v.conj());
            for l in 0..3 {
                net.bond((a, l), (b, l));
            }
        }
        let (t, w) = contract_detailed(&net).unwrap();
        assert_eq!(w, Some(NetworkWarning::Disconnected { components: 2 }));
        assert!((t.data()[0] - c(9.0)).norm() < 1e-12);
    }

    #[test]
    fn ring_trace() {
        // a cycle of identity matrices traces to d
        let id = DenseTensor::from_fn(vec![3, 3], |i| c(if i[0] == i[1] { 1.0 } else { 0.0 }));
        let mut net = TensorNetwork::new();
        for _ in 0..4 {
            net.add(id.clone());
        }
        for k in 0..4 {
            net.bond((k, 1), ((k + 1) % 4, 0));
        }
        assert!((contract(&net).unwrap().data()[0] - c(3.0)).norm() < 1e-12);
        let order = [3, 1, 0, 2];
        assert!((contract_bonds_in_order(&net, &order).unwrap().data()[0] - c(3.0)).norm() < 1e-12);
    }
}
