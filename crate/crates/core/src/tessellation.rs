//! Dyadic tessellations of the disc with a distinguished oriented edge (doe).
//!
//! A tessellation is stored as a finite window: a convex ideal polygon whose
//! vertices are the breakpoints of a standard dyadic partition (the
//! frontier), triangulated by a set of diagonals. Beyond every side of the
//! polygon the tessellation is the standard one, so the window determines
//! the whole tessellation. Circle points are parameters in `[0, 1)`;
//! increasing parameter runs clockwise in the rendered disc.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dyadic::{
    common_refinement, DyadicError, DyadicPartition, DyadicRational, StdDyadicInterval, TTree,
};
use crate::thompson::{self, TreeDiagram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TessellationError {
    #[error("EdgeNotFound: {0}")]
    EdgeNotFound(String),
    #[error("BoundaryEdge: {0}")]
    BoundaryEdge(String),
    #[error("LabelNotRepresented: {0}")]
    LabelNotRepresented(String),
    #[error("DepthExceeded: level {level} above the limit {limit}")]
    DepthExceeded { level: u32, limit: u32 },
    #[error("SearchExhausted: {0}")]
    SearchExhausted(String),
    #[error("InvalidTessellation: {0}")]
    Invalid(String),
    #[error("InvalidCutoff: {0}")]
    InvalidCutoff(String),
    #[error("Parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}

type Point = DyadicRational;
/// Unoriented edge, endpoints in `[0, 1)` with `lo < hi`.
type Edge = (Point, Point);

fn norm_edge(p: &Point, q: &Point) -> Edge {
    let (p, q) = (p.mod_one(), q.mod_one());
    if p < q {
        (p, q)
    } else {
        (q, p)
    }
}

/// `x` strictly inside the clockwise arc from `a` to `b`.
fn in_open_arc(x: &Point, a: &Point, b: &Point) -> bool {
    if a < b {
        a < x && x < b
    } else {
        x > a || x < b
    }
}

/// A geodesic between two circle points, optionally oriented `p -> q`.
#[derive(Clone, Debug)]
pub struct Geodesic {
    pub p: Point,
    pub q: Point,
    pub oriented: bool,
}

impl Geodesic {
    pub fn new(p: Point, q: Point, oriented: bool) -> Result<Self, TessellationError> {
        let (p, q) = (p.mod_one(), q.mod_one());
        if p == q {
            return Err(TessellationError::Invalid(format!(
                "degenerate geodesic at {p}"
            )));
        }
        Ok(Self { p, q, oriented })
    }

    pub fn unoriented(p: Point, q: Point) -> Result<Self, TessellationError> {
        Self::new(p, q, false)
    }

    fn edge(&self) -> Edge {
        norm_edge(&self.p, &self.q)
    }

    pub fn same_line(&self, other: &Geodesic) -> bool {
        self.edge() == other.edge()
    }

    pub fn to_json(&self) -> Value {
        json!([self.p.to_string(), self.q.to_string()])
    }

    /// `p -> q` (oriented), `p -- q` or `p,q` (unoriented).
    pub fn parse(s: &str) -> Result<Self, TessellationError> {
        for (sep, oriented) in [("->", true), ("--", false), (",", false)] {
            if let Some((a, b)) = s.split_once(sep) {
                return Self::new(a.trim().parse()?, b.trim().parse()?, oriented);
            }
        }
        Err(TessellationError::Parse(format!(
            "expected 'p -> q' or 'p,q', got {s:?}"
        )))
    }
}

impl PartialEq for Geodesic {
    fn eq(&self, other: &Self) -> bool {
        if self.oriented && other.oriented {
            self.p == other.p && self.q == other.q
        } else {
            self.same_line(other)
        }
    }
}

impl fmt::Display for Geodesic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.oriented {
            write!(f, "{} -> {}", self.p, self.q)
        } else {
            write!(f, "{} -- {}", self.p, self.q)
        }
    }
}

/// A triangulated window of an admissible tessellation.
#[derive(Clone, Debug)]
pub struct Tessellation {
    frontier: DyadicPartition,
    diagonals: BTreeSet<Edge>,
    doe: (Point, Point),
    depth: u32,
    history: Option<Vec<Edge>>,
}

fn geodesic_of(iv: &StdDyadicInterval) -> Edge {
    norm_edge(&iv.left(), &iv.right())
}

/// Standard diagonals of the window `frontier`: the geodesics of the internal
/// nodes of its tree, the root excepted.
fn standard_diagonals(tree: &TTree) -> BTreeSet<Edge> {
    tree.internal_intervals()
        .iter()
        .filter(|iv| iv.level() > 0)
        .map(geodesic_of)
        .collect()
}

pub const DEFAULT_LEVEL_LIMIT: u32 = 24;

impl Tessellation {
    /// The standard tessellation restricted to the triangles spawned by
    /// intervals of levels `1..=depth + 1`; the window has `2^(depth+2)` vertices.
    pub fn standard(depth: u32) -> Self {
        Self::standard_on(&DyadicPartition::uniform(depth + 2)).expect("uniform window")
    }

    /// The standard tessellation restricted to the window `frontier`.
    pub fn standard_on(frontier: &DyadicPartition) -> Result<Self, TessellationError> {
        if frontier.len() < 3 {
            return Err(TessellationError::Invalid(
                "a window needs at least three sides".into(),
            ));
        }
        let tree = TTree::from_partition(frontier)?;
        Ok(Self {
            frontier: frontier.clone(),
            diagonals: standard_diagonals(&tree),
            doe: (DyadicRational::zero(), DyadicRational::new(1, 1)),
            depth: frontier.max_level().saturating_sub(2),
            history: Some(Vec::new()),
        })
    }

    pub fn from_parts(
        frontier: DyadicPartition,
        diagonals: impl IntoIterator<Item = (Point, Point)>,
        doe: (Point, Point),
    ) -> Result<Self, TessellationError> {
        let t = Self {
            depth: frontier.max_level().saturating_sub(2),
            diagonals: diagonals
                .into_iter()
                .map(|(p, q)| norm_edge(&p, &q))
                .collect(),
            doe: (doe.0.mod_one(), doe.1.mod_one()),
            frontier,
            history: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn frontier(&self) -> &DyadicPartition {
        &self.frontier
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn history(&self) -> Option<&[Edge]> {
        self.history.as_deref()
    }

    pub fn doe(&self) -> Geodesic {
        Geodesic {
            p: self.doe.0.clone(),
            q: self.doe.1.clone(),
            oriented: true,
        }
    }

    pub fn vertices(&self) -> Vec<Point> {
        self.frontier.circle_points().to_vec()
    }

    pub fn sides(&self) -> Vec<Geodesic> {
        self.frontier
            .breakpoints()
            .windows(2)
            .map(|w| Geodesic::unoriented(w[0].clone(), w[1].clone()).expect("side"))
            .collect()
    }

    pub fn diagonals(&self) -> Vec<Geodesic> {
        self.diagonals
            .iter()
            .map(|(p, q)| Geodesic::unoriented(p.clone(), q.clone()).expect("diagonal"))
            .collect()
    }

    fn side_set(&self) -> BTreeSet<Edge> {
        self.frontier
            .breakpoints()
            .windows(2)
            .map(|w| norm_edge(&w[0], &w[1]))
            .collect()
    }

    fn edge_set(&self) -> BTreeSet<Edge> {
        let mut s = self.side_set();
        s.extend(self.diagonals.iter().cloned());
        s
    }

    pub fn contains_edge(&self, g: &Geodesic) -> bool {
        let e = g.edge();
        self.diagonals.contains(&e) || self.side_set().contains(&e)
    }

    /// Every triangle of the window, vertices ascending.
    pub fn triangles(&self) -> Vec<[Point; 3]> {
        let v = self.vertices();
        let edges = self.edge_set();
        let has = |a: &Point, b: &Point| edges.contains(&norm_edge(a, b));
        let mut out = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                if !has(&v[i], &v[j]) {
                    continue;
                }
                for k in j + 1..v.len() {
                    if has(&v[j], &v[k]) && has(&v[i], &v[k]) {
                        out.push([v[i].clone(), v[j].clone(), v[k].clone()]);
                    }
                }
            }
        }
        out
    }

    /// Checks that the diagonals triangulate the window and that the doe is an edge.
    pub fn validate(&self) -> Result<(), TessellationError> {
        let n = self.frontier.len();
        if n < 3 {
            return Err(TessellationError::Invalid(
                "a window needs at least three sides".into(),
            ));
        }
        let verts: BTreeSet<Point> = self.vertices().into_iter().collect();
        let sides = self.side_set();
        for (p, q) in &self.diagonals {
            if !verts.contains(p) || !verts.contains(q) {
                return Err(TessellationError::Invalid(format!(
                    "diagonal {p}-{q} leaves the window"
                )));
            }
            if sides.contains(&(p.clone(), q.clone())) {
                return Err(TessellationError::Invalid(format!(
                    "diagonal {p}-{q} is a side"
                )));
            }
        }
        if self.diagonals.len() != n - 3 {
            return Err(TessellationError::Invalid(format!(
                "{} diagonals for a {n}-gon",
                self.diagonals.len()
            )));
        }
        let diags: Vec<&Edge> = self.diagonals.iter().collect();
        for (i, a) in diags.iter().enumerate() {
            for b in &diags[i + 1..] {
                let shared = a.0 == b.0 || a.0 == b.1 || a.1 == b.0 || a.1 == b.1;
                if !shared && in_open_arc(&b.0, &a.0, &a.1) != in_open_arc(&b.1, &a.0, &a.1) {
                    return Err(TessellationError::Invalid(format!(
                        "diagonals {}-{} and {}-{} cross",
                        a.0, a.1, b.0, b.1
                    )));
                }
            }
        }
        if self.triangles().len() != n - 2 {
            return Err(TessellationError::Invalid(
                "complement is not all triangles".into(),
            ));
        }
        if !self.contains_edge(&self.doe()) {
            return Err(TessellationError::Invalid("doe is not an edge".into()));
        }
        Ok(())
    }

    /// Whether `e` is an edge of the standard tessellation beyond a side.
    fn is_outer_standard_edge(&self, e: &Edge) -> bool {
        let Some(iv) = StdDyadicInterval::from_endpoints(&e.0, &e.1).or_else(|| {
            // an interval ending at 1 shows up as (0, a)
            if e.0.is_zero() {
                StdDyadicInterval::from_endpoints(&e.1, &DyadicRational::one())
            } else {
                None
            }
        }) else {
            return false;
        };
        self.frontier
            .intervals()
            .iter()
            .any(|side| side.contains_interval(&iv) && *side != iv)
    }

    /// The two apexes of the quadrilateral around diagonal `e`: the one in
    /// the clockwise arc `(e.0, e.1)` and the one in `(e.1, e.0)`.
    fn apexes(&self, e: &Edge) -> (Point, Point) {
        let edges = self.edge_set();
        let has = |a: &Point, b: &Point| edges.contains(&norm_edge(a, b));
        let verts = self.vertices();
        let find = |a: &Point, b: &Point| {
            verts
                .iter()
                .find(|v| in_open_arc(v, a, b) && has(a, v) && has(v, b))
                .cloned()
                .expect("triangulated window")
        };
        (find(&e.0, &e.1), find(&e.1, &e.0))
    }

    fn check_flippable(&self, e: &Edge) -> Result<(), TessellationError> {
        if self.diagonals.contains(e) {
            return Ok(());
        }
        let name = format!("{}-{}", e.0, e.1);
        if self.side_set().contains(e) || self.is_outer_standard_edge(e) {
            Err(TessellationError::BoundaryEdge(name))
        } else {
            Err(TessellationError::EdgeNotFound(name))
        }
    }

    /// Replace the diagonal `edge` by the opposite diagonal of its
    /// quadrilateral. Flipping the doe `p -> q` makes the new diagonal the doe,
    /// oriented from the apex in `(p, q)` to the apex in `(q, p)`: a clockwise
    /// quarter turn.
    pub fn flip(&self, edge: &Geodesic) -> Result<Self, TessellationError> {
        let e = edge.edge();
        self.check_flippable(&e)?;
        let (a, b) = self.apexes(&e);
        let mut t = self.clone();
        t.diagonals.remove(&e);
        t.diagonals.insert(norm_edge(&a, &b));
        if norm_edge(&self.doe.0, &self.doe.1) == e {
            let (p, q) = &self.doe;
            let (r, s) = if in_open_arc(&a, q, p) {
                (a, b)
            } else {
                (b, a)
            };
            let _ = p;
            t.doe = (s, r);
        }
        if let Some(h) = &mut t.history {
            h.push(e);
        }
        Ok(t)
    }

    pub fn apply_flips(&self, flips: &[Geodesic]) -> Result<Self, TessellationError> {
        let mut t = self.clone();
        for g in flips {
            t = t.flip(g)?;
        }
        Ok(t)
    }

    /// The same tessellation on a finer window.
    pub fn extend_to(&self, frontier: &DyadicPartition) -> Result<Self, TessellationError> {
        if !self.frontier.is_refined_by(frontier) {
            return Err(TessellationError::Invalid(format!(
                "{frontier} does not refine the window {}",
                self.frontier
            )));
        }
        let fine = TTree::from_partition(frontier)?;
        let mut diagonals = self.diagonals.clone();
        for side in self.frontier.intervals() {
            let sub = fine.subtree_at(&side).expect("refinement");
            if !sub.is_leaf() {
                diagonals.insert(geodesic_of(&side));
                let mut inner = Vec::new();
                collect_internal(sub, side.clone(), &mut inner);
                diagonals.extend(inner.iter().filter(|iv| **iv != side).map(geodesic_of));
            }
        }
        Ok(Self {
            frontier: frontier.clone(),
            diagonals,
            doe: self.doe.clone(),
            depth: self.depth.max(frontier.max_level().saturating_sub(2)),
            history: None,
        })
    }

    /// Equality as tessellations with doe, independent of the window.
    pub fn same_as(&self, other: &Self) -> bool {
        let common = common_refinement(&self.frontier, &other.frontier);
        match (self.extend_to(&common), other.extend_to(&common)) {
            (Ok(a), Ok(b)) => a.diagonals == b.diagonals && a.doe == b.doe,
            _ => false,
        }
    }

    pub fn to_json(&self) -> Value {
        let pair = |e: &Edge| json!([e.0.to_string(), e.1.to_string()]);
        let mut v = json!({
            "depth": self.depth,
            "frontier": self.frontier.to_string(),
            "doe": [self.doe.0.to_string(), self.doe.1.to_string()],
        });
        match &self.history {
            Some(h) => v["flips"] = Value::Array(h.iter().map(pair).collect()),
            None => v["diagonals"] = Value::Array(self.diagonals.iter().map(pair).collect()),
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self, TessellationError> {
        let bad = |m: &str| TessellationError::Parse(m.to_string());
        let point = |x: &Value| -> Result<Point, TessellationError> {
            Ok(x.as_str()
                .ok_or_else(|| bad("points are strings"))?
                .parse()?)
        };
        let pair = |x: &Value| -> Result<(Point, Point), TessellationError> {
            match x.as_array().map(|a| a.as_slice()) {
                Some([p, q]) => Ok((point(p)?, point(q)?)),
                _ => Err(bad("expected [p, q]")),
            }
        };
        let depth = v["depth"].as_u64().ok_or_else(|| bad("missing depth"))? as u32;
        let frontier = match v.get("frontier").and_then(|f| f.as_str()) {
            Some(s) => DyadicPartition::parse(s)?,
            None => DyadicPartition::uniform(depth + 2),
        };
        let doe = pair(&v["doe"])?;
        if let Some(flips) = v.get("flips").and_then(|f| f.as_array()) {
            let mut t = Self::standard_on(&frontier)?;
            t.depth = depth;
            for f in flips {
                let (p, q) = pair(f)?;
                t = t.flip(&Geodesic::unoriented(p, q)?)?;
            }
            if t.doe != (doe.0.mod_one(), doe.1.mod_one()) {
                return Err(TessellationError::Parse("replayed doe disagrees".into()));
            }
            Ok(t)
        } else {
            let diags = v["diagonals"]
                .as_array()
                .ok_or_else(|| bad("need flips or diagonals"))?
                .iter()
                .map(pair)
                .collect::<Result<Vec<_>, _>>()?;
            let mut t = Self::from_parts(frontier, diags, doe)?;
            t.depth = depth;
            Ok(t)
        }
    }
}

fn collect_internal(t: &TTree, at: StdDyadicInterval, out: &mut Vec<StdDyadicInterval>) {
    if let TTree::Node(l, r) = t {
        out.push(at.clone());
        collect_internal(l, at.left_child(), out);
        collect_internal(r, at.right_child(), out);
    }
}

pub fn standard_tessellation(depth: u32) -> Tessellation {
    Tessellation::standard(depth)
}

pub fn pachner_flip(t: &Tessellation, edge: &Geodesic) -> Result<Tessellation, TessellationError> {
    t.flip(edge)
}

/// Image of `t` under `f`: vertices, diagonals and doe are moved by `f`.
pub fn apply_element(t: &Tessellation, f: &TreeDiagram) -> Result<Tessellation, TessellationError> {
    apply_element_within(t, f, DEFAULT_LEVEL_LIMIT)
}

pub fn apply_element_within(
    t: &Tessellation,
    f: &TreeDiagram,
    level_limit: u32,
) -> Result<Tessellation, TessellationError> {
    let window = common_refinement(t.frontier(), &f.domain_tree().to_partition());
    let t2 = t.extend_to(&window)?;
    let map = thompson::to_pl_map(f);
    let img = |p: &Point| map.eval(p);
    let mut pts: Vec<Point> = t2.vertices().iter().map(img).collect();
    pts.sort();
    pts.push(DyadicRational::one());
    let frontier = DyadicPartition::from_breakpoints(pts)?;
    let level = frontier.max_level();
    if level > level_limit {
        return Err(TessellationError::DepthExceeded {
            level,
            limit: level_limit,
        });
    }
    let diagonals = t2
        .diagonals
        .iter()
        .map(|(p, q)| norm_edge(&img(p), &img(q)));
    let mut out = Tessellation::from_parts(frontier, diagonals, (img(&t2.doe.0), img(&t2.doe.1)))?;
    out.depth = t.depth.max(level.saturating_sub(2));
    Ok(out)
}

/// Compact window state for the flip search.
#[derive(Clone, PartialEq, Eq, Hash)]
struct SearchState {
    diagonals: Vec<(u16, u16)>,
    doe: (u16, u16),
}

struct Window {
    n: usize,
}

impl Window {
    #[allow(clippy::needless_range_loop)]
    fn adjacency(&self, s: &SearchState) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            let j = (i + 1) % n;
            adj[i][j] = true;
            adj[j][i] = true;
        }
        for &(a, b) in &s.diagonals {
            adj[a as usize][b as usize] = true;
            adj[b as usize][a as usize] = true;
        }
        adj
    }

    /// Apex strictly inside the clockwise index arc `(a, b)`.
    fn apex(&self, adj: &[Vec<bool>], a: usize, b: usize) -> usize {
        let mut k = (a + 1) % self.n;
        while k != b {
            if adj[a][k] && adj[k][b] {
                return k;
            }
            k = (k + 1) % self.n;
        }
        unreachable!("triangulated window")
    }

    fn flip(&self, s: &SearchState, adj: &[Vec<bool>], idx: usize) -> SearchState {
        let (a, b) = s.diagonals[idx];
        let (a, b) = (a as usize, b as usize);
        let x = self.apex(adj, a, b);
        let y = self.apex(adj, b, a);
        let mut diagonals = s.diagonals.clone();
        let new = (x.min(y) as u16, x.max(y) as u16);
        diagonals[idx] = new;
        diagonals.sort_unstable();
        let mut doe = s.doe;
        let (p, q) = (s.doe.0 as usize, s.doe.1 as usize);
        if (p.min(q), p.max(q)) == (a, b) {
            // apex in the clockwise arc (q, p) becomes the head
            let in_qp = |v: usize| {
                let mut k = (q + 1) % self.n;
                while k != p {
                    if k == v {
                        return true;
                    }
                    k = (k + 1) % self.n;
                }
                false
            };
            let (r, s2) = if in_qp(x) { (x, y) } else { (y, x) };
            doe = (s2 as u16, r as u16);
        }
        SearchState { diagonals, doe }
    }
}

fn encode(t: &Tessellation) -> Option<SearchState> {
    let verts = t.vertices();
    let index: HashMap<&Point, u16> = verts
        .iter()
        .enumerate()
        .map(|(i, v)| (v, i as u16))
        .collect();
    let mut diagonals: Vec<(u16, u16)> = t
        .diagonals
        .iter()
        .map(|(p, q)| (index[p], index[q]))
        .collect();
    diagonals.sort_unstable();
    Some(SearchState {
        diagonals,
        doe: (*index.get(&t.doe.0)?, *index.get(&t.doe.1)?),
    })
}

pub const DEFAULT_SEARCH_STATES: usize = 4_000_000;

/// Breadth-first search for the lexicographically least shortest flip
/// sequence taking `source` to `target` (same window). `None` if the search
/// exhausts `max_states`.
fn bfs_flips(source: &Tessellation, target: &Tessellation, max_states: usize) -> Option<Vec<Edge>> {
    let win = Window {
        n: source.frontier.len(),
    };
    let start = encode(source)?;
    let goal = encode(target)?;
    if start == goal {
        return Some(Vec::new());
    }
    let mut seen: HashMap<SearchState, (usize, (u16, u16))> = HashMap::new();
    let mut states: Vec<SearchState> = vec![start.clone()];
    seen.insert(start, (usize::MAX, (0, 0)));
    let mut queue = VecDeque::from([0usize]);
    while let Some(cur) = queue.pop_front() {
        let s = states[cur].clone();
        let adj = win.adjacency(&s);
        for idx in 0..s.diagonals.len() {
            let next = win.flip(&s, &adj, idx);
            if seen.contains_key(&next) {
                continue;
            }
            seen.insert(next.clone(), (cur, s.diagonals[idx]));
            if next == goal {
                let verts = source.vertices();
                let mut path = vec![s.diagonals[idx]];
                let mut at = cur;
                while seen[&states[at]].0 != usize::MAX {
                    let (parent, e) = seen[&states[at]];
                    path.push(e);
                    at = parent;
                }
                path.reverse();
                return Some(
                    path.into_iter()
                        .map(|(a, b)| (verts[a as usize].clone(), verts[b as usize].clone()))
                        .collect(),
                );
            }
            if states.len() >= max_states {
                return None;
            }
            states.push(next);
            queue.push_back(states.len() - 1);
        }
    }
    None
}

/// Outcome of [`flips_realizing`]: the window the flips act on and the flips.
#[derive(Debug, Clone)]
pub struct FlipRealization {
    pub window: DyadicPartition,
    pub flips: Vec<Geodesic>,
}

impl FlipRealization {
    /// Replays the flips on the standard tessellation over the window.
    pub fn apply(&self) -> Result<Tessellation, TessellationError> {
        Tessellation::standard_on(&self.window)?.apply_flips(&self.flips)
    }
}

/// A flip sequence turning the standard tessellation into its image under `f`.
///
/// The search window starts at the coarsest partition on which both the
/// standard tessellation and its image are represented, and is refined one
/// uniform level at a time up to level `depth + 2`.
pub fn flips_realizing(f: &TreeDiagram, depth: u32) -> Result<FlipRealization, TessellationError> {
    flips_realizing_with(f, depth, DEFAULT_SEARCH_STATES)
}

pub fn flips_realizing_with(
    f: &TreeDiagram,
    depth: u32,
    max_states: usize,
) -> Result<FlipRealization, TessellationError> {
    let base = common_refinement(
        &f.domain_tree().to_partition(),
        &DyadicPartition::uniform(2),
    );
    let tau = Tessellation::standard_on(&base)?;
    let image = apply_element(&tau, f)?;
    let mut window = common_refinement(&base, image.frontier());
    let limit = depth + 2;
    loop {
        let level = window.max_level();
        if level > limit {
            return Err(TessellationError::SearchExhausted(format!(
                "no flip sequence within level {limit}"
            )));
        }
        let source = Tessellation::standard_on(&window)?;
        let target = image.extend_to(&window)?;
        let doe_inside = target
            .diagonals
            .contains(&norm_edge(&target.doe.0, &target.doe.1));
        if doe_inside {
            if let Some(path) = bfs_flips(&source, &target, max_states) {
                let flips = path
                    .into_iter()
                    .map(|(p, q)| Geodesic::unoriented(p, q))
                    .collect::<Result<Vec<_>, _>>()?;
                return Ok(FlipRealization { window, flips });
            }
        }
        window = common_refinement(&window, &DyadicPartition::uniform(level + 1));
    }
}

/// A Farey label `num/den`; `1/0` is infinity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FareyLabel {
    pub num: BigInt,
    pub den: BigInt,
}

impl FareyLabel {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Self {
            num: num.into(),
            den: den.into(),
        }
    }

    pub fn infinity() -> Self {
        Self::new(1, 0)
    }

    fn mediant(&self, other: &Self) -> Self {
        Self {
            num: &self.num + &other.num,
            den: &self.den + &other.den,
        }
    }

    /// Reported form: `-1/0` is the same point as `1/0`.
    fn reported(self) -> Self {
        if self.den.is_zero() {
            Self::infinity()
        } else {
            self
        }
    }
}

impl fmt::Display for FareyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for FareyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for FareyLabel {
    type Err = TessellationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TessellationError::Parse(format!("bad label {s:?}"));
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let num: BigInt = n.trim().parse().map_err(|_| bad())?;
        let den: BigInt = d.trim().parse().map_err(|_| bad())?;
        if den.is_negative() {
            return Err(bad());
        }
        Ok(Self { num, den })
    }
}

/// Vertex labels by recursive mediants from the doe (`0/1 -> 1/0`).
#[derive(Clone, Debug, PartialEq)]
pub struct FareyLabeling {
    pub labels: BTreeMap<Point, FareyLabel>,
}

impl FareyLabeling {
    pub fn get(&self, p: &Point) -> Option<&FareyLabel> {
        self.labels.get(p)
    }

    pub fn vertex_of(&self, q: &FareyLabel) -> Option<&Point> {
        self.labels.iter().find(|(_, l)| *l == q).map(|(p, _)| p)
    }
}

pub fn farey_labels(t: &Tessellation) -> FareyLabeling {
    let edges = t.edge_set();
    let verts = t.vertices();
    let has = |a: &Point, b: &Point| edges.contains(&norm_edge(a, b));
    let (p, q) = t.doe.clone();
    // the right of p -> q is the clockwise arc (q, p), where infinity reads
    // 1/0; on the left it reads -1/0
    let mut labels: BTreeMap<Point, FareyLabel> = BTreeMap::new();
    labels.insert(p.clone(), FareyLabel::new(0, 1));
    let mut work: Vec<(Point, Point, FareyLabel, FareyLabel)> = vec![
        (
            q.clone(),
            p.clone(),
            FareyLabel::new(1, 0),
            FareyLabel::new(0, 1),
        ),
        (
            p.clone(),
            q.clone(),
            FareyLabel::new(0, 1),
            FareyLabel::new(-1, 0),
        ),
    ];
    while let Some((a, b, la, lb)) = work.pop() {
        // the triangle beyond (a, b) has its apex in the clockwise arc (a, b);
        // beyond a window side there is none
        let apex = verts
            .iter()
            .find(|v| in_open_arc(v, &a, &b) && has(&a, v) && has(v, &b))
            .cloned();
        let Some(c) = apex else {
            continue;
        };
        let lc = la.mediant(&lb);
        labels.entry(c.clone()).or_insert_with(|| lc.clone());
        work.push((a.clone(), c.clone(), la.clone(), lc.clone()));
        work.push((c, b, lc, lb));
    }
    let mut labels: BTreeMap<Point, FareyLabel> =
        labels.into_iter().map(|(k, v)| (k, v.reported())).collect();
    labels.insert(q, FareyLabel::infinity());
    FareyLabeling { labels }
}

/// The vertex that the recursive labelling assigns to the label `q`.
pub fn characteristic_map(t: &Tessellation, q: &FareyLabel) -> Result<Point, TessellationError> {
    farey_labels(t)
        .vertex_of(q)
        .cloned()
        .ok_or_else(|| TessellationError::LabelNotRepresented(q.to_string()))
}

/// A clockwise cycle of geodesics bounding a cutoff region.
#[derive(Clone, Debug, PartialEq)]
pub struct Cutoff {
    pub edges: Vec<Geodesic>,
}

impl Cutoff {
    pub fn from_partition(p: &DyadicPartition) -> Self {
        let edges = p
            .breakpoints()
            .windows(2)
            .map(|w| Geodesic::new(w[0].clone(), w[1].clone(), true).expect("side"))
            .collect();
        Self { edges }
    }

    pub fn from_edges(edges: Vec<Geodesic>) -> Result<Self, TessellationError> {
        let c = Self { edges };
        cutoff_to_partition(&c)?;
        Ok(c)
    }
}

/// The partition of the circle by the cutoff's geodesic endpoints.
pub fn cutoff_to_partition(c: &Cutoff) -> Result<DyadicPartition, TessellationError> {
    let n = c.edges.len();
    if n < 2 {
        return Err(TessellationError::InvalidCutoff(
            "need at least two geodesics".into(),
        ));
    }
    for i in 0..n {
        let (e, next) = (&c.edges[i], &c.edges[(i + 1) % n]);
        if e.q != next.p {
            return Err(TessellationError::InvalidCutoff(format!(
                "edges {e} and {next} do not chain"
            )));
        }
    }
    let mut pts: Vec<Point> = c.edges.iter().map(|e| e.p.clone()).collect();
    let start = pts
        .iter()
        .position(|x| x.is_zero())
        .ok_or_else(|| TessellationError::InvalidCutoff("cycle must pass through 0".into()))?;
    pts.rotate_left(start);
    if pts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TessellationError::InvalidCutoff(
            "cycle is not clockwise".into(),
        ));
    }
    pts.push(DyadicRational::one());
    DyadicPartition::from_breakpoints(pts)
        .map_err(|e| TessellationError::InvalidCutoff(e.to_string()))
}

const SIZE: f64 = 1000.0;
const CENTER: f64 = 500.0;
const RADIUS: f64 = 450.0;

fn disc_xy(t: f64) -> (f64, f64) {
    let a = 2.0 * PI * t;
    (CENTER + RADIUS * a.cos(), CENTER + RADIUS * a.sin())
}

/// SVG path of the geodesic between circle parameters `s` and `t`.
fn geodesic_path(s: f64, t: f64) -> String {
    let (x1, y1) = disc_xy(s);
    let (x2, y2) = disc_xy(t);
    let mut delta = (t - s).rem_euclid(1.0);
    if delta > 0.5 {
        delta = 1.0 - delta;
    }
    let half = PI * delta;
    if (0.5 - delta).abs() < 1e-12 {
        return format!("M {x1:.3} {y1:.3} L {x2:.3} {y2:.3}");
    }
    let r = RADIUS * half.tan();
    // centre of the orthogonal circle, on the bisecting ray
    let (a1, a2) = (2.0 * PI * s, 2.0 * PI * t);
    let (mx, my) = ((a1.cos() + a2.cos()) / 2.0, (a1.sin() + a2.sin()) / 2.0);
    let m = (mx * mx + my * my).sqrt();
    let dist = RADIUS / half.cos();
    let (cx, cy) = (CENTER + dist * mx / m, CENTER + dist * my / m);
    let cross = (x1 - cx) * (y2 - cy) - (y1 - cy) * (x2 - cx);
    let sweep = if cross > 0.0 { 1 } else { 0 };
    format!("M {x1:.3} {y1:.3} A {r:.3} {r:.3} 0 0 {sweep} {x2:.3} {y2:.3}")
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(
        out,
        "<circle class=\"disc\" cx=\"{CENTER}\" cy=\"{CENTER}\" r=\"{RADIUS}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>"
    );
}

fn svg_arrow_marker(out: &mut String) {
    out.push_str(
        "<defs><marker id=\"head\" markerWidth=\"10\" markerHeight=\"10\" refX=\"8\" refY=\"5\" orient=\"auto\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"red\"/></marker></defs>\n",
    );
}

/// Disc, every window edge as a geodesic arc, the doe arrow and optionally
/// the Farey labels.
pub fn render_tessellation(t: &Tessellation, with_labels: bool) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    svg_arrow_marker(&mut out);
    let doe = norm_edge(&t.doe.0, &t.doe.1);
    for (p, q) in t.edge_set() {
        if (p.clone(), q.clone()) == doe {
            continue;
        }
        let _ = writeln!(
            out,
            "<path class=\"edge\" d=\"{}\" fill=\"none\" stroke=\"#345\" stroke-width=\"1\"/>",
            geodesic_path(p.to_f64(), q.to_f64())
        );
    }
    let _ = writeln!(
        out,
        "<path class=\"doe\" d=\"{}\" fill=\"none\" stroke=\"red\" stroke-width=\"3\" marker-end=\"url(#head)\"/>",
        geodesic_path(t.doe.0.to_f64(), t.doe.1.to_f64())
    );
    if with_labels {
        for (p, l) in &farey_labels(t).labels {
            let a = 2.0 * PI * p.to_f64();
            let (x, y) = (CENTER + 475.0 * a.cos(), CENTER + 475.0 * a.sin());
            let _ = writeln!(
                out,
                "<text class=\"label\" x=\"{x:.3}\" y=\"{y:.3}\" font-size=\"10\" text-anchor=\"middle\">{l}</text>"
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_cutoff(c: &Cutoff) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    for e in &c.edges {
        let _ = writeln!(
            out,
            "<path class=\"cutoff\" d=\"{}\" fill=\"none\" stroke=\"#06c\" stroke-width=\"2\"/>",
            geodesic_path(e.p.to_f64(), e.q.to_f64())
        );
    }
    for e in &c.edges {
        let (x, y) = disc_xy(e.p.to_f64());
        let _ = writeln!(
            out,
            "<circle class=\"vertex\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"4\"/>"
        );
    }
    out.push_str("</svg>\n");
    out
}

fn layout_tree(t: &TTree, x0: f64, width: f64, top: f64, out: &mut String, marker: Option<usize>) {
    let n = t.leaf_count();
    let step = width / n as f64;
    let depth = t.depth().max(1) as f64;
    let dy = 300.0 / depth;
    fn walk(
        t: &TTree,
        first_leaf: usize,
        level: usize,
        ctx: &(f64, f64, f64, f64),
        out: &mut String,
        leaves: &mut Vec<(f64, f64)>,
    ) -> (f64, f64) {
        let (x0, step, top, dy) = *ctx;
        match t {
            TTree::Leaf => {
                let p = (x0 + step * (first_leaf as f64 + 0.5), top + 300.0 + 20.0);
                leaves.push(p);
                p
            }
            TTree::Node(l, r) => {
                let pl = walk(l, first_leaf, level + 1, ctx, out, leaves);
                let pr = walk(r, first_leaf + l.leaf_count(), level + 1, ctx, out, leaves);
                let p = ((pl.0 + pr.0) / 2.0, top + dy * level as f64);
                for c in [pl, pr] {
                    let _ = writeln!(
                        out,
                        "<line class=\"branch\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"black\"/>",
                        p.0, p.1, c.0, c.1
                    );
                }
                p
            }
        }
    }
    let mut leaves = Vec::new();
    let root = walk(t, 0, 0, &(x0, step, top, dy), out, &mut leaves);
    let _ = writeln!(
        out,
        "<line class=\"root\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"black\"/>",
        root.0,
        root.1 - 30.0,
        root.0,
        root.1
    );
    if let Some(m) = marker {
        let (x, y) = leaves[m];
        let _ = writeln!(
            out,
            "<circle class=\"marker\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"8\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>"
        );
    }
}

/// Domain tree on the left, range tree on the right, marker circled.
pub fn render_diagram(f: &TreeDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    layout_tree(f.domain_tree(), 40.0, 420.0, 300.0, &mut out, None);
    layout_tree(
        f.range_tree(),
        540.0,
        420.0,
        300.0,
        &mut out,
        Some(f.marker()),
    );
    out.push_str("</svg>\n");
    out
}
