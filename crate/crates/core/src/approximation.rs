//! Approximating an orientation-preserving circle diffeomorphism by elements
//! of T through greedy subdivision of the range.
//!
//! At level `n` the domain is the uniform partition into `2^n` intervals and
//! the image points are `a_j = f(j / 2^n)`. Starting from the whole circle,
//! the range interval holding the most image points is halved until there are
//! `2^n` intervals. Intervals are half-open, ties go to the leftmost interval
//! and intervals holding no image point may still be split. The approximant
//! sends domain interval `j` affinely onto range interval `m + j`, where `m`
//! is the range interval containing `f(0)`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::dyadic::{DyadicError, DyadicPartition, DyadicRational, StdDyadicInterval, TTree};
use crate::thompson::{self, ThompsonError, TreeDiagram};

/// Grid size of the monotonicity pre-check.
pub const CHECK_POINTS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproximationError {
    #[error("NotMonotone: {0}")]
    NotMonotone(String),
    #[error("DegenerateImage: {0}")]
    DegenerateImage(String),
    #[error("InvalidLevel: level must be between 1 and 24, got {0}")]
    InvalidLevel(u32),
    #[error("Parse: {0}")]
    Parse(String),
    #[error("Io: {0}")]
    Io(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Thompson(#[from] ThompsonError),
}

type MapFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A sampled map of the circle `[0, 1)` to itself.
#[derive(Clone)]
pub struct CircleMap {
    name: String,
    f: Arc<MapFn>,
}

impl fmt::Debug for CircleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleMap")
            .field("name", &self.name)
            .finish()
    }
}

impl CircleMap {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The value at `x`, reduced mod 1.
    pub fn eval(&self, x: f64) -> f64 {
        wrap((self.f)(x.rem_euclid(1.0)))
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x)
    }

    pub fn rotation(by: &DyadicRational) -> Self {
        let r = by.mod_one().to_f64();
        Self::new(format!("rotation:{by}"), move |x| x + r)
    }

    /// The boundary action of the disc automorphism `z -> (z - w)/(1 - conj(w) z)`
    /// with `w = a + ib`, in the angle parameter `t = arg(z) / 2 pi`.
    pub fn mobius(a: f64, b: f64) -> Result<Self, ApproximationError> {
        let w = Complex64::new(a, b);
        if w.norm().is_nan() || w.norm() >= 1.0 {
            return Err(ApproximationError::Parse(format!(
                "mobius parameter {a},{b} must lie inside the unit disc"
            )));
        }
        let tau = std::f64::consts::TAU;
        Ok(Self::new(format!("mobius:{a},{b}"), move |t| {
            let z = Complex64::from_polar(1.0, tau * t);
            let img = (z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z);
            img.arg() / tau
        }))
    }

    /// Linear interpolation through `(x, f(x))` samples, closed up around the
    /// circle.
    pub fn tabulated(
        name: impl Into<String>,
        points: &[(f64, f64)],
    ) -> Result<Self, ApproximationError> {
        if points.len() < 2 {
            return Err(ApproximationError::Parse(
                "a tabulated map needs at least two points".into(),
            ));
        }
        let mut xs = Vec::with_capacity(points.len() + 1);
        let mut ys = Vec::with_capacity(points.len() + 1);
        for &(x, y) in points {
            if !(0.0..1.0).contains(&x) || !y.is_finite() {
                return Err(ApproximationError::Parse(format!(
                    "sample ({x}, {y}) outside [0, 1)"
                )));
            }
            if let Some(&last) = xs.last() {
                if x <= last {
                    return Err(ApproximationError::Parse(
                        "sample abscissae must increase".into(),
                    ));
                }
            }
            // Lift the values so that they increase.
            let mut y = wrap(y);
            if let Some(&prev) = ys.last() {
                while y <= prev {
                    y += 1.0;
                }
            }
            xs.push(x);
            ys.push(y);
        }
        xs.push(xs[0] + 1.0);
        ys.push(ys[0] + 1.0);
        if ys[ys.len() - 2] >= ys[ys.len() - 1] {
            return Err(ApproximationError::NotMonotone(
                "tabulated samples wind more than once".into(),
            ));
        }
        Ok(Self::new(name, move |x| {
            let x = if x < xs[0] { x + 1.0 } else { x };
            let j = xs.partition_point(|&b| b <= x).clamp(1, xs.len() - 1) - 1;
            let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
            ys[j] + t * (ys[j + 1] - ys[j])
        }))
    }

    /// Reads `x f(x)` lines; blank lines and `#` comments are skipped.
    pub fn load(path: &Path) -> Result<Self, ApproximationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ApproximationError::Io(format!("{}: {e}", path.display())))?;
        let mut points = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| ApproximationError::Parse(format!("line {}: {e}", k + 1)))?;
            if nums.len() != 2 {
                return Err(ApproximationError::Parse(format!(
                    "line {}: expected two numbers",
                    k + 1
                )));
            }
            points.push((nums[0], nums[1]));
        }
        Self::tabulated(path.display().to_string(), &points)
    }

    /// `identity`, `rotation:<dyadic>`, `mobius:<a>,<b>` or a file path.
    pub fn resolve(desc: &str) -> Result<Self, ApproximationError> {
        let desc = desc.trim();
        if desc == "identity" {
            return Ok(Self::identity());
        }
        if let Some(r) = desc.strip_prefix("rotation:") {
            return Ok(Self::rotation(&r.parse()?));
        }
        if let Some(p) = desc.strip_prefix("mobius:") {
            let (a, b) = p.split_once(',').ok_or_else(|| {
                ApproximationError::Parse(format!("expected mobius:a,b, got {desc:?}"))
            })?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| ApproximationError::Parse(format!("{s:?}: {e}")))
            };
            return Self::mobius(parse(a)?, parse(b)?);
        }
        let path = Path::new(desc);
        if path.exists() {
            return Self::load(path);
        }
        Err(ApproximationError::Parse(format!(
            "unknown map {desc:?}; expected identity, rotation:p/2^n, mobius:a,b or a file"
        )))
    }

    /// Checks that the map is strictly increasing mod 1 with degree one on a
    /// grid of `points` samples.
    pub fn check(&self, points: usize) -> Result<(), ApproximationError> {
        let ys: Vec<f64> = (0..points)
            .map(|k| self.eval(k as f64 / points as f64))
            .collect();
        check_samples(&ys)
    }
}

fn wrap(y: f64) -> f64 {
    let r = y.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Forward circle step from `a` to `b`, in `[0, 1)`.
fn step(a: f64, b: f64) -> f64 {
    wrap(b - a)
}

fn check_samples(ys: &[f64]) -> Result<(), ApproximationError> {
    let n = ys.len();
    let mut total = 0.0;
    for k in 0..n {
        let s = step(ys[k], ys[(k + 1) % n]);
        if s <= 1e-15 {
            return Err(ApproximationError::DegenerateImage(format!(
                "samples {k} and {} have the same image {}",
                (k + 1) % n,
                ys[k]
            )));
        }
        total += s;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(ApproximationError::NotMonotone(format!(
            "samples wind {total:.6} times around the circle"
        )));
    }
    Ok(())
}

/// A greedy step at which several intervals shared the largest count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieEvent {
    /// Number of intervals before the split.
    pub step: usize,
    pub count: usize,
    pub candidates: Vec<StdDyadicInterval>,
    pub chosen: StdDyadicInterval,
}

impl fmt::Display for TieEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |iv: &StdDyadicInterval| format!("[{}, {}]", iv.left(), iv.right());
        let cands: Vec<String> = self.candidates.iter().map(show).collect();
        write!(
            f,
            "step {}: count {} shared by {}; chose {}",
            self.step,
            self.count,
            cands.join(" "),
            show(&self.chosen)
        )
    }
}

#[derive(Debug, Clone)]
pub struct ApproximationResult {
    pub element: TreeDiagram,
    pub n: u32,
    pub sup_error: f64,
    pub domain_partition: DyadicPartition,
    pub range_partition: DyadicPartition,
    /// Index of the range interval containing `f(0)`.
    pub marker_interval: usize,
    /// Image points `f(j / 2^n)`.
    pub image_points: Vec<f64>,
    pub ties: Vec<TieEvent>,
}

struct Greedy {
    range: Vec<StdDyadicInterval>,
    ties: Vec<TieEvent>,
}

fn count_in(sorted: &[f64], iv: &StdDyadicInterval) -> usize {
    let (l, r) = (iv.left().to_f64(), iv.right().to_f64());
    sorted.partition_point(|&y| y < r) - sorted.partition_point(|&y| y < l)
}

fn greedy(points: &[f64], pieces: usize) -> Greedy {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut range = vec![StdDyadicInterval::unit()];
    let mut counts = vec![sorted.len()];
    let mut ties = Vec::new();
    while range.len() < pieces {
        let max = *counts.iter().max().expect("nonempty");
        let cands: Vec<usize> = (0..range.len()).filter(|&i| counts[i] == max).collect();
        let k = cands[0];
        if cands.len() > 1 {
            ties.push(TieEvent {
                step: range.len(),
                count: max,
                candidates: cands.iter().map(|&i| range[i].clone()).collect(),
                chosen: range[k].clone(),
            });
        }
        let (l, r) = (range[k].left_child(), range[k].right_child());
        let (cl, cr) = (count_in(&sorted, &l), count_in(&sorted, &r));
        range.splice(k..=k, [l, r]);
        counts.splice(k..=k, [cl, cr]);
    }
    Greedy { range, ties }
}

fn image_points(f: &CircleMap, n: u32) -> Vec<f64> {
    let m = 1usize << n;
    (0..m).map(|j| f.eval(j as f64 / m as f64)).collect()
}

fn validate(f: &CircleMap, n: u32) -> Result<Vec<f64>, ApproximationError> {
    if n == 0 || n > 24 {
        return Err(ApproximationError::InvalidLevel(n));
    }
    f.check(CHECK_POINTS)?;
    let pts = image_points(f, n);
    check_samples(&pts)?;
    Ok(pts)
}

/// The level-`n` approximant `g_n`.
pub fn approximate(f: &CircleMap, n: u32) -> Result<ApproximationResult, ApproximationError> {
    let pts = validate(f, n)?;
    let pieces = 1usize << n;
    let Greedy { range, ties } = greedy(&pts, pieces);
    let a0 = pts[0];
    let marker = range
        .iter()
        .position(|iv| iv.left().to_f64() <= a0 && a0 < iv.right().to_f64())
        .expect("the range intervals cover [0, 1)");
    let domain_partition = DyadicPartition::uniform(n);
    let range_partition = DyadicPartition::from_intervals(&range)?;
    let element = TreeDiagram::new(
        TTree::complete(n),
        TTree::from_partition(&range_partition)?,
        marker,
    )?;
    let samples = CHECK_POINTS.max(pieces << 4);
    let sup_error = sup_norm_error(f, &element, samples);
    Ok(ApproximationResult {
        element,
        n,
        sup_error,
        domain_partition,
        range_partition,
        marker_interval: marker,
        image_points: pts,
        ties,
    })
}

/// Every greedy step that had to break a tie, in order.
pub fn tie_break_report(f: &CircleMap, n: u32) -> Result<Vec<TieEvent>, ApproximationError> {
    let pts = validate(f, n)?;
    Ok(greedy(&pts, 1usize << n).ties)
}

/// Evaluates a T element in floating point.
pub fn eval_f64(g: &TreeDiagram, x: f64) -> f64 {
    let pl = thompson::to_pl_map(g);
    eval_pl(&pl, x)
}

fn eval_pl(pl: &thompson::PLMap, x: f64) -> f64 {
    let x = wrap(x);
    let j = pl.breakpoints.partition_point(|(b, _)| b.to_f64() <= x) - 1;
    let (x0, y0) = &pl.breakpoints[j];
    wrap(y0.to_f64() + (x - x0.to_f64()) * 2f64.powi(pl.slope_exponents[j] as i32))
}

/// Largest circle distance between `f` and `g` over `samples` grid points
/// and the breakpoints of `g`.
pub fn sup_norm_error(f: &CircleMap, g: &TreeDiagram, samples: usize) -> f64 {
    let pl = thompson::to_pl_map(g);
    let dist = |x: f64| {
        let d = (f.eval(x) - eval_pl(&pl, x)).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    let grid = (0..samples).map(|k| k as f64 / samples as f64);
    let breaks = pl.breakpoints.iter().map(|(x, _)| x.to_f64());
    grid.chain(breaks).map(dist).fold(0.0, f64::max)
}

/// Sup errors at each level of `levels`.
pub fn error_series(
    f: &CircleMap,
    levels: impl IntoIterator<Item = u32>,
) -> Result<Vec<(u32, f64)>, ApproximationError> {
    levels
        .into_iter()
        .map(|n| approximate(f, n).map(|r| (n, r.sup_error)))
        .collect()
}

/// Consecutive levels at which the error grew.
pub fn monotonicity_violations(series: &[(u32, f64)]) -> Vec<(u32, u32)> {
    series
        .windows(2)
        .filter(|w| w[1].1 > w[0].1)
        .map(|w| (w[0].0, w[1].0))
        .collect()
}
