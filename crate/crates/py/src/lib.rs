use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use holo::approximation::{self, CircleMap};
use holo::dyadic::DyadicRational;
use holo::semicontinuous::{self as sc, Route};
use holo::tensor;
use holo::tessellation;
use holo::thompson::{self, TreeDiagram};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An element of Thompson's group T as a reduced tree diagram.
#[pyclass(name = "Element", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyElement {
    inner: TreeDiagram,
}

#[pymethods]
impl PyElement {
    /// A word over A, B, C (lowercase for inverses) or `R|S@k` text.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let f = thompson::parse_element(text).map_err(err)?;
        Ok(Self {
            inner: thompson::reduce(&f),
        })
    }

    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: TreeDiagram::identity(),
        }
    }

    #[getter]
    fn marker(&self) -> usize {
        self.inner.marker()
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    fn is_identity(&self) -> bool {
        self.inner.is_identity()
    }

    fn is_in_f(&self) -> bool {
        self.inner.is_in_f()
    }

    fn inverse(&self) -> Self {
        Self {
            inner: thompson::inverse(&self.inner),
        }
    }

    /// `self ∘ other`.
    fn compose(&self, other: &PyElement) -> Self {
        Self {
            inner: thompson::compose(&self.inner, &other.inner),
        }
    }

    fn __mul__(&self, other: &PyElement) -> Self {
        self.compose(other)
    }

    /// Exact image of a dyadic point given as text, e.g. `"3/2^2"`.
    fn eval(&self, x: &str) -> PyResult<String> {
        let x: DyadicRational = x.parse().map_err(err)?;
        Ok(thompson::eval(&self.inner, &x).to_string())
    }

    fn __call__(&self, x: f64) -> f64 {
        approximation::eval_f64(&self.inner, x)
    }

    fn matrix_element(&self, tensor: &str, route: &str) -> PyResult<(f64, f64)> {
        let theory = sc::Theory::resolve(tensor).map_err(err)?;
        let route = match route {
            "action" => Route::Action,
            "diagram" => Route::Diagram,
            other => return Err(err(format!("unknown route {other:?}"))),
        };
        let z = sc::vacuum_matrix_element(&self.inner, &theory, route).map_err(err)?;
        Ok((z.re, z.im))
    }

    fn svg(&self) -> String {
        tessellation::render_diagram(&self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Element('{}')", self.inner)
    }
}

/// A window of an admissible tessellation with a distinguished oriented edge.
#[pyclass(name = "Tessellation", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTessellation {
    inner: tessellation::Tessellation,
}

#[pymethods]
impl PyTessellation {
    #[staticmethod]
    fn standard(depth: u32) -> Self {
        Self {
            inner: tessellation::Tessellation::standard(depth),
        }
    }

    #[getter]
    fn doe(&self) -> (String, String) {
        let g = self.inner.doe();
        (g.p.to_string(), g.q.to_string())
    }

    fn vertices(&self) -> Vec<String> {
        self.inner
            .vertices()
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn diagonals(&self) -> Vec<(String, String)> {
        self.inner
            .diagonals()
            .into_iter()
            .map(|g| (g.p.to_string(), g.q.to_string()))
            .collect()
    }

    /// Flip the diagonal `p -- q`.
    fn flip(&self, p: &str, q: &str) -> PyResult<Self> {
        let g =
            tessellation::Geodesic::unoriented(p.parse().map_err(err)?, q.parse().map_err(err)?)
                .map_err(err)?;
        Ok(Self {
            inner: self.inner.flip(&g).map_err(err)?,
        })
    }

    fn flip_doe(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.flip(&self.inner.doe()).map_err(err)?,
        })
    }

    fn apply(&self, f: &PyElement) -> PyResult<Self> {
        Ok(Self {
            inner: tessellation::apply_element(&self.inner, &f.inner).map_err(err)?,
        })
    }

    fn same_as(&self, other: &PyTessellation) -> bool {
        self.inner.same_as(&other.inner)
    }

    fn farey_labels(&self) -> Vec<(String, String)> {
        tessellation::farey_labels(&self.inner)
            .labels
            .iter()
            .map(|(v, l)| (v.to_string(), l.to_string()))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    #[pyo3(signature = (labels = false))]
    fn svg(&self, labels: bool) -> String {
        tessellation::render_tessellation(&self.inner, labels)
    }
}

/// Perfectness check; returns `(rotation_invariant, {|A|: constant})`.
#[pyfunction]
fn verify_tensor(name: &str) -> PyResult<(bool, Vec<(usize, f64)>)> {
    let t = tensor::resolve(name).map_err(err)?;
    let cert = tensor::verify_perfect(&t, 1e-12).map_err(err)?;
    Ok((
        cert.rotation_invariant,
        cert.constants_by_class().into_iter().collect(),
    ))
}

/// `<Omega| pi(f) |Omega>` as `(re, im)`.
#[pyfunction]
#[pyo3(signature = (word, tensor = "four-colour", route = "diagram"))]
fn vacuum_matrix_element(word: &str, tensor: &str, route: &str) -> PyResult<(f64, f64)> {
    PyElement::new(word)?.matrix_element(tensor, route)
}

/// The Gram matrix of `pi(w)|Omega>` over the given words, as nested lists of
/// `(re, im)` pairs.
#[pyfunction]
#[pyo3(signature = (words, tensor = "four-colour"))]
fn gram_matrix(words: Vec<String>, tensor: &str) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let theory = sc::Theory::resolve(tensor).map_err(err)?;
    let elems = words
        .iter()
        .map(|w| thompson::parse_element(w).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let g = sc::gram_matrix(&elems, &theory).map_err(err)?;
    Ok((0..g.nrows())
        .map(|i| {
            (0..g.ncols())
                .map(|j| (g[(i, j)].re, g[(i, j)].im))
                .collect()
        })
        .collect())
}

#[pyfunction]
fn reduced_words(max_len: usize) -> Vec<String> {
    thompson::reduced_words(max_len)
}

/// Flip sequence realizing `word` on the standard tessellation, as `(p, q)` pairs.
#[pyfunction]
#[pyo3(signature = (word, depth = 6))]
fn flips_realizing(word: &str, depth: u32) -> PyResult<Vec<(String, String)>> {
    let f = thompson::parse_element(word).map_err(err)?;
    let real = tessellation::flips_realizing(&f, depth).map_err(err)?;
    Ok(real
        .flips
        .iter()
        .map(|g| (g.p.to_string(), g.q.to_string()))
        .collect())
}

/// `(element text, sup error, number of ties)` for a named map at level `n`.
#[pyfunction]
fn approximate(map: &str, level: u32) -> PyResult<(String, f64, usize)> {
    let f = CircleMap::resolve(map).map_err(err)?;
    let r = approximation::approximate(&f, level).map_err(err)?;
    Ok((
        thompson::reduce(&r.element).to_string(),
        r.sup_error,
        r.ties.len(),
    ))
}

/// `(S(A), S(B), cut bonds)` of the two-sided ring state.
#[pyfunction]
#[pyo3(signature = (halfwidth, tensor = "four-colour"))]
fn btz_entropy(halfwidth: usize, tensor: &str) -> PyResult<(f64, f64, usize)> {
    let theory = sc::Theory::resolve(tensor).map_err(err)?;
    let s = sc::btz_state(halfwidth, &theory).map_err(err)?;
    Ok((
        s.entropy_a().map_err(err)?,
        s.entropy_b().map_err(err)?,
        s.cut_bonds,
    ))
}

#[pymodule]
fn thompson_holo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyElement>()?;
    m.add_class::<PyTessellation>()?;
    m.add_function(wrap_pyfunction!(verify_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(vacuum_matrix_element, m)?)?;
    m.add_function(wrap_pyfunction!(gram_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_words, m)?)?;
    m.add_function(wrap_pyfunction!(flips_realizing, m)?)?;
    m.add_function(wrap_pyfunction!(approximate, m)?)?;
    m.add_function(wrap_pyfunction!(btz_entropy, m)?)?;
    Ok(())
}
