//! Python bindings for `limclust`.
//!
//! Reports cross the boundary as plain dicts and lists, built from the same JSON
//! the command-line tool writes.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use limclust::config::Config as CoreConfig;
use limclust::generators::{families as core_families, Family};
use limclust::globular::{cluster_sequence, ClusteringResult, Status};
use limclust::logic::is_strongly_local;
use limclust::sequences::StructureSequence;
use limclust::spectrum::detect_spectrum;
use limclust::structure::{parse_structure_json, structure_to_json};

create_exception!(limclust, LimclustError, PyException);

fn err(e: limclust::Error) -> PyErr {
    match e {
        limclust::Error::File { .. } | limclust::Error::Io(_) => PyOSError::new_err(e.to_string()),
        limclust::Error::Input(_) | limclust::Error::Parse { .. } | limclust::Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => LimclustError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| LimclustError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Finite structure with a vertex probability measure.
#[pyclass(frozen, from_py_object, module = "limclust")]
#[derive(Clone)]
struct Structure(Arc<limclust::Structure>);

#[pymethods]
impl Structure {
    /// Graph on `n` vertices; weights default to uniform and are normalized.
    #[new]
    #[pyo3(signature = (n, edges, weights=None))]
    fn new(n: usize, edges: Vec<(usize, usize)>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let w = weights.unwrap_or_else(|| limclust::Structure::uniform_weights(n));
        limclust::Structure::from_edges(n, &edges, w).map(|s| Structure(Arc::new(s))).map_err(err)
    }

    /// Parses a structure document (a dict or a JSON string).
    #[staticmethod]
    fn from_json(doc: &Bound<'_, PyAny>) -> PyResult<Self> {
        let value = match doc.extract::<String>() {
            Ok(text) => serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?,
            Err(_) => from_py(doc)?,
        };
        parse_structure_json(&value).map(|s| Structure(Arc::new(s))).map_err(err)
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &structure_to_json(&self.0))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Structure(vertices={}, edges={})", self.0.len(), self.0.edge_count())
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<u32>> {
        self.0.check_vertex(v).map_err(err)?;
        Ok(self.0.neighbors(v).to_vec())
    }

    fn distance(&self, u: usize, v: usize) -> PyResult<Option<u32>> {
        self.0.check_vertex(u).and_then(|_| self.0.check_vertex(v)).map_err(err)?;
        Ok(self.0.distance(u, v))
    }

    /// Vertices within `radius` of `ids`; `None` means the union of their components.
    #[pyo3(signature = (ids, radius=None))]
    fn ball(&self, ids: Vec<usize>, radius: Option<u32>) -> PyResult<Vec<usize>> {
        let set = self.0.vertex_set(ids).map_err(err)?;
        self.0.ball(&set, radius).map(|b| b.to_vec()).map_err(err)
    }

    fn measure(&self, ids: Vec<usize>) -> PyResult<f64> {
        let set = self.0.vertex_set(ids).map_err(err)?;
        Ok(self.0.measure(&set))
    }

    fn pairing(&self, formula: &Formula) -> PyResult<f64> {
        limclust::stone_pairing(&formula.0, &self.0).map_err(err)
    }
}

/// First-order formula over the structure's signature.
#[pyclass(frozen, module = "limclust")]
struct Formula(limclust::Formula);

#[pymethods]
impl Formula {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        limclust::parse_formula(text).map(Formula).map_err(err)
    }

    #[getter]
    fn arity(&self) -> usize {
        self.0.arity()
    }

    #[getter]
    fn strongly_local(&self) -> bool {
        is_strongly_local(&self.0)
    }

    /// Probability that a tuple drawn from the vertex measure satisfies the formula.
    fn pairing(&self, structure: &Structure) -> PyResult<f64> {
        limclust::stone_pairing(&self.0, &structure.0).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", self.0.to_string())
    }
}

/// Run parameters; keyword arguments override the defaults.
#[pyclass(skip_from_py_object, module = "limclust")]
#[derive(Clone, Default)]
struct Config(CoreConfig);

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut cfg = Config::default();
        if let Some(items) = overrides {
            for (key, value) in items.iter() {
                cfg.set(&key.extract::<String>()?, &value)?;
            }
        }
        Ok(cfg)
    }

    /// Sets one key; lists such as `d_schedule` are accepted as Python lists.
    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let text = match value.extract::<Vec<u32>>() {
            Ok(list) => list.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
            Err(_) => value.str()?.to_string(),
        };
        self.0.set(key, &text).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }
}

/// Indexed sequence of structures, built lazily and cached.
#[pyclass(frozen, module = "limclust")]
struct Sequence(StructureSequence);

#[pymethods]
impl Sequence {
    /// A generated family over the indices `start..=end`.
    #[staticmethod]
    #[pyo3(signature = (family, start, end, params=None))]
    fn generated(family: &str, start: usize, end: usize, params: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let params = match params {
            Some(p) => from_py(p)?,
            None => serde_json::json!({}),
        };
        let family = Family::from_parts(family, &params).map_err(err)?;
        StructureSequence::from_generator(family, start, end).map(Sequence).map_err(err)
    }

    #[staticmethod]
    fn from_manifest(path: PathBuf) -> PyResult<Self> {
        StructureSequence::from_manifest(path).map(Sequence).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (structures, start=1))]
    fn from_structures(structures: Vec<Structure>, start: usize) -> PyResult<Self> {
        let owned = structures.into_iter().map(|s| Arc::unwrap_or_clone(s.0)).collect();
        StructureSequence::from_structures(owned, start).map(Sequence).map_err(err)
    }

    #[getter]
    fn indices(&self) -> Vec<usize> {
        self.0.indices().collect()
    }

    fn __getitem__(&self, n: usize) -> PyResult<Structure> {
        if !self.0.indices().any(|i| i == n) {
            return Err(PyIndexError::new_err(format!("index {n} is outside the sequence")));
        }
        self.0.get(n).map(Structure).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.indices().count()
    }
}

/// Labels of every vertex at every index, with the marks they refer to.
#[pyclass(frozen, module = "limclust")]
struct Clustering(ClusteringResult);

#[pymethods]
impl Clustering {
    #[getter]
    fn verified(&self) -> bool {
        self.0.status == Status::Verified
    }

    #[getter]
    fn marks(&self) -> Vec<String> {
        self.0.marks.iter().map(|m| m.name.clone()).collect()
    }

    #[getter]
    fn indices(&self) -> Vec<usize> {
        self.0.indices.clone()
    }

    /// Mark id of each vertex at index `n`; ids index into `marks`.
    fn labels(&self, n: usize) -> PyResult<Vec<u32>> {
        self.0.labels_at(n).map(<[u32]>::to_vec).map_err(err)
    }

    fn residual(&self, n: usize) -> PyResult<Vec<usize>> {
        self.0.residual(n).map(|s| s.to_vec()).map_err(err)
    }

    fn separator(&self, n: usize) -> PyResult<Vec<usize>> {
        self.0.separator(n).map(|s| s.to_vec()).map_err(err)
    }

    /// `(clusters, residual, separator)` measures at index `n`.
    fn mass_split(&self, n: usize) -> PyResult<(f64, f64, f64)> {
        self.0.mass_split(n).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }
}

fn config_or_default(config: Option<&Config>) -> CoreConfig {
    config.map(|c| c.0.clone()).unwrap_or_default()
}

/// Estimates the limit spectrum from the tail of a sequence.
#[pyfunction]
#[pyo3(signature = (seq, config=None))]
fn spectrum<'py>(py: Python<'py>, seq: &Sequence, config: Option<&Config>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_or_default(config);
    let report = py.detach(|| detect_spectrum(&seq.0, &cfg)).map_err(err)?;
    to_py(py, &report)
}

/// Detects the spectrum and extracts the clustering it supports.
#[pyfunction]
#[pyo3(signature = (seq, config=None))]
fn cluster(py: Python<'_>, seq: &Sequence, config: Option<&Config>) -> PyResult<Clustering> {
    let cfg = config_or_default(config);
    let result = py.detach(|| {
        let report = detect_spectrum(&seq.0, &cfg)?;
        cluster_sequence(&seq.0, &report, &cfg)
    });
    result.map(Clustering).map_err(err)
}

/// The generator families with their parameters.
#[pyfunction]
fn families(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &core_families())
}

#[pymodule(name = "limclust")]
fn limclust_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LimclustError", m.py().get_type::<LimclustError>())?;
    m.add_class::<Structure>()?;
    m.add_class::<Formula>()?;
    m.add_class::<Config>()?;
    m.add_class::<Sequence>()?;
    m.add_class::<Clustering>()?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(families, m)?)?;
    Ok(())
}
