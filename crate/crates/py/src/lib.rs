//! Python bindings: datasets, density fitting, sampling and the simulators.

use std::path::PathBuf;

use arf_core::evalbench::discriminator_score as discriminate;
use arf_core::model_file::ModelFile;
use arf_core::simgen::{gen_shape, gen_toeplitz_gaussian, gen_toeplitz_with_target, ShapeName, ShapeSpec, ToeplitzSpec};
use arf_core::tabular::{load_csv, save_csv};
use arf_core::{
    arf_fit, conditional_sample, forde_fit, nll, with_threads, ArfConfig, Column, Error, Evidence, FordeConfig,
    ForestConfig, Reweighting, Schema,
};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Runs `f` on a pool of `threads` workers, or the global pool when `None`.
fn pooled<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => with_threads(t, f),
        None => f(),
    }
}

/// A table of continuous and categorical columns. Categorical cells are
/// exposed as integer level codes; `levels(j)` maps them back to labels.
#[pyclass(name = "Dataset", module = "pyarf", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    pub inner: arf_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a table from row-major values. Columns named in `categorical`
    /// take their level labels from the mapping and expect integer codes.
    #[new]
    #[pyo3(signature = (rows, names, categorical = None))]
    fn new(rows: Vec<Vec<f64>>, names: Vec<String>, categorical: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let levels: Option<Vec<String>> = match categorical {
                Some(map) => map.get_item(&name)?.map(|v| v.extract()).transpose()?,
                None => None,
            };
            columns.push(match levels {
                Some(levels) => Column::categorical(name, levels),
                None => Column::continuous(name),
            });
        }
        let schema = Schema::new(columns).map_err(to_py)?;
        let inner = arf_core::Dataset::from_rows(schema, &rows).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: load_csv(path, None).map_err(to_py)? })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        save_csv(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.schema().names().map(str::to_owned).collect()
    }

    /// Level labels of column `j`, or `None` for a continuous column.
    fn levels(&self, j: usize) -> PyResult<Option<Vec<String>>> {
        self.check_col(j)?;
        Ok(self.inner.schema().column(j).levels().map(<[String]>::to_vec))
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        self.check_col(j)?;
        Ok(self.inner.column(j))
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n_rows={}, names={:?})", self.inner.n_rows(), self.names())
    }
}

impl PyDataset {
    fn check_col(&self, j: usize) -> PyResult<()> {
        if j >= self.inner.n_cols() {
            return Err(PyValueError::new_err(format!("column {j} out of range")));
        }
        Ok(())
    }
}

/// A fitted density: adversarial forest partitions with per-leaf
/// distributions.
#[pyclass(name = "FordeModel", module = "pyarf", frozen)]
pub struct PyFordeModel {
    pub file: ModelFile,
}

#[pymethods]
impl PyFordeModel {
    #[staticmethod]
    #[pyo3(signature = (data, num_trees = 100, min_node_size = 2, delta = 0.0, max_iters = 10, seed = 0, threads = None))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        py: Python<'_>,
        data: &PyDataset,
        num_trees: usize,
        min_node_size: usize,
        delta: f64,
        max_iters: usize,
        seed: u64,
        threads: Option<usize>,
    ) -> PyResult<Self> {
        let defaults = ArfConfig::default();
        let cfg = ArfConfig {
            forest: ForestConfig { num_trees, min_node_size, ..defaults.forest },
            delta,
            max_iters,
            seed,
        };
        let ds = &data.inner;
        let file = py
            .detach(|| {
                pooled(threads, || {
                    let arf = arf_fit(ds, &cfg)?;
                    let model = forde_fit(&arf, ds, &FordeConfig::default())?;
                    Ok(ModelFile::new(&arf, model))
                })
            })
            .map_err(to_py)?;
        Ok(PyFordeModel { file })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyFordeModel { file: ModelFile::load(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.file.save(path).map_err(to_py)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.file.fit.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.file.fit.iterations_run
    }

    /// Out-of-bag accuracy of each forest trained, initial forest first.
    #[getter]
    fn trace(&self) -> Vec<f64> {
        self.file.fit.trace.clone()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.file.model.schema.names().map(str::to_owned).collect()
    }

    fn log_density(&self, row: Vec<f64>) -> PyResult<f64> {
        if row.len() != self.file.model.schema.len() {
            return Err(PyValueError::new_err(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.file.model.schema.len()
            )));
        }
        Ok(self.file.model.log_density(&row))
    }

    fn log_density_all(&self, py: Python<'_>, data: &PyDataset) -> PyResult<Vec<f64>> {
        if data.inner.schema() != &self.file.model.schema {
            return Err(PyValueError::new_err("dataset schema differs from the model's"));
        }
        Ok(py.detach(|| self.file.model.log_density_all(&data.inner)))
    }

    /// Mean negative log-likelihood in nats, with its standard error and
    /// the indices of rows given zero density.
    fn nll<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
        let report = py.detach(|| nll(&self.file.model, &data.inner)).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("mean", report.mean)?;
        out.set_item("std_error", report.std_error)?;
        out.set_item("n_rows", report.n_rows)?;
        out.set_item("n_scored", report.n_scored)?;
        out.set_item("zero_density_rows", report.zero_density_rows)?;
        Ok(out)
    }

    /// Draws `n` synthetic rows. `evidence` uses the CLI syntax, e.g.
    /// `"x1=0:1;class=a|b"`; `reweighting` is `"coverage"` or `"exact-bayes"`.
    #[pyo3(signature = (n, seed = 0, evidence = None, reweighting = "coverage", threads = None))]
    fn sample(
        &self,
        py: Python<'_>,
        n: usize,
        seed: u64,
        evidence: Option<&str>,
        reweighting: &str,
        threads: Option<usize>,
    ) -> PyResult<PyDataset> {
        let model = &self.file.model;
        let evidence = match evidence {
            Some(text) => Evidence::parse(text, &model.schema).map_err(to_py)?,
            None => Evidence::default(),
        };
        let mode = match reweighting {
            "coverage" => Reweighting::Coverage,
            "exact-bayes" => Reweighting::ExactBayes,
            other => return Err(PyValueError::new_err(format!("unknown reweighting {other:?}"))),
        };
        let inner = py
            .detach(|| pooled(threads, || conditional_sample(model, &evidence, n, seed, mode)))
            .map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.file.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyFordeModel { file: ModelFile::from_json(text).map_err(to_py)? })
    }
}

/// Zero-mean Gaussian rows with covariance `rho^|i-j|`. With `informative`
/// set, a binary target column `y` follows a sparse logistic model.
#[pyfunction]
#[pyo3(signature = (n, d, rho, seed = 0, informative = None))]
fn simulate_toeplitz(n: usize, d: usize, rho: f64, seed: u64, informative: Option<f64>) -> PyResult<PyDataset> {
    let spec = ToeplitzSpec { n, d, rho, seed };
    let inner = match informative {
        Some(frac) => gen_toeplitz_with_target(&spec, frac),
        None => gen_toeplitz_gaussian(&spec),
    }
    .map_err(to_py)?;
    Ok(PyDataset { inner })
}

/// One of the labelled 2-D shapes: `cassini`, `shapes`, `smiley`, `twomoons`.
#[pyfunction]
#[pyo3(signature = (name, n, seed = 0))]
fn simulate_shape(name: &str, n: usize, seed: u64) -> PyResult<PyDataset> {
    let name: ShapeName = name.parse().map_err(to_py)?;
    Ok(PyDataset { inner: gen_shape(&ShapeSpec { name, n, seed }).map_err(to_py)? })
}

/// Held-out accuracy of a forest telling `real` rows from `synthetic` ones.
#[pyfunction]
#[pyo3(signature = (real, synthetic, seed = 0))]
fn discriminator_score(py: Python<'_>, real: &PyDataset, synthetic: &PyDataset, seed: u64) -> PyResult<f64> {
    py.detach(|| discriminate(&real.inner, &synthetic.inner, &ForestConfig::default(), seed)).map_err(to_py)
}

#[pymodule]
pub fn pyarf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFordeModel>()?;
    m.add_function(wrap_pyfunction!(simulate_toeplitz, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_shape, m)?)?;
    m.add_function(wrap_pyfunction!(discriminator_score, m)?)?;
    Ok(())
}
