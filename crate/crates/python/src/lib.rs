//! Python bindings for `implicit_nade`.
//!
//! Vectors cross the boundary as plain lists. Long-running calls (training,
//! evaluation) release the GIL.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use implicit_nade::data::feedback_rows;
use implicit_nade::eval;
use implicit_nade::imf::{self, ImfConfig};
use implicit_nade::persist;
use implicit_nade::synth::{self, SynthConfig};
use implicit_nade::{data, train, Activation, Error, EvalOptions, ItemOrdering, LogFormat, TrainConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn open(path: &str) -> PyResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
}

fn create(path: &str) -> PyResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
}

/// Raw watch counts keyed by user and item id.
#[pyclass(name = "InteractionTable", module = "implicit_nade_py", skip_from_py_object)]
#[derive(Clone)]
struct PyInteractionTable {
    inner: data::InteractionTable,
}

#[pymethods]
impl PyInteractionTable {
    #[staticmethod]
    fn from_triples(triples: Vec<(String, String, u64)>) -> Self {
        let inner = data::InteractionTable::from_triples(triples.iter().map(|(u, i, c)| (u.as_str(), i.as_str(), *c)));
        Self { inner }
    }

    /// `format` is "event" (one `user,item` per line) or "aggregated"
    /// (`user,item,count`).
    #[staticmethod]
    #[pyo3(signature = (path, format = "event"))]
    fn read(path: &str, format: &str) -> PyResult<Self> {
        let format = match format {
            "event" => LogFormat::EventPerLine,
            "aggregated" => LogFormat::PreAggregated,
            other => return Err(PyValueError::new_err(format!("unknown format '{other}'"))),
        };
        let inner = data::ingest(open(path)?, format).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn count(&self, user: &str, item: &str) -> u64 {
        match (self.inner.users.get(user), self.inner.items.get(item)) {
            (Some(u), Some(i)) => self.inner.count(u, i),
            _ => 0,
        }
    }

    fn relative_ratings(&self) -> PyResult<PyRatingTable> {
        let inner = data::relative_ratings(&self.inner).map_err(to_py)?;
        Ok(PyRatingTable { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "InteractionTable(users={}, items={}, nnz={})",
            self.inner.n_users(),
            self.inner.n_items(),
            self.inner.nnz()
        )
    }
}

/// Relative ratings in `(0, 1]` for observed pairs.
#[pyclass(name = "RatingTable", module = "implicit_nade_py", skip_from_py_object)]
#[derive(Clone)]
struct PyRatingTable {
    inner: data::RelativeRatingTable,
}

#[pymethods]
impl PyRatingTable {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let inner = data::RelativeRatingTable::read_from(open(path)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Reads the train and test files written by `split` or `write_split`.
    #[staticmethod]
    fn read_split(train_path: &str, test_path: &str) -> PyResult<(Self, Self)> {
        let (train, test) = data::SplitPair::read_from(open(train_path)?, open(test_path)?).map_err(to_py)?;
        Ok((Self { inner: train }, Self { inner: test }))
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write_to(create(path)?).map_err(to_py)
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn user_ids(&self) -> Vec<String> {
        self.inner.users.ids().to_vec()
    }

    fn item_ids(&self) -> Vec<String> {
        self.inner.items.ids().to_vec()
    }

    fn user_index(&self, user: &str) -> Option<usize> {
        self.inner.users.get(user)
    }

    fn row(&self, user: usize) -> PyResult<Vec<(usize, f64)>> {
        if user >= self.inner.n_users() {
            return Err(PyValueError::new_err(format!("user index {user} out of range")));
        }
        Ok(self.inner.row(user).to_vec())
    }

    fn get(&self, user: usize, item: usize) -> f64 {
        self.inner.get(user, item)
    }

    /// Per-user random hold-out; returns `(train, test)`.
    #[pyo3(signature = (fraction = 0.1, seed = 0))]
    fn split(&self, fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let pair = data::holdout_split(&self.inner, fraction, seed).map_err(to_py)?;
        Ok((Self { inner: pair.train }, Self { inner: pair.test }))
    }

    fn feedback(&self, user: usize, alpha: f64) -> PyResult<PyUserFeedback> {
        let row = self.row(user)?;
        let inner = data::build_feedback(&row, alpha, self.inner.n_items()).map_err(to_py)?;
        Ok(PyUserFeedback { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "RatingTable(users={}, items={}, nnz={})",
            self.inner.n_users(),
            self.inner.n_items(),
            self.inner.nnz()
        )
    }
}

/// Like indicators and confidences over every item.
#[pyclass(name = "UserFeedback", module = "implicit_nade_py", skip_from_py_object)]
#[derive(Clone)]
struct PyUserFeedback {
    inner: data::UserFeedback,
}

#[pymethods]
impl PyUserFeedback {
    #[new]
    fn new(likes: Vec<bool>, confidences: Vec<f64>) -> PyResult<Self> {
        let inner = data::UserFeedback::new(likes, confidences).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn cold(items: usize) -> Self {
        Self {
            inner: data::UserFeedback::cold(items),
        }
    }

    #[getter]
    fn likes(&self) -> Vec<bool> {
        self.inner.likes().to_vec()
    }

    #[getter]
    fn confidences(&self) -> Vec<f64> {
        self.inner.confidences().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// The autoregressive network.
#[pyclass(name = "NadeModel", module = "implicit_nade_py", skip_from_py_object)]
#[derive(Clone)]
struct PyNadeModel {
    inner: implicit_nade::NadeModel,
}

impl PyNadeModel {
    fn check(&self, fb: &PyUserFeedback) -> PyResult<()> {
        if fb.inner.len() != self.inner.n_items() {
            return Err(PyValueError::new_err(format!(
                "feedback covers {} items, model has {}",
                fb.inner.len(),
                self.inner.n_items()
            )));
        }
        Ok(())
    }
}

#[pymethods]
impl PyNadeModel {
    #[new]
    #[pyo3(signature = (items, hidden = 256, activation = "tanh", seed = 0, init_scale = 0.01))]
    fn new(items: usize, hidden: usize, activation: &str, seed: u64, init_scale: f64) -> PyResult<Self> {
        if items == 0 || hidden == 0 {
            return Err(PyValueError::new_err("items and hidden must be positive"));
        }
        let act: Activation = activation.parse().map_err(PyValueError::new_err)?;
        Ok(Self {
            inner: implicit_nade::NadeModel::init(items, hidden, act, seed, init_scale),
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = persist::load_nade(open(path)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        persist::save_nade(&self.inner, create(path)?).map_err(to_py)
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.inner.n_hidden()
    }

    /// Probability that each item is liked given all of the feedback.
    fn predict(&self, feedback: &PyUserFeedback) -> PyResult<Vec<f64>> {
        self.check(feedback)?;
        Ok(self.inner.predict_all(&feedback.inner))
    }

    fn logits(&self, feedback: &PyUserFeedback) -> PyResult<Vec<f64>> {
        self.check(feedback)?;
        Ok(self.inner.logits_all(&feedback.inner).to_vec())
    }

    /// Confidence-weighted negative log-likelihood under item order `perm`.
    fn full_nll(&self, feedback: &PyUserFeedback, perm: Vec<usize>) -> PyResult<f64> {
        self.check(feedback)?;
        ItemOrdering::new(perm.clone(), 1).map_err(to_py)?;
        Ok(self.inner.full_nll(&feedback.inner, &perm))
    }

    /// Ordered loss for one `(perm, split)` draw.
    fn ordered_loss(&self, feedback: &PyUserFeedback, perm: Vec<usize>, split: usize) -> PyResult<f64> {
        self.check(feedback)?;
        let ord = ItemOrdering::new(perm, split).map_err(to_py)?;
        Ok(self.inner.ordered_loss_grad(&feedback.inner, &ord).value)
    }

    /// Minibatch SGD on every user of `table`; returns the per-epoch loss.
    #[pyo3(signature = (table, alpha = 100.0, learning_rate = 0.01, batch_size = 200, weight_decay = 0.01, epochs = 20, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        py: Python<'_>,
        table: &PyRatingTable,
        alpha: f64,
        learning_rate: f64,
        batch_size: usize,
        weight_decay: f64,
        epochs: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        if table.inner.n_items() != self.inner.n_items() {
            return Err(PyValueError::new_err("table and model disagree on the item count"));
        }
        let cfg = TrainConfig {
            learning_rate,
            batch_size,
            weight_decay,
            epochs,
            seed,
            ..TrainConfig::default()
        };
        let rows = feedback_rows(&table.inner, alpha).map_err(to_py)?;
        let model = &mut self.inner;
        py.detach(|| train(model, &rows, &cfg)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "NadeModel(items={}, hidden={}, activation={})",
            self.inner.n_items(),
            self.inner.n_hidden(),
            self.inner.activation.name()
        )
    }
}

/// The factorization baseline.
#[pyclass(name = "ImfModel", module = "implicit_nade_py", skip_from_py_object)]
#[derive(Clone)]
struct PyImfModel {
    inner: implicit_nade::ImfModel,
}

#[pymethods]
impl PyImfModel {
    /// Trains on `table`; returns `(model, objective_trace)`.
    #[staticmethod]
    #[pyo3(signature = (table, alpha = 100.0, factors = 256, reg = 0.1, iterations = 15, seed = 0))]
    fn fit(
        py: Python<'_>,
        table: &PyRatingTable,
        alpha: f64,
        factors: usize,
        reg: f64,
        iterations: usize,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let cfg = ImfConfig {
            alpha,
            factors,
            lambda: reg,
            iterations,
            seed,
        };
        let t = &table.inner;
        let (inner, trace) = py.detach(|| imf::imf_train(t, &cfg)).map_err(to_py)?;
        Ok((Self { inner }, trace))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = persist::load_imf(open(path)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        persist::save_imf(&self.inner, create(path)?).map_err(to_py)
    }

    #[getter]
    fn factors(&self) -> usize {
        self.inner.factors()
    }

    fn predict(&self, user: usize) -> PyResult<Vec<f64>> {
        if user >= self.inner.n_users() {
            return Err(PyValueError::new_err(format!("user index {user} out of range")));
        }
        Ok(imf::imf_predict(&self.inner, user))
    }
}

fn options(exclude_train_items: bool) -> EvalOptions {
    EvalOptions { exclude_train_items }
}

/// Mean percentage ranking of a network on a split (lower is better).
#[pyfunction]
#[pyo3(signature = (model, train, test, alpha = 100.0, exclude_train_items = true))]
fn mpr_nade(
    py: Python<'_>,
    model: &PyNadeModel,
    train: &PyRatingTable,
    test: &PyRatingTable,
    alpha: f64,
    exclude_train_items: bool,
) -> PyResult<f64> {
    let (m, tr, te) = (&model.inner, &train.inner, &test.inner);
    if m.n_items() != tr.n_items() {
        return Err(PyValueError::new_err("model and tables disagree on the item count"));
    }
    py.detach(|| {
        eval::mpr(
            |_, fb| m.logits_all(fb).to_vec(),
            tr,
            te,
            alpha,
            options(exclude_train_items),
        )
    })
    .map(|r| r.mpr)
    .map_err(to_py)
}

/// Mean percentage ranking of a factorization on a split.
#[pyfunction]
#[pyo3(signature = (model, train, test, exclude_train_items = true))]
fn mpr_imf(
    py: Python<'_>,
    model: &PyImfModel,
    train: &PyRatingTable,
    test: &PyRatingTable,
    exclude_train_items: bool,
) -> PyResult<f64> {
    let (m, tr, te) = (&model.inner, &train.inner, &test.inner);
    if m.n_items() != tr.n_items() || m.n_users() < tr.n_users() {
        return Err(PyValueError::new_err("model and tables disagree on dimensions"));
    }
    py.detach(|| {
        eval::mpr(
            |u, _| imf::imf_predict(m, u),
            tr,
            te,
            m.alpha,
            options(exclude_train_items),
        )
    })
    .map(|r| r.mpr)
    .map_err(to_py)
}

/// Percentiles of `targets` among `candidates` ranked by `scores`.
#[pyfunction]
fn percentile_ranks(scores: Vec<f64>, candidates: Vec<usize>, targets: Vec<usize>) -> PyResult<Vec<(usize, f64)>> {
    if candidates.iter().any(|&c| c >= scores.len()) {
        return Err(PyValueError::new_err("candidate index out of range"));
    }
    if targets.iter().any(|t| !candidates.contains(t)) {
        return Err(PyValueError::new_err("every target must be a candidate"));
    }
    Ok(eval::percentile_ranks(&scores, &candidates, &targets))
}

/// Latent-factor synthetic watch counts.
#[pyfunction(name = "synth")]
#[pyo3(signature = (users = 500, items = 200, factors = 4, density = 0.1, seed = 0))]
fn synth_table(users: usize, items: usize, factors: usize, density: f64, seed: u64) -> PyResult<PyInteractionTable> {
    let cfg = SynthConfig {
        users,
        items,
        factors,
        density,
        seed,
        ..SynthConfig::default()
    };
    let data = synth::generate(&cfg).map_err(to_py)?;
    Ok(PyInteractionTable { inner: data.table })
}

#[pymodule]
fn implicit_nade_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInteractionTable>()?;
    m.add_class::<PyRatingTable>()?;
    m.add_class::<PyUserFeedback>()?;
    m.add_class::<PyNadeModel>()?;
    m.add_class::<PyImfModel>()?;
    m.add_function(wrap_pyfunction!(mpr_nade, m)?)?;
    m.add_function(wrap_pyfunction!(mpr_imf, m)?)?;
    m.add_function(wrap_pyfunction!(percentile_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(synth_table, m)?)?;
    Ok(())
}
