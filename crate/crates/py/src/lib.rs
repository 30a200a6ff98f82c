//! Python bindings for the groupwork toolkit.
//!
//! Exposes the cooperative-game type with its solution concepts, session
//! datasets (load/synthesize/describe), the two-level model fits and the
//! full pipeline. Structured results cross the boundary as plain Python
//! dicts and lists mirroring the CLI's JSON schemas.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use groupwork_core::builder::{
    group_games, shapley_per_student, stability_report, GameConstructionConfig, GameMode,
};
use groupwork_core::coalition::Coalition;
use groupwork_core::core_lp::CoreStatus;
use groupwork_core::dataset::SessionDataset;
use groupwork_core::game::{GameProperty, PayoffVector, TUGame};
use groupwork_core::model::{compare, fit, MixedModelSpec, ModelFrame};
use groupwork_core::pipeline::{run_pipeline, PipelineConfig};
use groupwork_core::report::{FitTableJson, StabilityJson};
use groupwork_core::synth::{synthesize, GenConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Convert a serde_json value into plain Python objects.
fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into_any()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .unbind()
                    .into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into_any()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(value_error)?;
    json_to_py(py, &json)
}

fn parse_mode(mode: &str) -> PyResult<GameConstructionConfig> {
    let mode: GameMode = mode.parse().map_err(value_error)?;
    Ok(match mode {
        GameMode::OpinionBased => GameConstructionConfig::opinion(),
        GameMode::ContributionBased => GameConstructionConfig::contribution(),
    })
}

fn game_config(mode: &str, kappa1: f64, kappa2: f64) -> PyResult<GameConstructionConfig> {
    let mut config = parse_mode(mode)?;
    config.singleton_scale = kappa1;
    config.coalition_scale = kappa2;
    config.validate().map_err(value_error)?;
    Ok(config)
}

/// A transferable-utility cooperative game.
#[pyclass(name = "Game")]
struct PyGame {
    inner: TUGame,
}

#[pymethods]
impl PyGame {
    /// Build from the player count and a map from coalition labels
    /// (comma-separated 1-based ids, e.g. "1,3") to values.
    #[new]
    fn new(n: usize, values: BTreeMap<String, f64>) -> PyResult<Self> {
        let exchange = groupwork_core::game::GameExchange { n, values };
        Ok(PyGame {
            inner: TUGame::from_exchange(&exchange).map_err(value_error)?,
        })
    }

    /// Additive game from per-player weights.
    #[staticmethod]
    fn additive(weights: Vec<f64>) -> PyResult<Self> {
        Ok(PyGame {
            inner: TUGame::additive(&weights).map_err(value_error)?,
        })
    }

    /// Unanimity game: only the grand coalition is worth 1.
    #[staticmethod]
    fn unanimity(n: usize) -> PyResult<Self> {
        Ok(PyGame {
            inner: TUGame::unanimity(n).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGame {
            inner: TUGame::from_json(text).map_err(value_error)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Value of a coalition given as a list of 1-based player ids.
    fn value(&self, players: Vec<usize>) -> PyResult<f64> {
        let c = Coalition::from_players(&players, self.inner.n()).map_err(value_error)?;
        Ok(self.inner.value(c))
    }

    /// Shapley value per player.
    fn shapley(&self) -> Vec<f64> {
        self.inner.shapley().as_slice().to_vec()
    }

    /// Marginal-contribution vector for one join order.
    fn marginal_vector(&self, order: Vec<usize>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .marginal_vector(&order)
            .map_err(value_error)?
            .as_slice()
            .to_vec())
    }

    /// Core membership of an allocation: dict with `contained` and the
    /// blocking coalitions with deficits.
    fn core_contains(&self, py: Python<'_>, x: Vec<f64>) -> PyResult<Py<PyAny>> {
        let payoff = PayoffVector::new(x).map_err(value_error)?;
        let membership = self.inner.core_contains(&payoff).map_err(value_error)?;
        let dict = PyDict::new(py);
        dict.set_item("contained", membership.contained)?;
        dict.set_item("efficient", membership.efficient)?;
        let violations = PyList::empty(py);
        for v in &membership.violations {
            let entry = PyDict::new(py);
            entry.set_item("coalition", v.coalition.players())?;
            entry.set_item("deficit", v.deficit)?;
            violations.append(entry)?;
        }
        dict.set_item("violations", violations)?;
        Ok(dict.unbind().into_any())
    }

    /// Core emptiness: `{"empty": bool}` plus a certificate allocation or
    /// the objective shortfall.
    fn core_is_empty(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let dict = PyDict::new(py);
        match self.inner.core_is_empty().map_err(value_error)? {
            CoreStatus::NonEmpty { certificate } => {
                dict.set_item("empty", false)?;
                dict.set_item("certificate", certificate.as_slice().to_vec())?;
            }
            CoreStatus::Empty { shortfall } => {
                dict.set_item("empty", true)?;
                dict.set_item("shortfall", shortfall)?;
            }
        }
        Ok(dict.unbind().into_any())
    }

    /// Check "additivity", "superadditivity" or "convexity"; on failure the
    /// dict carries the violating coalitions and the two compared values.
    fn check_property(&self, py: Python<'_>, property: &str) -> PyResult<Py<PyAny>> {
        let property: GameProperty = property.parse().map_err(value_error)?;
        let witness = self.inner.check_property(property);
        serialize_to_py(
            py,
            &groupwork_core::report::WitnessJson::from_witness(&witness),
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(n={}, v(N)={})",
            self.inner.n(),
            self.inner.grand_value()
        )
    }
}

/// A validated session dataset (records plus peer ratings).
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: SessionDataset,
}

#[pymethods]
impl PyDataset {
    /// Load and validate the two-file CSV layout.
    #[staticmethod]
    fn load(records: PathBuf, ratings: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: SessionDataset::load(&records, &ratings).map_err(value_error)?,
        })
    }

    /// Generate from a key-value generator config file.
    #[staticmethod]
    fn synthesize(config: PathBuf, seed: u64) -> PyResult<Self> {
        let config = GenConfig::from_file(&config).map_err(value_error)?;
        Ok(PyDataset {
            inner: synthesize(&config, seed).map_err(value_error)?.dataset,
        })
    }

    /// Generate the bundled study-shaped dataset (87 records, 31 teams).
    #[staticmethod]
    fn study_shape(seed: u64) -> PyResult<Self> {
        let config = GenConfig::study_shape();
        Ok(PyDataset {
            inner: synthesize(&config, seed).map_err(value_error)?.dataset,
        })
    }

    fn save(&self, records: PathBuf, ratings: PathBuf) -> PyResult<()> {
        self.inner.save(&records, &ratings).map_err(value_error)
    }

    #[getter]
    fn n_records(&self) -> usize {
        self.inner.records.len()
    }

    #[getter]
    fn n_groups(&self) -> usize {
        self.inner.n_groups()
    }

    /// Descriptive statistics as a dict (means, SDs, level counts, sizes).
    fn describe(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize_to_py(py, &self.inner.describe().map_err(value_error)?)
    }

    /// Five-number summaries of `variable` per level of `by`.
    fn group_summaries(&self, py: Python<'_>, by: &str, variable: &str) -> PyResult<Py<PyAny>> {
        serialize_to_py(
            py,
            &self
                .inner
                .group_summaries(by, variable)
                .map_err(value_error)?,
        )
    }

    /// Per-group games under a construction mode, as `{group: Game}`.
    #[pyo3(signature = (mode, kappa1 = 1.0, kappa2 = 1.0))]
    fn games(&self, mode: &str, kappa1: f64, kappa2: f64) -> PyResult<BTreeMap<String, PyGame>> {
        let config = game_config(mode, kappa1, kappa2)?;
        let games = group_games(&self.inner, &config).map_err(value_error)?;
        Ok(games
            .into_iter()
            .map(|gg| (gg.group.to_string(), PyGame { inner: gg.game }))
            .collect())
    }

    /// Stability report per group (JSON-shaped dicts).
    #[pyo3(signature = (mode, kappa1 = 1.0, kappa2 = 1.0))]
    fn stability_reports(
        &self,
        py: Python<'_>,
        mode: &str,
        kappa1: f64,
        kappa2: f64,
    ) -> PyResult<Py<PyAny>> {
        let config = game_config(mode, kappa1, kappa2)?;
        let games = group_games(&self.inner, &config).map_err(value_error)?;
        let list = PyList::empty(py);
        for gg in &games {
            let report = stability_report(&gg.game, &gg.group.to_string()).map_err(value_error)?;
            list.append(serialize_to_py(
                py,
                &StabilityJson::from_report(&report, &gg.students),
            )?)?;
        }
        Ok(list.unbind().into_any())
    }

    /// Shapley value per student as `{session_id: {student_id: value}}`.
    #[pyo3(signature = (mode = "contribution", kappa1 = 1.0, kappa2 = 1.0))]
    fn shapley_per_student(
        &self,
        mode: &str,
        kappa1: f64,
        kappa2: f64,
    ) -> PyResult<BTreeMap<String, BTreeMap<String, f64>>> {
        let config = game_config(mode, kappa1, kappa2)?;
        let values = shapley_per_student(&self.inner, &config).map_err(value_error)?;
        let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for ((session, student), value) in values {
            out.entry(session).or_default().insert(student, value);
        }
        Ok(out)
    }

    /// Fit a two-level random-intercept model; returns the fit table dict
    /// (with a comparison block against the null model when predictors are
    /// given).
    #[pyo3(signature = (response, predictors = None, grouping = "team"))]
    fn fit_model(
        &self,
        py: Python<'_>,
        response: &str,
        predictors: Option<Vec<String>>,
        grouping: &str,
    ) -> PyResult<Py<PyAny>> {
        let frame = ModelFrame::from_dataset(&self.inner);
        let predictors = predictors.unwrap_or_default();
        let refs: Vec<&str> = predictors.iter().map(String::as_str).collect();
        let spec = MixedModelSpec::new(response, &refs, grouping);
        let fitted = fit(&frame, &spec).map_err(value_error)?;
        let comparison = if refs.is_empty() {
            None
        } else {
            let null_fit = fit(&frame, &MixedModelSpec::null_model(response, grouping))
                .map_err(value_error)?;
            Some(compare(&null_fit, &fitted).map_err(value_error)?)
        };
        serialize_to_py(py, &FitTableJson::from_fit(&fitted, comparison.as_ref()))
    }

    /// Screen candidate predictors one at a time against the null model.
    #[pyo3(signature = (response, candidates, alpha = 0.05, grouping = "team"))]
    fn screen(
        &self,
        py: Python<'_>,
        response: &str,
        candidates: Vec<String>,
        alpha: f64,
        grouping: &str,
    ) -> PyResult<Py<PyAny>> {
        let frame = ModelFrame::from_dataset(&self.inner);
        let refs: Vec<&str> = candidates.iter().map(String::as_str).collect();
        let table =
            groupwork_core::model::screen_predictors(&frame, response, grouping, &refs, alpha)
                .map_err(value_error)?;
        serialize_to_py(py, &table)
    }

    /// Run the full pipeline; returns the report dict and optionally writes
    /// the JSON/CSV artifacts to `out`.
    #[pyo3(signature = (out = None, alpha = 0.05, contribution_column = "observed_contribution", kappa1 = 1.0, kappa2 = 1.0, stepwise = false, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn pipeline(
        &self,
        py: Python<'_>,
        out: Option<PathBuf>,
        alpha: f64,
        contribution_column: &str,
        kappa1: f64,
        kappa2: f64,
        stepwise: bool,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let config = PipelineConfig {
            alpha,
            contribution_column: contribution_column.to_string(),
            kappa1,
            kappa2,
            stepwise,
        };
        let report = run_pipeline(&self.inner, &config, seed).map_err(value_error)?;
        if let Some(dir) = out {
            report.write(&dir).map_err(value_error)?;
        }
        serialize_to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} records, {} groups)",
            self.inner.records.len(),
            self.inner.n_groups()
        )
    }
}

/// Between-group and within-group variance shares `(level2, level1)`.
#[pyfunction]
fn variance_shares(tau2: f64, sigma2: f64) -> (f64, f64) {
    groupwork_core::model::variance_shares(tau2, sigma2)
}

#[pymodule]
fn groupwork(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(variance_shares, m)?)?;
    Ok(())
}
