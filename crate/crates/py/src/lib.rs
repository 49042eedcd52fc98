//! Python bindings for the divrec pipeline: target-distribution math, the
//! core diversity metrics, re-ranking, and full experiment runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use divrec::metrics;
use divrec::models::{RankedList, ScoredItem};
use divrec::ntd::{self, Ntd, NtvTargets};
use divrec::pipeline::{self, ExperimentConfig, Stage};
use divrec::rerank::{rerank_static, RerankConfig, RerankMethod};

fn to_py_err(err: divrec::Error) -> PyErr {
    match err.exit_code() {
        2 => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use pyo3::types::{PyDict, PyList};
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.unbind().into()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &json)
}

/// Largest-remainder quotas of `n` slots over the given proportions.
#[pyfunction]
fn quotas(proportions: Vec<f64>, n: usize) -> Vec<usize> {
    ntd::largest_remainder(n, &proportions)
}

/// Gini coefficient of a class distribution (0 = uniform, 1 = point mass).
#[pyfunction]
fn gini(mass: Vec<f64>) -> f64 {
    metrics::gini_from_mass(&mass)
}

/// Intra-list distance of a list with the given per-class counts, or None
/// for lists shorter than two items.
#[pyfunction]
fn ild_from_counts(counts: Vec<usize>) -> Option<f64> {
    metrics::ild_from_counts(&counts)
}

/// Jensen-Shannon divergence (base 2) between two mass vectors.
#[pyfunction]
fn jsd(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    if p.len() != q.len() {
        return Err(PyValueError::new_err("mass vectors differ in length"));
    }
    Ok(metrics::jsd_mass(&p, &q))
}

/// The default news NTD (party 15/15/15/15/40, sentiment 20/30/30/20) as a
/// JSON string.
#[pyfunction]
fn default_ntd_json() -> PyResult<String> {
    serde_json::to_string_pretty(&Ntd::default_news())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Normative target values for an NTD (JSON string) and list size.
#[pyfunction]
#[pyo3(signature = (ntd_json, n = 20))]
fn ntv(py: Python<'_>, ntd_json: &str, n: usize) -> PyResult<Py<PyAny>> {
    let ntd = Ntd::from_json_str(ntd_json).map_err(to_py_err)?;
    let values = ntd::ntv(&ntd, n, &NtvTargets::default());
    serialize_to_py(py, &values)
}

/// Re-rank scored candidates with one of the static re-rankers.
///
/// `candidates` is a list of `(item_id, score)` pairs; `items_jsonl` holds
/// one item JSON object per line (the corpus item schema).
#[pyfunction]
#[pyo3(signature = (method, candidates, items_jsonl, ntd_json = None, n = 20, lambda_ = 0.5))]
fn rerank(
    method: &str,
    candidates: Vec<(String, f64)>,
    items_jsonl: &str,
    ntd_json: Option<&str>,
    n: usize,
    lambda_: f64,
) -> PyResult<Vec<(String, f64)>> {
    let method = match method {
        "mmr" => RerankMethod::Mmr,
        "pm2" => RerankMethod::Pm2,
        "gkl" => RerankMethod::Gkl,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown method `{other}` (expected mmr, pm2, or gkl)"
            )))
        }
    };
    let ntd = match ntd_json {
        Some(json) => Ntd::from_json_str(json).map_err(to_py_err)?,
        None => Ntd::default_news(),
    };
    let mut items = BTreeMap::new();
    for line in items_jsonl.lines().filter(|l| !l.trim().is_empty()) {
        let item: divrec::corpus::Item =
            serde_json::from_str(line).map_err(|e| PyValueError::new_err(e.to_string()))?;
        items.insert(item.item_id.clone(), item);
    }
    let list = RankedList {
        user_id: "py".to_string(),
        items: candidates
            .into_iter()
            .map(|(id, score)| ScoredItem { id, score })
            .collect(),
    };
    let mut cfg = RerankConfig::new(method, ntd, n);
    cfg.lambda = lambda_;
    let out = rerank_static(&list, &items, &cfg).map_err(to_py_err)?;
    Ok(out.items.into_iter().map(|s| (s.id, s.score)).collect())
}

/// Write a synthetic corpus plus a runnable config; returns the config path.
#[pyfunction]
#[pyo3(signature = (dir, items = 500, users = 50, seed = 7))]
fn synth_corpus(dir: &str, items: usize, users: usize, seed: u64) -> PyResult<String> {
    let code = pipeline::cli([
        "divrec".to_string(),
        "synth".to_string(),
        "--dir".to_string(),
        dir.to_string(),
        "--items".to_string(),
        items.to_string(),
        "--users".to_string(),
        users.to_string(),
        "--seed".to_string(),
        seed.to_string(),
    ]);
    if code != 0 {
        return Err(PyValueError::new_err("synthetic corpus generation failed"));
    }
    Ok(Path::new(dir)
        .join("config.json")
        .to_string_lossy()
        .into_owned())
}

/// Run the whole pipeline for a config file; returns the output directory.
#[pyfunction]
#[pyo3(signature = (config_path, from_stage = "pre"))]
fn run_experiment(config_path: &str, from_stage: &str) -> PyResult<String> {
    let config = ExperimentConfig::load(Path::new(config_path)).map_err(to_py_err)?;
    let from: Stage = from_stage.parse().map_err(to_py_err)?;
    let state = pipeline::run(&config, from).map_err(to_py_err)?;
    Ok(state.out_dir.to_string_lossy().into_owned())
}

/// Load the aggregate rows of a saved report as a list of dicts.
#[pyfunction]
fn load_report(py: Python<'_>, out_dir: &str) -> PyResult<Py<PyAny>> {
    let path = PathBuf::from(out_dir).join("reports/report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// Export a saved recommendations file as a JREX document (JSON string).
#[pyfunction]
#[pyo3(signature = (recommendations_path, experiment_id = "experiment", style = "default"))]
fn export_jrex(recommendations_path: &str, experiment_id: &str, style: &str) -> PyResult<String> {
    let lists =
        pipeline::read_ranked_lists(Path::new(recommendations_path)).map_err(to_py_err)?;
    let doc = pipeline::export_jrex(&lists, experiment_id, style);
    serde_json::to_string_pretty(&doc).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn divrec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(quotas, m)?)?;
    m.add_function(wrap_pyfunction!(gini, m)?)?;
    m.add_function(wrap_pyfunction!(ild_from_counts, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(default_ntd_json, m)?)?;
    m.add_function(wrap_pyfunction!(ntv, m)?)?;
    m.add_function(wrap_pyfunction!(rerank, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(load_report, m)?)?;
    m.add_function(wrap_pyfunction!(export_jrex, m)?)?;
    Ok(())
}
