//! Python bindings for the evaluation core.

use std::path::PathBuf;

use apieval_core::apidoc;
use apieval_core::factors;
use apieval_core::prompts;
use apieval_core::runner::{self, AnalysisOverrides};
use apieval_core::signature::{self, MatchOptions};
use apieval_core::stats;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Outcome of matching one recommended signature against a class.
#[pyclass(frozen, get_all, module = "apieval")]
struct Verdict {
    kind: String,
    overload_merge: bool,
    mismatch_parts: Vec<String>,
    /// `None` for exact matches.
    error_kind: Option<String>,
    canonical: String,
}

#[pymethods]
impl Verdict {
    fn is_exact(&self) -> bool {
        self.kind == "Exact"
    }

    fn __repr__(&self) -> String {
        format!("Verdict(kind={:?}, overload_merge={}, canonical={:?})", self.kind, self.overload_merge, self.canonical)
    }
}

/// Ground-truth documentation database.
#[pyclass(frozen, module = "apieval")]
struct ApiDatabase {
    inner: apidoc::ApiDatabase,
}

impl ApiDatabase {
    fn class(&self, fqcn: &str) -> PyResult<&apidoc::ClassDoc> {
        self.inner.query_class(fqcn).ok_or_else(|| PyKeyError::new_err(fqcn.to_string()))
    }
}

#[pymethods]
impl ApiDatabase {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(ApiDatabase { inner: apidoc::ApiDatabase::load(path).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(ApiDatabase { inner: apidoc::ApiDatabase::from_json_str(text).map_err(value_err)? })
    }

    fn class_names(&self) -> Vec<String> {
        self.inner.classes().map(|c| c.fqcn.clone()).collect()
    }

    /// Display signatures of the documented methods of `fqcn`.
    fn methods(&self, fqcn: &str) -> PyResult<Vec<String>> {
        Ok(self.class(fqcn)?.methods.iter().map(|m| m.display_signature()).collect())
    }

    #[pyo3(signature = (line, fqcn, lenient_type_vars = false))]
    fn match_api(&self, line: &str, fqcn: &str, lenient_type_vars: bool) -> PyResult<Verdict> {
        let cls = self.class(fqcn)?;
        let parsed = signature::parse_signature(line);
        let v = signature::match_in_database(&parsed, cls, &self.inner, MatchOptions { lenient_type_vars });
        Ok(Verdict {
            kind: format!("{:?}", v.kind),
            overload_merge: v.overload_merge,
            mismatch_parts: v.mismatch_parts.iter().map(|p| format!("{p:?}")).collect(),
            error_kind: signature::classify_task1_error(&v).ok().map(|k| k.as_str().to_string()),
            canonical: parsed.canonical(),
        })
    }

    #[pyo3(signature = (fqcn, snippet_number = prompts::DEFAULT_SNIPPET_NUMBER))]
    fn render_task1(&self, fqcn: &str, snippet_number: u32) -> PyResult<String> {
        Ok(prompts::render_task1(self.class(fqcn)?, snippet_number).text)
    }

    /// Task-2 prompt for the documented method whose display signature is `method`.
    fn render_task2(&self, fqcn: &str, method: &str) -> PyResult<String> {
        let cls = self.class(fqcn)?;
        let m = cls
            .methods
            .iter()
            .find(|m| m.display_signature() == method)
            .ok_or_else(|| PyKeyError::new_err(format!("{fqcn}#{method}")))?;
        Ok(prompts::render_task2(m, cls).text)
    }

    fn __len__(&self) -> usize {
        self.inner.class_count()
    }
}

/// Canonical rendering of a recommended signature.
#[pyfunction]
fn canonical_signature(line: &str) -> String {
    signature::parse_signature(line).canonical()
}

#[pyfunction]
fn extract_api_lines(response: &str) -> Vec<String> {
    prompts::extract_api_lines(response)
}

#[pyfunction]
fn extract_code(response: &str) -> Option<String> {
    prompts::extract_code(response)
}

#[pyfunction]
fn perplexity(logprobs: Vec<f64>) -> PyResult<f64> {
    factors::perplexity(&logprobs).map_err(value_err)
}

/// Returns `(delta, magnitude)`.
#[pyfunction]
fn cliffs_delta(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, &'static str)> {
    let (d, m) = stats::cliffs_delta(&a, &b).map_err(value_err)?;
    Ok((d, m.as_str()))
}

/// Returns `(u, p_value, exact)`.
#[pyfunction]
fn mann_whitney(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, bool)> {
    let r = stats::mann_whitney_u(&a, &b).map_err(value_err)?;
    Ok((r.u, r.p_value, r.exact))
}

#[pyfunction]
#[pyo3(signature = (population, confidence = 0.95, margin = 0.05))]
fn representative_sample_size(population: u64, confidence: f64, margin: f64) -> PyResult<u64> {
    stats::representative_sample_size(population, confidence, margin).map_err(value_err)
}

/// Re-derives the reports of a finished ledger into `out_dir` and returns
/// the written file names.
#[pyfunction]
#[pyo3(signature = (ledger, out_dir, lenient_type_vars = false))]
fn recompute(ledger: PathBuf, out_dir: PathBuf, lenient_type_vars: bool) -> PyResult<Vec<String>> {
    let o = AnalysisOverrides { lenient_type_vars: lenient_type_vars.then_some(true), ..Default::default() };
    let (_, set) = runner::recompute(&ledger, &o).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    runner::write_reports(&set, &out_dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(set.files.into_keys().collect())
}

#[pymodule]
fn apieval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ApiDatabase>()?;
    m.add_class::<Verdict>()?;
    m.add_function(wrap_pyfunction!(canonical_signature, m)?)?;
    m.add_function(wrap_pyfunction!(extract_api_lines, m)?)?;
    m.add_function(wrap_pyfunction!(extract_code, m)?)?;
    m.add_function(wrap_pyfunction!(perplexity, m)?)?;
    m.add_function(wrap_pyfunction!(cliffs_delta, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney, m)?)?;
    m.add_function(wrap_pyfunction!(representative_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(recompute, m)?)?;
    Ok(())
}
