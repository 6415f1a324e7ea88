//! Python bindings: load inductive datasets, learn/apply type rules,
//! generate type-matched negatives, and run the ranking protocols from
//! Python. Reports and statistics cross the boundary as plain dicts/lists.

use std::path::PathBuf;

use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value)
        .map_err(|e| pyo3::exceptions::PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// An inductive dataset: train graph plus entity-disjoint test graph.
#[pyclass]
struct Dataset {
    inner: kgeval::InductiveDataset,
}

#[pymethods]
impl Dataset {
    /// Load the six split files from `dir`. `layout` is the comma-separated
    /// file-name list (train,valid,test,inference,inference-valid,
    /// inference-test); `name` defaults to the directory name.
    #[staticmethod]
    #[pyo3(signature = (dir, name=None, layout=None))]
    fn load(dir: PathBuf, name: Option<String>, layout: Option<String>) -> anyhow::Result<Self> {
        let layout = match layout {
            Some(s) => kgeval::DatasetLayout::parse(&s)?,
            None => kgeval::DatasetLayout::default(),
        };
        let name = name.unwrap_or_else(|| {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string())
        });
        Ok(Dataset {
            inner: kgeval::load_dataset(&dir, name, &layout)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Split statistics as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py_dict(py, &self.inner.stats())
    }

    /// The test split's triples as (subject, relation, object) name tuples.
    fn test_triples(&self) -> Vec<(String, String, String)> {
        let graph = &self.inner.test.graph;
        self.inner
            .test
            .test
            .iter()
            .map(|t| {
                let (s, p, o) = graph.name_triple(t);
                (s.to_string(), p.to_string(), o.to_string())
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, train_triples={}, test_entities={}, test_triples={})",
            self.inner.name,
            self.inner.train.train.len(),
            self.inner.test.graph.entity_count(),
            self.inner.test.test.len(),
        )
    }
}

/// One learned type rule.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Rule {
    inner: kgeval::TypeRule,
}

#[pymethods]
impl Rule {
    #[getter]
    fn head(&self) -> &str {
        &self.inner.head
    }

    #[getter]
    fn body(&self) -> &str {
        &self.inner.body
    }

    /// Template code: SS, SO, OS or OO.
    #[getter]
    fn template(&self) -> &'static str {
        self.inner.template.code()
    }

    #[getter]
    fn confidence(&self) -> f64 {
        self.inner.confidence
    }

    #[getter]
    fn numerator(&self) -> u32 {
        self.inner.numerator
    }

    #[getter]
    fn denominator(&self) -> u32 {
        self.inner.denominator
    }

    fn __repr__(&self) -> String {
        format!("Rule({})", self.inner)
    }
}

fn learn_options(min_support: u32, min_confidence: f64) -> kgeval::LearnOptions {
    kgeval::LearnOptions {
        min_support,
        min_confidence,
    }
}

/// Learn all type rules from the dataset's train split.
#[pyfunction]
#[pyo3(signature = (dataset, min_support=1, min_confidence=0.0))]
fn learn_rules(dataset: &Dataset, min_support: u32, min_confidence: f64) -> Vec<Rule> {
    kgeval::learn_rules(
        &dataset.inner.train.rule_graph(),
        learn_options(min_support, min_confidence),
    )
    .into_iter()
    .map(|inner| Rule { inner })
    .collect()
}

/// Write rules as TSV.
#[pyfunction]
fn write_rules(path: PathBuf, rules: Vec<Rule>) -> anyhow::Result<()> {
    let rules: Vec<kgeval::TypeRule> = rules.into_iter().map(|r| r.inner).collect();
    kgeval::write_rules(&path, &rules, None)
}

/// Read rules back from TSV.
#[pyfunction]
fn read_rules(path: PathBuf) -> anyhow::Result<Vec<Rule>> {
    Ok(kgeval::read_rules(&path)?
        .into_iter()
        .map(|inner| Rule { inner })
        .collect())
}

/// Generate type-matched negatives for every test triple and optionally
/// write them as JSONL. Returns a summary dict; pass `include_entries=True`
/// to also get the negatives themselves.
#[pyfunction]
#[pyo3(signature = (dataset, seed, num_negatives=50, min_support=1, min_confidence=0.0, rules=None, out=None, include_entries=false))]
#[allow(clippy::too_many_arguments)]
fn generate_negatives<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    seed: u64,
    num_negatives: usize,
    min_support: u32,
    min_confidence: f64,
    rules: Option<Vec<Rule>>,
    out: Option<PathBuf>,
    include_entries: bool,
) -> anyhow::Result<Bound<'py, PyAny>> {
    let ds = &dataset.inner;
    let rules: Vec<kgeval::TypeRule> = match rules {
        Some(rs) => rs.into_iter().map(|r| r.inner).collect(),
        None => kgeval::learn_rules(
            &ds.train.rule_graph(),
            learn_options(min_support, min_confidence),
        ),
    };
    let scores = kgeval::apply_rules(&rules, &ds.test.inference_graph());
    let set = kgeval::generate_tmn_set(ds, &scores, num_negatives, seed);
    if let Some(out) = &out {
        kgeval::write_negatives(out, &set, ds, None)?;
    }

    let [high, mid, low, fill] = set.provenance_counts();
    let mut doc = serde_json::json!({
        "triples": set.entries.len(),
        "tasks": set.entries.len() * 2,
        "requested": set.requested,
        "undersized_tasks": set.undersized_tasks(),
        "provenance": {
            "bucket_high": high,
            "bucket_mid": mid,
            "bucket_low": low,
            "random_fill": fill,
        },
    });
    if include_entries {
        let graph = &ds.test.graph;
        let names = |ids: &[kgeval::EntityId]| -> Vec<String> {
            ids.iter()
                .map(|&e| graph.entity_name(e).to_string())
                .collect()
        };
        let entries: Vec<Value> = set
            .entries
            .iter()
            .map(|e| {
                let (s, p, o) = graph.name_triple(&e.triple);
                serde_json::json!({
                    "triple": [s, p, o],
                    "tail_negatives": names(&e.tail.entities),
                    "head_negatives": names(&e.head.entities),
                    "tail_provenance": e.tail.provenance,
                    "head_provenance": e.head.provenance,
                })
            })
            .collect();
        doc["entries"] = Value::Array(entries);
    }
    Ok(json_to_py(py, &doc)?)
}

fn parse_tie(tie: &str) -> anyhow::Result<kgeval::TieMode> {
    match tie {
        "average" => Ok(kgeval::TieMode::Average),
        "pessimistic" => Ok(kgeval::TieMode::Pessimistic),
        other => anyhow::bail!("tie must be \"average\" or \"pessimistic\", got {other:?}"),
    }
}

/// Evaluate a model under one protocol and return the metric report as a
/// dict. `model` is "baseline" or "predictions:<path>"; `protocol` is
/// "non-sampling", "random" or "tmn" (the latter needs `tmn_file`).
#[pyfunction]
#[pyo3(signature = (dataset, model="baseline", protocol="non-sampling", runs=100, num_negatives=49, tmn_file=None, ks=vec![10], seed=None, tie="average", min_support=1, min_confidence=0.0))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    model: &str,
    protocol: &str,
    runs: u64,
    num_negatives: usize,
    tmn_file: Option<PathBuf>,
    ks: Vec<usize>,
    seed: Option<u64>,
    tie: &str,
    min_support: u32,
    min_confidence: f64,
) -> anyhow::Result<Bound<'py, PyAny>> {
    let ds = &dataset.inner;
    let scorer: Box<dyn kgeval::Scorer> = if model == "baseline" {
        let rules = kgeval::learn_rules(
            &ds.train.rule_graph(),
            learn_options(min_support, min_confidence),
        );
        Box::new(kgeval::BaselineScorer::new(kgeval::apply_rules(
            &rules,
            &ds.test.inference_graph(),
        )))
    } else if let Some(path) = model.strip_prefix("predictions:") {
        Box::new(kgeval::PredictionsScorer::load(
            std::path::Path::new(path),
            ds,
        )?)
    } else {
        anyhow::bail!("model must be \"baseline\" or \"predictions:<path>\", got {model:?}");
    };

    let protocol = match protocol {
        "non-sampling" => kgeval::Protocol::NonSampling,
        "random" => kgeval::Protocol::RandomSampling {
            runs,
            negatives: num_negatives,
        },
        "tmn" => kgeval::Protocol::TypeMatched {
            negatives_file: tmn_file
                .ok_or_else(|| anyhow::anyhow!("the tmn protocol requires tmn_file"))?,
        },
        other => anyhow::bail!(
            "protocol must be \"non-sampling\", \"random\" or \"tmn\", got {other:?}"
        ),
    };
    let opts = kgeval::EvalOptions {
        ks,
        seed,
        tie: parse_tie(tie)?,
    };
    let report = kgeval::evaluate(scorer.as_ref(), ds, &protocol, &opts)?;
    Ok(to_py_dict(py, &report)?)
}

#[pymodule]
fn kgeval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Rule>()?;
    m.add_function(wrap_pyfunction!(learn_rules, m)?)?;
    m.add_function(wrap_pyfunction!(write_rules, m)?)?;
    m.add_function(wrap_pyfunction!(read_rules, m)?)?;
    m.add_function(wrap_pyfunction!(generate_negatives, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
