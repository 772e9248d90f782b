//! Python bindings for the `eras` library.

use std::path::PathBuf;

use eras::app::{self, RunConfig};
use eras::evaluator::{link_prediction_eval, EvalReport, RankMetrics, Supernet, TieRule};
use eras::kg_store::{
    classify_relation_patterns, generate_synthetic, load_dataset, FamilyPattern, PatternThresholds,
    RelationFamily, Split, SyntheticSpec, Triple, TripleStore,
};
use eras::scorer::{self, EmbeddingTable};
use eras::search_engine::{derive, search};
use eras::search_space::{encode_known, is_exploitative, ConstraintScope, KnownModel};
use eras::trainer::{epoch_rng, Trainer};
use eras::ErasError;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: ErasError) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        2 => PyIOError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = ErasError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Builds a run configuration from an optional TOML file and keyword overrides.
fn run_config(path: Option<&std::path::Path>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut ov = Vec::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let raw = if let Ok(s) = v.extract::<String>() {
                format!("{s:?}")
            } else if let Ok(b) = v.extract::<bool>() {
                b.to_string()
            } else {
                v.str()?.to_string()
            };
            ov.push((key, raw));
        }
    }
    RunConfig::load(path, &ov).map_err(to_py)
}

/// A knowledge graph with train, valid and test splits.
#[pyclass(name = "KnowledgeGraph", module = "eras_py", frozen)]
struct PyGraph {
    store: TripleStore,
}

#[pymethods]
impl PyGraph {
    /// Loads `train.txt`, `valid.txt` and `test.txt` from a directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyGraph {
            store: load_dataset(&path).map_err(to_py)?,
        })
    }

    /// Generates a synthetic graph; `families` holds `(pattern, count, facts_per_relation)`.
    #[staticmethod]
    #[pyo3(signature = (n_entities, families, seed = 0, clusters = 10, shared_fraction = 0.0))]
    fn synthetic(
        n_entities: usize,
        families: Vec<(String, usize, usize)>,
        seed: u64,
        clusters: usize,
        shared_fraction: f64,
    ) -> PyResult<Self> {
        let families = families
            .into_iter()
            .map(|(p, count, facts)| {
                Ok(RelationFamily {
                    pattern: parse::<FamilyPattern>(&p)?,
                    count,
                    facts_per_relation: facts,
                    shared_fraction,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let spec = SyntheticSpec {
            n_entities,
            families,
            seed,
            clusters,
        };
        Ok(PyGraph {
            store: generate_synthetic(&spec).map_err(to_py)?,
        })
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.store.num_entities()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.store.num_relations()
    }

    /// Triples of a split as `(head, relation, tail)` ids.
    fn triples(&self, split: &str) -> PyResult<Vec<(usize, usize, usize)>> {
        let split: Split = parse(split)?;
        Ok(self
            .store
            .split(split)
            .iter()
            .map(|t| (t.head, t.relation, t.tail))
            .collect())
    }

    fn relation_names(&self) -> Vec<String> {
        self.store.relations().names().to_vec()
    }

    fn entity_names(&self) -> Vec<String> {
        self.store.entities().names().to_vec()
    }

    /// Pattern label of every relation, in id order.
    fn patterns(&self) -> Vec<String> {
        classify_relation_patterns(&self.store, &PatternThresholds::default())
            .iter()
            .map(|l| l.pattern.to_string())
            .collect()
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.store.write_dataset(&path).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeGraph(entities={}, relations={}, train={}, valid={}, test={})",
            self.store.num_entities(),
            self.store.num_relations(),
            self.store.train().len(),
            self.store.valid().len(),
            self.store.test().len()
        )
    }
}

/// A block-bilinear scoring function per relation group.
#[pyclass(name = "Architecture", module = "eras_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyArchitecture {
    arch: eras::search_space::Architecture,
}

#[pymethods]
impl PyArchitecture {
    /// Parses the `"N M : tokens"` form.
    #[new]
    fn new(line: &str) -> PyResult<Self> {
        Ok(PyArchitecture { arch: parse(line)? })
    }

    /// DistMult, ComplEx, Analogy or SimplE over `blocks` blocks.
    #[staticmethod]
    #[pyo3(signature = (name, blocks = 4))]
    fn known(name: &str, blocks: usize) -> PyResult<Self> {
        let model: KnownModel = parse(name)?;
        Ok(PyArchitecture {
            arch: encode_known(model, blocks).map_err(to_py)?,
        })
    }

    #[getter]
    fn groups(&self) -> usize {
        self.arch.groups()
    }

    #[getter]
    fn blocks(&self) -> usize {
        self.arch.blocks()
    }

    #[getter]
    fn tokens(&self) -> Vec<u8> {
        self.arch.tokens().to_vec()
    }

    #[pyo3(signature = (scope = "per-group"))]
    fn is_exploitative(&self, scope: &str) -> PyResult<bool> {
        let scope: ConstraintScope = parse(scope)?;
        Ok(is_exploitative(&self.arch, scope))
    }

    fn __str__(&self) -> String {
        self.arch.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Architecture('{}')", self.arch)
    }
}

/// Trained embeddings with their architecture and relation groups.
#[pyclass(name = "Model", module = "eras_py")]
struct PyModel {
    arch: eras::search_space::Architecture,
    assignment: Vec<usize>,
    table: EmbeddingTable,
    #[pyo3(get)]
    best_valid_mrr: f64,
    #[pyo3(get)]
    losses: Vec<f64>,
}

fn metrics_dict<'py>(py: Python<'py>, m: &RankMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mrr", m.mrr)?;
    d.set_item("hit1", m.hit1)?;
    d.set_item("hit3", m.hit3)?;
    d.set_item("hit10", m.hit10)?;
    d.set_item("ranks", m.count)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = metrics_dict(py, &r.overall)?;
    let per = PyDict::new(py);
    for row in &r.per_relation {
        per.set_item(&row.relation, metrics_dict(py, &row.metrics)?)?;
    }
    d.set_item("per_relation", per)?;
    let pat = PyDict::new(py);
    for (label, m) in &r.per_pattern {
        pat.set_item(label.to_string(), metrics_dict(py, m)?)?;
    }
    d.set_item("per_pattern", pat)?;
    Ok(d)
}

#[pymethods]
impl PyModel {
    #[getter]
    fn architecture(&self) -> PyArchitecture {
        PyArchitecture {
            arch: self.arch.clone(),
        }
    }

    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.assignment.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn score(&self, head: usize, relation: usize, tail: usize) -> PyResult<f64> {
        if head >= self.table.num_entities() || tail >= self.table.num_entities() || relation >= self.assignment.len() {
            return Err(PyIndexError::new_err("id out of range"));
        }
        let t = Triple { head, relation, tail };
        Ok(scorer::score(&self.arch, self.assignment[relation], &t, &self.table))
    }

    /// Filtered link prediction on `split`.
    #[pyo3(signature = (graph, split = "test", tie = "mean"))]
    fn evaluate<'py>(&self, py: Python<'py>, graph: &PyGraph, split: &str, tie: &str) -> PyResult<Bound<'py, PyDict>> {
        let split: Split = parse(split)?;
        let tie: TieRule = parse(tie)?;
        if graph.store.num_entities() != self.table.num_entities() || graph.store.num_relations() != self.assignment.len() {
            return Err(PyValueError::new_err("graph does not match the model"));
        }
        let labels = classify_relation_patterns(&graph.store, &PatternThresholds::default());
        let net = Supernet::new(&self.arch, &self.assignment, &self.table);
        let report = py.detach(|| link_prediction_eval(&net, &graph.store, split, &labels, tie));
        report_dict(py, &report)
    }

    fn entity_embeddings(&self) -> Vec<Vec<f64>> {
        self.table.entity_matrix().chunks(self.table.dim()).map(<[f64]>::to_vec).collect()
    }

    fn relation_embeddings(&self) -> Vec<Vec<f64>> {
        self.table.relation_matrix().chunks(self.table.dim()).map(<[f64]>::to_vec).collect()
    }
}

/// Trains a fixed architecture; keyword arguments are run-configuration keys.
#[pyfunction]
#[pyo3(signature = (graph, arch, assignment = None, **kwargs))]
fn train(
    py: Python<'_>,
    graph: &PyGraph,
    arch: &PyArchitecture,
    assignment: Option<Vec<usize>>,
    kwargs: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyModel> {
    let cfg = run_config(None, kwargs)?;
    let assignment = assignment.unwrap_or_else(|| vec![0; graph.store.num_relations()]);
    let arch = arch.arch.clone();
    let trainer = py.detach(|| -> eras::Result<Trainer> {
        let mut t = Trainer::new(arch, assignment, &graph.store, cfg.dim, cfg.train_config())?;
        t.run(&graph.store)?;
        Ok(t)
    });
    let t = trainer.map_err(to_py)?;
    let out = t.outcome();
    Ok(PyModel {
        arch: t.arch,
        assignment: t.group_of,
        table: out.table,
        best_valid_mrr: out.best_valid_mrr,
        losses: out.losses,
    })
}

/// Runs the search, derives the best architecture and retrains it.
#[pyfunction]
#[pyo3(signature = (graph, **kwargs))]
fn search_and_train(py: Python<'_>, graph: &PyGraph, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<PyModel> {
    let cfg = run_config(None, kwargs)?;
    let scfg = cfg.search_config();
    let store = &graph.store;
    let result = py.detach(|| -> eras::Result<Trainer> {
        let outcome = search(store, &scfg, None)?;
        let mut rng = epoch_rng(cfg.seed, 1 << 20);
        let derived = derive(
            &outcome.policy,
            &outcome.groups,
            &outcome.table,
            store,
            cfg.derive_samples,
            &scfg,
            &mut rng,
        )?;
        let mut t = Trainer::new(
            derived.arch,
            outcome.groups.assignment().to_vec(),
            store,
            cfg.dim,
            cfg.train_config(),
        )?;
        t.run(store)?;
        Ok(t)
    });
    let t = result.map_err(to_py)?;
    let out = t.outcome();
    Ok(PyModel {
        arch: t.arch,
        assignment: t.group_of,
        table: out.table,
        best_valid_mrr: out.best_valid_mrr,
        losses: out.losses,
    })
}

/// Runs the full search command, writing artifacts; returns the test MRR.
#[pyfunction]
#[pyo3(signature = (config = None, **kwargs))]
fn run_search(py: Python<'_>, config: Option<PathBuf>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<f64> {
    let cfg = run_config(config.as_deref(), kwargs)?;
    let summary = py.detach(|| app::cmd_search(&cfg)).map_err(to_py)?;
    Ok(summary.test.mrr)
}

#[pymodule]
fn eras_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyArchitecture>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(search_and_train, m)?)?;
    m.add_function(wrap_pyfunction!(run_search, m)?)?;
    Ok(())
}
