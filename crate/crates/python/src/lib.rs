//! Python bindings for the main `groundmine` types and operations.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use groundmine::attention::{self, AttentionMap};
use groundmine::dataset::{load_dataset, BoundingBox};
use groundmine::lexicon::{Lexicon, LexiconError, Pos};
use groundmine::miner::{self, Containment, MinerConfig};
use groundmine::schedule::{total_loss, Schedule};
use groundmine::toy::{self, make_synthetic, ToyConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_pos(pos: &str) -> PyResult<Pos> {
    match pos {
        "n" | "noun" => Ok(Pos::Noun),
        "v" | "verb" => Ok(Pos::Verb),
        other => Err(PyValueError::new_err(format!("pos must be noun or verb, got {other}"))),
    }
}

fn to_map(grid: Vec<Vec<f64>>) -> PyResult<AttentionMap> {
    let h = grid.len();
    let w = grid.first().map_or(0, Vec::len);
    if grid.iter().any(|row| row.len() != w) {
        return Err(PyValueError::new_err("grid rows must have equal length"));
    }
    AttentionMap::from_values(h, w, grid.concat()).map_err(value_err)
}

fn to_grid(m: &AttentionMap) -> Vec<Vec<f64>> {
    m.values.chunks(m.w.max(1)).map(<[f64]>::to_vec).collect()
}

/// WordNet index and exception lists plus an optional alias file.
#[pyclass(name = "Lexicon", frozen)]
struct PyLexicon {
    inner: Lexicon,
}

#[pymethods]
impl PyLexicon {
    #[new]
    #[pyo3(signature = (wordnet_dir, aliases=None))]
    fn new(wordnet_dir: PathBuf, aliases: Option<PathBuf>) -> PyResult<Self> {
        let io = |e: LexiconError| PyIOError::new_err(e.to_string());
        let mut inner = Lexicon::load_wordnet(&wordnet_dir).map_err(io)?;
        if let Some(path) = aliases {
            inner.load_aliases(&path).map_err(io)?;
        }
        Ok(PyLexicon { inner })
    }

    /// Base form of `word` for `pos` ("noun" or "verb"), or None.
    fn morphy(&self, word: &str, pos: &str) -> PyResult<Option<String>> {
        Ok(self.inner.morphy(word, parse_pos(pos)?))
    }

    /// Strongest condition under which the words match ("raw", "lemma",
    /// "synset", "alias"), or None.
    #[pyo3(signature = (w1, w2, pos=None))]
    fn words_match(&self, w1: &str, w2: &str, pos: Option<&str>) -> PyResult<Option<String>> {
        let hint = pos.map(parse_pos).transpose()?;
        let r = self.inner.words_match(w1, w2, hint);
        Ok(r.matched.then(|| format!("{:?}", r.condition).to_lowercase()))
    }

    fn contains(&self, word: &str, pos: &str) -> PyResult<bool> {
        Ok(self.inner.contains(word, parse_pos(pos)?))
    }
}

/// Mine grounding labels from region, object and QA JSON files. Returns one
/// dict per label.
#[pyfunction]
#[pyo3(signature = (regions, objects, qa, lexicon, iou_threshold=0.5, min_region_matches=2, containment="center"))]
#[allow(clippy::too_many_arguments)]
fn mine<'py>(
    py: Python<'py>,
    regions: PathBuf,
    objects: PathBuf,
    qa: PathBuf,
    lexicon: &PyLexicon,
    iou_threshold: f64,
    min_region_matches: usize,
    containment: &str,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let containment = match containment {
        "center" => Containment::Center,
        "full" => Containment::Full,
        other => return Err(PyValueError::new_err(format!("containment must be center or full, got {other}"))),
    };
    let cfg = MinerConfig {
        iou_threshold,
        min_region_matches,
        containment,
        ..MinerConfig::default()
    };
    cfg.validate().map_err(value_err)?;
    let (d, _) = load_dataset(&regions, &objects, &qa).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let labels = miner::mine(&d, &lexicon.inner, &cfg);
    let json = py.import("json")?;
    miner::labels_to_ndjson(&labels)
        .lines()
        .map(|line| json.call_method1("loads", (line,)))
        .collect()
}

/// Per-cell count of boxes `(x_min, y_min, x_max, y_max)` covering an
/// `h`x`w` grid laid over the image.
#[pyfunction]
#[pyo3(signature = (boxes, image_width, image_height, h=14, w=14))]
fn rasterize(
    boxes: Vec<(u32, u32, u32, u32)>,
    image_width: u32,
    image_height: u32,
    h: usize,
    w: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let boxes: Vec<BoundingBox> = boxes
        .into_iter()
        .map(|(x0, y0, x1, y1)| BoundingBox::new(x0, y0, x1, y1))
        .collect();
    let m = attention::rasterize(&boxes, image_width, image_height, h, w).map_err(value_err)?;
    Ok(to_grid(&m))
}

#[pyfunction]
fn l1_normalize(grid: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let m = attention::l1_normalize(&to_map(grid)?).map_err(value_err)?;
    Ok(to_grid(&m))
}

/// Spearman correlation with average ranks for ties.
#[pyfunction]
fn rank_correlation(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    attention::rank_correlation(&to_map(a)?, &to_map(b)?).map_err(value_err)
}

/// `sum p * ln(p / q)` over one map.
#[pyfunction]
fn kl_divergence(p: Vec<Vec<f64>>, q: Vec<Vec<f64>>) -> PyResult<f64> {
    attention::kl_map(&to_map(p)?, &to_map(q)?).map_err(value_err)
}

/// Block-mean pooling onto an `h`x`w` grid.
#[pyfunction]
fn downsample(grid: Vec<Vec<f64>>, h: usize, w: usize) -> PyResult<Vec<Vec<f64>>> {
    let src = to_map(grid)?;
    let m = attention::downsample(&src.values, src.h, src.w, h, w).map_err(value_err)?;
    Ok(to_grid(&m))
}

#[pyfunction]
fn vqa_accuracy(pred: &str, refs: Vec<String>) -> PyResult<f64> {
    attention::vqa_accuracy(pred, &refs).map_err(value_err)
}

/// Weight of the attention term over training steps.
#[pyclass(name = "Schedule", frozen)]
struct PySchedule {
    inner: Schedule,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn cosine(t_max: u64) -> PyResult<Self> {
        Ok(PySchedule {
            inner: Schedule::cosine(t_max).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn fixed(value: f64) -> PyResult<Self> {
        Ok(PySchedule {
            inner: Schedule::fixed(value).map_err(value_err)?,
        })
    }

    fn alpha(&self, t: u64) -> f64 {
        self.inner.alpha(t)
    }

    /// `(total, alpha)` for answer loss `ce` and optional attention loss `kl`.
    #[pyo3(signature = (ce, kl, t))]
    fn total_loss(&self, ce: f64, kl: Option<f64>, t: u64) -> PyResult<(f64, f64)> {
        let l = total_loss(ce, kl, &self.inner, t).map_err(value_err)?;
        Ok((l.total, l.alpha))
    }

    fn __repr__(&self) -> String {
        format!("Schedule(t_max={}, mode={:?})", self.inner.t_max(), self.inner.mode())
    }
}

/// Dimensions and optimizer settings of the toy attention model.
#[pyclass(name = "ToyConfig", get_all, set_all)]
struct PyToyConfig {
    d: usize,
    c: usize,
    h: usize,
    w: usize,
    glimpses: usize,
    k: usize,
    o: usize,
    seed: u64,
    steps: u64,
    learning_rate: f64,
}

impl From<&PyToyConfig> for ToyConfig {
    fn from(c: &PyToyConfig) -> Self {
        ToyConfig {
            d: c.d,
            c: c.c,
            h: c.h,
            w: c.w,
            glimpses: c.glimpses,
            k: c.k,
            o: c.o,
            seed: c.seed,
            steps: c.steps,
            learning_rate: c.learning_rate,
        }
    }
}

#[pymethods]
impl PyToyConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let d = ToyConfig::default();
        let mut cfg = PyToyConfig {
            d: d.d,
            c: d.c,
            h: d.h,
            w: d.w,
            glimpses: d.glimpses,
            k: d.k,
            o: d.o,
            seed: d.seed,
            steps: d.steps,
            learning_rate: d.learning_rate,
        };
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                match key.as_str() {
                    "d" => cfg.d = value.extract()?,
                    "c" => cfg.c = value.extract()?,
                    "h" => cfg.h = value.extract()?,
                    "w" => cfg.w = value.extract()?,
                    "glimpses" => cfg.glimpses = value.extract()?,
                    "k" => cfg.k = value.extract()?,
                    "o" => cfg.o = value.extract()?,
                    "seed" => cfg.seed = value.extract()?,
                    "steps" => cfg.steps = value.extract()?,
                    "learning_rate" => cfg.learning_rate = value.extract()?,
                    other => return Err(PyValueError::new_err(format!("unknown ToyConfig field {other}"))),
                }
            }
        }
        ToyConfig::from(&cfg).validate().map_err(value_err)?;
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", ToyConfig::from(self))
    }
}

/// Train on `samples` synthetic examples. Returns `(metrics, params)` where
/// metrics is one dict per step and params is the NDJSON parameter dump.
#[pyfunction]
#[pyo3(signature = (config, schedule, samples=64))]
fn train_toy<'py>(
    py: Python<'py>,
    config: &PyToyConfig,
    schedule: &PySchedule,
    samples: usize,
) -> PyResult<(Vec<Bound<'py, PyDict>>, String)> {
    let cfg = ToyConfig::from(config);
    let data = make_synthetic(&cfg, samples, cfg.seed).map_err(value_err)?;
    let out = py
        .detach(|| toy::train(&data, &cfg, &schedule.inner))
        .map_err(value_err)?;
    let metrics = out
        .metrics
        .iter()
        .map(|m| {
            let row = PyDict::new(py);
            row.set_item("step", m.step)?;
            row.set_item("ce", m.ce)?;
            row.set_item("kl", m.kl)?;
            row.set_item("alpha", m.alpha)?;
            row.set_item("accuracy", m.accuracy)?;
            row.set_item("rank_corr", m.rank_corr)?;
            Ok(row)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((metrics, out.params.to_ndjson()))
}

#[pymodule(name = "groundmine")]
fn groundmine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLexicon>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyToyConfig>()?;
    m.add_function(wrap_pyfunction!(mine, m)?)?;
    m.add_function(wrap_pyfunction!(rasterize, m)?)?;
    m.add_function(wrap_pyfunction!(l1_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(rank_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(downsample, m)?)?;
    m.add_function(wrap_pyfunction!(vqa_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(train_toy, m)?)?;
    Ok(())
}

