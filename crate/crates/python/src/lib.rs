//! Python bindings: feature sequences, models, the training phases,
//! alignment and evaluation.

use std::path::PathBuf;

use dblstm_vc::alignment;
use dblstm_vc::blstm::{self, BlstmModel};
use dblstm_vc::features::{
    self, CorpusManifest, FeatureKind, FeatureSequence, SyntheticCorpusConfig,
};
use dblstm_vc::pipeline::{self, VcSystem};
use dblstm_vc::prosody::{self, ProsodyStats};
use dblstm_vc::training::{self, StopReason};
use dblstm_vc::Error;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for dblstm_vc::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse_kind(kind: &str) -> PyResult<FeatureKind> {
    match kind {
        "mcep" => Ok(FeatureKind::Mcep),
        "logf0" => Ok(FeatureKind::LogF0),
        "aperiodicity" | "ap" => Ok(FeatureKind::Aperiodicity),
        "label" => Ok(FeatureKind::Label),
        other => Err(PyValueError::new_err(format!(
            "unknown feature kind {other:?} (mcep, logf0, aperiodicity, label)"
        ))),
    }
}

/// A T×D matrix of frames of one kind.
#[pyclass(name = "Feature", module = "dblstm_vc", frozen, from_py_object)]
#[derive(Clone)]
struct PyFeature {
    inner: FeatureSequence,
}

fn wrap(inner: FeatureSequence) -> PyFeature {
    PyFeature { inner }
}

#[pymethods]
impl PyFeature {
    #[new]
    fn new(rows: Vec<Vec<f64>>, kind: &str) -> PyResult<Self> {
        Ok(wrap(
            FeatureSequence::from_rows(&rows, parse_kind(kind)?).py()?,
        ))
    }

    #[staticmethod]
    fn one_hot(classes: Vec<usize>, label_dim: usize) -> PyResult<Self> {
        Ok(wrap(FeatureSequence::one_hot(&classes, label_dim).py()?))
    }

    #[staticmethod]
    fn read(path: PathBuf, kind: &str) -> PyResult<Self> {
        Ok(wrap(
            features::read_feature_file(path, parse_kind(kind)?).py()?,
        ))
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        features::write_feature_file(&self.inner, path).py()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .frames()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Feature(kind={}, frames={}, dim={})",
            self.inner.kind(),
            self.inner.len(),
            self.inner.dim()
        )
    }

    /// Each frame concatenated with `left` previous and `right` following
    /// frames, edges repeated.
    #[pyo3(signature = (left = 1, right = 1))]
    fn stack_context(&self, left: usize, right: usize) -> PyResult<Self> {
        Ok(wrap(
            features::stack_context(&self.inner, left, right).py()?,
        ))
    }
}

/// Deep bidirectional LSTM with its input/output normalization.
#[pyclass(name = "Model", module = "dblstm_vc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: BlstmModel,
}

#[pymethods]
impl PyModel {
    /// Random initialization for `arch = [input, hidden..., output]`.
    #[staticmethod]
    #[pyo3(signature = (arch, seed = 0))]
    fn init(arch: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: blstm::init_params(&arch, seed).py()?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: blstm::load_model(path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        blstm::save_model(&self.inner, path).py()
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: blstm::decode_model(data).py()?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &blstm::encode_model(&self.inner))
    }

    fn forward(&self, input: &PyFeature) -> PyResult<PyFeature> {
        Ok(wrap(self.inner.forward(&input.inner).py()?))
    }

    /// Same shape and normalization, every weight zero.
    fn zero_weights(&self) -> Self {
        Self {
            inner: self.inner.zero_weights(),
        }
    }

    #[getter]
    fn arch(&self) -> Vec<usize> {
        self.inner.arch().to_vec()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params().to_flat()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Model(arch={:?})", self.inner.arch())
    }
}

#[pyclass(
    name = "TrainConfig",
    module = "dblstm_vc",
    get_all,
    set_all,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyTrainConfig {
    learning_rate: f64,
    momentum: f64,
    max_epochs: usize,
    patience: usize,
    batch_size: usize,
    seed: u64,
    gradient_clip: f64,
    shuffle: bool,
}

impl PyTrainConfig {
    fn core(&self) -> training::TrainConfig {
        training::TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            seed: self.seed,
            gradient_clip: self.gradient_clip,
            shuffle: self.shuffle,
        }
    }
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let d = training::TrainConfig::default();
        let cfg = Self {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            max_epochs: d.max_epochs,
            patience: d.patience,
            batch_size: d.batch_size,
            seed: d.seed,
            gradient_clip: d.gradient_clip,
            shuffle: d.shuffle,
        };
        let Some(kwargs) = kwargs else { return Ok(cfg) };
        let obj = Bound::new(kwargs.py(), cfg)?;
        for (k, v) in kwargs.iter() {
            obj.as_any().setattr(k.extract::<String>()?.as_str(), v)?;
        }
        let cfg = obj.borrow().clone();
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!("TrainConfig({:?})", self.core())
    }
}

/// Per-epoch losses plus the epoch whose parameters were kept.
#[pyclass(name = "TrainReport", module = "dblstm_vc", frozen)]
struct PyTrainReport {
    inner: training::TrainReport,
}

#[pymethods]
impl PyTrainReport {
    #[getter]
    fn best_epoch(&self) -> usize {
        self.inner.best_epoch
    }

    /// `(epoch, train_loss, valid_loss)` tuples.
    #[getter]
    fn epochs(&self) -> Vec<(usize, f64, f64)> {
        self.inner
            .epochs
            .iter()
            .map(|e| (e.epoch, e.train_loss, e.valid_loss))
            .collect()
    }

    #[getter]
    fn stopped(&self) -> &'static str {
        match self.inner.stopped {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::Patience => "patience",
        }
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

fn trained(r: (BlstmModel, training::TrainReport)) -> (PyModel, PyTrainReport) {
    (PyModel { inner: r.0 }, PyTrainReport { inner: r.1 })
}

#[pyclass(name = "Manifest", module = "dblstm_vc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyManifest {
    inner: CorpusManifest,
}

#[pymethods]
impl PyManifest {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CorpusManifest::load(path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).py()
    }

    fn speakers(&self) -> Vec<String> {
        self.inner
            .speakers()
            .into_iter()
            .map(str::to_owned)
            .collect()
    }

    /// `(utterance_id, speaker_id)` per record, in file order.
    fn records(&self) -> Vec<(String, String)> {
        self.inner
            .records()
            .iter()
            .map(|r| (r.utterance_id.clone(), r.speaker_id.clone()))
            .collect()
    }

    fn for_speaker(&self, speaker: &str) -> Self {
        Self {
            inner: self.inner.for_speaker(speaker),
        }
    }

    fn without_speakers(&self, speakers: Vec<String>) -> Self {
        Self {
            inner: self.inner.filter(|r| !speakers.contains(&r.speaker_id)),
        }
    }

    /// First `n` records of the manifest.
    fn head(&self, n: usize) -> Self {
        let mut i = 0;
        Self {
            inner: self.inner.filter(|_| {
                i += 1;
                i <= n
            }),
        }
    }

    /// `{"labels", "mcep", "logf0", "ap"}` features of one utterance.
    fn load_utterance(&self, speaker: &str, utterance: &str) -> PyResult<Vec<(String, PyFeature)>> {
        let r = self.inner.find(speaker, utterance).ok_or_else(|| {
            PyValueError::new_err(format!("no utterance {utterance} for {speaker}"))
        })?;
        let u = self.inner.load_utterance(r).py()?;
        Ok(vec![
            ("labels".into(), wrap(u.labels)),
            ("mcep".into(), wrap(u.mcep)),
            ("logf0".into(), wrap(u.logf0)),
            ("ap".into(), wrap(u.ap)),
        ])
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (
    out_dir, speakers = 7, utterances = 30, min_frames = 20, max_frames = 40,
    label_dim = 12, mcep_dim = 8, noise = 0.05, spread = 0.3, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn gen_synthetic(
    out_dir: PathBuf,
    speakers: usize,
    utterances: usize,
    min_frames: usize,
    max_frames: usize,
    label_dim: usize,
    mcep_dim: usize,
    noise: f64,
    spread: f64,
    seed: u64,
) -> PyResult<PyManifest> {
    let cfg = SyntheticCorpusConfig {
        n_speakers: speakers,
        n_utterances_per_speaker: utterances,
        frame_range: (min_frames, max_frames),
        label_dim,
        mcep_dim,
        noise_std: noise,
        seed,
        speaker_spread: spread,
        ..SyntheticCorpusConfig::default()
    };
    Ok(PyManifest {
        inner: features::gen_synthetic_corpus(&cfg, &out_dir).py()?,
    })
}

type Pairs = Vec<(PyFeature, PyFeature)>;

fn unwrap_pairs(p: Pairs) -> Vec<training::SeqPair> {
    p.into_iter().map(|(a, b)| (a.inner, b.inner)).collect()
}

/// Trains `model` on (input, target) pairs; returns the best-validation
/// snapshot and the report.
#[pyfunction]
fn train(
    py: Python<'_>,
    model: &PyModel,
    train_set: Pairs,
    valid_set: Pairs,
    cfg: &PyTrainConfig,
) -> PyResult<(PyModel, PyTrainReport)> {
    let (m, t, v, c) = (
        model.inner.clone(),
        unwrap_pairs(train_set),
        unwrap_pairs(valid_set),
        cfg.core(),
    );
    py.detach(|| training::train(&m, &t, &v, &c))
        .py()
        .map(trained)
}

#[pyfunction]
#[pyo3(signature = (manifest, hidden, cfg, exclude = Vec::new()))]
fn train_average(
    py: Python<'_>,
    manifest: &PyManifest,
    hidden: Vec<usize>,
    cfg: &PyTrainConfig,
    exclude: Vec<String>,
) -> PyResult<(PyModel, PyTrainReport)> {
    let (m, c) = (manifest.inner.clone(), cfg.core());
    py.detach(|| {
        let excluded: Vec<&str> = exclude.iter().map(String::as_str).collect();
        pipeline::train_average_model(&m, &excluded, &hidden, &c)
    })
    .py()
    .map(trained)
}

/// Warm-start fine-tuning on a single-speaker manifest.
#[pyfunction]
fn adapt(
    py: Python<'_>,
    model: &PyModel,
    manifest: &PyManifest,
    cfg: &PyTrainConfig,
) -> PyResult<(PyModel, PyTrainReport)> {
    let (a, m, c) = (model.inner.clone(), manifest.inner.clone(), cfg.core());
    py.detach(|| pipeline::adapt_model(&a, &m, &c))
        .py()
        .map(trained)
}

/// Error reduction network on DTW-aligned (converted, target) pairs of the
/// parallel sentences shared by `source` and `target`.
#[pyfunction]
fn train_ern(
    py: Python<'_>,
    adapted: &PyModel,
    manifest: &PyManifest,
    source: &str,
    target: &str,
    hidden: Vec<usize>,
    cfg: &PyTrainConfig,
) -> PyResult<(PyModel, PyTrainReport)> {
    let (a, m, c) = (adapted.inner.clone(), manifest.inner.clone(), cfg.core());
    py.detach(|| {
        let parallel = pipeline::load_parallel(&m, source, target)?;
        let ds = pipeline::build_ern_dataset(&a, &parallel)?;
        pipeline::train_ern(&ds, &hidden, &c)
    })
    .py()
    .map(trained)
}

/// Conventional source→target MCEP mapping on aligned parallel sentences.
#[pyfunction]
fn train_baseline(
    py: Python<'_>,
    manifest: &PyManifest,
    source: &str,
    target: &str,
    hidden: Vec<usize>,
    cfg: &PyTrainConfig,
) -> PyResult<(PyModel, PyTrainReport)> {
    let (m, c) = (manifest.inner.clone(), cfg.core());
    py.detach(|| {
        let parallel = pipeline::load_parallel(&m, source, target)?;
        pipeline::train_parallel_baseline(&parallel, &hidden, &c)
    })
    .py()
    .map(trained)
}

/// Full conversion of one utterance; prosody arguments are `(mean, std)`
/// of voiced log-F0. Returns `(mcep, logf0, ap)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn convert(
    adapted: &PyModel,
    ern: &PyModel,
    source_prosody: (f64, f64),
    target_prosody: (f64, f64),
    labels: &PyFeature,
    logf0: &PyFeature,
    ap: &PyFeature,
) -> PyResult<(PyFeature, PyFeature, PyFeature)> {
    let sys = VcSystem::new(
        adapted.inner.clone(),
        ern.inner.clone(),
        ProsodyStats::new(source_prosody.0, source_prosody.1).py()?,
        ProsodyStats::new(target_prosody.0, target_prosody.1).py()?,
    )
    .py()?;
    let out = pipeline::convert(&sys, &labels.inner, &logf0.inner, &ap.inner).py()?;
    Ok((wrap(out.mcep), wrap(out.logf0), wrap(out.ap)))
}

/// Minimal-cost monotone alignment: `(pairs, total_cost)`.
#[pyfunction]
fn dtw_align(a: &PyFeature, b: &PyFeature) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let p = alignment::dtw_align(&a.inner, &b.inner).py()?;
    Ok((p.pairs, p.total_cost))
}

/// Frame-averaged mel-cepstral distortion in dB of equal-length sequences.
#[pyfunction]
#[pyo3(signature = (reference, converted, exclude_c0 = false))]
fn mcd(reference: &PyFeature, converted: &PyFeature, exclude_c0: bool) -> PyResult<f64> {
    prosody::mcd(&reference.inner, &converted.inner, exclude_c0).py()
}

/// MCD after DTW alignment of the two sequences.
#[pyfunction]
#[pyo3(signature = (reference, converted, exclude_c0 = false))]
fn mcd_aligned(reference: &PyFeature, converted: &PyFeature, exclude_c0: bool) -> PyResult<f64> {
    prosody::mcd_aligned(&reference.inner, &converted.inner, exclude_c0).py()
}

/// `(mean, std)` of voiced log-F0 over all the given tracks.
#[pyfunction]
fn estimate_prosody(tracks: Vec<PyFeature>) -> PyResult<(f64, f64)> {
    let refs: Vec<&FeatureSequence> = tracks.iter().map(|t| &t.inner).collect();
    let s = prosody::estimate_prosody(&refs).py()?;
    Ok((s.mean, s.std))
}

#[pyfunction]
fn logf0_convert(track: &PyFeature, source: (f64, f64), target: (f64, f64)) -> PyResult<PyFeature> {
    let src = ProsodyStats::new(source.0, source.1).py()?;
    let tgt = ProsodyStats::new(target.0, target.1).py()?;
    Ok(wrap(prosody::logf0_convert(&track.inner, &src, &tgt).py()?))
}

/// Largest relative error between backprop and central differences.
#[pyfunction]
#[pyo3(signature = (model, input, target, epsilon = 1e-5))]
fn grad_check(
    model: &PyModel,
    input: &PyFeature,
    target: &PyFeature,
    epsilon: f64,
) -> PyResult<f64> {
    training::grad_check(&model.inner, &input.inner, &target.inner, epsilon).py()
}

#[pymodule]
#[pyo3(name = "dblstm_vc")]
fn dblstm_vc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFeature>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyTrainReport>()?;
    m.add_class::<PyManifest>()?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(train_average, m)?)?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(train_ern, m)?)?;
    m.add_function(wrap_pyfunction!(train_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(convert, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_align, m)?)?;
    m.add_function(wrap_pyfunction!(mcd, m)?)?;
    m.add_function(wrap_pyfunction!(mcd_aligned, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_prosody, m)?)?;
    m.add_function(wrap_pyfunction!(logf0_convert, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    Ok(())
}
