//! Python bindings. Structured values (plans, prompts, manifests) cross the
//! boundary as plain dicts and lists; spectrograms and motions are wrapped.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

use mmforge_core::alignment_math::{self as am, EmbeddingBatch, InfoNceForm, LoraLinear};
use mmforge_core::dataset_pipeline::{self as dp, BuildOptions, Colormap, ProcessingParams};
use mmforge_core::domain_randomization::{self as dr, RandomizationConfig, RandomizationPlan};
use mmforge_core::mesh_motion::{self as mm, procedural};
use mmforge_core::radar_model::{self as rm, RadarFile};
use mmforge_core::scenario_text::{self as st, LlmEndpoint, PromptStyle, ScenarioRequest, SynonymLexicon};
use mmforge_core::signal_processing as sp;
use mmforge_core::Vec3;

create_exception!(mmforge, MmforgeError, PyException, "Error raised by the mmforge core; `kind` names the failure.");

fn err(e: mmforge_core::Error) -> PyErr {
    let kind = e.kind();
    let py_err = MmforgeError::new_err(format!("{kind}: {e}"));
    Python::attach(|py| {
        let _ = py_err.value(py).setattr("kind", kind);
    });
    py_err
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for mmforge_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| MmforgeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Parse an optional JSON document given as a string.
fn from_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        Some(t) => serde_json::from_str(t).map_err(|e| MmforgeError::new_err(format!("json: {e}"))),
        None => Ok(T::default()),
    }
}

fn flatten(rows: &[Vec<f64>], what: &str) -> PyResult<(usize, usize, Vec<f64>)> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(MmforgeError::new_err(format!("dimension_mismatch: {what} rows differ in length")));
    }
    Ok((rows.len(), cols, rows.concat()))
}

type Rows = Vec<Vec<f64>>;

fn unflatten(values: &[f64], cols: usize) -> Vec<Vec<f64>> {
    values.chunks(cols.max(1)).map(<[f64]>::to_vec).collect()
}

/// Radar parameters; defaults are the 77 GHz configuration.
#[pyclass(name = "RadarConfig", module = "mmforge", from_py_object)]
#[derive(Clone)]
struct PyRadarConfig {
    inner: RadarFile,
}

#[pymethods]
impl PyRadarConfig {
    #[new]
    #[pyo3(signature = (carrier_hz=77e9, bandwidth_hz=4e9, samples_per_chirp=256, adc_rate_hz=5e6, chirps_per_frame=128, frame_rate_hz=50.0))]
    fn new(
        carrier_hz: f64,
        bandwidth_hz: f64,
        samples_per_chirp: usize,
        adc_rate_hz: f64,
        chirps_per_frame: usize,
        frame_rate_hz: f64,
    ) -> PyResult<Self> {
        let config = rm::RadarConfig::new(carrier_hz, bandwidth_hz, samples_per_chirp, adc_rate_hz, chirps_per_frame, frame_rate_hz);
        config.validate().py()?;
        Ok(PyRadarConfig {
            inner: RadarFile {
                config,
                antenna: rm::AntennaPattern::default(),
            },
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyRadarConfig {
            inner: RadarFile::load(path).py()?,
        })
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.inner.config.wavelength()
    }

    #[getter]
    fn pri(&self) -> f64 {
        self.inner.config.pri()
    }

    #[getter]
    fn max_delay(&self) -> f64 {
        self.inner.config.max_delay()
    }

    /// Range and Doppler resolution and related quantities.
    fn derived<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &rm::derive(&self.inner.config).py()?)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }
}

/// An animated mesh.
#[pyclass(name = "MeshSequence", module = "mmforge", from_py_object)]
#[derive(Clone)]
struct PyMeshSequence {
    inner: mm::MeshSequence,
}

#[pymethods]
impl PyMeshSequence {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyMeshSequence {
            inner: mm::load_mesh_sequence(path).py()?,
        })
    }

    /// Procedural walking figure.
    #[staticmethod]
    #[pyo3(signature = (duration_s=2.0, speed_m_s=0.8, heading_deg=0.0, around=12, along=4))]
    fn walker(duration_s: f64, speed_m_s: f64, heading_deg: f64, around: u32, along: u32) -> PyResult<Self> {
        let h = heading_deg.to_radians();
        let params = procedural::WalkerParams {
            duration_s,
            speed_m_s,
            heading: Vec3::new(h.sin(), 0.0, h.cos()),
            around,
            along,
            ..Default::default()
        };
        Ok(PyMeshSequence {
            inner: procedural::walker(&params).py()?,
        })
    }

    /// Write OBJ frames plus `motion.json` under `dir`; returns the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        mm::save_mesh_sequence(&self.inner, dir).py()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration()
    }

    #[getter]
    fn keyframes(&self) -> usize {
        self.inner.frames().len()
    }

    #[getter]
    fn facet_count(&self) -> usize {
        self.inner.topology().facet_count()
    }

    #[getter]
    fn segment_ids(&self) -> Vec<u32> {
        self.inner.topology().segment_ids()
    }

    fn __repr__(&self) -> String {
        format!(
            "MeshSequence(keyframes={}, facets={}, duration={:.3})",
            self.keyframes(),
            self.facet_count(),
            self.duration()
        )
    }
}

/// Time x Doppler map, row-major.
#[pyclass(name = "Spectrogram", module = "mmforge", from_py_object)]
#[derive(Clone)]
struct PySpectrogram {
    inner: sp::Spectrogram,
}

#[pymethods]
impl PySpectrogram {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PySpectrogram {
            inner: dp::read_spectrogram(path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dp::write_spectrogram(&self.inner, path).py()
    }

    #[pyo3(signature = (path, colormap="viridis"))]
    fn render_png(&self, path: PathBuf, colormap: &str) -> PyResult<()> {
        let cmap = match colormap {
            "viridis" => Colormap::Viridis,
            "gray" => Colormap::Gray,
            other => return Err(MmforgeError::new_err(format!("invalid_parameter: unknown colormap `{other}`"))),
        };
        dp::render_png(&self.inner, path, cmap).py()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn is_db(&self) -> bool {
        self.inner.is_db
    }

    #[getter]
    fn frame_rate_hz(&self) -> f64 {
        self.inner.frame_rate_hz
    }

    #[getter]
    fn doppler_resolution_hz(&self) -> f64 {
        self.inner.doppler_resolution_hz
    }

    /// Rows of the map as nested lists.
    fn to_list(&self) -> Vec<Vec<f64>> {
        unflatten(&self.inner.values, self.inner.width)
    }

    /// Signed Doppler bin of the strongest column in each row.
    fn peak_offsets(&self) -> Vec<i64> {
        self.inner.peak_columns().into_iter().map(|c| self.inner.doppler_offset(c)).collect()
    }

    #[pyo3(signature = (floor_db=-160.0))]
    fn to_db(&self, floor_db: f64) -> PyResult<Self> {
        Ok(PySpectrogram {
            inner: sp::to_db(&self.inner, floor_db).py()?,
        })
    }

    /// Max-normalized power law on a linear spectrogram.
    fn apply_nonlinearity(&self, gamma: f64) -> PyResult<Self> {
        Ok(PySpectrogram {
            inner: dr::apply_nonlinearity(&self.inner, gamma).py()?,
        })
    }

    /// Split into `patch_size` squares; returns the flattened patches.
    fn patchify(&self, patch_size: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(am::patchify(&self.inner, patch_size, false).py()?.patches)
    }

    fn __repr__(&self) -> String {
        format!(
            "Spectrogram(height={}, width={}, is_db={})",
            self.inner.height, self.inner.width, self.inner.is_db
        )
    }
}

/// Draw a randomization plan. `config` is a JSON document; defaults if None.
#[pyfunction]
#[pyo3(signature = (seed, segment_ids, config=None))]
fn sample_plan<'py>(py: Python<'py>, seed: u64, segment_ids: Vec<u32>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let config: RandomizationConfig = from_json(config)?;
    to_py(py, &dr::sample_plan(&config, seed, &segment_ids).py()?)
}

/// Motion to (linear, dB) spectrograms with randomization drawn from `seed`.
#[pyfunction]
#[pyo3(signature = (motion, seed=0, radar=None, randomization=None, processing=None))]
fn synthesize(
    py: Python<'_>,
    motion: &PyMeshSequence,
    seed: u64,
    radar: Option<&PyRadarConfig>,
    randomization: Option<&str>,
    processing: Option<&str>,
) -> PyResult<(PySpectrogram, PySpectrogram)> {
    let radar = radar.map_or_else(RadarFile::default, |r| r.inner.clone());
    let rand = dp::randomization_for(&radar, &from_json::<RandomizationConfig>(randomization)?);
    let params: ProcessingParams = from_json(processing)?;
    let seq = &motion.inner;
    let out = py
        .detach(|| {
            let plan: RandomizationPlan = dr::sample_plan(&rand, seed, &seq.topology().segment_ids())?;
            dp::run_pipeline(seq, &radar.config, &plan, &params)
        })
        .py()?;
    Ok((PySpectrogram { inner: out.linear }, PySpectrogram { inner: out.db }))
}

/// Build a dataset from a spec file; returns the manifest as a dict.
#[pyfunction]
#[pyo3(signature = (spec, out, seed=0, fail_fast=false, threads=None))]
fn build_dataset<'py>(
    py: Python<'py>,
    spec: PathBuf,
    out: PathBuf,
    seed: u64,
    fail_fast: bool,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let m = py
        .detach(|| dp::build_dataset(&spec, &out, seed, BuildOptions { fail_fast, threads }))
        .py()?;
    let d = PyDict::new(py);
    d.set_item("header", to_py(py, &m.header)?)?;
    d.set_item("entries", to_py(py, &m.entries)?)?;
    d.set_item("errors", to_py(py, &m.errors)?)?;
    Ok(d.into_any())
}

/// Motion prompts for a scenario such as "kitchen: wave, sit down".
#[pyfunction]
#[pyo3(signature = (scenario, count=5, style="diverse", seed=0, llm_endpoint=None, model=None))]
fn generate_prompts<'py>(
    py: Python<'py>,
    scenario: &str,
    count: usize,
    style: &str,
    seed: u64,
    llm_endpoint: Option<String>,
    model: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let style: PromptStyle = style.parse().py()?;
    let req = ScenarioRequest::new(scenario, count, style).py()?;
    let lex = SynonymLexicon::builtin();
    let prompts = py
        .detach(|| match llm_endpoint {
            Some(base_url) => {
                let mut ep = LlmEndpoint {
                    base_url,
                    ..LlmEndpoint::default()
                };
                if let Some(m) = model {
                    ep.model = m;
                }
                st::llm_generate_prompts(&req, &ep, &lex, seed)
            }
            None => st::expand_grammar(&req, &lex, seed),
        })
        .py()?;
    to_py(py, &prompts)
}

fn batch(signal: Vec<Vec<f64>>, text: Vec<Vec<f64>>, temperature: f64) -> PyResult<EmbeddingBatch> {
    let (n, d, s) = flatten(&signal, "signal")?;
    let (nt, dt, t) = flatten(&text, "text")?;
    if (n, d) != (nt, dt) {
        return Err(MmforgeError::new_err(format!("dimension_mismatch: signal {n}x{d}, text {nt}x{dt}")));
    }
    EmbeddingBatch::unnormalized(n, d, s, t, temperature).py()
}

fn form(name: &str) -> PyResult<InfoNceForm> {
    match name {
        "joint" => Ok(InfoNceForm::Joint),
        "symmetric" => Ok(InfoNceForm::Symmetric),
        other => Err(MmforgeError::new_err(format!("invalid_parameter: unknown InfoNCE form `{other}`"))),
    }
}

/// Contrastive loss of paired rows. `form` is "joint" or "symmetric".
#[pyfunction]
#[pyo3(signature = (signal, text, temperature, form="joint"))]
fn infonce_loss(signal: Vec<Vec<f64>>, text: Vec<Vec<f64>>, temperature: f64, form: &str) -> PyResult<f64> {
    am::infonce_loss_with(&batch(signal, text, temperature)?, self::form(form)?).py()
}

/// Loss and gradients with respect to the signal and text rows.
#[pyfunction]
#[pyo3(signature = (signal, text, temperature, form="joint"))]
fn infonce_grad(
    signal: Vec<Vec<f64>>,
    text: Vec<Vec<f64>>,
    temperature: f64,
    form: &str,
) -> PyResult<(f64, Rows, Rows)> {
    let b = batch(signal, text, temperature)?;
    let g = am::infonce_grad_with(&b, self::form(form)?).py()?;
    Ok((g.loss, unflatten(&g.signal, b.dim), unflatten(&g.text, b.dim)))
}

/// `w0 x + b (a x)` with `w0` d x k, `a` r x k and `b` d x r.
#[pyfunction]
fn lora_forward(w0: Vec<Vec<f64>>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, x: Vec<f64>) -> PyResult<Vec<f64>> {
    let (d, k, w0) = flatten(&w0, "w0")?;
    let (rank, _, a) = flatten(&a, "a")?;
    let (_, _, b) = flatten(&b, "b")?;
    let layer = LoraLinear::new(d, k, rank, w0, a, b).py()?;
    am::lora_forward(&layer, &x).py()
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    am::cosine_similarity(&u, &v).py()
}

/// Label with the highest cosine similarity; ties go to the first.
#[pyfunction]
fn zero_shot_classify(signal: Vec<f64>, labels: Vec<(String, Vec<f64>)>) -> PyResult<String> {
    let i = am::zero_shot_classify(&signal, &labels).py()?;
    Ok(labels[i].0.clone())
}

#[pymodule]
fn mmforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MmforgeError", m.py().get_type::<MmforgeError>())?;
    m.add("__version__", mmforge_core::TOOL_VERSION)?;
    m.add_class::<PyRadarConfig>()?;
    m.add_class::<PyMeshSequence>()?;
    m.add_class::<PySpectrogram>()?;
    m.add_function(wrap_pyfunction!(sample_plan, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(build_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_prompts, m)?)?;
    m.add_function(wrap_pyfunction!(infonce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(infonce_grad, m)?)?;
    m.add_function(wrap_pyfunction!(lora_forward, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(zero_shot_classify, m)?)?;
    Ok(())
}
