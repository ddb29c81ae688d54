//! Python bindings: OSC codec, pattern matching, the centroid classifier,
//! TherAlmin mappings and replay, and the taxonomy.

use std::collections::BTreeMap;

use faime_core::devices::{self, TherAlminConfig};
use faime_core::learning::{self, LabeledSample};
use faime_core::osc::{self, OscBundle, OscMessage, OscPacket, OscValue, TimeTag};
use faime_core::pipeline::{self, Event};
use pyo3::exceptions::{PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyBytes, PyDict, PyFloat, PyInt, PyList, PyString};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_osc(arg: &Bound<'_, PyAny>) -> PyResult<OscValue> {
    if arg.is_instance_of::<PyBool>() {
        return Err(PyTypeError::new_err("bool is not an OSC argument type"));
    }
    if arg.is_instance_of::<PyInt>() {
        return Ok(OscValue::Int(arg.extract()?));
    }
    if arg.is_instance_of::<PyFloat>() {
        return Ok(OscValue::Float(arg.extract::<f64>()? as f32));
    }
    if arg.is_instance_of::<PyString>() {
        return Ok(OscValue::Str(arg.extract()?));
    }
    if arg.is_instance_of::<PyBytes>() {
        return Ok(OscValue::Blob(arg.extract()?));
    }
    Err(PyTypeError::new_err(format!(
        "unsupported OSC argument type {}",
        arg.get_type().name()?
    )))
}

fn from_osc<'py>(py: Python<'py>, v: &OscValue) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        OscValue::Int(i) => i.into_pyobject(py)?.into_any(),
        OscValue::Float(f) => f.into_pyobject(py)?.into_any(),
        OscValue::Str(s) => s.into_pyobject(py)?.into_any(),
        OscValue::Blob(b) => PyBytes::new(py, b).into_any(),
    })
}

fn args_list<'py>(py: Python<'py>, args: &[OscValue]) -> PyResult<Bound<'py, PyList>> {
    let items = args
        .iter()
        .map(|a| from_osc(py, a))
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, items)
}

fn packet_dict<'py>(py: Python<'py>, p: &OscPacket) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    match p {
        OscPacket::Message(m) => {
            d.set_item("address", &m.addr)?;
            d.set_item("args", args_list(py, &m.args)?)?;
        }
        OscPacket::Bundle(b) => {
            d.set_item("timetag", b.timetag.to_raw())?;
            let elements = b
                .content
                .iter()
                .map(|e| packet_dict(py, e))
                .collect::<PyResult<Vec<_>>>()?;
            d.set_item("elements", PyList::new(py, elements)?)?;
        }
    }
    Ok(d)
}

fn dict_packet(d: &Bound<'_, PyDict>) -> PyResult<OscPacket> {
    if let Some(address) = d.get_item("address")? {
        let args = match d.get_item("args")? {
            Some(a) => a
                .try_iter()?
                .map(|x| to_osc(&x?))
                .collect::<PyResult<Vec<_>>>()?,
            None => vec![],
        };
        return Ok(OscMessage::new(address.extract::<String>()?, args).into());
    }
    let timetag = match d.get_item("timetag")? {
        Some(t) => TimeTag::from_raw(t.extract()?),
        None => TimeTag::IMMEDIATE,
    };
    let mut content = Vec::new();
    if let Some(elements) = d.get_item("elements")? {
        for e in elements.try_iter()? {
            content.push(dict_packet(e?.cast::<PyDict>()?)?);
        }
    }
    Ok(OscPacket::Bundle(OscBundle { timetag, content }))
}

/// Encode one OSC message. ints become `i`, floats `f`, str `s`, bytes `b`.
#[pyfunction]
#[pyo3(signature = (address, args = Vec::new()))]
fn encode_message<'py>(
    py: Python<'py>,
    address: String,
    args: Vec<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyBytes>> {
    let args = args.iter().map(to_osc).collect::<PyResult<Vec<_>>>()?;
    let bytes = osc::encode(&OscMessage::new(address, args).into()).map_err(value_error)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Encode a packet given as a dict: `{"address", "args"}` for a message,
/// `{"timetag", "elements"}` for a bundle.
#[pyfunction]
fn encode_packet<'py>(
    py: Python<'py>,
    packet: &Bound<'py, PyDict>,
) -> PyResult<Bound<'py, PyBytes>> {
    let bytes = osc::encode(&dict_packet(packet)?).map_err(value_error)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Decode bytes into the dict form used by `encode_packet`.
#[pyfunction]
fn decode_packet<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyDict>> {
    packet_dict(py, &osc::decode(data).map_err(value_error)?)
}

#[pyfunction]
fn match_address(pattern: &str, address: &str) -> PyResult<bool> {
    osc::match_address(pattern, address).map_err(value_error)
}

#[pyclass(name = "CentroidModel", module = "faime", frozen)]
struct PyCentroidModel {
    inner: learning::CentroidModel,
}

#[pymethods]
impl PyCentroidModel {
    /// Train from `(label, features)` pairs.
    #[staticmethod]
    #[pyo3(signature = (samples, tau, background_label = "background"))]
    fn train(samples: Vec<(String, Vec<f64>)>, tau: f64, background_label: &str) -> PyResult<Self> {
        let samples: Vec<LabeledSample> = samples
            .into_iter()
            .map(|(l, f)| LabeledSample::new(l, f))
            .collect();
        let inner = learning::CentroidModel::train_with_background(&samples, tau, background_label)
            .map_err(value_error)?;
        Ok(PyCentroidModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(value_error)?;
        Ok(PyCentroidModel { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("model serializes")
    }

    /// `(label, confidence, distance)` for one feature vector.
    fn classify(&self, features: Vec<f64>) -> PyResult<(String, f64, f64)> {
        let c = self.inner.classify(&features).map_err(value_error)?;
        Ok((c.label, c.confidence, c.distance))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().map(str::to_owned).collect()
    }

    #[getter]
    fn centroids(&self) -> BTreeMap<String, Vec<f64>> {
        self.inner.centroids().clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "CentroidModel(dim={}, tau={}, labels={:?})",
            self.inner.dim(),
            self.inner.tau(),
            self.labels()
        )
    }
}

fn theralmin_config(f_min: f64, f_max: f64) -> TherAlminConfig {
    TherAlminConfig {
        f_min,
        f_max,
        ..TherAlminConfig::default()
    }
}

#[pyfunction]
#[pyo3(signature = (p, f_min = 65.41, f_max = 2093.0))]
fn pitch_map(p: f64, f_min: f64, f_max: f64) -> PyResult<f64> {
    let cfg = theralmin_config(f_min, f_max);
    cfg.validate().map_err(value_error)?;
    devices::pitch_map(p, &cfg).map_err(value_error)
}

#[pyfunction]
fn amp_map(v: f64) -> PyResult<f64> {
    devices::amp_map(v).map_err(value_error)
}

/// `(code, category name, subcategory name)` or ValueError.
#[pyfunction]
fn validate_taxonomy(code: &str) -> PyResult<(String, &'static str, &'static str)> {
    let c = devices::validate_taxonomy(code).map_err(value_error)?;
    Ok((c.to_string(), c.category_name(), c.name()))
}

#[pyfunction]
fn taxonomy_codes() -> Vec<String> {
    devices::TaxonomyCode::all()
        .map(|c| c.to_string())
        .collect()
}

/// The augmented theremin device, replayable from Python.
#[pyclass(name = "TherAlmin", module = "faime", frozen)]
struct PyTherAlmin {
    config: TherAlminConfig,
    model: learning::CentroidModel,
}

#[pymethods]
impl PyTherAlmin {
    /// `config_json` uses the same schema as the `theralmin` section of a
    /// device config file; omitted means defaults.
    #[new]
    #[pyo3(signature = (model, config_json = None))]
    fn new(model: &PyCentroidModel, config_json: Option<&str>) -> PyResult<Self> {
        let cfg: TherAlminConfig = match config_json {
            Some(text) => serde_json::from_str(text).map_err(value_error)?,
            None => TherAlminConfig::default(),
        };
        devices::build_theralmin(&cfg, &model.inner).map_err(value_error)?;
        Ok(PyTherAlmin {
            config: cfg,
            model: model.inner.clone(),
        })
    }

    /// Run a JSON Lines trace and return `(t_us, address, args)` per
    /// emitted message.
    fn replay<'py>(
        &self,
        py: Python<'py>,
        jsonl: &str,
    ) -> PyResult<Vec<(u64, String, Bound<'py, PyList>)>> {
        let events: Vec<Event> = pipeline::parse_replay(jsonl.as_bytes()).map_err(value_error)?;
        let device = devices::build_theralmin(&self.config, &self.model).map_err(value_error)?;
        let out = pipeline::run_replay(&device.graph, &events).map_err(value_error)?;
        out.iter()
            .filter_map(|e| e.control().map(|m| (e.t, m)))
            .map(|(t, m)| Ok((t, m.addr.clone(), args_list(py, &m.args)?)))
            .collect()
    }
}

#[pymodule]
fn faime(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(encode_message, m)?)?;
    m.add_function(wrap_pyfunction!(encode_packet, m)?)?;
    m.add_function(wrap_pyfunction!(decode_packet, m)?)?;
    m.add_function(wrap_pyfunction!(match_address, m)?)?;
    m.add_function(wrap_pyfunction!(pitch_map, m)?)?;
    m.add_function(wrap_pyfunction!(amp_map, m)?)?;
    m.add_function(wrap_pyfunction!(validate_taxonomy, m)?)?;
    m.add_function(wrap_pyfunction!(taxonomy_codes, m)?)?;
    m.add_class::<PyCentroidModel>()?;
    m.add_class::<PyTherAlmin>()?;
    Ok(())
}
