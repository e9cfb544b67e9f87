//! Python bindings: network loading, single protocol runs, campaigns,
//! the rateless codec, the block-size model and the analytic calculators.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edrp_core::analytics;
use edrp_core::campaign::{self, ConfigFile};
use edrp_core::mac::{self, LqCsmaParams, LqMapping};
use edrp_core::mlbss::{self, FeatureVector, OrdinalTreeModel};
use edrp_core::protocols::{self, ProtocolKind, ProtocolParams};
use edrp_core::rateless::{self, BlockSizeMenu};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A dissemination tree with link-quality traces and collision domains.
#[pyclass(name = "Network", frozen)]
struct PyNetwork {
    inner: Arc<edrp_core::Network>,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = edrp_core::Network::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyNetwork { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyNetwork { inner: Arc::new(edrp_core::Network::parse(text).map_err(value_err)?) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn max_rank(&self) -> u32 {
        self.inner.max_rank()
    }

    fn children(&self, node: u16) -> Vec<u16> {
        self.inner.children_of(edrp_core::NodeId(node)).iter().map(|n| n.0).collect()
    }
}

/// An ordinal decision tree mapping link features to a block-size class.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: Arc<OrdinalTreeModel>,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Self::parse(&text)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyModel { inner: Arc::new(mlbss::import_model(text).map_err(value_err)?) })
    }

    fn predict(&self, rank: u32, pdr: f64, rnp: f64) -> usize {
        self.inner.predict(&FeatureVector::new(rank, pdr, rnp))
    }

    fn export(&self) -> PyResult<String> {
        Ok(mlbss::export_model(&self.inner).map_err(value_err)?.text)
    }

    fn footprint_bytes(&self) -> usize {
        mlbss::footprint_bytes(&self.inner)
    }

    fn depth(&self) -> usize {
        self.inner.depth()
    }
}

/// Clamped backoff window `(lower, upper)` in ms for a link quality.
#[pyfunction]
#[pyo3(signature = (lq, t_min=20.0, t_max=640.0, x=61.0, y=-30.0, literal=false))]
fn select_window(lq: f64, t_min: f64, t_max: f64, x: f64, y: f64, literal: bool) -> PyResult<(f64, f64)> {
    let p = LqCsmaParams {
        t_min,
        t_max,
        x,
        y,
        mapping: if literal { LqMapping::Literal } else { LqMapping::Inverted },
        ..LqCsmaParams::default()
    };
    let w = mac::select_window(lq, &p).map_err(value_err)?;
    Ok((w.lower, w.upper))
}

/// `P(T > delta)` for a uniform `[a, b]` service time.
#[pyfunction]
fn collision_prob_uniform(a: f64, b: f64, delta: f64) -> PyResult<f64> {
    let d = analytics::ServiceTimeDistribution::uniform(a, b).map_err(value_err)?;
    Ok(analytics::collision_prob(&d, delta))
}

/// `P(T > delta)` for the empirical distribution of `samples`.
#[pyfunction]
fn collision_prob_empirical(samples: Vec<f64>, delta: f64) -> PyResult<f64> {
    let d = analytics::ServiceTimeDistribution::empirical(samples).map_err(value_err)?;
    Ok(analytics::collision_prob(&d, delta))
}

#[pyfunction]
#[pyo3(signature = (block_size, theta, data_len=1000))]
fn analytic_goodput<'py>(
    py: Python<'py>,
    block_size: usize,
    theta: f64,
    data_len: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = analytics::GoodputConfig { data_len, ..Default::default() };
    let m = analytics::analytic_goodput(block_size, theta, &cfg).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("useful", m.expected_useful)?;
    d.set_item("overhead", m.expected_overhead)?;
    d.set_item("loss", m.expected_loss)?;
    d.set_item("goodput", m.goodput())?;
    Ok(d)
}

/// Best block size and `(size, goodput, regret)` for every menu entry.
#[pyfunction]
#[pyo3(signature = (theta, menu=vec![16, 32, 64], data_len=1000))]
fn optimal_block_size(theta: f64, menu: Vec<usize>, data_len: usize) -> PyResult<(usize, Vec<(usize, f64, f64)>)> {
    let menu = BlockSizeMenu::new(menu).map_err(value_err)?;
    let cfg = analytics::GoodputConfig { data_len, ..Default::default() };
    let (best, table) = analytics::brute_force_optimal_b(&menu, theta, &cfg).map_err(value_err)?;
    let regrets = analytics::regret_table(&menu, theta, &cfg).map_err(value_err)?;
    Ok((best, table.iter().zip(regrets).map(|(m, r)| (m.block_size, m.goodput(), r.regret)).collect()))
}

#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    analytics::pearson(&xs, &ys).map_err(value_err)
}

/// Encode `data`, erase blocks with probability `loss`, decode.
#[pyfunction]
#[pyo3(signature = (data, block_size=32, loss=0.0, seed=1))]
fn codec_roundtrip<'py>(
    py: Python<'py>,
    data: &[u8],
    block_size: usize,
    loss: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = rateless::roundtrip(data, block_size, loss, seed, 100_000).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("k", r.k)?;
    d.set_item("sent", r.sent)?;
    d.set_item("received", r.received)?;
    d.set_item("complete", r.complete)?;
    d.set_item("exact", r.exact)?;
    Ok(d)
}

/// One dissemination of `data_len` bytes; returns headline metrics.
#[pyfunction]
#[pyo3(signature = (network, protocol, seed=1, data_len=1000, fixed_block=None, model=None))]
fn run_protocol<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    protocol: &str,
    seed: u64,
    data_len: usize,
    fixed_block: Option<usize>,
    model: Option<&PyModel>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: ProtocolKind = protocol.parse().map_err(value_err)?;
    let params = ProtocolParams { fixed_block, model: model.map(|m| m.inner.clone()), ..ProtocolParams::default() };
    let data = campaign::campaign_data(seed, data_len);
    let net = network.inner.clone();
    let out = py.detach(move || protocols::run_protocol(kind, &net, &data, &params, seed)).map_err(value_err)?;
    let m = &out.metrics;
    let d = PyDict::new(py);
    d.set_item("goodput_bps", m.goodput_bps())?;
    d.set_item("completion_s", m.completion_time().as_secs())?;
    d.set_item("complete", m.all_complete())?;
    d.set_item("data_packets", m.data_packets())?;
    d.set_item("control_packets", m.control_packets())?;
    d.set_item("collided_packets", m.collided_packets())?;
    d.set_item("block_choices", out.choices.iter().map(|(n, b)| (n.0, *b)).collect::<Vec<_>>())?;
    Ok(d)
}

/// Runs a campaign and writes its artifacts; returns per-round rows.
#[pyfunction]
#[pyo3(signature = (config=None, network=None, protocol=None, rounds=None, seed=None, fixed_block=None, model=None, out_dir=None))]
#[allow(clippy::too_many_arguments)]
fn run_campaign(
    py: Python<'_>,
    config: Option<PathBuf>,
    network: Option<PathBuf>,
    protocol: Option<String>,
    rounds: Option<usize>,
    seed: Option<u64>,
    fixed_block: Option<usize>,
    model: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> PyResult<Vec<(usize, u64, f64, f64, bool)>> {
    let base = match &config {
        Some(p) => ConfigFile::load(p).map_err(value_err)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile { network, protocol, rounds, seed, fixed_block, model, out_dir, ..ConfigFile::default() };
    let cfg = base.overlay(flags).resolve().map_err(value_err)?;
    let report = py.detach(move || campaign::run_campaign(&cfg)).map_err(value_err)?;
    Ok(report.rounds.iter().map(|r| (r.round, r.seed, r.goodput_bps, r.completion_s, r.complete)).collect())
}

#[pymodule]
fn edrp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(select_window, m)?)?;
    m.add_function(wrap_pyfunction!(collision_prob_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(collision_prob_empirical, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_goodput, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_block_size, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(codec_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add("PROTOCOLS", ProtocolKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}
