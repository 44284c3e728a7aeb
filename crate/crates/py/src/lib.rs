//! Python bindings for the `nested_polar` library.
//! The pyo3 0.22 method macros trip `useless_conversion` on every `PyResult`.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use nested_polar::channel_codec::{
    build_channel_code_guarded, ChannelCode as CoreChannelCode, Transmission as CoreTransmission,
};
use nested_polar::construction::{code_rate, DEFAULT_BETA, DEFAULT_GUARD_SIGMAS, DEFAULT_TRIALS};
use nested_polar::dmc::{Dmc as CoreDmc, JointSource as CoreJointSource, StochasticMatrix};
use nested_polar::group::{FiniteAbelianGroup, NestedCosets, Subgroup};
use nested_polar::harness::{self, oracle, ExperimentConfig, Mode, PartialConfig};
use nested_polar::lossy_codec::{build_source_code_guarded, QuantizedMessage, SourceCode as CoreSourceCode};

fn err(e: nested_polar::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<StochasticMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows differ in length"));
    }
    StochasticMatrix::new(rows.len(), cols, rows.concat()).map_err(err)
}

#[pyclass(frozen)]
struct Group(FiniteAbelianGroup);

impl Group {
    fn subgroup(&self, elements: &[usize]) -> PyResult<Subgroup> {
        Subgroup::from_elements(&self.0, elements).map_err(err)
    }
}

#[pymethods]
impl Group {
    /// A product of cyclic groups such as `"Z4"` or `"Z2xZ2"`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Group).map_err(err)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    fn add(&self, a: usize, b: usize) -> usize {
        self.0.add(a, b)
    }

    /// Element lists of all subgroups, smallest first.
    fn subgroups(&self) -> PyResult<Vec<Vec<usize>>> {
        Ok(self.0.enumerate_subgroups().map_err(err)?.iter().map(|s| s.elements().to_vec()).collect())
    }

    /// Split `g` as `k + m + t` for subgroups `K <= H` given by their elements.
    fn decompose(&self, g: usize, k: Vec<usize>, h: Vec<usize>) -> PyResult<(usize, usize, usize)> {
        let nc = NestedCosets::new(&self.subgroup(&k)?, &self.subgroup(&h)?).map_err(err)?;
        Ok(nc.decompose(g))
    }

    fn __repr__(&self) -> String {
        format!("Group('{}')", self.0)
    }
}

#[pyclass(frozen)]
#[derive(Clone)]
struct Dmc(CoreDmc);

#[pymethods]
impl Dmc {
    /// Channel with inputs labelled by `group` and transition rows `rows[x][y]`.
    #[new]
    fn new(group: &Group, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        CoreDmc::from_matrix(group.0.clone(), matrix(&rows)?).map(Dmc).map_err(err)
    }

    #[staticmethod]
    fn bsc(p: f64) -> PyResult<Self> {
        CoreDmc::bsc(p).map(Dmc).map_err(err)
    }

    #[staticmethod]
    fn bec(eps: f64) -> PyResult<Self> {
        CoreDmc::bec(eps).map(Dmc).map_err(err)
    }

    #[staticmethod]
    fn z_channel(p: f64) -> PyResult<Self> {
        CoreDmc::z_channel(p).map(Dmc).map_err(err)
    }

    #[staticmethod]
    fn qsc(group: &Group, p: f64) -> PyResult<Self> {
        CoreDmc::qsc(group.0.clone(), p).map(Dmc).map_err(err)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.0.input_size()).map(|x| self.0.row(x).to_vec()).collect()
    }

    fn symmetric_capacity(&self) -> f64 {
        self.0.symmetric_capacity()
    }

    fn mutual_information(&self, p_x: Vec<f64>) -> f64 {
        self.0.mutual_information(&p_x)
    }

    fn bhattacharyya(&self) -> f64 {
        self.0.bhattacharyya()
    }

    fn z_d(&self, d: usize) -> f64 {
        self.0.z_d(d)
    }

    fn minus(&self) -> PyResult<Self> {
        self.0.minus_transform().map(Dmc).map_err(err)
    }

    fn plus(&self) -> PyResult<Self> {
        self.0.plus_transform().map(Dmc).map_err(err)
    }
}

#[pyclass(frozen)]
#[derive(Clone)]
struct JointSource(CoreJointSource);

#[pymethods]
impl JointSource {
    /// Source law `p_x` and forward test channel `test[x][u]` with `u` in `group`.
    #[new]
    fn new(p_x: Vec<f64>, test: Vec<Vec<f64>>, group: &Group) -> PyResult<Self> {
        CoreJointSource::from_test_channel(&p_x, &matrix(&test)?, group.0.clone()).map(JointSource).map_err(err)
    }

    #[staticmethod]
    fn dsbs(agreement: f64) -> PyResult<Self> {
        CoreJointSource::dsbs(agreement).map(JointSource).map_err(err)
    }

    fn mutual_information(&self) -> f64 {
        self.0.mutual_information()
    }

    fn p_x(&self) -> Vec<f64> {
        self.0.p_x()
    }
}

#[pyclass(frozen)]
struct SourceCode(CoreSourceCode);

#[pymethods]
impl SourceCode {
    #[new]
    #[pyo3(signature = (joint, n, seed, beta = DEFAULT_BETA, trials = DEFAULT_TRIALS, guard_sigmas = DEFAULT_GUARD_SIGMAS))]
    fn new(
        py: Python<'_>,
        joint: &JointSource,
        n: u32,
        seed: u64,
        beta: f64,
        trials: usize,
        guard_sigmas: f64,
    ) -> PyResult<Self> {
        py.allow_threads(|| build_source_code_guarded(&joint.0, n, beta, trials, guard_sigmas, seed))
            .map(SourceCode)
            .map_err(err)
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.0.rate()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn sample_source(&self, seed: u64) -> Vec<usize> {
        self.0.sample_source(seed)
    }

    /// Quantize `x`; returns the serialized message and the encoder-side reconstruction.
    fn encode<'py>(&self, py: Python<'py>, x: Vec<usize>, seed: u64) -> PyResult<(Bound<'py, PyBytes>, Vec<usize>)> {
        let enc = self.0.encode(&x, seed).map_err(err)?;
        Ok((PyBytes::new_bound(py, &enc.message.to_bytes()), enc.u))
    }

    fn decode(&self, message: &[u8]) -> PyResult<Vec<usize>> {
        let msg = QuantizedMessage::from_bytes(message, &self.0).map_err(err)?;
        self.0.decode(&msg).map_err(err)
    }

    fn distortion(&self, x: Vec<usize>, u: Vec<usize>) -> f64 {
        self.0.distortion(&x, &u)
    }

    /// Quantize `blocks` source blocks and return summary statistics.
    fn diagnostics<'py>(&self, py: Python<'py>, blocks: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let xs: Vec<Vec<usize>> = (0..blocks as u64).map(|b| self.0.sample_source(seed.wrapping_add(b))).collect();
        let d = py.allow_threads(|| self.0.diagnostics(&xs, seed)).map_err(err)?;
        let out = PyDict::new_bound(py);
        out.set_item("d_avg", d.d_avg)?;
        out.set_item("d1_proxy", d.d1_proxy)?;
        out.set_item("d2_proxy", d.d2_proxy)?;
        out.set_item("joint_tv", d.joint_tv)?;
        out.set_item("u_marginal", d.u_marginal)?;
        out.set_item("exact_tv", d.exact_tv)?;
        Ok(out)
    }

    fn construction(&self) -> String {
        self.0.construction().to_text()
    }
}

#[pyclass(frozen)]
struct Transmission(CoreTransmission);

#[pymethods]
impl Transmission {
    #[getter]
    fn x(&self) -> Vec<usize> {
        self.0.x.clone()
    }

    #[getter]
    fn side(&self) -> Vec<usize> {
        self.0.side.digits().to_vec()
    }
}

#[pyclass(frozen)]
struct ChannelCode(CoreChannelCode);

#[pymethods]
impl ChannelCode {
    #[new]
    #[pyo3(signature = (channel, p_x, n, seed, beta = DEFAULT_BETA, trials = DEFAULT_TRIALS, guard_sigmas = DEFAULT_GUARD_SIGMAS, rate_cap = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        py: Python<'_>,
        channel: &Dmc,
        p_x: Vec<f64>,
        n: u32,
        seed: u64,
        beta: f64,
        trials: usize,
        guard_sigmas: f64,
        rate_cap: Option<f64>,
    ) -> PyResult<Self> {
        py.allow_threads(|| build_channel_code_guarded(&p_x, &channel.0, n, beta, trials, guard_sigmas, seed, rate_cap))
            .map(ChannelCode)
            .map_err(err)
    }

    #[getter]
    fn gross_rate(&self) -> f64 {
        self.0.gross_rate()
    }

    #[getter]
    fn side_rate(&self) -> f64 {
        self.0.side_rate()
    }

    #[getter]
    fn net_rate(&self) -> f64 {
        self.0.net_rate()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn random_message(&self, seed: u64) -> Vec<usize> {
        self.0.random_message(seed)
    }

    fn encode(&self, message: Vec<usize>, seed: u64) -> PyResult<Transmission> {
        self.0.encode(&message, seed).map(Transmission).map_err(err)
    }

    fn simulate(&self, x: Vec<usize>, seed: u64) -> Vec<usize> {
        self.0.simulate(&x, seed)
    }

    /// Decode `y` using the side information carried by `tx`.
    fn decode(&self, y: Vec<usize>, tx: &Transmission) -> PyResult<Vec<usize>> {
        self.0.decode(&y, &tx.0.side).map_err(err)
    }

    fn diagnostics<'py>(&self, py: Python<'py>, blocks: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let d = py.allow_threads(|| self.0.diagnostics(blocks, seed)).map_err(err)?;
        let out = PyDict::new_bound(py);
        out.set_item("bler", d.bler)?;
        out.set_item("p1_proxy", d.p1_proxy)?;
        out.set_item("x_marginal", d.x_marginal)?;
        out.set_item("xy_tv", d.xy_tv)?;
        out.set_item("exact_tv", d.exact_tv)?;
        Ok(out)
    }

    fn construction(&self) -> String {
        self.0.construction().to_text()
    }

    fn rate_matches_cross_check(&self) -> bool {
        code_rate(self.0.construction()).matches
    }
}

/// Capacity and capacity-achieving input of a channel given as rows `w[x][y]`.
#[pyfunction]
fn capacity(rows: Vec<Vec<f64>>) -> PyResult<(f64, Vec<f64>)> {
    let r = oracle::capacity(&matrix(&rows)?).map_err(err)?;
    Ok((r.capacity, r.input))
}

/// Rate-distortion function at `d` for source `p_x` and distortion table `dist[x][u]`.
#[pyfunction]
fn rate_distortion(p_x: Vec<f64>, dist: Vec<Vec<f64>>, d: f64) -> PyResult<f64> {
    oracle::rate_distortion(&p_x, &dist, d).map_err(err)
}

/// Run the invariant suite; returns `(check, passed, detail)` rows.
#[pyfunction]
#[pyo3(signature = (seed = 2024, only = None))]
fn verify(py: Python<'_>, seed: u64, only: Option<&str>) -> Vec<(String, bool, String)> {
    let report = py.allow_threads(|| harness::verify::verify_filtered(seed, None, only));
    report.checks.into_iter().map(|c| (format!("{}.{}", c.module, c.name), c.passed, c.detail)).collect()
}

/// Run a sweep described by a TOML document (the CLI config format); returns CSV text.
#[pyfunction]
#[pyo3(signature = (mode, config))]
fn sweep(py: Python<'_>, mode: &str, config: &str) -> PyResult<String> {
    let mode: Mode = mode.parse().map_err(err)?;
    let cfg = ExperimentConfig::resolve(mode, PartialConfig::from_toml(config).map_err(err)?, None).map_err(err)?;
    py.allow_threads(|| match mode {
        Mode::SweepRd | Mode::Quantize => harness::run_rd_sweep(&cfg),
        Mode::SweepBler | Mode::Transmit => harness::run_bler_sweep(&cfg),
        _ => Err(nested_polar::Error::Config(format!("{mode} is not a sweep"))),
    })
    .map_err(err)
}

#[pymodule]
fn nested_polar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Group>()?;
    m.add_class::<Dmc>()?;
    m.add_class::<JointSource>()?;
    m.add_class::<SourceCode>()?;
    m.add_class::<ChannelCode>()?;
    m.add_class::<Transmission>()?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(rate_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
