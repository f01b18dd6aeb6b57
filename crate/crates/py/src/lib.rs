//! Python module `pbmst_py`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pbmst::codes::{CodeSpec, ComponentCode};
use pbmst::group::FiniteAbelianGroup;
use pbmst::lattice::NestedLatticeCodebook;
use pbmst::limits::LimitReport;
use pbmst::message::Message;
use pbmst::sim::{CodebookConfig, CurvePoint, Experiment, ShiftRuleSetting, SimConfig, SourceConfig, SourceKindSetting};

fn err(e: pbmst::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Group", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGroup {
    inner: FiniteAbelianGroup,
}

#[pymethods]
impl PyGroup {
    #[staticmethod]
    fn cyclic(q: usize) -> PyResult<Self> {
        Ok(PyGroup {
            inner: FiniteAbelianGroup::cyclic(q).map_err(err)?,
        })
    }

    #[staticmethod]
    fn z3z3() -> Self {
        PyGroup {
            inner: FiniteAbelianGroup::product_z3z3(),
        }
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn add(&self, a: usize, b: usize) -> PyResult<usize> {
        self.inner.check_element(a).map_err(err)?;
        self.inner.check_element(b).map_err(err)?;
        Ok(self.inner.add(a, b))
    }

    fn neg(&self, a: usize) -> PyResult<usize> {
        self.inner.check_element(a).map_err(err)?;
        Ok(self.inner.neg(a))
    }
}

#[pyclass(name = "Codebook", frozen)]
pub struct PyCodebook {
    inner: NestedLatticeCodebook,
}

#[pymethods]
impl PyCodebook {
    /// `lattice` is `z3`, `z5`, `a2`, ...; `shift` defaults to the origin.
    #[new]
    #[pyo3(signature = (lattice, alpha, shift=None))]
    fn new(lattice: &str, alpha: f64, shift: Option<Vec<f64>>) -> PyResult<Self> {
        let spec = pbmst::lattice::LatticeSpec::from_name(lattice).map_err(err)?;
        let shift = shift.unwrap_or_else(|| vec![0.0; spec.dim()]);
        Ok(PyCodebook {
            inner: NestedLatticeCodebook::build(&spec, alpha, &shift).map_err(err)?,
        })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn group(&self) -> PyGroup {
        PyGroup {
            inner: self.inner.group().clone(),
        }
    }

    fn points(&self) -> Vec<Vec<f64>> {
        (0..self.inner.order()).map(|g| self.inner.point(g).to_vec()).collect()
    }

    fn labels(&self) -> Vec<String> {
        (0..self.inner.order()).map(|g| self.inner.label(g).to_string()).collect()
    }

    /// Nearest-point indices of a flat sample sequence.
    fn quantize(&self, samples: Vec<f64>) -> PyResult<Vec<usize>> {
        self.inner.quantize_block(&samples).map_err(err)
    }

    fn modulate(&self, elements: Vec<usize>) -> PyResult<Vec<f64>> {
        for &g in &elements {
            self.inner.group().check_element(g).map_err(err)?;
        }
        Ok(self.inner.modulate_block(&elements))
    }

    fn table(&self, probabilities: Vec<f64>) -> PyResult<String> {
        if probabilities.len() != self.inner.order() {
            return Err(PyValueError::new_err("one probability per codebook point"));
        }
        Ok(self.inner.to_table(&probabilities))
    }
}

#[pyclass(name = "Design", frozen, get_all)]
pub struct PyDesign {
    alpha: f64,
    shift: Vec<f64>,
    distortion: f64,
    entropy_bits: f64,
    probabilities: Vec<f64>,
    table: String,
}

/// Designs (`optimize=True`) or evaluates a nested lattice quantizer.
#[pyfunction]
#[pyo3(signature = (lattice, seed, optimize=true, alpha=None, shift=None, rho=None, samples=1_000_000, shift_rule="accumulate"))]
#[allow(clippy::too_many_arguments)]
fn design_quantizer(
    py: Python<'_>,
    lattice: String,
    seed: u64,
    optimize: bool,
    alpha: Option<f64>,
    shift: Option<Vec<f64>>,
    rho: Option<f64>,
    samples: usize,
    shift_rule: &str,
) -> PyResult<PyDesign> {
    let shift_rule = match shift_rule {
        "accumulate" => ShiftRuleSetting::Accumulate,
        "replace" => ShiftRuleSetting::Replace,
        other => return Err(PyValueError::new_err(format!("unknown shift rule {other:?}"))),
    };
    let source = SourceConfig {
        kind: if rho.is_some() {
            SourceKindSetting::PairCorrelated
        } else {
            SourceKindSetting::Memoryless
        },
        rho,
    };
    let cfg = CodebookConfig {
        lattice,
        alpha,
        shift,
        optimize,
        samples,
        shift_rule,
    };
    let r = py
        .detach(|| source.model(seed).and_then(|s| cfg.design(&s, seed)))
        .map_err(err)?;
    Ok(PyDesign {
        table: r.codebook.to_table(&r.probabilities),
        alpha: r.alpha,
        shift: r.shift,
        distortion: r.distortion,
        entropy_bits: r.entropy_bits,
        probabilities: r.probabilities,
    })
}

#[pyclass(name = "Limits", frozen, get_all)]
pub struct PyLimits {
    rate_per_use: f64,
    constrained_snr_db: f64,
    opta_rate_bits: f64,
    opta_snr_db: f64,
}

#[pyfunction]
#[pyo3(signature = (entropy_bits, dim, distortion, bandwidth=2.0))]
fn limits(entropy_bits: f64, dim: usize, distortion: f64, bandwidth: f64) -> PyResult<PyLimits> {
    let r = LimitReport::new(entropy_bits, dim, distortion, bandwidth).map_err(err)?;
    Ok(PyLimits {
        rate_per_use: r.rate_per_use,
        constrained_snr_db: r.constrained_snr_db,
        opta_rate_bits: r.opta_rate_bits,
        opta_snr_db: r.opta_snr_db,
    })
}

#[pyfunction]
fn sdr_db(distortion: f64) -> f64 {
    pbmst::limits::sdr_db(distortion)
}

type Messages = Vec<Vec<f64>>;

#[pyclass(name = "ComponentCode", frozen)]
pub struct PyComponentCode {
    inner: ComponentCode,
}

#[pymethods]
impl PyComponentCode {
    /// `kind` is `repetition` or `spc` (`blocks` copies of `[n, 1]` or
    /// `[n, n-1]`), or `time-sharing` with `spc_blocks` and `rep_blocks`.
    #[new]
    #[pyo3(signature = (kind, n, group, blocks=None, spc_blocks=None, rep_blocks=None))]
    fn new(
        kind: &str,
        n: usize,
        group: &PyGroup,
        blocks: Option<usize>,
        spc_blocks: Option<usize>,
        rep_blocks: Option<usize>,
    ) -> PyResult<Self> {
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| PyValueError::new_err(format!("{name} is required")));
        let spec = match kind {
            "repetition" => CodeSpec::repetition(n, need(blocks, "blocks")?),
            "spc" => CodeSpec::single_parity_check(n, need(blocks, "blocks")?),
            "time-sharing" => CodeSpec::time_sharing(n, need(spc_blocks, "spc_blocks")?, need(rep_blocks, "rep_blocks")?),
            other => return Err(PyValueError::new_err(format!("unknown code kind {other:?}"))),
        }
        .map_err(err)?;
        Ok(PyComponentCode {
            inner: ComponentCode::new(spec, group.inner.clone()),
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.spec().k()
    }

    #[getter]
    fn parity_len(&self) -> usize {
        self.inner.spec().parity_len()
    }

    fn encode(&self, info: Vec<usize>) -> PyResult<Vec<usize>> {
        self.inner.encode(&info).map_err(err)
    }

    /// Symbol-wise MAP extrinsics `(info, parity)` from prior messages.
    fn map_decode(&self, info: Vec<Vec<f64>>, parity: Vec<Vec<f64>>) -> PyResult<(Messages, Messages)> {
        let to_msgs = |v: Vec<Vec<f64>>| -> PyResult<Vec<Message>> {
            v.into_iter().map(|w| Message::from_weights(w).map_err(err)).collect()
        };
        let ext = self.inner.map_decode(&to_msgs(info)?, &to_msgs(parity)?).map_err(err)?;
        let back = |v: Vec<Message>| v.into_iter().map(Message::into_vec).collect();
        Ok((back(ext.info), back(ext.parity)))
    }
}

#[pyclass(name = "CurvePoint", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyCurvePoint {
    snr_db: f64,
    distortion: f64,
    sdr_db: f64,
    ci95: f64,
    ser: f64,
    mean_iters: f64,
    frames: usize,
}

impl From<&CurvePoint> for PyCurvePoint {
    fn from(p: &CurvePoint) -> Self {
        PyCurvePoint {
            snr_db: p.snr_db,
            distortion: p.distortion,
            sdr_db: p.sdr_db,
            ci95: p.ci95,
            ser: p.ser,
            mean_iters: p.mean_iters,
            frames: p.frames,
        }
    }
}

#[pyclass(name = "RunResult", frozen, get_all)]
pub struct PyRunResult {
    points: Vec<PyCurvePoint>,
    frame_quantizer_distortion: f64,
    power: f64,
    curve_csv: String,
    report: String,
}

/// A prepared simulation from a TOML configuration string.
#[pyclass(name = "Experiment", frozen)]
pub struct PyExperiment {
    inner: Experiment,
}

#[pymethods]
impl PyExperiment {
    #[new]
    fn new(py: Python<'_>, config_toml: &str) -> PyResult<Self> {
        let cfg = SimConfig::from_toml_str(config_toml).map_err(err)?;
        let inner = py.detach(|| Experiment::prepare(&cfg)).map_err(err)?;
        Ok(PyExperiment { inner })
    }

    #[getter]
    fn power(&self) -> f64 {
        self.inner.power
    }

    #[getter]
    fn design_distortion(&self) -> f64 {
        self.inner.design.distortion
    }

    #[getter]
    fn design_entropy_bits(&self) -> f64 {
        self.inner.design.entropy_bits
    }

    #[pyo3(signature = (threads=None))]
    fn run(&self, py: Python<'_>, threads: Option<usize>) -> PyResult<PyRunResult> {
        let res = py.detach(|| self.inner.run(threads)).map_err(err)?;
        Ok(PyRunResult {
            points: res.points.iter().map(PyCurvePoint::from).collect(),
            frame_quantizer_distortion: res.frame_quantizer_distortion,
            power: res.power,
            curve_csv: pbmst::sim::curve_csv(&res.points),
            report: self.inner.report(&res),
        })
    }

    /// Trace lines of one decoded frame.
    fn trace(&self, py: Python<'_>, snr_db: f64, frame: u64) -> PyResult<Vec<String>> {
        let records = py.detach(|| self.inner.trace(snr_db, frame)).map_err(err)?;
        Ok(records.iter().map(|r| r.to_line()).collect())
    }
}

#[pymodule]
pub fn pbmst_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroup>()?;
    m.add_class::<PyCodebook>()?;
    m.add_class::<PyDesign>()?;
    m.add_class::<PyLimits>()?;
    m.add_class::<PyComponentCode>()?;
    m.add_class::<PyCurvePoint>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(design_quantizer, m)?)?;
    m.add_function(wrap_pyfunction!(limits, m)?)?;
    m.add_function(wrap_pyfunction!(sdr_db, m)?)?;
    Ok(())
}
