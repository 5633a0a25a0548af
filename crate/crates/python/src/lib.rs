//! Python bindings: expressions, builtin systems, integration, the Noether
//! tests, the scaling solver and scenario runs.

use std::collections::BTreeMap;
use std::path::Path;

use contact_noether::dynamics::{self, IntegratorConfig};
use contact_noether::noether;
use contact_noether::sampling::sample_points;
use contact_noether::scaling::{self, FKind, GKind, ScalingAnsatz};
use contact_noether::scenario::{self, RunOptions};
use contact_noether::systems::{self, AuxiliaryState};
use contact_noether::{geometry, ContactSystem, EvalContext, ExtendedPoint, Params, Var};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: contact_noether::Error) -> PyErr {
    use contact_noether::Error as E;
    match err {
        E::Config { .. } | E::Parse(_) | E::InvalidArgument(_) | E::InadmissibleCase { .. } | E::DimensionMismatch { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn params_from(map: Option<BTreeMap<String, f64>>) -> Params {
    let mut params = Params::new();
    for (k, v) in map.unwrap_or_default() {
        params.set(&k, v);
    }
    params
}

/// An expression over `q0.., p0.., S, t` and named parameters.
#[pyclass(name = "ScalarField", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScalarField(contact_noether::ScalarField);

#[pymethods]
impl PyScalarField {
    #[new]
    fn new(expr: &str, n: usize) -> PyResult<Self> {
        contact_noether::ScalarField::parse(expr, n).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.dim()
    }

    /// Exact partial derivative with respect to `q<k>`, `p<k>`, `S` or `t`.
    fn partial(&self, var: &str) -> PyResult<Self> {
        let v = Var::parse(var, self.0.dim()).ok_or_else(|| PyValueError::new_err(format!("unknown coordinate `{var}`")))?;
        Ok(Self(self.0.partial(v)))
    }

    #[pyo3(signature = (q, p, s, t, params=None))]
    fn evaluate(&self, q: Vec<f64>, p: Vec<f64>, s: f64, t: f64, params: Option<BTreeMap<String, f64>>) -> PyResult<f64> {
        let ctx = EvalContext::new(ExtendedPoint::new(q, p, s, t), params_from(params));
        self.0.evaluate(&ctx).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("ScalarField({:?}, {})", self.0.to_string(), self.0.dim())
    }
}

/// A contact Hamiltonian system with its registered invariants.
#[pyclass(name = "System", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySystem(ContactSystem);

#[pymethods]
impl PySystem {
    /// A builtin system by name (see `list_systems`).
    #[staticmethod]
    #[pyo3(signature = (name, params=None, f=None))]
    fn builtin(name: &str, params: Option<BTreeMap<String, f64>>, f: Option<&str>) -> PyResult<Self> {
        systems::builtin(name, &params_from(params), f).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (m=1.0, eps=0.25))]
    fn kepler(m: f64, eps: f64) -> PyResult<Self> {
        systems::make_kepler(m, eps).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (m=1.0, eps=0.25, lam=1.0))]
    fn td_kepler(m: f64, eps: f64, lam: f64) -> PyResult<Self> {
        systems::make_td_kepler(m, eps, lam).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (m=1.0, f="1", g0=0.2))]
    fn harmonic_dissipative(m: f64, f: &str, g0: f64) -> PyResult<Self> {
        let f = contact_noether::ScalarField::parse(f, 1).map_err(|e| PyValueError::new_err(e.to_string()))?;
        systems::make_harmonic_dissipative(m, &f, g0).map(Self).map_err(to_py)
    }

    /// A system from an inline Hamiltonian `h` on `n` degrees of freedom.
    #[staticmethod]
    #[pyo3(signature = (h, n, params=None))]
    fn inline(h: &str, n: usize, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let h = contact_noether::ScalarField::parse(h, n).map_err(|e| PyValueError::new_err(e.to_string()))?;
        ContactSystem::new("inline", h, params_from(params)).map(Self).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_owned()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn h(&self) -> PyScalarField {
        PyScalarField(self.0.h().clone())
    }

    #[getter]
    fn params(&self) -> BTreeMap<String, f64> {
        self.0.params().iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    fn invariant_labels(&self) -> Vec<String> {
        self.0.invariants().iter().map(|i| i.label.clone()).collect()
    }

    fn invariant(&self, label: &str) -> PyResult<PyScalarField> {
        self.0
            .invariant(label)
            .map(|i| PyScalarField(i.field.clone()))
            .ok_or_else(|| PyKeyError::new_err(label.to_owned()))
    }

    /// `X_h^t(F) + R(h) F`, which vanishes for dissipated quantities.
    fn dissipation_residual(&self, f: &PyScalarField) -> PyScalarField {
        PyScalarField(noether::dissipation_field(&self.0, &f.0))
    }

    fn __repr__(&self) -> String {
        format!("System({:?}, h = {})", self.0.name(), self.0.h())
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: dynamics::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.times()
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.q.clone()).collect()
    }

    #[getter]
    fn p(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.p.clone()).collect()
    }

    #[getter(S)]
    fn s(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.s).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.tracked_labels.clone()
    }

    fn series(&self, label: &str) -> PyResult<Vec<f64>> {
        self.inner
            .series(label)
            .or_else(|| self.inner.aux_series(label))
            .ok_or_else(|| PyKeyError::new_err(label.to_owned()))
    }

    /// `max |F_i − F_0| / max(1, |F_0|)`.
    fn drift(&self, label: &str) -> PyResult<f64> {
        self.inner.drift(label).ok_or_else(|| PyKeyError::new_err(label.to_owned()))
    }

    /// Drift of `F·exp(∫R(h) dt)`.
    fn dissipated_drift(&self, label: &str) -> PyResult<f64> {
        self.inner.dissipated_drift(label).ok_or_else(|| PyKeyError::new_err(label.to_owned()))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Integrates the extended flow, co-integrating the auxiliary equations of
/// the oscillator invariants and tracking every registered invariant.
#[pyfunction]
#[pyo3(signature = (system, q, p, s, t0, t_end, rel_tol=1e-10, abs_tol=1e-12))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    system: &PySystem,
    q: Vec<f64>,
    p: Vec<f64>,
    s: f64,
    t0: f64,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> PyResult<PyTrajectory> {
    let cfg = IntegratorConfig { rel_tol, abs_tol, ..IntegratorConfig::default() };
    cfg.validate().map_err(PyValueError::new_err)?;
    let start = ExtendedPoint::new(q, p, s, t0);
    systems::co_integrate(&system.0, &start, &AuxiliaryState::default(), t_end, &cfg)
        .map(|inner| PyTrajectory { inner })
        .map_err(|e| to_py(e.into()))
}

#[pyclass(name = "SymmetryReport", frozen, get_all)]
struct PySymmetryReport {
    passed: bool,
    verdict: String,
    residual: f64,
    lambdas: Vec<f64>,
}

#[pyclass(name = "SimilarityReport", frozen, get_all)]
struct PySimilarityReport {
    verdict: String,
    residual: f64,
    lambdas: Vec<f64>,
}

fn samples(system: &ContactSystem, count: usize, seed: u64) -> PyResult<Vec<EvalContext>> {
    sample_points(system, count, seed, systems::KEPLER_SAMPLE_MARGIN).map_err(to_py)
}

/// Builds `Y_F` from an invariant (with `Y^t = yt`) and tests
/// `L_Y η^E = λ η^E` at seeded samples.
#[pyfunction]
#[pyo3(signature = (system, invariant, yt="0", count=100, seed=42, threshold=1e-9))]
fn symmetry_test(
    system: &PySystem,
    invariant: &PyScalarField,
    yt: &str,
    count: usize,
    seed: u64,
    threshold: f64,
) -> PyResult<PySymmetryReport> {
    let sys = &system.0;
    let yt = contact_noether::ScalarField::parse(yt, sys.n()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let y = noether::symmetry_from_invariant(sys, &invariant.0, &yt);
    let rep = noether::symmetry_test(sys, &y, &samples(sys, count, seed)?, threshold).map_err(to_py)?;
    Ok(PySymmetryReport {
        passed: rep.passed(),
        verdict: format!("{:?}", rep.verdict),
        residual: rep.residual,
        lambdas: rep.lambda_at_samples,
    })
}

/// Tests `[Y, X_h^t] = Λ X_h^t` for the scaling field
/// `α q∂_q + β p∂_p + γ S∂_S + σ t∂_t`.
#[pyfunction]
#[pyo3(signature = (system, alpha, beta, gamma, sigma, count=100, seed=42, threshold=1e-9))]
#[allow(clippy::too_many_arguments)]
fn scaling_similarity(
    system: &PySystem,
    alpha: f64,
    beta: f64,
    gamma: f64,
    sigma: f64,
    count: usize,
    seed: u64,
    threshold: f64,
) -> PyResult<PySimilarityReport> {
    let sys = &system.0;
    let y = scaling::scaling_generator(&ScalingAnsatz::new(alpha, beta, gamma, sigma), sys.n());
    let x = dynamics::extended_field(sys);
    let rep = noether::similarity_test_with(&x, &y, sys.rates(), &samples(sys, count, seed)?, threshold).map_err(to_py)?;
    Ok(PySimilarityReport { verdict: format!("{:?}", rep.verdict), residual: rep.residual, lambdas: rep.lambda_at_samples })
}

/// `{F, G}_J` for time-independent fields.
#[pyfunction]
fn jacobi_bracket(f: &PyScalarField, g: &PyScalarField) -> PyResult<PyScalarField> {
    geometry::jacobi_bracket(&f.0, &g.0).map(PyScalarField).map_err(to_py)
}

#[pyclass(name = "ScalingSolution", frozen, get_all)]
struct PyScalingSolution {
    case: String,
    alpha: f64,
    beta: f64,
    gamma: f64,
    sigma: f64,
    invariant: String,
    f_required: Option<String>,
    g_forced: Option<String>,
    informational: bool,
}

/// Solves the scaling ansatz for `V = c|q|^k`; `f` is "const", "power"
/// (with `lam`) or "free", and `g` is "zero" or "homogeneous" (with `kappa`).
#[pyfunction]
#[pyo3(signature = (k, f="const", lam=None, g="zero", kappa=1.0, g0=0.5, m=1.0))]
fn solve_scaling(
    k: f64,
    f: &str,
    lam: Option<f64>,
    g: &str,
    kappa: f64,
    g0: f64,
    m: f64,
) -> PyResult<Vec<PyScalingSolution>> {
    let f_kind = match (f, lam) {
        ("const", _) => FKind::Constant,
        ("free", _) => FKind::Free,
        ("power", Some(lambda)) => FKind::PowerLaw { lambda },
        ("power", None) => return Err(PyValueError::new_err("f=\"power\" needs lam")),
        _ => return Err(PyValueError::new_err(format!("unknown f kind `{f}`"))),
    };
    let (g_kind, g0) = match g {
        "zero" => (GKind::Zero, 0.0),
        "homogeneous" => (GKind::Homogeneous { kappa }, g0),
        _ => return Err(PyValueError::new_err(format!("unknown g kind `{g}`"))),
    };
    let sols = scaling::solve_scaling(m, k, f_kind, g_kind, g0).map_err(to_py)?;
    Ok(sols
        .iter()
        .map(|s| PyScalingSolution {
            case: s.case_tag.to_string(),
            alpha: s.ansatz.alpha,
            beta: s.ansatz.beta,
            gamma: s.ansatz.gamma,
            sigma: s.ansatz.sigma,
            invariant: s.invariant_text(),
            f_required: s.f_required.as_ref().map(ToString::to_string),
            g_forced: s.g_forced.as_ref().map(ToString::to_string),
            informational: s.informational,
        })
        .collect())
}

#[pyclass(name = "ScenarioReport", frozen, get_all)]
struct PyScenarioReport {
    passed: bool,
    text: String,
    json: String,
}

/// Runs a scenario file; with `out`, also writes its artifacts there.
#[pyfunction]
#[pyo3(signature = (path, seed=None, tol_override=None, out=None))]
fn run_scenario(path: &str, seed: Option<u64>, tol_override: Option<f64>, out: Option<&str>) -> PyResult<PyScenarioReport> {
    let output = scenario::run(Path::new(path), &RunOptions { seed, tol_override }).map_err(to_py)?;
    if let Some(dir) = out {
        scenario::write_artifacts(Path::new(dir), &output).map_err(to_py)?;
    }
    let r = &output.report;
    Ok(PyScenarioReport { passed: r.passed, text: r.to_text(), json: r.to_json() })
}

#[pyfunction]
fn list_systems() -> Vec<(String, String)> {
    systems::BUILTINS.iter().map(|(n, d)| ((*n).to_owned(), (*d).to_owned())).collect()
}

#[pymodule(name = "contact_noether")]
fn contact_noether_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScalarField>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySymmetryReport>()?;
    m.add_class::<PySimilarityReport>()?;
    m.add_class::<PyScalingSolution>()?;
    m.add_class::<PyScenarioReport>()?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(symmetry_test, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(jacobi_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(solve_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(list_systems, m)?)?;
    Ok(())
}
