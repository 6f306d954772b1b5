//! Python bindings for the free-boundary mean curvature flow toolkit.

use std::path::PathBuf;
use std::sync::Arc;

use fbmcf::flow::{self, FlowConfig, OuterBc, Scheme, Trajectory as CoreTrajectory};
use fbmcf::monitors::{self, DensityQuery, Location};
use fbmcf::rescaling::{self, RescalingFrame};
use fbmcf::{io, verify, ExactSolution, Topology, Vec3};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

create_exception!(fbmcf_py, NumericalError, PyArithmeticError, "The numerics failed: a chart inversion, a time step or a singular time.");

type P3 = (f64, f64, f64);

fn to_py(e: fbmcf::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn persist_to_py(e: io::PersistError) -> PyErr {
    match e {
        io::PersistError::Numerical(e) => to_py(e),
        e @ io::PersistError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn v3(p: P3) -> Vec3 {
    Vec3::new(p.0, p.1, p.2)
}

fn t3(v: &Vec3) -> P3 {
    (v.x, v.y, v.z)
}

fn a3(a: [f64; 3]) -> P3 {
    (a[0], a[1], a[2])
}

fn topology(name: Option<&str>) -> PyResult<Option<Topology>> {
    match name {
        None => Ok(None),
        Some("disk") => Ok(Some(Topology::Disk)),
        Some("sphere") => Ok(Some(Topology::Sphere)),
        Some(other) => Err(PyValueError::new_err(format!("unknown topology `{other}`; expected disk or sphere"))),
    }
}

/// Support surface S: the graph of φ over a plane, with its tubular chart.
#[pyclass(name = "SupportPatch", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySupportPatch(Arc<fbmcf::SupportPatch>);

#[pymethods]
impl PySupportPatch {
    #[staticmethod]
    fn flat() -> Self {
        Self(Arc::new(fbmcf::SupportPatch::flat()))
    }

    /// Parabolic cylinder φ = a y1²/2 with curvature scale κ.
    #[staticmethod]
    fn paraboloid(a: f64, kappa: f64) -> PyResult<Self> {
        fbmcf::SupportPatch::paraboloid(a, kappa).map(|p| Self(Arc::new(p))).map_err(to_py)
    }

    #[staticmethod]
    fn sphere_cap(radius: f64, kappa: f64) -> PyResult<Self> {
        fbmcf::SupportPatch::sphere_cap(radius, kappa).map(|p| Self(Arc::new(p))).map_err(to_py)
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa()
    }

    #[getter]
    fn chart_radius(&self) -> f64 {
        self.0.chart_radius()
    }

    #[getter]
    fn name(&self) -> String {
        self.0.phi_name()
    }

    /// Φ(y1, y2, y3) in world coordinates.
    fn tubular_map(&self, y: P3) -> PyResult<P3> {
        self.0.tubular_map([y.0, y.1, y.2]).map(|x| t3(&x)).map_err(to_py)
    }

    fn chart_coordinates(&self, x: P3) -> PyResult<P3> {
        self.0.chart_coordinates(&v3(x)).map(a3).map_err(to_py)
    }

    /// Nearest point of S and the signed distance to it.
    fn project(&self, x: P3) -> PyResult<(P3, f64)> {
        self.0.project_and_distance(&v3(x)).map(|p| (t3(&p.point), p.distance)).map_err(to_py)
    }

    fn signed_distance(&self, x: P3) -> PyResult<f64> {
        self.0.signed_distance(&v3(x)).map_err(to_py)
    }

    fn reflect(&self, x: P3) -> PyResult<P3> {
        self.0.reflect(&v3(x)).map(|r| t3(&r)).map_err(to_py)
    }

    fn normal(&self, y1: f64, y3: f64) -> PyResult<P3> {
        self.0.normal(y1, y3).map(|n| t3(&n)).map_err(to_py)
    }

    /// Whether the sampled derivative bounds stay under κ.
    fn verify_kappa_condition(&self) -> bool {
        self.0.verify_kappa_condition().pass
    }

    fn __repr__(&self) -> String {
        format!("SupportPatch({}, kappa={})", self.0.phi_name(), self.0.kappa())
    }
}

/// Lattice of chart nodes (y1, y2) with spacing h; y2 is the distance from the support.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(Arc<fbmcf::Grid>);

#[pymethods]
impl PyGrid {
    #[staticmethod]
    fn half_disk(radius: f64, h: f64) -> PyResult<Self> {
        fbmcf::Grid::half_disk(radius, h).map(|g| Self(Arc::new(g))).map_err(to_py)
    }

    #[staticmethod]
    fn disk(radius: f64, h: f64) -> PyResult<Self> {
        fbmcf::Grid::disk(radius, h).map(|g| Self(Arc::new(g))).map_err(to_py)
    }

    #[staticmethod]
    fn strip(length: f64, width: f64, h: f64) -> PyResult<Self> {
        fbmcf::Grid::strip(length, width, h).map(|g| Self(Arc::new(g))).map_err(to_py)
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Chart coordinates of every storage node, in storage order.
    fn coordinates(&self) -> Vec<(f64, f64)> {
        (0..self.0.len()).map(|k| self.0.y(k)).collect()
    }
}

/// Height function u over a grid; the surface is Φ(y1, y2, u).
#[pyclass(name = "GraphSurface", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraphSurface(fbmcf::GraphSurface);

#[pymethods]
impl PyGraphSurface {
    /// `heights` holds one value per storage node; outside nodes are ignored.
    #[new]
    #[pyo3(signature = (grid, patch, heights, t = 0.0, topology = None))]
    fn new(grid: &PyGrid, patch: &PySupportPatch, heights: Vec<f64>, t: f64, topology: Option<&str>) -> PyResult<Self> {
        let topo = self::topology(topology)?;
        fbmcf::GraphSurface::new(grid.0.clone(), patch.0.clone(), heights, t).map(|s| Self(s.with_topology(topo))).map_err(to_py)
    }

    /// Samples `f(y1, y2)` at every node.
    #[staticmethod]
    #[pyo3(signature = (grid, patch, f, t = 0.0, topology = None))]
    fn from_function(grid: &PyGrid, patch: &PySupportPatch, f: &Bound<'_, PyAny>, t: f64, topology: Option<&str>) -> PyResult<Self> {
        let g = &grid.0;
        let heights = (0..g.len())
            .map(|k| if g.kind(k) == fbmcf::NodeKind::Outside { Ok(f64::NAN) } else { f.call1(g.y(k))?.extract::<f64>() })
            .collect::<PyResult<Vec<f64>>>()?;
        Self::new(grid, patch, heights, t, topology)
    }

    /// Exact shrinking hemisphere of initial radius `r0` centred at the origin.
    #[staticmethod]
    #[pyo3(signature = (grid, patch, r0, t = 0.0))]
    fn hemisphere(grid: &PyGrid, patch: &PySupportPatch, r0: f64, t: f64) -> PyResult<Self> {
        let e = ExactSolution::Hemisphere { center: Vec3::zeros(), r0 };
        e.graph(grid.0.clone(), patch.0.clone(), t).map(|s| Self(s.with_topology(Some(Topology::Disk)))).map_err(to_py)
    }

    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }

    fn heights(&self) -> Vec<f64> {
        self.0.u.clone()
    }

    fn area(&self) -> PyResult<f64> {
        self.0.fundamental_forms().map(|g| g.area()).map_err(to_py)
    }

    /// ∫ |A|² over the surface.
    fn energy(&self) -> PyResult<f64> {
        self.0.fundamental_forms().map(|g| g.energy()).map_err(to_py)
    }

    fn perimeter(&self) -> PyResult<f64> {
        self.0.perimeter().map_err(to_py)
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    fn neumann_residual(&self) -> f64 {
        self.0.neumann_residual()
    }
}

/// Monotonicity report of a Gaussian density along a trajectory.
#[pyclass(name = "DensityReport", frozen, get_all, skip_from_py_object)]
struct PyDensityReport {
    times: Vec<f64>,
    values: Vec<f64>,
    violations: Vec<f64>,
    max_upward_violation: f64,
    limit_estimate: f64,
    flat: bool,
}

/// Candidate singular points with their ε-regularity masses.
#[pyclass(name = "SingularScan", frozen, get_all, skip_from_py_object)]
struct PySingularScan {
    t: f64,
    epsilon: f64,
    radii: Vec<f64>,
    flagged: Vec<P3>,
    clusters: Vec<(P3, usize)>,
    total_energy: f64,
    count_bound: f64,
}

/// Least-squares plane, slab width and sheet count in a rescaled frame.
#[pyclass(name = "Planarity", frozen, get_all, skip_from_py_object)]
struct PyPlanarity {
    fit_point: P3,
    fit_normal: P3,
    half_plane: bool,
    deviation: f64,
    sheets: usize,
    region_samples: usize,
}

/// Parabolic rescaling of a trajectory about a spacetime point.
#[pyclass(name = "RescalingFrame", frozen, skip_from_py_object)]
struct PyFrame(RescalingFrame);

#[pymethods]
impl PyFrame {
    #[getter]
    fn scale(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    #[getter]
    fn source_time(&self) -> f64 {
        self.0.source_time
    }

    /// Difference between the requested and the nearest stored time.
    #[getter]
    fn time_offset(&self) -> f64 {
        self.0.time_offset
    }

    #[getter]
    fn kappa(&self) -> Option<f64> {
        self.0.kappa()
    }

    fn positions(&self) -> Vec<P3> {
        self.0.samples.points.iter().map(|s| t3(&s.point.position)).collect()
    }

    /// Sup distance between matching samples of two frames of one trajectory.
    fn max_difference(&self, other: &PyFrame) -> Option<f64> {
        self.0.max_difference(&other.0)
    }

    #[pyo3(signature = (center = (0.0, 0.0, 0.0), radius = 0.5, exclusions = Vec::new()))]
    fn planarity(&self, center: P3, radius: f64, exclusions: Vec<(P3, f64)>) -> PyResult<PyPlanarity> {
        let ex: Vec<(Vec3, f64)> = exclusions.into_iter().map(|(p, r)| (v3(p), r)).collect();
        let r = rescaling::planarity_multiplicity(&self.0, &v3(center), radius, &ex).map_err(to_py)?;
        Ok(PyPlanarity {
            fit_point: a3(r.fit_point),
            fit_normal: a3(r.fit_normal),
            half_plane: r.half_plane,
            deviation: r.deviation,
            sheets: r.sheets,
            region_samples: r.region_samples,
        })
    }
}

/// Snapshots and monitors of a flow.
#[pyclass(name = "Trajectory", frozen, skip_from_py_object)]
struct PyTrajectory(CoreTrajectory);

#[pymethods]
impl PyTrajectory {
    /// Reads a run directory written by `fbmcf run`, checking its checksums.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        io::load_trajectory(&dir).map(|(_, _, t)| Self(t)).map_err(persist_to_py)
    }

    #[getter]
    fn stop_reason(&self) -> String {
        self.0.stop_reason.to_string()
    }

    #[getter]
    fn reached_end(&self) -> bool {
        self.0.stop_reason.reached_end()
    }

    fn snapshot_times(&self) -> Vec<f64> {
        self.0.snapshots.iter().map(|s| s.t).collect()
    }

    /// Rows (t, area, perimeter, energy, max_H, max_A).
    fn monitors(&self) -> Vec<(f64, f64, f64, f64, f64, f64)> {
        self.0.monitors.iter().map(|m| (m.t, m.area, m.perimeter, m.energy, m.max_h, m.max_a)).collect()
    }

    /// Snapshot heights, or None for analytic snapshots.
    fn heights(&self, index: usize) -> PyResult<Option<Vec<f64>>> {
        let s = self.0.snapshots.get(index).ok_or_else(|| PyValueError::new_err(format!("no snapshot {index}")))?;
        Ok(s.graph().map(|g| g.u.clone()))
    }

    /// Interior density when `r` is given, boundary density when `kappa` is.
    #[pyo3(signature = (point, terminal_time, sample_times, r = None, kappa = None))]
    fn density(
        &self,
        point: P3,
        terminal_time: f64,
        sample_times: Vec<f64>,
        r: Option<f64>,
        kappa: Option<f64>,
    ) -> PyResult<PyDensityReport> {
        let location = match (r, kappa) {
            (Some(r), None) => Location::Interior { r },
            (None, Some(kappa)) => Location::Boundary { kappa },
            _ => return Err(PyValueError::new_err("give exactly one of r (interior) or kappa (boundary)")),
        };
        let q = DensityQuery { point: v3(point), terminal_time, location, sample_times };
        let rep = monitors::monotonicity_report(&self.0, &q).map_err(to_py)?;
        Ok(PyDensityReport {
            times: rep.times,
            values: rep.values,
            violations: rep.violations,
            max_upward_violation: rep.max_upward_violation,
            limit_estimate: rep.limit_estimate,
            flat: rep.flat,
        })
    }

    fn singular_scan(&self, epsilon: f64, radii: Vec<f64>) -> PyResult<PySingularScan> {
        let s = monitors::singular_set_scan(&self.0, epsilon, &radii).map_err(to_py)?;
        Ok(PySingularScan {
            t: s.t,
            epsilon: s.epsilon,
            radii: s.radii,
            flagged: s.candidates.iter().filter(|c| c.flagged).map(|c| a3(c.point)).collect(),
            clusters: s.clusters.iter().map(|c| (a3(c.centroid), c.members)).collect(),
            total_energy: s.total_energy,
            count_bound: s.count_bound,
        })
    }

    /// Frame (X − P)/λ at time T + λ²τ.
    #[pyo3(signature = (point, terminal_time, scale, tau = -1.0))]
    fn rescale(&self, point: P3, terminal_time: f64, scale: f64, tau: f64) -> PyResult<PyFrame> {
        rescaling::parabolic_rescale(&self.0, &v3(point), terminal_time, scale, tau).map(PyFrame).map_err(to_py)
    }

    /// Normalized flow at time s, i.e. the frame with λ = e^{−s/2}, τ = −1.
    fn normalized(&self, point: P3, terminal_time: f64, s: f64) -> PyResult<PyFrame> {
        rescaling::normalized_frame(&self.0, &v3(point), terminal_time, s).map(PyFrame).map_err(to_py)
    }
}

/// Evolves `surface` to `t_end`. `exact_rim` drives the rim with the
/// hemisphere of that initial radius instead of freezing it.
#[pyfunction]
#[pyo3(signature = (surface, t_end, cfl = 0.2, snapshot_stride = 10, scheme = "explicit", blowup_threshold = 0.5, exact_rim = None, periodic = false))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    surface: &PyGraphSurface,
    t_end: f64,
    cfl: f64,
    snapshot_stride: usize,
    scheme: &str,
    blowup_threshold: f64,
    exact_rim: Option<f64>,
    periodic: bool,
) -> PyResult<PyTrajectory> {
    let scheme = match scheme {
        "explicit" => Scheme::ExplicitEuler,
        "semi-implicit" => Scheme::SemiImplicit,
        other => return Err(PyValueError::new_err(format!("unknown scheme `{other}`"))),
    };
    let outer_bc = match (exact_rim, periodic) {
        (Some(r0), false) => OuterBc::DirichletExact(ExactSolution::Hemisphere { center: Vec3::zeros(), r0 }),
        (None, true) => OuterBc::PeriodicStrip,
        (None, false) => OuterBc::Frozen,
        (Some(_), true) => return Err(PyValueError::new_err("exact_rim and periodic are exclusive")),
    };
    let config = FlowConfig { cfl, t_end, snapshot_stride, outer_bc, scheme, blowup_threshold, ..FlowConfig::default() };
    let initial = surface.0.clone();
    py.detach(|| flow::run(&initial, &config)).map(PyTrajectory).map_err(to_py)
}

/// Runs a scenario file like `fbmcf run` and returns its exit code.
#[pyfunction]
#[pyo3(signature = (scenario, output = None))]
fn run_scenario(py: Python<'_>, scenario: PathBuf, output: Option<PathBuf>) -> PyResult<u8> {
    match py.detach(|| fbmcf::cli::command_run(&scenario, output.as_deref())) {
        Ok(code) => Ok(code),
        Err(f) if f.code == 3 => Err(NumericalError::new_err(f.message)),
        Err(f) => Err(PyValueError::new_err(f.message)),
    }
}

/// Acceptance criteria as (id, name, status, measured, limit, seconds).
#[pyfunction]
#[pyo3(signature = (fast = true))]
fn run_verify(py: Python<'_>, fast: bool) -> Vec<(u8, String, String, String, String, f64)> {
    py.detach(|| verify::run_all(fast, |_| {}))
        .into_iter()
        .map(|r| (r.id, r.name.to_string(), r.status.to_string(), r.measured, r.limit, r.seconds))
        .collect()
}

#[pymodule]
fn fbmcf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PySupportPatch>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyGraphSurface>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyFrame>()?;
    m.add_class::<PyDensityReport>()?;
    m.add_class::<PySingularScan>()?;
    m.add_class::<PyPlanarity>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
