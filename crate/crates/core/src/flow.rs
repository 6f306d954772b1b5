//! Time stepping of the graph form of mean curvature flow with the
//! homogeneous Neumann condition on the free-boundary edge.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticSurface, ExactSolution};
use crate::error::{Error, Result};
use crate::grid::{DomainShape, NodeKind};
use crate::samples::{SurfaceMeasure, SurfaceSamples};
use crate::support::SupportPatch;
use crate::surface::{GraphSurface, SurfaceGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitEuler,
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OuterBc {
    /// Rim values follow an exact solution.
    DirichletExact(ExactSolution),
    Frozen,
    /// Periodic in y1 on a strip grid; the far edge is frozen.
    PeriodicStrip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub outer_bc: OuterBc,
    pub scheme: Scheme,
    pub blowup_threshold: f64,
    /// Semi-implicit steps are this many explicit limits long.
    pub implicit_dt_factor: f64,
    /// Radius of a half-disk of normal trajectories whose area is tracked.
    pub tracked_radius: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            cfl: 0.2,
            t_end: 0.0,
            snapshot_stride: 10,
            outer_bc: OuterBc::Frozen,
            scheme: Scheme::ExplicitEuler,
            blowup_threshold: 0.5,
            implicit_dt_factor: 4.0,
            tracked_radius: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self, surface: &GraphSurface) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSurface(m.to_string()));
        if !(self.cfl > 0.0 && self.cfl <= 0.25) {
            return bad("cfl must lie in (0, 0.25]");
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("t_end must be finite and non-negative");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1");
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be positive");
        }
        if !(self.implicit_dt_factor >= 1.0) {
            return bad("implicit_dt_factor must be at least 1");
        }
        let strip = surface.grid.shape() == DomainShape::Strip;
        match &self.outer_bc {
            OuterBc::PeriodicStrip if !strip => return bad("periodic-strip needs a strip grid"),
            OuterBc::DirichletExact(_) | OuterBc::Frozen if strip => return bad("strip grids need the periodic-strip boundary"),
            OuterBc::DirichletExact(e) => {
                if let Some(ts) = e.singular_time() {
                    if self.t_end >= ts {
                        return Err(Error::PastSingularity { t: self.t_end, singular_time: ts });
                    }
                }
            }
            _ => {}
        }
        if let Some(r) = self.tracked_radius {
            if surface.grid.shape() != DomainShape::HalfDisk || !(r > 0.0) || r >= surface.grid.radius() {
                return bad("tracked region needs a half-disk grid and 0 < radius < r_dom");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Completed,
    Blowup { max_ha: f64 },
    Error(Error),
}

impl StopReason {
    pub fn reached_end(&self) -> bool {
        matches!(self, StopReason::Completed)
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Completed => write!(f, "completed"),
            StopReason::Blowup { max_ha } => write!(f, "blowup (max h|A| = {max_ha:.4})"),
            StopReason::Error(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorSample {
    pub t: f64,
    pub area: f64,
    /// NaN without a free-boundary edge.
    pub perimeter: f64,
    pub energy: f64,
    pub max_h: f64,
    pub max_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackedSample {
    pub t: f64,
    pub area: f64,
    pub willmore: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotSurface {
    Graph(GraphSurface),
    Analytic(AnalyticSurface),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub surface: SnapshotSurface,
}

impl Snapshot {
    /// Surface samples; analytic snapshots are sampled at `spacing`.
    pub fn samples(&self, spacing: f64) -> Result<SurfaceSamples> {
        match &self.surface {
            SnapshotSurface::Graph(g) => g.samples(),
            SnapshotSurface::Analytic(a) => a.samples(spacing),
        }
    }

    pub fn graph(&self) -> Option<&GraphSurface> {
        match &self.surface {
            SnapshotSurface::Graph(g) => Some(g),
            SnapshotSurface::Analytic(_) => None,
        }
    }

    /// Runs `f` against the snapshot's measure: quadrature for analytic
    /// snapshots, node sums for graphs.
    pub fn with_measure<T>(&self, f: impl FnOnce(&dyn SurfaceMeasure) -> T) -> Result<T> {
        match &self.surface {
            SnapshotSurface::Graph(g) => Ok(f(&g.samples()?)),
            SnapshotSurface::Analytic(a) => Ok(f(a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSource {
    pub solution: ExactSolution,
    pub patch: Arc<SupportPatch>,
    pub extent: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub monitors: Vec<MonitorSample>,
    pub tracked: Vec<TrackedSample>,
    pub stop_reason: StopReason,
    /// max one-sided Neumann residual over emitted graph snapshots
    pub neumann_max: f64,
    /// Grid spacing, or the sampling spacing of exact trajectories.
    pub spacing: f64,
    pub exact: Option<ExactSource>,
}

impl Trajectory {
    /// Exact solution stored at the given times; lookups at other times are
    /// answered exactly too.
    pub fn exact(source: ExactSource, times: &[f64]) -> Result<Self> {
        let mut snapshots = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            if k > 0 && t <= times[k - 1] {
                return Err(Error::InvalidQuery("snapshot times must increase".into()));
            }
            let s = source.solution.analytic(t, source.patch.clone(), source.extent)?;
            snapshots.push(Snapshot { step: k, t, surface: SnapshotSurface::Analytic(s) });
        }
        Ok(Trajectory {
            snapshots,
            monitors: Vec::new(),
            tracked: Vec::new(),
            stop_reason: StopReason::Completed,
            neumann_max: 0.0,
            spacing: source.spacing,
            exact: Some(source),
        })
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.snapshots.first()?.t, self.snapshots.last()?.t))
    }

    /// The snapshot at time t: exact when a generator is attached, else the
    /// nearest stored one. Returns the snapshot and its time offset.
    pub fn surface_at(&self, t: f64) -> Result<(Snapshot, f64)> {
        let (start, end) = self.time_range().ok_or(Error::InsufficientSnapshots { needed: 1, found: 0 })?;
        if let Some(src) = &self.exact {
            if src.solution.singular_time().is_none_or(|ts| t < ts) && t >= 0.0 {
                let s = src.solution.analytic(t, src.patch.clone(), src.extent)?;
                return Ok((Snapshot { step: 0, t, surface: SnapshotSurface::Analytic(s) }, 0.0));
            }
        }
        let half = 0.5 * self.snapshot_gap();
        if t < start - half || t > end + half {
            return Err(Error::OutOfRange { t, start, end });
        }
        let best = self.snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).expect("non-empty");
        Ok((best.clone(), best.t - t))
    }

    fn snapshot_gap(&self) -> f64 {
        self.snapshots.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max)
    }

    /// Largest area(t_{k+1}) − area(t_k) − 10 h² (t_{k+1} − t_k) over the
    /// tracked series; ≤ 0 when the area law holds.
    pub fn area_increase_excess(&self) -> f64 {
        let h2 = self.spacing * self.spacing;
        self.tracked.windows(2).map(|w| w[1].area - w[0].area - 10.0 * h2 * (w[1].t - w[0].t)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean over the run of |dA/dt + ∫H²| / ∫H² on the tracked region, with
    /// dA/dt by centred differences.
    pub fn area_law_error(&self) -> Option<f64> {
        let s = &self.tracked;
        if s.len() < 3 {
            return None;
        }
        let mut total = 0.0;
        let mut n = 0;
        for k in 1..s.len() - 1 {
            let rate = (s[k + 1].area - s[k - 1].area) / (s[k + 1].t - s[k - 1].t);
            if s[k].willmore > 0.0 {
                total += (rate + s[k].willmore).abs() / s[k].willmore;
                n += 1;
            }
        }
        (n > 0).then(|| total / n as f64)
    }
}

/// Explicit time-step limit cfl·h² / max Σ|g^{ij}|.
pub fn stable_dt(geometry: &SurfaceGeometry, h: f64, cfl: f64) -> f64 {
    cfl * h * h / geometry.max_inverse_metric_sum().max(f64::MIN_POSITIVE)
}

fn rim_values(surface: &GraphSurface, bc: &OuterBc, t: f64, u: &mut [f64]) -> Result<()> {
    let grid = &surface.grid;
    if let OuterBc::DirichletExact(exact) = bc {
        for k in 0..grid.len() {
            if grid.kind(k) == NodeKind::Rim {
                let (y1, y2) = grid.y(k);
                u[k] = exact.height(&surface.patch, y1, y2, t)?.ok_or_else(|| {
                    let (i, j) = grid.ij(k);
                    Error::ExactUndefined { i, j, t }
                })?;
            }
        }
    }
    Ok(())
}

fn finish(surface: &GraphSurface, u: Vec<f64>, t: f64) -> Result<GraphSurface> {
    let grid = &surface.grid;
    for &k in grid.active() {
        if !u[k].is_finite() {
            let (i, j) = grid.ij(k);
            return Err(Error::NonFinite { i, j });
        }
    }
    Ok(GraphSurface::new(grid.clone(), surface.patch.clone(), u, t)?.with_topology(surface.topology))
}

/// One explicit Euler step u ← u + dt (g^{ij} ∂ij u + f).
pub fn step(surface: &GraphSurface, dt: f64, config: &FlowConfig) -> Result<GraphSurface> {
    let geometry = surface.fundamental_forms()?;
    step_with(surface, &geometry, dt, config)
}

pub fn step_with(surface: &GraphSurface, geometry: &SurfaceGeometry, dt: f64, config: &FlowConfig) -> Result<GraphSurface> {
    let h = surface.grid.h();
    match config.scheme {
        Scheme::ExplicitEuler => {
            let limit = stable_dt(geometry, h, config.cfl);
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::CflViolation { dt, limit });
            }
            let mut u = surface.u.clone();
            for n in &geometry.nodes {
                u[n.node] += dt * n.velocity;
            }
            rim_values(surface, &config.outer_bc, surface.t + dt, &mut u)?;
            finish(surface, u, surface.t + dt)
        }
        Scheme::SemiImplicit => semi_implicit(surface, geometry, dt, config),
    }
}

/// Lagged coefficients, (u' − u)/dt = a^{ij} ∂ij u' + f, solved by damped Jacobi.
fn semi_implicit(surface: &GraphSurface, geometry: &SurfaceGeometry, dt: f64, config: &FlowConfig) -> Result<GraphSurface> {
    let grid = &surface.grid;
    let h2 = grid.h() * grid.h();
    let mut u = surface.u.clone();
    rim_values(surface, &config.outer_bc, surface.t + dt, &mut u)?;
    let omega = 0.8;
    let at = |u: &[f64], i: i64, j: i64| grid.resolve(i, j).map(|k| u[k]).unwrap_or(f64::NAN);
    for _ in 0..2000 {
        let update: Vec<(usize, f64)> = geometry
            .nodes
            .par_iter()
            .map(|n| {
                let (i, j) = grid.ij(n.node);
                let a = n.inverse;
                let off = a[0][0] * (at(&u, i + 1, j) + at(&u, i - 1, j)) / h2
                    + a[1][1] * (at(&u, i, j + 1) + at(&u, i, j - 1)) / h2
                    + 2.0 * a[0][1] * (at(&u, i + 1, j + 1) - at(&u, i + 1, j - 1) - at(&u, i - 1, j + 1) + at(&u, i - 1, j - 1))
                        / (4.0 * h2);
                let diag = 1.0 + dt * 2.0 * (a[0][0] + a[1][1]) / h2;
                let target = (surface.u[n.node] + dt * (off + n.forcing)) / diag;
                (n.node, target)
            })
            .collect();
        let mut change: f64 = 0.0;
        for (k, target) in update {
            let next = u[k] + omega * (target - u[k]);
            change = change.max((next - u[k]).abs());
            u[k] = next;
        }
        if change <= 1e-14 * (1.0 + surface.max_abs()) {
            return finish(surface, u, surface.t + dt);
        }
        if !change.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence { residual: f64::NAN })
}

fn monitor(surface: &GraphSurface, geometry: &SurfaceGeometry) -> MonitorSample {
    MonitorSample {
        t: surface.t,
        area: geometry.area(),
        perimeter: surface.perimeter().unwrap_or(f64::NAN),
        energy: geometry.energy(),
        max_h: geometry.max_mean_curvature(),
        max_a: geometry.max_a(),
    }
}

/// Steps until t_end, blow-up or the first error; errors end up in the stop
/// reason. Fails up front only if the initial data or config is invalid.
pub fn run(initial: &GraphSurface, config: &FlowConfig) -> Result<Trajectory> {
    config.validate(initial)?;
    let h = initial.grid.h();
    let tol_n = h * h;
    let residual = initial.neumann_residual();
    if residual > 10.0 * tol_n {
        return Err(Error::InvalidSurface(format!("initial Neumann residual {residual:e} exceeds {:e}", 10.0 * tol_n)));
    }
    let mut traj = Trajectory {
        snapshots: Vec::new(),
        monitors: Vec::new(),
        tracked: Vec::new(),
        stop_reason: StopReason::Completed,
        neumann_max: residual,
        spacing: h,
        exact: None,
    };
    let mut region = config.tracked_radius.map(|r| TrackedRegion::half_circle(r, 256));
    let mut current = initial.clone();
    let mut step_no = 0;
    let mut last_snapshot = usize::MAX;
    let push_snapshot = |traj: &mut Trajectory, s: &GraphSurface, k: usize, last: &mut usize| {
        if *last != k {
            traj.neumann_max = traj.neumann_max.max(s.neumann_residual());
            traj.snapshots.push(Snapshot { step: k, t: s.t, surface: SnapshotSurface::Graph(s.clone()) });
            *last = k;
        }
    };
    loop {
        let geometry = match current.fundamental_forms() {
            Ok(g) => g,
            Err(e) => {
                traj.stop_reason = StopReason::Error(e);
                break;
            }
        };
        traj.monitors.push(monitor(&current, &geometry));
        if let Some(reg) = &region {
            match reg.measure(&current, &geometry) {
                Some((area, willmore)) => traj.tracked.push(TrackedSample { t: current.t, area, willmore }),
                None => region = None,
            }
        }
        if step_no % config.snapshot_stride == 0 {
            push_snapshot(&mut traj, &current, step_no, &mut last_snapshot);
        }
        let max_ha = h * geometry.max_a();
        if max_ha >= config.blowup_threshold {
            traj.stop_reason = StopReason::Blowup { max_ha };
            break;
        }
        let remaining = config.t_end - current.t;
        if remaining <= 1e-12 * config.t_end.max(1e-300) {
            break;
        }
        let mut dt = stable_dt(&geometry, h, config.cfl);
        if config.scheme == Scheme::SemiImplicit {
            dt *= config.implicit_dt_factor;
        }
        let dt = dt.min(remaining);
        let next = match step_with(&current, &geometry, dt, config) {
            Ok(s) => s,
            Err(e) => {
                traj.stop_reason = StopReason::Error(e);
                break;
            }
        };
        if let Some(reg) = &mut region {
            if !reg.advect(&current, &geometry, dt) {
                region = None;
            }
        }
        current = next;
        step_no += 1;
    }
    push_snapshot(&mut traj, &current, step_no, &mut last_snapshot);
    Ok(traj)
}

/// Half-disk in the (y1, y2) plane bounded by marker points that follow the
/// normal trajectories of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedRegion {
    /// Counter-clockwise from (r, 0) to (-r, 0).
    pub markers: Vec<[f64; 2]>,
}

impl TrackedRegion {
    pub fn half_circle(r: f64, n: usize) -> Self {
        let markers = (0..=n)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / n as f64;
                [r * a.cos(), if k == 0 || k == n { 0.0 } else { r * a.sin() }]
            })
            .collect();
        TrackedRegion { markers }
    }

    /// Bilinear interpolation of a node field; None if any corner is not active.
    fn interpolate(
        surface: &GraphSurface,
        geometry: &SurfaceGeometry,
        y: [f64; 2],
        f: impl Fn(&crate::surface::NodeGeometry) -> f64,
    ) -> Option<f64> {
        let h = surface.grid.h();
        let (s, t) = (y[0] / h, y[1] / h);
        let (i0, j0) = (s.floor() as i64, t.floor() as i64);
        let (a, b) = (s - i0 as f64, t - j0 as f64);
        let mut v = 0.0;
        for (di, wi) in [(0, 1.0 - a), (1, a)] {
            for (dj, wj) in [(0, 1.0 - b), (1, b)] {
                let k = surface.grid.resolve(i0 + di, j0 + dj)?;
                v += wi * wj * f(geometry.get(k)?);
            }
        }
        Some(v)
    }

    fn advect(&mut self, surface: &GraphSurface, geometry: &SurfaceGeometry, dt: f64) -> bool {
        let n = self.markers.len();
        for (k, m) in self.markers.iter_mut().enumerate() {
            let (Some(w1), Some(w2)) =
                (Self::interpolate(surface, geometry, *m, |g| g.drift[0]), Self::interpolate(surface, geometry, *m, |g| g.drift[1]))
            else {
                return false;
            };
            m[0] += dt * w1;
            m[1] = if k == 0 || k == n - 1 { 0.0 } else { (m[1] + dt * w2).max(0.0) };
        }
        true
    }

    /// (area, ∫H²) of the region by Green's theorem, ∮ G dy2 with
    /// G(y1, y2) = ∫_0^{y1} F(s, y2) ds for F bilinear in the node values.
    fn measure(&self, surface: &GraphSurface, geometry: &SurfaceGeometry) -> Option<(f64, f64)> {
        let grid = &surface.grid;
        let h = grid.h();
        let row_integral = |j: i64, y1: f64, f: &dyn Fn(&crate::surface::NodeGeometry) -> f64| -> Option<f64> {
            let s = y1 / h;
            let dir: i64 = if s >= 0.0 { 1 } else { -1 };
            let full = (s.abs().floor()) as i64;
            let node = |i: i64| grid.resolve(i, j).and_then(|k| geometry.get(k)).map(f);
            let mut acc = 0.0;
            let mut prev = node(0)?;
            for m in 1..=full {
                let cur = node(dir * m)?;
                acc += 0.5 * (prev + cur) * h;
                prev = cur;
            }
            let frac = s.abs() - full as f64;
            if frac > 0.0 {
                let next = node(dir * (full + 1))?;
                let mid = prev + frac * (next - prev);
                acc += 0.5 * (prev + mid) * frac * h;
            }
            Some(dir as f64 * acc)
        };
        let g_at = |y: [f64; 2], f: &dyn Fn(&crate::surface::NodeGeometry) -> f64| -> Option<f64> {
            let t = y[1] / h;
            let j0 = t.floor() as i64;
            let b = t - j0 as f64;
            Some((1.0 - b) * row_integral(j0, y[0], f)? + b * row_integral(j0 + 1, y[0], f)?)
        };
        let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let mut area = 0.0;
        let mut willmore = 0.0;
        let fa = |g: &crate::surface::NodeGeometry| g.area_element;
        let fw = |g: &crate::surface::NodeGeometry| g.area_element * g.mean_curvature * g.mean_curvature;
        for w in self.markers.windows(2) {
            let dy2 = w[1][1] - w[0][1];
            for s in gauss {
                let y = [w[0][0] + s * (w[1][0] - w[0][0]), w[0][1] + s * dy2];
                area += 0.5 * dy2 * g_at(y, &fa)?;
                willmore += 0.5 * dy2 * g_at(y, &fw)?;
            }
        }
        // the closing leg runs along y2 = 0, where dy2 = 0
        Some((area, willmore))
    }
}

/// sup |∇u(x, t) − ∇u(x, t′)| / |t − t′|^{1/2} over snapshot pairs in the
/// window, at lattice node (i, j).
pub fn temporal_regularity_probe(traj: &Trajectory, node: (i64, i64), window: (f64, f64)) -> Result<f64> {
    let snaps: Vec<&GraphSurface> =
        traj.snapshots.iter().filter(|s| s.t >= window.0 && s.t <= window.1).filter_map(|s| s.graph()).collect();
    if snaps.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, found: snaps.len() });
    }
    let grid = &snaps[0].grid;
    let k = grid
        .resolve(node.0, node.1)
        .filter(|&k| grid.kind(k) == NodeKind::Active)
        .ok_or_else(|| Error::InvalidQuery(format!("node {node:?} is not an active node")))?;
    if grid.shape() != DomainShape::Strip {
        let (y1, y2) = grid.y(k);
        if grid.radius() - (y1 * y1 + y2 * y2).sqrt() < 0.25 * grid.radius() {
            return Err(Error::InvalidQuery("probe node must keep r_dom/4 from the rim".into()));
        }
    }
    let h = grid.h();
    let grads: Vec<(f64, [f64; 2])> = snaps
        .iter()
        .map(|s| {
            let v = |di: i64, dj: i64| s.value(node.0 + di, node.1 + dj).unwrap_or(f64::NAN);
            (s.t, [(v(1, 0) - v(-1, 0)) / (2.0 * h), (v(0, 1) - v(0, -1)) / (2.0 * h)])
        })
        .collect();
    let mut sup: f64 = 0.0;
    for a in 0..grads.len() {
        for b in a + 1..grads.len() {
            let dt = (grads[b].0 - grads[a].0).abs();
            if dt > 0.0 {
                let d = ((grads[b].1[0] - grads[a].1[0]).powi(2) + (grads[b].1[1] - grads[a].1[1]).powi(2)).sqrt();
                sup = sup.max(d / dt.sqrt());
            }
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::support::Vec3;

    fn flat_graph(r: f64, h: f64, f: impl Fn(f64, f64) -> f64) -> GraphSurface {
        GraphSurface::from_fn(Arc::new(Grid::half_disk(r, h).unwrap()), Arc::new(SupportPatch::flat()), 0.0, f).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let s = flat_graph(1.0, 1.0 / 16.0, |_, _| 0.0);
        let cfg = FlowConfig { t_end: 0.05, ..FlowConfig::default() };
        let traj = run(&s, &cfg).unwrap();
        assert!(traj.stop_reason.reached_end());
        for snap in &traj.snapshots {
            assert_eq!(snap.graph().unwrap().max_abs(), 0.0);
        }
        let a0 = traj.monitors[0].area;
        assert!(traj.monitors.iter().all(|m| m.area == a0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let s = flat_graph(0.5, 0.05, |_, _| 0.0);
        let cfg = FlowConfig::default();
        assert!(matches!(step(&s, 1.0, &cfg), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn paraboloid_first_step_is_forcing() {
        let patch = Arc::new(SupportPatch::paraboloid(0.5, 0.5).unwrap());
        let grid = Arc::new(Grid::half_disk(0.4, 0.05).unwrap());
        let s = GraphSurface::from_fn(grid, patch, 0.0, |_, _| 0.0).unwrap();
        let g = s.fundamental_forms().unwrap();
        let dt = 0.5 * stable_dt(&g, 0.05, 0.2);
        let next = step(&s, dt, &FlowConfig::default()).unwrap();
        for n in &g.nodes {
            assert_eq!(next.u[n.node], dt * n.forcing);
        }
    }

    #[test]
    fn even_data_stays_even() {
        let s = flat_graph(0.5, 1.0 / 32.0, |a, b| 0.1 * (a * a - 0.5 * b * b) + 0.05 * a.powi(4));
        let cfg = FlowConfig { t_end: 2e-3, ..FlowConfig::default() };
        let traj = run(&s, &cfg).unwrap();
        let last = traj.snapshots.last().unwrap().graph().unwrap();
        for &k in last.grid.active() {
            let (i, j) = last.grid.ij(k);
            assert!((last.u[k] - last.value(-i, j).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn semi_implicit_matches_explicit() {
        let exact = ExactSolution::Hemisphere { center: Vec3::zeros(), r0: 1.0 };
        let grid = Arc::new(Grid::half_disk(0.5, 1.0 / 32.0).unwrap());
        let s = exact.graph(grid, Arc::new(SupportPatch::flat()), 0.0).unwrap();
        let base = FlowConfig { t_end: 0.005, outer_bc: OuterBc::DirichletExact(exact.clone()), ..FlowConfig::default() };
        let a = run(&s, &base).unwrap();
        let b = run(&s, &FlowConfig { scheme: Scheme::SemiImplicit, ..base }).unwrap();
        let (ga, gb) = (a.snapshots.last().unwrap().graph().unwrap(), b.snapshots.last().unwrap().graph().unwrap());
        let diff = ga.grid.active().iter().map(|&k| (ga.u[k] - gb.u[k]).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-4, "{diff}");
    }

    #[test]
    fn probe_needs_three_snapshots() {
        let s = flat_graph(1.0, 0.125, |_, _| 0.0);
        let traj = run(&s, &FlowConfig { t_end: 0.01, snapshot_stride: 1000, ..FlowConfig::default() }).unwrap();
        assert!(matches!(temporal_regularity_probe(&traj, (0, 1), (0.0, 1.0)), Err(Error::InsufficientSnapshots { .. })));
        let traj = run(&s, &FlowConfig { t_end: 0.01, snapshot_stride: 1, ..FlowConfig::default() }).unwrap();
        assert_eq!(temporal_regularity_probe(&traj, (0, 1), (0.0, 1.0)).unwrap(), 0.0);
    }
}
