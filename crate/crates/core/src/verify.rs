//! The acceptance suite behind `verify`: twelve checks against exact
//! solutions, closed-form oracles and grid refinement.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use crate::analytic::{AnalyticSurface, ExactSolution};
use crate::error::{Error, Result};
use crate::flow::{run, stable_dt, step, ExactSource, FlowConfig, OuterBc, Trajectory};
use crate::grid::Grid;
use crate::monitors::{
    boundary_density_value, interior_density_value, monotonicity_report, self_shrinker_residual, singular_set_scan, DensityQuery, Location,
};
use crate::rescaling::{parabolic_rescale, planarity_multiplicity};
use crate::support::{SupportPatch, Vec3};
use crate::surface::GraphSurface;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub measured: String,
    pub limit: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2}  {}  {:<34} {}  [{}]  ({:.2} s)",
            self.id, self.status, self.name, self.measured, self.limit, self.seconds
        )
    }
}

struct Outcome {
    pass: bool,
    measured: String,
    limit: String,
}

fn timed(id: u8, name: &'static str, budget: Option<f64>, f: impl FnOnce() -> Result<Outcome>) -> CriterionResult {
    let start = Instant::now();
    let out = f();
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, measured, mut limit) = match out {
        Ok(o) => (o.pass, o.measured, o.limit),
        Err(e) => (false, format!("error: {e}"), String::new()),
    };
    if let Some(b) = budget {
        pass &= seconds < b;
        limit = format!("{limit}; runtime < {b} s");
    }
    CriterionResult { id, name, status: if pass { Status::Pass } else { Status::Fail }, measured, limit, seconds }
}

fn flat() -> Arc<SupportPatch> {
    Arc::new(SupportPatch::flat())
}

fn hemisphere(r0: f64) -> ExactSolution {
    ExactSolution::Hemisphere { center: Vec3::zeros(), r0 }
}

fn max_active_error(a: &GraphSurface, b: &GraphSurface) -> f64 {
    a.grid.active().iter().map(|&k| (a.u[k] - b.u[k]).abs()).fold(0.0, f64::max)
}

/// Explicit run of the unit hemisphere graph over a half-disk with
/// Dirichlet-exact rim.
fn hemisphere_run(r_dom: f64, h: f64, t_end: f64, stride: usize, tracked: Option<f64>) -> Result<(Trajectory, GraphSurface)> {
    let exact = hemisphere(1.0);
    let grid = Arc::new(Grid::half_disk(r_dom, h)?);
    let init = exact.graph(grid.clone(), flat(), 0.0)?;
    let cfg = FlowConfig {
        t_end,
        snapshot_stride: stride,
        outer_bc: OuterBc::DirichletExact(exact.clone()),
        tracked_radius: tracked,
        ..FlowConfig::default()
    };
    let traj = run(&init, &cfg)?;
    if let crate::flow::StopReason::Error(e) = &traj.stop_reason {
        return Err(e.clone());
    }
    let last = traj.snapshots.last().and_then(|s| s.graph()).expect("graph run").clone();
    let reference = exact.graph(grid, flat(), last.t)?;
    Ok((traj, reference))
}

pub fn criterion_1() -> CriterionResult {
    timed(1, "stationary half-plane", Some(1.0), || {
        let grid = Arc::new(Grid::half_disk(0.5, 1.0 / 64.0)?);
        let mut s = GraphSurface::from_fn(grid, flat(), 0.0, |_, _| 0.0)?;
        let cfg = FlowConfig::default();
        let dt = stable_dt(&s.fundamental_forms()?, s.grid.h(), cfg.cfl);
        for _ in 0..500 {
            s = step(&s, dt, &cfg)?;
        }
        let m = s.max_abs();
        Ok(Outcome { pass: m <= 1e-12, measured: format!("max|u| = {m:.3e} after 500 steps"), limit: "≤ 1e-12".into() })
    })
}

pub fn criterion_2() -> CriterionResult {
    timed(2, "shrinking-sphere convergence", Some(30.0), || {
        let (a, ea) = hemisphere_run(0.5, 1.0 / 64.0, 0.01, usize::MAX, None)?;
        let (b, eb) = hemisphere_run(0.5, 1.0 / 128.0, 0.01, usize::MAX, None)?;
        let e64 = max_active_error(a.snapshots.last().unwrap().graph().unwrap(), &ea);
        let e128 = max_active_error(b.snapshots.last().unwrap().graph().unwrap(), &eb);
        let ratio = e64 / e128;
        Ok(Outcome {
            pass: (3.0..=5.0).contains(&ratio),
            measured: format!("e(1/64) = {e64:.3e}, e(1/128) = {e128:.3e}, ratio {ratio:.3}"),
            limit: "ratio ∈ [3, 5]".into(),
        })
    })
}

pub fn criterion_3() -> CriterionResult {
    timed(3, "area law", None, || {
        let (traj, _) = hemisphere_run(0.5, 1.0 / 64.0, 0.05, usize::MAX, Some(0.3))?;
        let err = traj.area_law_error().ok_or_else(|| Error::EmptyWindow("tracked region lost".into()))?;
        let excess = traj.area_increase_excess();
        Ok(Outcome {
            pass: err <= 0.02 && excess <= 0.0,
            measured: format!("mean |A' + W|/W = {err:.3e}, area excess {excess:.1e}"),
            limit: "≤ 2%, no area increase".into(),
        })
    })
}

pub fn criterion_4() -> CriterionResult {
    timed(4, "Huisken density ground truth", Some(5.0), || {
        let plane = AnalyticSurface::plane(Vec3::zeros(), Vec3::z(), 10.0)?;
        let half = AnalyticSurface::half_plane(flat(), Vec3::zeros(), Vec3::z(), 10.0)?;
        let tau = 1e-3;
        let v = interior_density_value(&plane, 0.0, &Vec3::zeros(), tau, 1.0)?;
        let b = boundary_density_value(&half, 0.0, &Vec3::zeros(), tau, 0.0)?;
        Ok(Outcome {
            pass: (v - 1.0).abs() <= 1e-3 && (b - 0.5).abs() <= 1e-3,
            measured: format!("plane {v:.6}, half-plane {b:.6}"),
            limit: "1 ± 1e-3, 0.5 ± 1e-3".into(),
        })
    })
}

pub fn criterion_5() -> CriterionResult {
    timed(5, "boundary/interior kernel consistency", None, || {
        let r = 0.5;
        let hemi = AnalyticSurface::hemisphere(flat(), Vec3::zeros(), r)?;
        let sphere = AnalyticSurface::sphere(Vec3::zeros(), r)?;
        let mut worst = 0.0f64;
        for p in [Vec3::zeros(), Vec3::new(0.2, 0.0, 0.1), Vec3::new(-0.3, 0.0, 0.45)] {
            for tau in [0.01, 0.0625, 0.2] {
                let b = boundary_density_value(&hemi, 0.0, &p, tau, 0.0)?;
                let i = interior_density_value(&sphere, 0.0, &p, tau, 1e4)?;
                worst = worst.max((b - 0.5 * i).abs());
            }
        }
        Ok(Outcome { pass: worst <= 1e-6, measured: format!("max |B − I/2| = {worst:.3e}"), limit: "≤ 1e-6".into() })
    })
}

pub fn criterion_6() -> CriterionResult {
    timed(6, "monotonicity", Some(60.0), || {
        let ts = 0.25;
        let t_end = 0.8 * ts;
        // exact trajectory: boundary density at the singular centre
        let src = ExactSource { solution: hemisphere(1.0), patch: flat(), extent: 2.0, spacing: 0.02 };
        let exact = Trajectory::exact(src, &[0.0, t_end])?;
        let times: Vec<f64> = (0..=16).map(|k| t_end * k as f64 / 16.0).collect();
        let q = DensityQuery { point: Vec3::zeros(), terminal_time: ts, location: Location::Boundary { kappa: 0.0 }, sample_times: times };
        let centre = monotonicity_report(&exact, &q)?;
        // grid run: interior density about a regular point near the end of the run
        let (traj, _) = hemisphere_run(0.4, 1.0 / 64.0, t_end, 5, None)?;
        let r = 0.03;
        let y2 = 0.15;
        let p = Vec3::new(0.0, y2, (1.0 - 4.0 * t_end - y2 * y2).sqrt());
        let times: Vec<f64> = (0..=8).map(|k| t_end - 8.8e-4 + 1e-4 * k as f64).collect();
        let q = DensityQuery { point: p, terminal_time: t_end, location: Location::Interior { r }, sample_times: times };
        let graph = monotonicity_report(&traj, &q)?;
        let worst = centre.max_upward_violation.max(graph.max_upward_violation);
        Ok(Outcome {
            pass: worst <= 1e-3,
            measured: format!(
                "centre Θ_Γ → {:.6} (viol {:.1e}), grid Θ → {:.6} (viol {:.1e})",
                centre.limit_estimate, centre.max_upward_violation, graph.limit_estimate, graph.max_upward_violation
            ),
            limit: "upward violation ≤ 1e-3".into(),
        })
    })
}

pub fn criterion_7() -> CriterionResult {
    timed(7, "Gauss–Bonnet energy identity", None, || {
        let hemi = AnalyticSurface::hemisphere(flat(), Vec3::zeros(), 0.7)?.gauss_bonnet()?;
        let sphere = AnalyticSurface::sphere(Vec3::zeros(), 0.7)?.gauss_bonnet()?;
        let tol = 0.01 * 4.0 * PI;
        let pass = hemi.residual.abs() <= tol
            && sphere.residual.abs() <= tol
            && (hemi.lhs - 4.0 * PI).abs() <= tol
            && (sphere.lhs - 8.0 * PI).abs() <= tol;
        Ok(Outcome {
            pass,
            measured: format!(
                "hemisphere lhs/4π {:.6} res {:.1e}; sphere lhs/4π {:.6} res {:.1e}",
                hemi.lhs / (4.0 * PI),
                hemi.residual,
                sphere.lhs / (4.0 * PI),
                sphere.residual
            ),
            limit: "|res| ≤ 0.04π".into(),
        })
    })
}

pub fn criterion_8() -> CriterionResult {
    timed(8, "self-shrinker residual", None, || {
        let r = 0.5;
        let sphere = AnalyticSurface::sphere(Vec3::zeros(), r)?;
        let analytic = self_shrinker_residual(&sphere, 0.0, &Vec3::zeros(), r * r / 4.0, Location::Interior { r: 10.0 })?;
        let exact = hemisphere(1.0);
        let mut roots = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let g = exact.graph(Arc::new(Grid::half_disk(0.5, h)?), flat(), 0.0)?;
            let s = g.samples()?;
            roots.push(self_shrinker_residual(&s, 0.0, &Vec3::zeros(), 0.25, Location::Boundary { kappa: 0.0 })?.sqrt());
        }
        let ratio = roots[0] / roots[1];
        Ok(Outcome {
            pass: analytic <= 1e-8 && (3.0..=5.0).contains(&ratio),
            measured: format!("analytic {analytic:.1e}; grid √res {:.2e} → {:.2e}, ratio {ratio:.3}", roots[0], roots[1]),
            limit: "≤ 1e-8; ratio ∈ [3, 5]".into(),
        })
    })
}

pub fn criterion_9() -> CriterionResult {
    timed(9, "modified area ratio", None, || {
        let h = 1.0 / 64.0;
        let delta = 0.2;
        let grid = Arc::new(Grid::half_disk(1.0, h)?);
        let s = GraphSurface::from_fn(grid, flat(), 0.0, |y1, _| delta * y1)?.samples()?;
        let mut worst = f64::NEG_INFINITY;
        let mut ratios = Vec::new();
        for r in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let a = s.modified_area_ratio(&Vec3::zeros(), r)?;
            worst = worst.max(a.ratio - ((1.0 + delta * delta).sqrt() + 3.0 * h / r));
            ratios.push(format!("{:.4}", a.ratio));
        }
        Ok(Outcome { pass: worst <= 0.0, measured: format!("ratios [{}]", ratios.join(", ")), limit: "≤ √1.04 + 3h/r".into() })
    })
}

pub fn criterion_10() -> CriterionResult {
    timed(10, "reflection principle", None, || {
        let h = 1.0 / 64.0;
        let g = hemisphere(1.0).graph(Arc::new(Grid::half_disk(0.5, h)?), flat(), 0.0)?;
        let ext = g.even_extension(h * h)?;
        let geom = ext.surface.fundamental_forms()?;
        let grid = &ext.surface.grid;
        let mut residual = vec![f64::NAN; grid.len()];
        for (n, &k) in grid.active().iter().enumerate() {
            let node = geom.get(k).expect("active node");
            let a = &ext.coefficients[n];
            let mut r = ext.forcing[n];
            for i in 0..2 {
                for j in 0..2 {
                    r += a[i][j] * node.hess[i][j];
                }
            }
            residual[k] = r;
        }
        let scale = residual.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for &k in grid.active() {
            let (i, j) = grid.ij(k);
            let m = grid.resolve(i, -j).expect("mirror node");
            worst = worst.max((residual[k] - residual[m]).abs());
        }
        let rel = worst / scale.max(1e-300);
        Ok(Outcome {
            pass: rel <= 1e-12 && ext.max_edge_a12 <= h * h,
            measured: format!("max |R − R∘refl|/max|R| = {rel:.1e}, |a12| on edge {:.1e}", ext.max_edge_a12),
            limit: "≤ 1e-12; ≤ h²".into(),
        })
    })
}

pub fn criterion_11() -> CriterionResult {
    timed(11, "rescaling self-similarity", None, || {
        let ts = 0.25;
        let src = ExactSource { solution: hemisphere(1.0), patch: flat(), extent: 2.0, spacing: 0.05 };
        let traj = Trajectory::exact(src, &[0.0, 0.2])?;
        let a = parabolic_rescale(&traj, &Vec3::zeros(), ts, E.recip(), -1.0)?;
        let b = parabolic_rescale(&traj, &Vec3::zeros(), ts, E.powi(-2), -1.0)?;
        let diff = a.max_difference(&b).ok_or_else(|| Error::InvalidQuery("frames are sampled differently".into()))?;
        let plane = ExactSolution::HalfPlane { point: Vec3::zeros(), normal: Vec3::z() };
        let src = ExactSource { solution: plane, patch: flat(), extent: 4.0, spacing: 0.05 };
        let static_traj = Trajectory::exact(src, &[0.0, 1.0])?;
        let frame = parabolic_rescale(&static_traj, &Vec3::new(0.3, 0.0, 0.0), 1.0, 0.5, -1.0)?;
        let rep = planarity_multiplicity(&frame, &Vec3::zeros(), 1.0, &[])?;
        Ok(Outcome {
            pass: diff <= 1e-6 && rep.sheets == 1 && rep.deviation <= 1e-10,
            measured: format!("frame difference {diff:.1e}; half-plane m = {}, deviation {:.1e}", rep.sheets, rep.deviation),
            limit: "≤ 1e-6; m = 1, ≤ 1e-10".into(),
        })
    })
}

pub fn criterion_12() -> CriterionResult {
    timed(12, "singular-set scan", None, || {
        let h = 0.02;
        let r_stop = 0.04;
        let t_stop = (1.0 - r_stop * r_stop) / 4.0;
        let src = ExactSource { solution: hemisphere(1.0), patch: flat(), extent: 2.0, spacing: h };
        let traj = Trajectory::exact(src, &[0.0, 0.5 * t_stop, t_stop])?;
        let radii = [0.1, 0.2, 0.4];
        let scan = singular_set_scan(&traj, 1.0, &radii)?;
        let dist = scan.clusters.first().map(|c| Vec3::from(c.centroid).norm()).unwrap_or(f64::INFINITY);
        let grid = Arc::new(Grid::half_disk(0.5, 1.0 / 32.0)?);
        let zero = GraphSurface::from_fn(grid, flat(), 0.0, |_, _| 0.0)?;
        let cfg = FlowConfig { t_end: 1e-3, snapshot_stride: 2, ..FlowConfig::default() };
        let flat_scan = singular_set_scan(&run(&zero, &cfg)?, 1.0, &radii)?;
        let flagged = flat_scan.candidates.iter().filter(|c| c.flagged).count();
        Ok(Outcome {
            pass: scan.clusters.len() == 1 && dist <= 3.0 * h && flagged == 0,
            measured: format!("{} cluster(s), centroid at {dist:.3} from centre; flat run flags {flagged}", scan.clusters.len()),
            limit: "one cluster within 3h; flat none".into(),
        })
    })
}

/// Criteria that need long grid runs; `--fast` leaves them out.
pub const HEAVY: [u8; 3] = [2, 3, 6];

pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    Some(match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        12 => criterion_12(),
        _ => return None,
    })
}

const NAMES: [&str; 12] = [
    "stationary half-plane",
    "shrinking-sphere convergence",
    "area law",
    "Huisken density ground truth",
    "boundary/interior kernel consistency",
    "monotonicity",
    "Gauss–Bonnet energy identity",
    "self-shrinker residual",
    "modified area ratio",
    "reflection principle",
    "rescaling self-similarity",
    "singular-set scan",
];

/// Runs the suite in order; criteria run one at a time so their runtimes
/// are comparable.
pub fn run_all(fast: bool, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut out = Vec::with_capacity(12);
    for id in 1..=12u8 {
        let r = if fast && HEAVY.contains(&id) {
            CriterionResult {
                id,
                name: NAMES[id as usize - 1],
                status: Status::Skipped,
                measured: "skipped (--fast)".into(),
                limit: String::new(),
                seconds: 0.0,
            }
        } else {
            run_criterion(id).expect("known id")
        };
        report(&r);
        out.push(r);
    }
    out
}
