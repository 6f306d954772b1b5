//! Gaussian densities, monotonicity, self-shrinker residuals, energy and the
//! ε-energy singular-set scan.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::samples::{SurfaceMeasure, SurfacePoint};
use crate::support::{SupportPatch, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "location", rename_all = "snake_case")]
pub enum Location {
    Interior { r: f64 },
    Boundary { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityQuery {
    pub point: Vec3,
    pub terminal_time: f64,
    pub location: Location,
    pub sample_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// (value_k − value_{k−1})₊, zero for the first sample.
    pub violations: Vec<f64>,
    pub max_upward_violation: f64,
    pub limit_estimate: f64,
    /// the last three samples move by less than 1e-3
    pub flat: bool,
    /// Planar Gaussian mass inside the cutoff support at each sample.
    pub captured_mass: Vec<f64>,
    /// snapshot time minus requested time, per sample
    pub time_offsets: Vec<f64>,
}

/// Largest T − t admitted by the boundary formula, ½(3/320)⁵κ⁻².
pub fn boundary_window(kappa: f64) -> f64 {
    if kappa > 0.0 {
        0.5 * (3.0f64 / 320.0).powi(5) / (kappa * kappa)
    } else {
        f64::INFINITY
    }
}

fn check_interior(surface: &dyn SurfaceMeasure, p: &Vec3, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidQuery(format!("cutoff radius must be positive, got {r}")));
    }
    if let Some(patch) = surface.support() {
        let d = patch.signed_distance(p)?;
        if !(r < d / (2.0 * 5f64.sqrt())) {
            return Err(Error::InvalidQuery(format!("interior query needs r < d_Γ(P)/(2√5); r = {r}, d_Γ(P) = {d}")));
        }
    }
    Ok(())
}

fn elapsed(t: f64, terminal: f64) -> Result<f64> {
    let tau = terminal - t;
    if !(tau > 0.0) {
        return Err(Error::InvalidQuery(format!("sample time {t} must precede the terminal time {terminal}")));
    }
    Ok(tau)
}

/// ∫ ψ_{r;P,T} Ψ_{P,T} dH² for the surface at time t.
pub fn interior_density_value(surface: &dyn SurfaceMeasure, t: f64, p: &Vec3, terminal: f64, r: f64) -> Result<f64> {
    check_interior(surface, p, r)?;
    let tau = elapsed(t, terminal)?;
    let f = |x: &SurfacePoint| {
        let d2 = (x.position - p).norm_squared();
        let psi = (1.0 - (d2 - 4.0 * tau) / (r * r)).max(0.0).powi(3);
        psi * (-d2 / (4.0 * tau)).exp() / (4.0 * PI * tau)
    };
    Ok(surface.integrate_near(&f, Some((p, (2.0 * tau).sqrt()))))
}

struct BoundaryKernel<'a> {
    patch: &'a SupportPatch,
    p: Vec3,
    tau: f64,
    kappa: f64,
    q: f64,
}

impl<'a> BoundaryKernel<'a> {
    fn new(surface: &'a dyn SurfaceMeasure, t: f64, p: &Vec3, terminal: f64, kappa: f64) -> Result<Self> {
        let patch = surface.support().ok_or(Error::NoFreeBoundary)?;
        if !(kappa >= 0.0) {
            return Err(Error::InvalidQuery("kappa must be non-negative".into()));
        }
        let d = patch.signed_distance(p)?;
        if d.abs() > 1e-9 * (1.0 + p.norm()) {
            return Err(Error::InvalidQuery(format!("boundary query needs P on Γ, d_Γ(P) = {d:e}")));
        }
        let tau = elapsed(t, terminal)?;
        let limit = boundary_window(kappa);
        if tau > limit {
            return Err(Error::TimeWindow { elapsed: tau, limit });
        }
        let q = (kappa * kappa * tau).powf(0.4);
        Ok(BoundaryKernel { patch, p: *p, tau, kappa, q })
    }

    fn variance(&self) -> f64 {
        1.0 + 16.0 * self.q
    }

    fn prefactor(&self) -> f64 {
        (85.0 * self.q).exp()
    }

    /// (η Ψ_Γ, X̃) at X; η ≡ 1 when κ = 0.
    fn weight(&self, x: &Vec3) -> f64 {
        let Ok(xt) = self.patch.reflect(x) else { return 0.0 };
        let s = (x - self.p).norm_squared() + (xt - self.p).norm_squared();
        let eta = if self.kappa > 0.0 {
            let scale = 0.5 * self.q / self.kappa;
            (1.0 - (s - 80.0 * self.tau) / (scale * scale)).max(0.0).powi(4)
        } else {
            1.0
        };
        eta * (-0.5 * s / (4.0 * self.variance() * self.tau)).exp() / (4.0 * PI * self.tau)
    }

    fn width(&self) -> f64 {
        (2.0 * self.variance() * self.tau).sqrt()
    }
}

/// e^{85(κ²(T−t))^{2/5}} ∫ η_{Γ;P,T} Ψ_{Γ;P,T} dH² for P on Γ.
pub fn boundary_density_value(surface: &dyn SurfaceMeasure, t: f64, p: &Vec3, terminal: f64, kappa: f64) -> Result<f64> {
    let k = BoundaryKernel::new(surface, t, p, terminal, kappa)?;
    let v = surface.integrate_near(&|x: &SurfacePoint| k.weight(&x.position), Some((p, k.width())));
    Ok(k.prefactor() * v)
}

pub fn density_value(surface: &dyn SurfaceMeasure, t: f64, p: &Vec3, terminal: f64, location: Location) -> Result<f64> {
    match location {
        Location::Interior { r } => interior_density_value(surface, t, p, terminal, r),
        Location::Boundary { kappa } => boundary_density_value(surface, t, p, terminal, kappa),
    }
}

/// ∫ (H − ∇ln Ψ · N)² times the kernel, the defect in the monotonicity formula.
pub fn self_shrinker_residual(surface: &dyn SurfaceMeasure, t: f64, p: &Vec3, terminal: f64, location: Location) -> Result<f64> {
    match location {
        Location::Interior { r } => {
            check_interior(surface, p, r)?;
            let tau = elapsed(t, terminal)?;
            let f = |x: &SurfacePoint| {
                let v = x.position - p;
                let defect = x.mean_curvature + v.dot(&x.normal) / (2.0 * tau);
                let d2 = v.norm_squared();
                defect * defect * (-d2 / (4.0 * tau)).exp() / (4.0 * PI * tau)
            };
            Ok(surface.integrate_near(&f, Some((p, (2.0 * tau).sqrt()))))
        }
        Location::Boundary { kappa } => {
            let k = BoundaryKernel::new(surface, t, p, terminal, kappa)?;
            let patch = k.patch;
            let f = |x: &SurfacePoint| {
                let Ok(proj) = patch.project_and_distance(&x.position) else { return 0.0 };
                let d = proj.distance;
                let grad = proj.gradient;
                let v = x.position - p;
                let hess = if d != 0.0 {
                    patch.distance_hessian(&x.position).unwrap_or_else(|_| nalgebra::Matrix3::zeros())
                } else {
                    nalgebra::Matrix3::zeros()
                };
                let drift = v.dot(&x.normal) - (v.dot(&grad) - d) * grad.dot(&x.normal) - d * v.dot(&(hess * x.normal));
                let defect = x.mean_curvature + drift / (2.0 * k.variance() * k.tau);
                defect * defect * k.weight(&x.position)
            };
            Ok(k.prefactor() * surface.integrate_near(&f, Some((p, k.width()))))
        }
    }
}

pub fn energy(surface: &dyn SurfaceMeasure) -> f64 {
    surface.integrate(&|x| x.a_norm_sq)
}

pub fn monotonicity_report(traj: &Trajectory, query: &DensityQuery) -> Result<DensityReport> {
    let times = &query.sample_times;
    if times.is_empty() {
        return Err(Error::EmptyWindow("no sample times".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidQuery("sample times must increase".into()));
    }
    let last = *times.last().unwrap();
    elapsed(last, query.terminal_time)?;
    match query.location {
        Location::Interior { r } if query.terminal_time - times[0] > r * r => {
            return Err(Error::InvalidQuery(format!("interior monotonicity needs T − t ≤ r² = {:e}", r * r)));
        }
        Location::Boundary { kappa } => {
            let tau = query.terminal_time - times[0];
            if tau > boundary_window(kappa) {
                return Err(Error::TimeWindow { elapsed: tau, limit: boundary_window(kappa) });
            }
        }
        _ => {}
    }
    let rows: Vec<(f64, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let (mut snap, mut offset) = traj.surface_at(t)?;
            if snap.t >= query.terminal_time {
                // quantization must not land on or past T
                let before = traj.snapshots.iter().rev().find(|s| s.t < query.terminal_time);
                let before = before.ok_or_else(|| Error::EmptyWindow("no snapshot precedes the terminal time".into()))?;
                snap = before.clone();
                offset = snap.t - t;
            }
            let v = snap.with_measure(|m| density_value(m, snap.t, &query.point, query.terminal_time, query.location))??;
            Ok((snap.t, v, offset))
        })
        .collect::<Result<_>>()?;
    let mut report = DensityReport {
        times: rows.iter().map(|r| r.0).collect(),
        values: rows.iter().map(|r| r.1).collect(),
        violations: Vec::with_capacity(rows.len()),
        max_upward_violation: 0.0,
        limit_estimate: rows.last().unwrap().1,
        flat: false,
        captured_mass: Vec::with_capacity(rows.len()),
        time_offsets: rows.iter().map(|r| r.2).collect(),
    };
    for (k, &(t, _, _)) in rows.iter().enumerate() {
        let up = if k == 0 { 0.0 } else { (report.values[k] - report.values[k - 1]).max(0.0) };
        report.violations.push(up);
        report.max_upward_violation = report.max_upward_violation.max(up);
        let tau = query.terminal_time - t;
        report.captured_mass.push(match query.location {
            Location::Interior { r } => 1.0 - (-(r * r + 4.0 * tau) / (4.0 * tau)).exp(),
            Location::Boundary { .. } => 1.0,
        });
    }
    let n = report.values.len();
    report.flat = n >= 3 && report.values[n - 3..].windows(2).all(|w| (w[1] - w[0]).abs() < 1e-3);
    Ok(report)
}

/// ⟦A⟧: sup of r|A(P)| at time t0 over snapshot samples and dyadic radii
/// r = R 2^{-k} with B_r(P) × B_{r²}(t0) ⊂ B_R(center) × B_ρ(0).
pub fn interior_curvature_norm(traj: &Trajectory, center: &Vec3, radius: f64, rho: f64) -> Result<f64> {
    let mut best: Option<f64> = None;
    for snap in &traj.snapshots {
        let room_t = rho - snap.t.abs();
        if !(room_t > 0.0) {
            continue;
        }
        let samples = snap.samples(traj.spacing)?;
        for s in &samples.points {
            let room_x = radius - (s.point.position - center).norm();
            let r_max = room_x.min(room_t.sqrt());
            if !(r_max > 0.0) {
                continue;
            }
            let k = (radius / r_max).log2().ceil().max(0.0);
            let r = radius * 0.5f64.powf(k);
            if k > 60.0 {
                continue;
            }
            let v = r * s.point.a_norm_sq.sqrt();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.ok_or_else(|| Error::EmptyWindow("no snapshot sample satisfies the window".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub point: [f64; 3],
    pub masses: Vec<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub centroid: [f64; 3],
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularScan {
    pub epsilon: f64,
    pub radii: Vec<f64>,
    pub t: f64,
    pub candidates: Vec<Candidate>,
    pub clusters: Vec<Cluster>,
    pub total_energy: f64,
    /// total energy / ε + 1
    pub count_bound: f64,
}

fn thin(points: impl Iterator<Item = Vec3>, spacing: f64, out: &mut Vec<Vec3>) {
    for p in points {
        if out.iter().all(|q| (q - p).norm() >= spacing) {
            out.push(p);
        }
    }
}

/// Flags candidate centres whose |A|² mass in B_r reaches ε for every radius
/// and groups flagged centres closer than the smallest radius.
pub fn singular_set_scan(traj: &Trajectory, epsilon: f64, radii: &[f64]) -> Result<SingularScan> {
    if traj.snapshots.len() < 2 {
        return Err(Error::InsufficientSnapshots { needed: 2, found: traj.snapshots.len() });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidQuery("epsilon must be positive".into()));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || !(radii[0] > 0.0) {
        return Err(Error::InvalidQuery("radii must be positive and increasing".into()));
    }
    let snap = traj.snapshots.last().unwrap();
    let samples = snap.samples(traj.spacing)?;
    let r_min = radii[0];
    let mut centres = Vec::new();
    thin(samples.points.iter().map(|s| s.point.position), 0.5 * r_min, &mut centres);
    thin(samples.boundary.iter().copied(), 0.5 * r_min, &mut centres);
    let candidates: Vec<Candidate> = centres
        .par_iter()
        .map(|c| {
            let masses: Vec<f64> = radii.iter().map(|&r| samples.mass_in_ball(c, r)).collect();
            let flagged = masses.iter().all(|&m| m >= epsilon);
            Candidate { point: [c.x, c.y, c.z], masses, flagged }
        })
        .collect();
    let flagged: Vec<Vec3> = candidates.iter().filter(|c| c.flagged).map(|c| Vec3::from(c.point)).collect();
    let mut parent: Vec<usize> = (0..flagged.len()).collect();
    fn root(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    for a in 0..flagged.len() {
        for b in a + 1..flagged.len() {
            if (flagged[a] - flagged[b]).norm() < r_min {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<(usize, Vec3, usize)> = Vec::new();
    for k in 0..flagged.len() {
        let r = root(&mut parent, k);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += flagged[k];
                g.2 += 1;
            }
            None => groups.push((r, flagged[k], 1)),
        }
    }
    let clusters = groups
        .into_iter()
        .map(|(_, sum, n)| {
            let c = sum / n as f64;
            Cluster { centroid: [c.x, c.y, c.z], members: n }
        })
        .collect();
    let total_energy = samples.energy();
    Ok(SingularScan {
        epsilon,
        radii: radii.to_vec(),
        t: snap.t,
        candidates,
        clusters,
        total_energy,
        count_bound: total_energy / epsilon + 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::AnalyticSurface;
    use std::sync::Arc;

    fn flat() -> Arc<SupportPatch> {
        Arc::new(SupportPatch::flat())
    }

    #[test]
    fn plane_density_matches_cutoff_oracle() {
        let plane = AnalyticSurface::plane(Vec3::zeros(), Vec3::z(), 5.0).unwrap();
        let (tau, r) = (1e-4, 0.2);
        let v = interior_density_value(&plane, 0.0, &Vec3::zeros(), tau, r).unwrap();
        let a = 4.0 * tau / (r * r);
        assert!((v - (1.0 + 3.0 * a * a - 2.0 * a * a * a)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn half_plane_boundary_density() {
        let hp = AnalyticSurface::half_plane(flat(), Vec3::zeros(), Vec3::z(), 5.0).unwrap();
        let v = boundary_density_value(&hp, 0.0, &Vec3::zeros(), 1e-4, 0.0).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn disjoint_support_gives_zero() {
        let plane = AnalyticSurface::plane(Vec3::new(0.0, 0.0, 3.0), Vec3::z(), 1.0).unwrap();
        assert_eq!(interior_density_value(&plane, 0.0, &Vec3::zeros(), 1e-3, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn interior_precondition() {
        let hp = AnalyticSurface::half_plane(flat(), Vec3::zeros(), Vec3::z(), 5.0).unwrap();
        assert!(matches!(interior_density_value(&hp, 0.0, &Vec3::new(0.0, 0.5, 0.0), 1e-3, 0.2), Err(Error::InvalidQuery(_))));
        assert!(interior_density_value(&hp, 0.0, &Vec3::new(0.0, 0.5, 0.0), 1e-3, 0.1).is_ok());
    }

    #[test]
    fn boundary_window_is_enforced() {
        let hp = AnalyticSurface::half_plane(flat(), Vec3::zeros(), Vec3::z(), 5.0).unwrap();
        let limit = boundary_window(1.0);
        assert!(matches!(boundary_density_value(&hp, 0.0, &Vec3::zeros(), 2.0 * limit, 1.0), Err(Error::TimeWindow { .. })));
        let v = boundary_density_value(&hp, 0.0, &Vec3::zeros(), 0.5 * limit, 1.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn sphere_shrinker_residual_vanishes() {
        let r = 0.3;
        let s = AnalyticSurface::sphere(Vec3::new(1.0, 2.0, 3.0), r).unwrap();
        let tau = r * r / 4.0;
        let res = self_shrinker_residual(&s, 0.0, &Vec3::new(1.0, 2.0, 3.0), tau, Location::Interior { r: 1.0 }).unwrap();
        assert!(res < 1e-20);
        let v = interior_density_value(&s, 0.0, &Vec3::new(1.0, 2.0, 3.0), tau, 1e3).unwrap();
        assert!((v - 4.0 / std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn shifted_plane_residual_is_positive() {
        let plane = AnalyticSurface::plane(Vec3::new(0.0, 0.0, 0.05), Vec3::z(), 3.0).unwrap();
        let tau = 1e-3;
        let res = self_shrinker_residual(&plane, 0.0, &Vec3::zeros(), tau, Location::Interior { r: 1.0 }).unwrap();
        // ∫ (d/2τ)² Ψ over the plane at height d: (d/2τ)² e^{-d²/4τ}
        let d: f64 = 0.05;
        let oracle = (d / (2.0 * tau)).powi(2) * (-d * d / (4.0 * tau)).exp();
        assert!((res - oracle).abs() < 1e-6 * oracle, "{res} {oracle}");
    }
}
