//! Closed-form test surfaces and the exact shrinking solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{disk_rect_area, Grid, NodeKind};
use crate::quadrature::{integrate_2d, ladder, Tolerance};
use crate::samples::{GaussBonnet, SamplePoint, SurfaceMeasure, SurfacePoint, SurfaceSamples, Topology};
use crate::support::{SupportPatch, Vec3};
use crate::surface::GraphSurface;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticKind {
    /// Disk of radius `extent` around `point` in the plane with normal `normal`.
    Plane {
        point: Vec3,
        normal: Vec3,
        extent: f64,
    },
    /// The part of that disk on the U side of a flat Γ; `point` lies on Γ.
    HalfPlane {
        point: Vec3,
        normal: Vec3,
        extent: f64,
    },
    Sphere {
        center: Vec3,
        radius: f64,
    },
    /// Upper half of a sphere centred on a flat Γ.
    Hemisphere {
        center: Vec3,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSurface {
    kind: AnalyticKind,
    patch: Option<Arc<SupportPatch>>,
    tol: Tolerance,
}

fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = (seed - n * n.dot(&seed)).normalize();
    (a, n.cross(&a))
}

fn flat_support(patch: &Arc<SupportPatch>, point: &Vec3) -> Result<()> {
    if !patch.is_flat() {
        return Err(Error::InvalidPatch("closed-form free-boundary surfaces need a flat support".into()));
    }
    let d = patch.signed_distance(point)?;
    if d.abs() > 1e-12 * (1.0 + point.norm()) {
        return Err(Error::InvalidSurface(format!("base point is at distance {d:e} from the support")));
    }
    Ok(())
}

impl AnalyticSurface {
    pub fn plane(point: Vec3, normal: Vec3, extent: f64) -> Result<Self> {
        if !(extent > 0.0) || normal.norm() == 0.0 {
            return Err(Error::InvalidSurface("plane needs a positive extent and a nonzero normal".into()));
        }
        Ok(Self::build(AnalyticKind::Plane { point, normal: normal.normalize(), extent }, None))
    }

    pub fn half_plane(patch: Arc<SupportPatch>, point: Vec3, normal: Vec3, extent: f64) -> Result<Self> {
        if !(extent > 0.0) || normal.norm() == 0.0 {
            return Err(Error::InvalidSurface("half-plane needs a positive extent and a nonzero normal".into()));
        }
        flat_support(&patch, &point)?;
        let normal = normal.normalize();
        let nu = patch.normal(0.0, 0.0)?;
        if normal.dot(&nu).abs() > 1e-12 {
            return Err(Error::InvalidSurface("half-plane must meet the support orthogonally".into()));
        }
        Ok(Self::build(AnalyticKind::HalfPlane { point, normal, extent }, Some(patch)))
    }

    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidSurface("radius must be positive".into()));
        }
        Ok(Self::build(AnalyticKind::Sphere { center, radius }, None))
    }

    pub fn hemisphere(patch: Arc<SupportPatch>, center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidSurface("radius must be positive".into()));
        }
        flat_support(&patch, &center)?;
        Ok(Self::build(AnalyticKind::Hemisphere { center, radius }, Some(patch)))
    }

    fn build(kind: AnalyticKind, patch: Option<Arc<SupportPatch>>) -> Self {
        AnalyticSurface { kind, patch, tol: Tolerance::default() }
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn kind(&self) -> &AnalyticKind {
        &self.kind
    }

    pub fn patch(&self) -> Option<&Arc<SupportPatch>> {
        self.patch.as_ref()
    }

    pub fn topology(&self) -> Option<Topology> {
        match self.kind {
            AnalyticKind::Sphere { .. } => Some(Topology::Sphere),
            AnalyticKind::Hemisphere { .. } => Some(Topology::Disk),
            _ => None,
        }
    }

    /// (e1, axis, e3): the support frame, or the coordinate axes without one.
    fn axes(&self) -> (Vec3, Vec3, Vec3) {
        match &self.patch {
            Some(p) => {
                let f = p.frame();
                (f.column(0).into_owned(), f.column(1).into_owned(), f.column(2).into_owned())
            }
            None => (Vec3::x(), Vec3::y(), Vec3::z()),
        }
    }

    /// In-plane basis (along Γ, along ν) for half-planes, any basis for planes.
    fn plane_basis(&self, normal: &Vec3) -> (Vec3, Vec3) {
        match (&self.kind, &self.patch) {
            (AnalyticKind::HalfPlane { .. }, Some(_)) => {
                let nu = self.axes().1;
                (nu.cross(normal).normalize(), nu)
            }
            _ => orthonormal_pair(normal),
        }
    }

    fn sphere_point(&self, center: &Vec3, radius: f64, theta: f64, phi: f64) -> SurfacePoint {
        let (e1, a, e3) = self.axes();
        let dir = theta.sin() * phi.cos() * e1 + theta.cos() * a + theta.sin() * phi.sin() * e3;
        SurfacePoint { position: center + radius * dir, normal: -dir, mean_curvature: 2.0 / radius, a_norm_sq: 2.0 / (radius * radius) }
    }

    pub fn area(&self) -> f64 {
        self.integrate(&|_| 1.0)
    }

    pub fn energy(&self) -> f64 {
        self.integrate(&|p| p.a_norm_sq)
    }

    pub fn perimeter(&self) -> Result<f64> {
        match self.kind {
            AnalyticKind::HalfPlane { extent, .. } => Ok(2.0 * extent),
            AnalyticKind::Hemisphere { radius, .. } => Ok(2.0 * PI * radius),
            _ => Err(Error::NoFreeBoundary),
        }
    }

    /// Closed-form values are only used as oracles; every term here comes
    /// from quadrature.
    pub fn gauss_bonnet(&self) -> Result<GaussBonnet> {
        let topology = self.topology().ok_or(Error::TopologyUntagged)?;
        let energy = self.energy();
        let willmore = self.integrate(&|p| p.mean_curvature * p.mean_curvature);
        // the supports admitted here are flat, so A_Γ vanishes along γ
        Ok(GaussBonnet::new(energy, willmore, 0.0, topology))
    }

    /// Samples on a lattice of roughly `spacing`: square cells for (half-)
    /// planes, latitude–longitude cells with exact cell areas for spheres.
    pub fn samples(&self, spacing: f64) -> Result<SurfaceSamples> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidSurface("spacing must be positive".into()));
        }
        match &self.kind {
            AnalyticKind::Plane { point, normal, extent } | AnalyticKind::HalfPlane { point, normal, extent } => {
                let half = matches!(self.kind, AnalyticKind::HalfPlane { .. });
                let (ea, eb) = self.plane_basis(normal);
                let n = (extent / spacing).ceil() as i64 + 1;
                let h = spacing;
                let mut pts = Vec::new();
                let mut boundary = Vec::new();
                for j in if half { 0 } else { -n }..=n {
                    for i in -n..=n {
                        let (a, b) = (i as f64 * h, j as f64 * h);
                        let y0 = if half { (b - 0.5 * h).max(0.0) } else { b - 0.5 * h };
                        let w = disk_rect_area(*extent, a - 0.5 * h, a + 0.5 * h, y0, b + 0.5 * h);
                        if (a * a + b * b).sqrt() >= *extent || w <= 0.0 {
                            continue;
                        }
                        let position = point + a * ea + b * eb;
                        if half && j == 0 {
                            boundary.push(position);
                        }
                        pts.push(SamplePoint {
                            point: SurfacePoint { position, normal: *normal, mean_curvature: 0.0, a_norm_sq: 0.0 },
                            weight: w,
                            lattice: (i, j),
                            outer: ((a.abs() + 0.5 * h).powi(2) + (b.abs() + 0.5 * h).powi(2)).sqrt() >= *extent,
                        });
                    }
                }
                Ok(SurfaceSamples::new(pts, boundary, false, h, self.patch.clone(), None))
            }
            AnalyticKind::Sphere { center, radius } | AnalyticKind::Hemisphere { center, radius } => {
                let theta_max = if matches!(self.kind, AnalyticKind::Sphere { .. }) { PI } else { 0.5 * PI };
                let nt = ((theta_max * radius / spacing).ceil() as usize).max(2);
                let np = ((2.0 * PI * radius / spacing).ceil() as usize).max(8);
                let (dt, dp) = (theta_max / nt as f64, 2.0 * PI / np as f64);
                let mut pts = Vec::with_capacity(nt * np);
                for j in 0..nt {
                    let (t0, t1) = (j as f64 * dt, (j + 1) as f64 * dt);
                    let theta = 0.5 * (t0 + t1);
                    let w = radius * radius * (t0.cos() - t1.cos()) * dp;
                    for i in 0..np {
                        let phi = (i as f64 + 0.5) * dp;
                        pts.push(SamplePoint {
                            point: self.sphere_point(center, *radius, theta, phi),
                            weight: w,
                            lattice: (i as i64, j as i64),
                            outer: false,
                        });
                    }
                }
                let boundary = if theta_max < PI {
                    (0..np).map(|i| self.sphere_point(center, *radius, theta_max, (i as f64 + 0.5) * dp).position).collect()
                } else {
                    Vec::new()
                };
                let closed = !boundary.is_empty();
                let spacing = (radius * dt).max(radius * dp);
                Ok(SurfaceSamples::new(pts, boundary, closed, spacing, self.patch.clone(), Some(np as i64)).with_topology(self.topology()))
            }
        }
    }
}

impl SurfaceMeasure for AnalyticSurface {
    fn integrate_near(&self, f: &dyn Fn(&SurfacePoint) -> f64, focus: Option<(&Vec3, f64)>) -> f64 {
        match &self.kind {
            AnalyticKind::Plane { point, normal, extent } | AnalyticKind::HalfPlane { point, normal, extent } => {
                let half = matches!(self.kind, AnalyticKind::HalfPlane { .. });
                let (ea, eb) = self.plane_basis(normal);
                let (width, mut qa, mut qb) = match focus {
                    Some((p, w)) => (w, (p - point).dot(&ea), (p - point).dot(&eb)),
                    None => (0.0, 0.0, 0.0),
                };
                if half {
                    qb = qb.max(0.0);
                }
                let q_norm = (qa * qa + qb * qb).sqrt();
                if q_norm >= *extent {
                    let s = extent * (1.0 - 1e-9) / q_norm;
                    qa *= s;
                    qb *= s;
                }
                let rho_max = |theta: f64| {
                    let (c, s) = (theta.cos(), theta.sin());
                    let b = qa * c + qb * s;
                    let cc = qa * qa + qb * qb - extent * extent;
                    let mut r = -b + (b * b - cc).max(0.0).sqrt();
                    if half && s < 0.0 {
                        r = r.min(qb / -s);
                    }
                    r.max(0.0)
                };
                let outer: Vec<f64> = if half && qb == 0.0 {
                    (0..=8).map(|k| k as f64 * PI / 8.0).collect()
                } else {
                    (0..=16).map(|k| k as f64 * PI / 8.0).collect()
                };
                let origin = point + qa * ea + qb * eb;
                integrate_2d(
                    |theta, rho| {
                        let x = origin + rho * (theta.cos() * ea + theta.sin() * eb);
                        rho * f(&SurfacePoint { position: x, normal: *normal, mean_curvature: 0.0, a_norm_sq: 0.0 })
                    },
                    &outer,
                    |theta| ladder(0.0, rho_max(theta), 0.0, width),
                    self.tol,
                )
                .value
            }
            AnalyticKind::Sphere { center, radius } | AnalyticKind::Hemisphere { center, radius } => {
                let theta_max = if matches!(self.kind, AnalyticKind::Sphere { .. }) { PI } else { 0.5 * PI };
                let (e1, a, e3) = self.axes();
                let aim = focus.and_then(|(p, w)| {
                    let v = p - center;
                    (v.norm() > 1e-12 * radius).then(|| {
                        let v = v.normalize();
                        let theta = v.dot(&a).clamp(-1.0, 1.0).acos().min(theta_max);
                        (theta, v.dot(&e3).atan2(v.dot(&e1)), w / radius)
                    })
                });
                let outer = match aim {
                    Some((t, _, w)) => ladder(0.0, theta_max, t, w),
                    None => (0..=8).map(|k| k as f64 * theta_max / 8.0).collect(),
                };
                integrate_2d(
                    |theta, phi| radius * radius * theta.sin() * f(&self.sphere_point(center, *radius, theta, phi)),
                    &outer,
                    |theta| match aim {
                        Some((_, p, w)) => ladder(p - PI, p + PI, p, w / theta.sin().max(1e-3)),
                        None => (0..=8).map(|k| k as f64 * PI / 4.0).collect(),
                    },
                    self.tol,
                )
                .value
            }
        }
    }

    fn support(&self) -> Option<&SupportPatch> {
        self.patch.as_deref()
    }
}

/// Exact mean curvature flows: static planes and shrinking round spheres with
/// R(t) = √(R0² − 4t).
#[derive(Debug, Clone, PartialEq)]
pub enum ExactSolution {
    Plane { point: Vec3, normal: Vec3 },
    HalfPlane { point: Vec3, normal: Vec3 },
    Sphere { center: Vec3, r0: f64 },
    Hemisphere { center: Vec3, r0: f64 },
}

impl ExactSolution {
    pub fn singular_time(&self) -> Option<f64> {
        match self {
            ExactSolution::Sphere { r0, .. } | ExactSolution::Hemisphere { r0, .. } => Some(r0 * r0 / 4.0),
            _ => None,
        }
    }

    pub fn radius(&self, t: f64) -> Result<Option<f64>> {
        match self.singular_time() {
            Some(ts) if t >= ts => Err(Error::PastSingularity { t, singular_time: ts }),
            Some(ts) => Ok(Some((4.0 * (ts - t)).sqrt())),
            None => Ok(None),
        }
    }

    /// Closed-form surface at time t; (half-)planes are cut to `extent`.
    pub fn analytic(&self, t: f64, patch: Arc<SupportPatch>, extent: f64) -> Result<AnalyticSurface> {
        let r = self.radius(t)?;
        match self {
            ExactSolution::Plane { point, normal } => AnalyticSurface::plane(*point, *normal, extent),
            ExactSolution::HalfPlane { point, normal } => AnalyticSurface::half_plane(patch, *point, *normal, extent),
            ExactSolution::Sphere { center, .. } => AnalyticSurface::sphere(*center, r.unwrap_or_default()),
            ExactSolution::Hemisphere { center, .. } => AnalyticSurface::hemisphere(patch, *center, r.unwrap_or_default()),
        }
    }

    /// Graph height over chart point (y1, y2) of a flat patch, or None where
    /// the solution is not a graph.
    pub fn height(&self, patch: &SupportPatch, y1: f64, y2: f64, t: f64) -> Result<Option<f64>> {
        if !patch.is_flat() {
            return Err(Error::InvalidPatch("exact graph solutions need a flat support".into()));
        }
        let r = self.radius(t)?;
        Ok(match self {
            ExactSolution::Plane { point, normal } | ExactSolution::HalfPlane { point, normal } => {
                let p = patch.to_local(point);
                let n = patch.vector_to_local(normal);
                (n.z.abs() > 1e-14).then(|| p.z - (n.x * (y1 - p.x) + n.y * (y2 - p.y)) / n.z)
            }
            ExactSolution::Sphere { center, .. } | ExactSolution::Hemisphere { center, .. } => {
                let c = patch.to_local(center);
                let r = r.unwrap_or_default();
                let s = r * r - (y1 - c.x).powi(2) - (y2 - c.y).powi(2);
                (s > 0.0).then(|| c.z + s.sqrt())
            }
        })
    }

    pub fn graph(&self, grid: Arc<Grid>, patch: Arc<SupportPatch>, t: f64) -> Result<GraphSurface> {
        let mut u = vec![f64::NAN; grid.len()];
        for (k, v) in u.iter_mut().enumerate() {
            if grid.kind(k) == NodeKind::Outside {
                continue;
            }
            let (y1, y2) = grid.y(k);
            *v = self.height(&patch, y1, y2, t)?.ok_or_else(|| {
                let (i, j) = grid.ij(k);
                Error::ExactUndefined { i, j, t }
            })?;
        }
        let topology = matches!(self, ExactSolution::Hemisphere { .. }).then_some(Topology::Disk);
        Ok(GraphSurface::new(grid, patch, u, t)?.with_topology(topology))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> Arc<SupportPatch> {
        Arc::new(SupportPatch::flat())
    }

    #[test]
    fn hemisphere_integrals() {
        let s = AnalyticSurface::hemisphere(flat(), Vec3::zeros(), 1.0).unwrap();
        assert!((s.area() - 2.0 * PI).abs() < 1e-9);
        assert!((s.energy() - 4.0 * PI).abs() < 1e-9);
        assert!((s.perimeter().unwrap() - 2.0 * PI).abs() < 1e-12);
        let gb = s.gauss_bonnet().unwrap();
        assert!(gb.residual.abs() < 1e-9);
        assert!((gb.rhs - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn sphere_integrals() {
        let s = AnalyticSurface::sphere(Vec3::new(0.1, 0.2, 0.3), 2.0).unwrap();
        assert!((s.energy() - 8.0 * PI).abs() < 1e-9);
        assert!((s.gauss_bonnet().unwrap().rhs - 8.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn half_plane_area_and_focus() {
        let s = AnalyticSurface::half_plane(flat(), Vec3::zeros(), Vec3::z(), 2.0).unwrap();
        assert!((s.area() - 2.0 * PI).abs() < 1e-9);
        let g = |p: &SurfacePoint| (-(p.position - Vec3::new(0.3, 0.4, 0.0)).norm_squared() / 1e-4).exp();
        let v = s.integrate_near(&g, Some((&Vec3::new(0.3, 0.4, 0.0), 1e-2)));
        assert!((v - PI * 1e-4).abs() < 1e-12);
        assert!(AnalyticSurface::half_plane(flat(), Vec3::zeros(), Vec3::new(0.0, 1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn exact_radius_law() {
        let e = ExactSolution::Hemisphere { center: Vec3::zeros(), r0: 1.0 };
        assert_eq!(e.radius(0.0).unwrap(), Some(1.0));
        assert!((e.radius(0.1875).unwrap().unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(e.radius(0.25), Err(Error::PastSingularity { .. })));
        let hp = ExactSolution::HalfPlane { point: Vec3::zeros(), normal: Vec3::z() };
        assert_eq!(hp.height(&SupportPatch::flat(), 0.3, 0.2, 5.0).unwrap(), Some(0.0));
    }

    #[test]
    fn sampled_sphere_area() {
        let s = AnalyticSurface::hemisphere(flat(), Vec3::zeros(), 1.0).unwrap().samples(0.05).unwrap();
        assert!((s.area() - 2.0 * PI).abs() < 1e-12);
        assert!((s.boundary_length() - 2.0 * PI).abs() < 1e-2);
        let gb = s.gauss_bonnet().unwrap();
        assert!(gb.residual.abs() < 1e-9);
    }
}
