//! Parabolic rescalings, normalized-flow frames and planarity diagnostics.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{SnapshotSurface, Trajectory};
use crate::samples::SurfaceSamples;
use crate::support::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FrameMode {
    Parabolic { lambda: f64, tau: f64 },
    Normalized { s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescalingFrame {
    pub point: Vec3,
    pub terminal_time: f64,
    pub mode: FrameMode,
    pub lambda: f64,
    /// Source time of the snapshot used.
    pub source_time: f64,
    /// Snapshot time minus the requested T + λ²τ.
    pub time_offset: f64,
    /// Samples of (Σ_t − P)/λ, with the rescaled support attached.
    pub samples: SurfaceSamples,
}

impl RescalingFrame {
    /// Effective κ of the rescaled support, λκ.
    pub fn kappa(&self) -> Option<f64> {
        self.samples.patch.as_ref().map(|p| p.kappa())
    }

    /// Frame time τ = (t − T)/λ² of the snapshot actually used.
    pub fn tau(&self) -> f64 {
        (self.source_time - self.terminal_time) / (self.lambda * self.lambda)
    }

    /// Largest coordinate difference against another frame sampled on the
    /// same lattice; None when the sample sets do not correspond.
    pub fn max_difference(&self, other: &RescalingFrame) -> Option<f64> {
        if self.samples.points.len() != other.samples.points.len() {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.samples.points.iter().zip(&other.samples.points) {
            if a.lattice != b.lattice {
                return None;
            }
            worst = worst.max((a.point.position - b.point.position).amax());
        }
        Some(worst)
    }
}

/// Σ^{(P,T),λ}_τ = (Σ_{T+λ²τ} − P)/λ from the nearest stored snapshot.
pub fn parabolic_rescale(traj: &Trajectory, p: &Vec3, terminal: f64, lambda: f64, tau: f64) -> Result<RescalingFrame> {
    frame(traj, p, terminal, lambda, tau, FrameMode::Parabolic { lambda, tau })
}

/// Π_s = e^{s/2}(Σ_{T−e^{−s}} − P), the parabolic frame at τ = −1 with
/// λ = e^{−s/2}.
pub fn normalized_frame(traj: &Trajectory, p: &Vec3, terminal: f64, s: f64) -> Result<RescalingFrame> {
    frame(traj, p, terminal, (-0.5 * s).exp(), -1.0, FrameMode::Normalized { s })
}

fn frame(traj: &Trajectory, p: &Vec3, terminal: f64, lambda: f64, tau: f64, mode: FrameMode) -> Result<RescalingFrame> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidQuery(format!("lambda must be positive, got {lambda}")));
    }
    if !(tau < 0.0) {
        return Err(Error::InvalidQuery(format!("tau must be negative, got {tau}")));
    }
    let t = terminal + lambda * lambda * tau;
    if t < 0.0 {
        return Err(Error::OutOfRange { t, start: 0.0, end: terminal });
    }
    let (snap, offset) = traj.surface_at(t)?;
    // analytic snapshots are sampled finer by λ so every frame has the same resolution
    let spacing = match snap.surface {
        SnapshotSurface::Analytic(_) => traj.spacing * lambda,
        SnapshotSurface::Graph(_) => traj.spacing,
    };
    let source = snap.samples(spacing)?;
    let samples = source.transformed(p, lambda);
    debug_assert!(source
        .points
        .iter()
        .zip(&samples.points)
        .all(|(a, b)| (b.point.mean_curvature - lambda * a.point.mean_curvature).abs() <= 1e-12 * (1.0 + b.point.mean_curvature.abs())));
    Ok(RescalingFrame { point: *p, terminal_time: terminal, mode, lambda, source_time: snap.t, time_offset: offset, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarityReport {
    pub fit_point: [f64; 3],
    pub fit_normal: [f64; 3],
    /// The fit was constrained to meet the support orthogonally.
    pub half_plane: bool,
    /// Width of the slab of sampled heights over the fit disk.
    pub deviation: f64,
    pub sheets: usize,
    pub exclusions: Vec<([f64; 3], f64)>,
    pub region_samples: usize,
}

fn weighted_fit(pts: &[(Vec3, f64)]) -> (Vec3, Matrix3<f64>) {
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let centroid = pts.iter().fold(Vec3::zeros(), |acc, p| acc + p.0 * p.1) / total;
    let mut cov = Matrix3::zeros();
    for (x, w) in pts {
        let d = x - centroid;
        cov += d * d.transpose() * *w;
    }
    (centroid, cov / total)
}

fn smallest_axis(cov: &Matrix3<f64>) -> Vec3 {
    let eig = SymmetricEigen::new(*cov);
    let k = eig.eigenvalues.imin();
    eig.eigenvectors.column(k).into_owned().normalize()
}

/// Normal in the plane ν^⊥ minimising the weighted spread, so the fit
/// plane contains ν.
fn constrained_axis(cov: &Matrix3<f64>, nu: &Vec3) -> Vec3 {
    let e1 = if nu.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (e1 - nu * nu.dot(&e1)).normalize();
    let e2 = nu.cross(&e1);
    let m = Matrix2::new(e1.dot(&(cov * e1)), e1.dot(&(cov * e2)), e2.dot(&(cov * e1)), e2.dot(&(cov * e2)));
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imin();
    let v: Vector2<f64> = eig.eigenvectors.column(k).into_owned();
    (e1 * v.x + e2 * v.y).normalize()
}

/// Least-squares plane over the samples near `center`, then the slab width
/// and the number of sheets crossing the normal lines of the fit disk.
pub fn planarity_multiplicity(
    frame: &RescalingFrame,
    center: &Vec3,
    region_radius: f64,
    exclusions: &[(Vec3, f64)],
) -> Result<PlanarityReport> {
    if !(region_radius > 0.0) {
        return Err(Error::InvalidQuery("region radius must be positive".into()));
    }
    let samples = &frame.samples;
    let h = samples.spacing;
    let ball: Vec<(Vec3, f64)> = samples
        .points
        .iter()
        .filter(|s| (s.point.position - center).norm() <= region_radius)
        .map(|s| (s.point.position, s.weight.max(0.0)))
        .collect();
    if ball.len() < 3 || ball.iter().map(|p| p.1).sum::<f64>() <= 0.0 {
        return Err(Error::EmptyRegion);
    }
    let edge: Vec<Vec3> = samples.boundary.iter().filter(|b| (*b - center).norm() <= region_radius).copied().collect();
    let constraint = match (&samples.patch, edge.is_empty()) {
        (Some(patch), false) => {
            let anchor = edge.iter().fold(Vec3::zeros(), |a, b| a + b) / edge.len() as f64;
            let proj = patch.project_and_distance(&anchor)?;
            Some((proj.point, proj.gradient.normalize()))
        }
        _ => None,
    };
    let fit = |pts: &[(Vec3, f64)]| {
        let (centroid, cov) = weighted_fit(pts);
        match &constraint {
            Some((anchor, nu)) => (*anchor, constrained_axis(&cov, nu)),
            None => (centroid, smallest_axis(&cov)),
        }
    };
    let (mut base, mut normal) = fit(&ball);
    let disk_center = center - normal * normal.dot(&(center - base));
    let in_cylinder = |x: &Vec3, n: &Vec3, b: &Vec3| {
        let d = x - b;
        let height = n.dot(&d);
        let lateral = (d - n * height).norm();
        lateral <= region_radius && height.abs() <= region_radius
    };
    let region: Vec<(Vec3, f64)> = samples
        .points
        .iter()
        .map(|s| (s.point.position, s.weight.max(0.0)))
        .filter(|(x, _)| in_cylinder(x, &normal, &disk_center))
        .collect();
    if region.len() >= 3 {
        (base, normal) = fit(&region);
    }
    let heights: Vec<f64> = region.iter().map(|(x, _)| normal.dot(&(x - base))).collect();
    let (lo, hi) = heights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    let deviation = if heights.is_empty() { 0.0 } else { hi - lo };

    // base points on a square grid of the fit disk
    let disk_center = disk_center - normal * normal.dot(&(disk_center - base));
    let u = {
        let e = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        (e - normal * normal.dot(&e)).normalize()
    };
    let v = normal.cross(&u);
    let n = (region_radius / h).floor() as i64;
    let mut bases = Vec::new();
    for a in -n..=n {
        for b in -n..=n {
            let q = disk_center + u * (a as f64 * h) + v * (b as f64 * h);
            if (q - disk_center).norm() <= region_radius && exclusions.iter().all(|(c, r)| (q - c).norm() > *r) {
                bases.push(q);
            }
        }
    }
    let pts: Vec<Vec3> = region.iter().map(|p| p.0).collect();
    let sheets = bases
        .par_iter()
        .map(|q| {
            let mut hits: Vec<f64> = pts
                .iter()
                .filter_map(|x| {
                    let d = x - q;
                    let z = normal.dot(&d);
                    ((d - normal * z).norm() <= h).then_some(z)
                })
                .collect();
            if hits.is_empty() {
                return 0;
            }
            hits.sort_by(|a, b| a.total_cmp(b));
            1 + hits.windows(2).filter(|w| w[1] - w[0] > 3.0 * h).count()
        })
        .max()
        .unwrap_or(0);
    Ok(PlanarityReport {
        fit_point: base.into(),
        fit_normal: normal.into(),
        half_plane: constraint.is_some(),
        deviation,
        sheets,
        exclusions: exclusions.iter().map(|(c, r)| ((*c).into(), *r)).collect(),
        region_samples: region.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{AnalyticSurface, ExactSolution};
    use crate::flow::{ExactSource, Snapshot};
    use crate::support::SupportPatch;
    use std::sync::Arc;

    fn hemisphere_flow() -> Trajectory {
        let patch = Arc::new(SupportPatch::flat());
        let src = ExactSource { solution: ExactSolution::Hemisphere { center: Vec3::zeros(), r0: 1.0 }, patch, extent: 2.0, spacing: 0.05 };
        Trajectory::exact(src, &[0.0, 0.1, 0.2]).unwrap()
    }

    fn static_frame(surface: AnalyticSurface, spacing: f64) -> RescalingFrame {
        let samples = surface.samples(spacing).unwrap();
        RescalingFrame {
            point: Vec3::zeros(),
            terminal_time: 1.0,
            mode: FrameMode::Parabolic { lambda: 1.0, tau: -1.0 },
            lambda: 1.0,
            source_time: 0.0,
            time_offset: 0.0,
            samples,
        }
    }

    #[test]
    fn hemisphere_frame_has_radius_two() {
        let traj = hemisphere_flow();
        for lambda in [0.3, 0.1] {
            let f = parabolic_rescale(&traj, &Vec3::zeros(), 0.25, lambda, -1.0).unwrap();
            for s in &f.samples.points {
                assert!((s.point.position.norm() - 2.0).abs() < 1e-12);
                assert!((s.point.mean_curvature - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_matches_parabolic() {
        let traj = hemisphere_flow();
        let s: f64 = 2.5;
        let a = normalized_frame(&traj, &Vec3::zeros(), 0.25, s).unwrap();
        let b = parabolic_rescale(&traj, &Vec3::zeros(), 0.25, (-0.5 * s).exp(), -1.0).unwrap();
        assert!(a.max_difference(&b).unwrap() <= 1e-10);
    }

    #[test]
    fn composition_of_scalings() {
        let traj = hemisphere_flow();
        let snap: &Snapshot = &traj.snapshots[1];
        let src = snap.samples(0.05).unwrap();
        let p = Vec3::new(0.1, 0.0, 0.2);
        let twice = src.transformed(&p, 0.5).transformed(&Vec3::zeros(), 0.2);
        let once = src.transformed(&p, 0.1);
        for (a, b) in twice.points.iter().zip(&once.points) {
            assert!((a.point.position - b.point.position).amax() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_time() {
        let traj = hemisphere_flow();
        assert!(matches!(parabolic_rescale(&traj, &Vec3::zeros(), 0.25, 1.0, -1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn static_half_plane_is_flat_single_sheet() {
        let patch = Arc::new(SupportPatch::flat());
        let hp = AnalyticSurface::half_plane(patch, Vec3::zeros(), Vec3::z(), 2.0).unwrap();
        let r = planarity_multiplicity(&static_frame(hp, 0.05), &Vec3::zeros(), 1.0, &[]).unwrap();
        assert!(r.deviation <= 1e-10 && r.sheets == 1 && r.half_plane);
    }

    #[test]
    fn two_planes_are_two_sheets() {
        let a = AnalyticSurface::plane(Vec3::zeros(), Vec3::z(), 2.0).unwrap().samples(0.02).unwrap();
        let b = AnalyticSurface::plane(Vec3::new(0.0, 0.0, 0.1), Vec3::z(), 2.0).unwrap().samples(0.02).unwrap();
        let mut f = static_frame(AnalyticSurface::plane(Vec3::zeros(), Vec3::z(), 2.0).unwrap(), 0.02);
        f.samples = a.merged(&b);
        let r = planarity_multiplicity(&f, &Vec3::zeros(), 1.0, &[]).unwrap();
        assert_eq!(r.sheets, 2);
        assert!((r.deviation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sphere_cap_deviation_is_sagitta() {
        let s = AnalyticSurface::sphere(Vec3::zeros(), 2.0).unwrap();
        let f = static_frame(s, 0.02);
        let top = Vec3::new(0.0, 2.0, 0.0);
        let rho: f64 = 0.5;
        let r = planarity_multiplicity(&f, &top, rho, &[]).unwrap();
        let sagitta = 2.0 - (4.0 - rho * rho).sqrt();
        assert_eq!(r.sheets, 1);
        assert!((r.deviation - sagitta).abs() < 0.01 * rho, "{} {}", r.deviation, sagitta);
    }

    #[test]
    fn empty_region() {
        let p = AnalyticSurface::plane(Vec3::zeros(), Vec3::z(), 1.0).unwrap();
        assert_eq!(planarity_multiplicity(&static_frame(p, 0.05), &Vec3::new(0.0, 0.0, 5.0), 0.5, &[]), Err(Error::EmptyRegion));
    }
}
