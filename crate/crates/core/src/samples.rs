//! Weighted point samples of a surface on a logical (i, j) lattice.
//!
//! Graph snapshots, analytic surfaces and rescaled frames all reduce to this
//! form, so integrals, area ratios and mesh dumps are written once.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::support::{SupportPatch, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub mean_curvature: f64,
    pub a_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Disk,
    Sphere,
}

impl Topology {
    pub fn euler_characteristic(self) -> f64 {
        match self {
            Topology::Disk => 1.0,
            Topology::Sphere => 2.0,
        }
    }
}

/// Anything that can be integrated against dH².
pub trait SurfaceMeasure {
    /// `focus` = (centre, width) of a concentrated integrand; quadrature-based
    /// surfaces refine there, sampled ones ignore it.
    fn integrate_near(&self, f: &dyn Fn(&SurfacePoint) -> f64, focus: Option<(&Vec3, f64)>) -> f64;

    fn integrate(&self, f: &dyn Fn(&SurfacePoint) -> f64) -> f64 {
        self.integrate_near(f, None)
    }

    /// The support patch when the surface has a free boundary on it.
    fn support(&self) -> Option<&SupportPatch>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub point: SurfacePoint,
    pub weight: f64,
    pub lattice: (i64, i64),
    /// The sample's cell touches the outer edge of the footprint.
    pub outer: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    i_min: i64,
    j_min: i64,
    ni: usize,
    nj: usize,
    periodic: bool,
    slots: Vec<Option<usize>>,
}

impl Lattice {
    fn build(points: &[SamplePoint], period: Option<i64>) -> Self {
        if points.is_empty() {
            return Lattice { i_min: 0, j_min: 0, ni: 0, nj: 0, periodic: false, slots: Vec::new() };
        }
        let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for p in points {
            i0 = i0.min(p.lattice.0);
            i1 = i1.max(p.lattice.0);
            j0 = j0.min(p.lattice.1);
            j1 = j1.max(p.lattice.1);
        }
        if let Some(n) = period {
            i0 = 0;
            i1 = n - 1;
        }
        let ni = (i1 - i0 + 1) as usize;
        let nj = (j1 - j0 + 1) as usize;
        let mut slots = vec![None; ni * nj];
        for (k, p) in points.iter().enumerate() {
            let i = if period.is_some() { p.lattice.0.rem_euclid(ni as i64) } else { p.lattice.0 - i0 };
            slots[(p.lattice.1 - j0) as usize * ni + i as usize] = Some(k);
        }
        Lattice { i_min: i0, j_min: j0, ni, nj, periodic: period.is_some(), slots }
    }

    fn get(&self, i: i64, j: i64) -> Option<usize> {
        let mut a = i - self.i_min;
        if self.periodic {
            a = a.rem_euclid(self.ni as i64);
        }
        let b = j - self.j_min;
        if a < 0 || b < 0 || a >= self.ni as i64 || b >= self.nj as i64 {
            return None;
        }
        self.slots[b as usize * self.ni + a as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<SamplePoint>,
    /// Ordered nodes of the free-boundary curve γ = Σ ∩ Γ.
    pub boundary: Vec<Vec3>,
    pub boundary_closed: bool,
    pub spacing: f64,
    pub topology: Option<Topology>,
    pub patch: Option<Arc<SupportPatch>>,
    lattice: Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaRatio {
    pub ratio: f64,
    pub direct: f64,
    pub complementary: f64,
    /// The ball reaches past the sampled footprint.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaRatioProfile {
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub weighted: Vec<f64>,
    pub max_violation: f64,
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussBonnet {
    pub lhs: f64,
    pub rhs: f64,
    pub willmore: f64,
    pub boundary_term: f64,
    pub chi: f64,
    pub residual: f64,
}

impl GaussBonnet {
    pub fn new(energy: f64, willmore: f64, boundary_term: f64, topology: Topology) -> Self {
        let chi = topology.euler_characteristic();
        let rhs = willmore + 2.0 * boundary_term - 4.0 * PI * chi;
        GaussBonnet { lhs: energy, rhs, willmore, boundary_term, chi, residual: energy - rhs }
    }
}

impl SurfaceSamples {
    /// `period` makes the first lattice index periodic over `0..period`.
    pub fn new(
        points: Vec<SamplePoint>,
        boundary: Vec<Vec3>,
        boundary_closed: bool,
        spacing: f64,
        patch: Option<Arc<SupportPatch>>,
        period: Option<i64>,
    ) -> Self {
        let lattice = Lattice::build(&points, period);
        SurfaceSamples { points, boundary, boundary_closed, spacing, topology: None, patch, lattice }
    }

    pub fn with_topology(mut self, topology: Option<Topology>) -> Self {
        self.topology = topology;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn at_lattice(&self, i: i64, j: i64) -> Option<&SamplePoint> {
        self.lattice.get(i, j).map(|k| &self.points[k])
    }

    pub fn area(&self) -> f64 {
        self.integrate(&|_| 1.0)
    }

    pub fn energy(&self) -> f64 {
        self.integrate(&|p| p.a_norm_sq)
    }

    pub fn nearest(&self, p: &Vec3) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (k, s) in self.points.iter().enumerate() {
            let d = (s.point.position - p).norm_squared();
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, k));
            }
        }
        best.map(|(_, k)| k)
    }

    fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.points[k].lattice;
        [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| self.lattice.get(i + di, j + dj))
    }

    /// Flood fill over lattice neighbours whose images lie in `keep`,
    /// starting from `seed`.
    pub fn component(&self, seed: usize, keep: impl Fn(&SamplePoint) -> bool) -> Vec<usize> {
        if !keep(&self.points[seed]) {
            return Vec::new();
        }
        let mut seen = vec![false; self.points.len()];
        let mut stack = vec![seed];
        seen[seed] = true;
        let mut out = Vec::new();
        while let Some(k) = stack.pop() {
            out.push(k);
            for n in self.neighbors(k) {
                if !seen[n] && keep(&self.points[n]) {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Connected component of Σ ∩ B_r(P) through the sample nearest P.
    pub fn ball_component(&self, p: &Vec3, r: f64) -> Result<Vec<usize>> {
        let seed = self.nearest(p).ok_or(Error::EmptyRegion)?;
        let comp = self.component(seed, |s| (s.point.position - p).norm() < r);
        if comp.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(comp)
    }

    pub fn modified_area_ratio(&self, p: &Vec3, r: f64) -> Result<AreaRatio> {
        if !(r > 0.0) {
            return Err(Error::InvalidQuery(format!("radius must be positive, got {r}")));
        }
        let comp = self.ball_component(p, r)?;
        let mut direct = 0.0;
        let mut complementary = 0.0;
        let mut partial = false;
        for &k in &comp {
            let s = &self.points[k];
            direct += s.weight;
            partial |= s.outer;
            if let Some(patch) = &self.patch {
                if patch.complementary_membership(p, r, &s.point.position, true)? {
                    complementary += s.weight;
                }
            }
        }
        let area = PI * r * r;
        Ok(AreaRatio { ratio: (direct + complementary) / area, direct, complementary, partial })
    }

    /// e^{C(Λ+κ)r} times the modified area ratio over increasing radii, with
    /// the largest drop between consecutive radii.
    pub fn area_ratio_profile(&self, p: &Vec3, radii: &[f64], c: f64, lambda: f64, kappa: f64) -> Result<AreaRatioProfile> {
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidQuery("radii must be strictly increasing".into()));
        }
        let mut out =
            AreaRatioProfile { radii: radii.to_vec(), ratios: Vec::new(), weighted: Vec::new(), max_violation: 0.0, partial: false };
        for &r in radii {
            let a = self.modified_area_ratio(p, r)?;
            out.partial |= a.partial;
            out.ratios.push(a.ratio);
            out.weighted.push((c * (lambda + kappa) * r).exp() * a.ratio);
        }
        for w in out.weighted.windows(2) {
            out.max_violation = out.max_violation.max(w[0] - w[1]);
        }
        Ok(out)
    }

    /// ∮_γ A_Γ(T, T) ds by the trapezoid rule on the boundary nodes.
    pub fn boundary_second_form_integral(&self) -> Result<f64> {
        let Some(patch) = &self.patch else { return Ok(0.0) };
        let n = self.boundary.len();
        if n < 2 || patch.is_flat() {
            return Ok(0.0);
        }
        let b = &self.boundary;
        let mut total = 0.0;
        for k in 0..n {
            let (prev, next) =
                if self.boundary_closed { (b[(k + n - 1) % n], b[(k + 1) % n]) } else { (b[k.saturating_sub(1)], b[(k + 1).min(n - 1)]) };
            let chord = next - prev;
            let len = chord.norm();
            if len == 0.0 {
                continue;
            }
            let y = patch.chart_coordinates(&b[k])?;
            let value = patch.second_form(y[0], y[2], &(chord / len))?;
            // half of each adjacent segment
            let ds = if self.boundary_closed || (k > 0 && k < n - 1) {
                0.5 * len
            } else {
                (b[k] - if k == 0 { b[1] } else { b[n - 2] }).norm() * 0.5
            };
            total += value * ds;
        }
        Ok(total)
    }

    pub fn gauss_bonnet(&self) -> Result<GaussBonnet> {
        let topology = self.topology.ok_or(Error::TopologyUntagged)?;
        let energy = self.energy();
        let willmore = self.integrate(&|p| p.mean_curvature * p.mean_curvature);
        Ok(GaussBonnet::new(energy, willmore, self.boundary_second_form_integral()?, topology))
    }

    pub fn boundary_length(&self) -> f64 {
        let b = &self.boundary;
        let mut len: f64 = b.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if self.boundary_closed && b.len() > 2 {
            len += (b[0] - b[b.len() - 1]).norm();
        }
        len
    }

    /// ∫_{Σ∩B_r(P)} |A|² dH².
    pub fn mass_in_ball(&self, p: &Vec3, r: f64) -> f64 {
        let r2 = r * r;
        self.points.iter().filter(|s| (s.point.position - p).norm_squared() < r2).map(|s| s.point.a_norm_sq * s.weight).sum()
    }

    /// The samples of (Σ − P)/λ.
    pub fn transformed(&self, p: &Vec3, lambda: f64) -> SurfaceSamples {
        let mut out = self.clone();
        for s in &mut out.points {
            s.point.position = (s.point.position - p) / lambda;
            s.point.mean_curvature *= lambda;
            s.point.a_norm_sq *= lambda * lambda;
            s.weight /= lambda * lambda;
        }
        for b in &mut out.boundary {
            *b = (*b - p) / lambda;
        }
        out.spacing /= lambda;
        out.patch = self.patch.as_ref().map(|pt| Arc::new(pt.rescaled(p, lambda)));
        out
    }

    /// Triangles of the lattice cells whose four corners are all sampled.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut tris = Vec::new();
        for (k, s) in self.points.iter().enumerate() {
            let (i, j) = s.lattice;
            let (Some(a), Some(b), Some(c)) = (self.lattice.get(i + 1, j), self.lattice.get(i + 1, j + 1), self.lattice.get(i, j + 1))
            else {
                continue;
            };
            if a == k || c == k {
                continue;
            }
            tris.push([k, a, b]);
            tris.push([k, b, c]);
        }
        tris
    }

    /// ASCII mesh: `v x y z` per sample then `f a b c` per triangle, 1-based.
    pub fn write_obj(&self, out: &mut impl Write) -> std::io::Result<()> {
        for s in &self.points {
            let x = s.point.position;
            writeln!(out, "v {:e} {:e} {:e}", x.x, x.y, x.z)?;
        }
        for t in self.triangles() {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    /// Disjoint union; `other`'s lattice is shifted so the two never touch.
    pub fn merged(&self, other: &SurfaceSamples) -> SurfaceSamples {
        let shift =
            self.points.iter().map(|p| p.lattice.0).max().unwrap_or(0) - other.points.iter().map(|p| p.lattice.0).min().unwrap_or(0) + 2;
        let mut points = self.points.clone();
        points.extend(other.points.iter().map(|p| SamplePoint { lattice: (p.lattice.0 + shift, p.lattice.1), ..*p }));
        let mut boundary = self.boundary.clone();
        boundary.extend(other.boundary.iter().copied());
        SurfaceSamples::new(points, boundary, false, self.spacing.max(other.spacing), self.patch.clone(), None)
    }
}

impl SurfaceMeasure for SurfaceSamples {
    fn integrate_near(&self, f: &dyn Fn(&SurfacePoint) -> f64, _focus: Option<(&Vec3, f64)>) -> f64 {
        self.points.iter().map(|s| f(&s.point) * s.weight).sum()
    }

    fn support(&self) -> Option<&SupportPatch> {
        self.patch.as_deref()
    }
}

/// Reads the vertex block of an ASCII mesh dump.
pub fn read_obj_vertices(text: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let vals: Vec<f64> = it
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidSurface(format!("mesh line {}: {e}", n + 1)))?;
        if vals.len() != 3 {
            return Err(Error::InvalidSurface(format!("mesh line {}: expected 3 coordinates", n + 1)));
        }
        out.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_square(n: i64, h: f64) -> SurfaceSamples {
        let mut pts = Vec::new();
        for j in -n..=n {
            for i in -n..=n {
                pts.push(SamplePoint {
                    point: SurfacePoint {
                        position: Vec3::new(i as f64 * h, j as f64 * h, 0.0),
                        normal: Vec3::z(),
                        mean_curvature: 0.0,
                        a_norm_sq: 0.0,
                    },
                    weight: h * h,
                    lattice: (i, j),
                    outer: i.abs() == n || j.abs() == n,
                });
            }
        }
        SurfaceSamples::new(pts, Vec::new(), false, h, None, None)
    }

    #[test]
    fn plane_area_ratio_is_one() {
        let s = flat_square(40, 0.025);
        for r in [0.2, 0.5, 0.8] {
            let a = s.modified_area_ratio(&Vec3::zeros(), r).unwrap();
            assert!((a.ratio - 1.0).abs() < 3.0 * 0.025 / r, "{r} {a:?}");
            assert!(!a.partial);
        }
        assert!(s.modified_area_ratio(&Vec3::zeros(), 1.2).unwrap().partial);
    }

    #[test]
    fn transform_scales_quantities() {
        let s = flat_square(4, 0.5);
        let t = s.transformed(&Vec3::new(1.0, 0.0, 0.0), 0.5);
        assert_eq!(t.points[0].point.position, (s.points[0].point.position - Vec3::new(1.0, 0.0, 0.0)) * 2.0);
        assert!((t.area() - 4.0 * s.area()).abs() < 1e-12);
    }

    #[test]
    fn obj_round_trip_and_faces() {
        let s = flat_square(2, 1.0);
        let mut buf = Vec::new();
        s.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * 16);
        let v = read_obj_vertices(&text).unwrap();
        assert_eq!(v.len(), 25);
        assert_eq!(v[7], s.points[7].point.position);
    }

    #[test]
    fn flood_fill_respects_disconnection() {
        let s = flat_square(10, 0.1);
        let comp = s.component(s.nearest(&Vec3::zeros()).unwrap(), |p| p.point.position.x.abs() < 0.35 || p.point.position.x > 0.65);
        assert!(comp.iter().all(|&k| s.points[k].point.position.x < 0.5));
    }

    #[test]
    fn gauss_bonnet_requires_topology() {
        assert_eq!(flat_square(2, 1.0).gauss_bonnet(), Err(Error::TopologyUntagged));
    }
}
