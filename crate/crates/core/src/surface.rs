//! Surfaces given as graphs Y3 = u(y1, y2) in the tubular chart of a support
//! patch, with their discrete differential geometry.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DomainShape, Grid, NodeKind};
use crate::samples::{SamplePoint, SurfacePoint, SurfaceSamples, Topology};
use crate::support::{metric_connection, SupportPatch, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSurface {
    pub grid: Arc<Grid>,
    pub patch: Arc<SupportPatch>,
    /// Heights per storage node; NaN at outside nodes.
    pub u: Vec<f64>,
    pub t: f64,
    pub topology: Option<Topology>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub node: usize,
    pub position: Vec3,
    pub normal: Vec3,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    pub metric: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
    pub second_form: [[f64; 2]; 2],
    pub mean_curvature: f64,
    pub a_norm_sq: f64,
    /// √det g
    pub area_element: f64,
    /// √det g times the node's cell area.
    pub weight: f64,
    /// f = g^{ij}(Γ³_ij + Q_ij)
    pub forcing: f64,
    /// ∂t u = g^{ij} ∂ij u + f
    pub velocity: f64,
    /// ẏ of the normal trajectory through the node.
    pub drift: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometry {
    pub nodes: Vec<NodeGeometry>,
    lookup: Vec<Option<usize>>,
}

impl SurfaceGeometry {
    pub fn get(&self, storage: usize) -> Option<&NodeGeometry> {
        self.lookup.get(storage).copied().flatten().map(|k| &self.nodes[k])
    }

    pub fn integrate(&self, f: impl Fn(&NodeGeometry) -> f64) -> f64 {
        self.nodes.iter().map(|n| f(n) * n.weight).sum()
    }

    pub fn area(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn energy(&self) -> f64 {
        self.integrate(|n| n.a_norm_sq)
    }

    pub fn willmore(&self) -> f64 {
        self.integrate(|n| n.mean_curvature * n.mean_curvature)
    }

    pub fn max_mean_curvature(&self) -> f64 {
        self.nodes.iter().map(|n| n.mean_curvature.abs()).fold(0.0, f64::max)
    }

    pub fn max_a(&self) -> f64 {
        self.nodes.iter().map(|n| n.a_norm_sq.sqrt()).fold(0.0, f64::max)
    }

    /// max Σ|g^{ij}| over nodes, the bound used for the explicit time step.
    pub fn max_inverse_metric_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.inverse.iter().flatten().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Full-disk even extension of a free-boundary graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenExtension {
    pub surface: GraphSurface,
    /// ā^{ij} per active node of the extended grid, indexed like `grid.active()`.
    pub coefficients: Vec<[[f64; 2]; 2]>,
    /// f̄ per active node.
    pub forcing: Vec<f64>,
    /// max |a^{12}(y1, 0)| on the original edge.
    pub max_edge_a12: f64,
}

impl GraphSurface {
    pub fn new(grid: Arc<Grid>, patch: Arc<SupportPatch>, mut u: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::InvalidSurface(format!("expected {} heights, got {}", grid.len(), u.len())));
        }
        for (k, v) in u.iter_mut().enumerate() {
            match grid.kind(k) {
                NodeKind::Outside => *v = f64::NAN,
                _ if !v.is_finite() => {
                    let (i, j) = grid.ij(k);
                    return Err(Error::NonFinite { i, j });
                }
                _ => {}
            }
        }
        let s = GraphSurface { grid, patch, u, t, topology: None };
        s.check_chart()?;
        Ok(s)
    }

    pub fn from_fn(grid: Arc<Grid>, patch: Arc<SupportPatch>, t: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let u = (0..grid.len())
            .map(|k| {
                if grid.kind(k) == NodeKind::Outside {
                    f64::NAN
                } else {
                    let (a, b) = grid.y(k);
                    f(a, b)
                }
            })
            .collect();
        Self::new(grid, patch, u, t)
    }

    pub fn with_topology(mut self, topology: Option<Topology>) -> Self {
        self.topology = topology;
        self
    }

    /// Every stored chart point must lie inside the chart.
    pub fn check_chart(&self) -> Result<()> {
        let radius = self.patch.chart_radius();
        if !radius.is_finite() {
            return Ok(());
        }
        let mut max_u: f64 = 0.0;
        let mut bad = false;
        for k in 0..self.grid.len() {
            if self.grid.kind(k) == NodeKind::Outside {
                continue;
            }
            let (a, b) = self.grid.y(k);
            let u = self.u[k];
            max_u = max_u.max(u.abs());
            bad |= !((a * a + b * b + u * u).sqrt() < radius);
        }
        if bad {
            return Err(Error::ChartExit { max_u, bound: radius });
        }
        Ok(())
    }

    /// u at lattice (i, j) after periodic wrap and ghost reflection.
    pub fn value(&self, i: i64, j: i64) -> Option<f64> {
        self.grid.resolve(i, j).map(|k| self.u[k])
    }

    pub fn max_abs(&self) -> f64 {
        self.grid.active().iter().map(|&k| self.u[k].abs()).fold(0.0, f64::max)
    }

    /// max over edge nodes of the one-sided second-order ∂2u(y1, 0).
    pub fn neumann_residual(&self) -> f64 {
        let h = self.grid.h();
        self.grid
            .edge_nodes()
            .iter()
            .filter_map(|&k| {
                let (i, _) = self.grid.ij(k);
                let (u0, u1, u2) = (self.value(i, 0)?, self.value(i, 1)?, self.value(i, 2)?);
                Some(((-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn node_geometry(&self, k: usize) -> Result<NodeGeometry> {
        let grid = &self.grid;
        let h = grid.h();
        let (i, j) = grid.ij(k);
        let val = |di: i64, dj: i64| {
            self.value(i + di, j + dj).ok_or_else(|| Error::InvalidSurface(format!("stencil of node ({i}, {j}) leaves the grid")))
        };
        let u0 = self.u[k];
        let (ue, uw, un, us) = (val(1, 0)?, val(-1, 0)?, val(0, 1)?, val(0, -1)?);
        let du = [(ue - uw) / (2.0 * h), (un - us) / (2.0 * h)];
        let u12 = (val(1, 1)? - val(1, -1)? - val(-1, 1)? + val(-1, -1)?) / (4.0 * h * h);
        let ddu = [[(ue - 2.0 * u0 + uw) / (h * h), u12], [u12, (un - 2.0 * u0 + us) / (h * h)]];
        let (y1, y2) = grid.y(k);
        let cj = self.patch.chart_jet([y1, y2, u0])?;
        let mc = metric_connection(&cj)?;
        let hm = &mc.metric;
        let gam = &mc.christoffel;

        let mut g = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                g[a][b] = hm[(a, b)] + hm[(a, 2)] * du[b] + hm[(b, 2)] * du[a] + hm[(2, 2)] * du[a] * du[b];
            }
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if !(det > 0.0) {
            return Err(Error::SingularMetric { det });
        }
        let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];

        let t0 = cj.d[0] + du[0] * cj.d[2];
        let t1 = cj.d[1] + du[1] * cj.d[2];
        let mut normal = t0.cross(&t1).normalize();
        if normal.dot(&cj.d[2]) < 0.0 {
            normal = -normal;
        }
        let c3n = cj.d[2].dot(&normal);

        let mut q = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut s = gam[2][a][2] * du[b] + gam[2][b][2] * du[a] + gam[2][2][2] * du[a] * du[b];
                for m in 0..2 {
                    s -= gam[m][a][b] * du[m];
                    s -= gam[m][a][2] * du[b] * du[m];
                    s -= gam[m][b][2] * du[a] * du[m];
                    s -= gam[m][2][2] * du[a] * du[b] * du[m];
                }
                q[a][b] = s;
            }
        }
        let mut second = [[0.0; 2]; 2];
        let mut forcing = 0.0;
        let mut principal = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                second[a][b] = c3n * (gam[2][a][b] + ddu[a][b] + q[a][b]);
                forcing += gi[a][b] * (gam[2][a][b] + q[a][b]);
                principal += gi[a][b] * ddu[a][b];
            }
        }
        let mut mean = 0.0;
        let mut a2 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                mean += gi[a][b] * second[a][b];
                for c in 0..2 {
                    for d in 0..2 {
                        a2 += gi[a][c] * gi[b][d] * second[a][b] * second[c][d];
                    }
                }
            }
        }
        let velocity = principal + forcing;
        let mut drift = [0.0; 2];
        for a in 0..2 {
            for b in 0..2 {
                drift[a] -= velocity * gi[a][b] * (hm[(2, b)] + hm[(2, 2)] * du[b]);
            }
        }
        let area_element = det.sqrt();
        Ok(NodeGeometry {
            node: k,
            position: self.patch.to_world(&cj.position),
            normal: self.patch.vector_to_world(&normal),
            grad: du,
            hess: ddu,
            metric: g,
            inverse: gi,
            second_form: second,
            mean_curvature: mean,
            a_norm_sq: a2,
            area_element,
            weight: area_element * grid.area(k),
            forcing,
            velocity,
            drift,
        })
    }

    pub fn fundamental_forms(&self) -> Result<SurfaceGeometry> {
        let nodes: Vec<NodeGeometry> = self.grid.active().par_iter().map(|&k| self.node_geometry(k)).collect::<Result<_>>()?;
        let mut lookup = vec![None; self.grid.len()];
        for (n, g) in nodes.iter().enumerate() {
            lookup[g.node] = Some(n);
        }
        Ok(SurfaceGeometry { nodes, lookup })
    }

    /// X(y1, 0) = Φ(y1, 0, u(y1, 0)) on the free-boundary edge, in order.
    pub fn boundary_curve(&self) -> Result<Vec<Vec3>> {
        self.grid
            .edge_nodes()
            .iter()
            .map(|&k| {
                let (y1, _) = self.grid.y(k);
                self.patch.tubular_map([y1, 0.0, self.u[k]])
            })
            .collect()
    }

    /// Length of γ = Σ ∩ Γ as the polyline through the edge-node images.
    pub fn perimeter(&self) -> Result<f64> {
        if !self.grid.has_free_boundary() {
            return Err(Error::NoFreeBoundary);
        }
        let pts = self.boundary_curve()?;
        let mut len: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if self.grid.is_periodic() {
            let (period, _) = self.grid.strip_size();
            let first = self.grid.edge_nodes()[0];
            let wrapped = self.patch.tubular_map([period, 0.0, self.u[first]])?;
            len += (wrapped - pts[pts.len() - 1]).norm();
        }
        Ok(len)
    }

    pub fn samples_with(&self, geometry: &SurfaceGeometry) -> Result<SurfaceSamples> {
        let points = geometry
            .nodes
            .iter()
            .map(|n| SamplePoint {
                point: SurfacePoint { position: n.position, normal: n.normal, mean_curvature: n.mean_curvature, a_norm_sq: n.a_norm_sq },
                weight: n.weight,
                lattice: self.grid.ij(n.node),
                outer: self.grid.touches_rim(n.node),
            })
            .collect();
        let (boundary, patch) =
            if self.grid.has_free_boundary() { (self.boundary_curve()?, Some(self.patch.clone())) } else { (Vec::new(), None) };
        let period = if self.grid.is_periodic() { Some(self.grid.lattice_bounds().2 as i64) } else { None };
        Ok(SurfaceSamples::new(points, boundary, self.grid.is_periodic(), self.grid.h(), patch, period).with_topology(self.topology))
    }

    pub fn samples(&self) -> Result<SurfaceSamples> {
        self.samples_with(&self.fundamental_forms()?)
    }

    /// Even reflection across y2 = 0 onto the full disk, with the reflected
    /// coefficient fields ā^{ij}(y1, -y2) = (-1)^{i+j} a^{ij} and even f̄.
    pub fn even_extension(&self, tol_n: f64) -> Result<EvenExtension> {
        if self.grid.shape() != DomainShape::HalfDisk {
            return Err(Error::NoFreeBoundary);
        }
        let geometry = self.fundamental_forms()?;
        let max_edge_a12 =
            self.grid.edge_nodes().iter().map(|&k| geometry.get(k).map_or(0.0, |n| n.inverse[0][1].abs())).fold(0.0, f64::max);
        if max_edge_a12 > 10.0 * tol_n {
            return Err(Error::ReflectionConditionViolated { value: max_edge_a12, tol: 10.0 * tol_n });
        }
        let full = Arc::new(Grid::disk(self.grid.radius(), self.grid.h())?);
        let u = (0..full.len())
            .map(|k| {
                if full.kind(k) == NodeKind::Outside {
                    return f64::NAN;
                }
                let (i, j) = full.ij(k);
                self.value(i, j.abs()).unwrap_or(f64::NAN)
            })
            .collect();
        let surface = GraphSurface::new(full.clone(), self.patch.clone(), u, self.t)?;
        let mut coefficients = Vec::with_capacity(full.active().len());
        let mut forcing = Vec::with_capacity(full.active().len());
        for &k in full.active() {
            let (i, j) = full.ij(k);
            let src = self
                .grid
                .resolve(i, j.abs())
                .and_then(|s| geometry.get(s))
                .ok_or_else(|| Error::InvalidSurface(format!("no source node for ({i}, {j})")))?;
            let sign = if j < 0 { -1.0 } else { 1.0 };
            let a = src.inverse;
            coefficients.push([[a[0][0], sign * a[0][1]], [sign * a[1][0], a[1][1]]]);
            forcing.push(src.forcing);
        }
        Ok(EvenExtension { surface, coefficients, forcing, max_edge_a12 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat_half(r: f64, h: f64, f: impl Fn(f64, f64) -> f64) -> GraphSurface {
        GraphSurface::from_fn(Arc::new(Grid::half_disk(r, h).unwrap()), Arc::new(SupportPatch::flat()), 0.0, f).unwrap()
    }

    #[test]
    fn flat_graph_is_minimal() {
        let s = flat_half(1.0, 1.0 / 16.0, |_, _| 0.0);
        let g = s.fundamental_forms().unwrap();
        for n in &g.nodes {
            assert_eq!(n.metric, [[1.0, 0.0], [0.0, 1.0]]);
            assert_eq!(n.mean_curvature, 0.0);
            assert_eq!(n.velocity, 0.0);
        }
        assert!((g.area() - PI / 2.0).abs() < 2.0 / 16.0);
        let p = s.perimeter().unwrap();
        assert!((p - 2.0).abs() <= 2.0 / 16.0);
    }

    #[test]
    fn sphere_graph_mean_curvature() {
        let h = 1.0 / 64.0;
        let s = flat_half(0.5, h, |a, b| (1.0 - a * a - b * b).sqrt());
        let g = s.fundamental_forms().unwrap();
        for n in &g.nodes {
            assert!((n.mean_curvature + 2.0).abs() < 5.0 * h * h, "{}", n.mean_curvature);
            assert!(n.a_norm_sq >= 0.5 * n.mean_curvature * n.mean_curvature - 1e-12);
            assert!((n.normal.norm() - 1.0).abs() < 1e-12);
        }
        assert!(s.neumann_residual() < h * h);
    }

    #[test]
    fn even_extension_of_sphere_graph() {
        let s = flat_half(0.5, 1.0 / 32.0, |a, b| (1.0 - a * a - b * b).sqrt());
        let ext = s.even_extension(1.0 / 1024.0).unwrap();
        assert_eq!(ext.max_edge_a12, 0.0);
        let grid = &ext.surface.grid;
        for &k in grid.active() {
            let (a, b) = grid.y(k);
            assert!((ext.surface.u[k] - (1.0 - a * a - b * b).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_extension_without_edge() {
        let g = Arc::new(Grid::disk(0.5, 0.1).unwrap());
        let s = GraphSurface::from_fn(g, Arc::new(SupportPatch::flat()), 0.0, |_, _| 0.0).unwrap();
        assert_eq!(s.even_extension(1e-4), Err(Error::NoFreeBoundary));
        assert_eq!(s.perimeter(), Err(Error::NoFreeBoundary));
    }

    #[test]
    fn paraboloid_forcing_at_zero_height() {
        let patch = Arc::new(SupportPatch::paraboloid(0.5, 0.5).unwrap());
        let grid = Arc::new(Grid::half_disk(0.4, 0.05).unwrap());
        let s = GraphSurface::from_fn(grid, patch.clone(), 0.0, |_, _| 0.0).unwrap();
        let g = s.fundamental_forms().unwrap();
        for n in &g.nodes {
            let (y1, y2) = s.grid.y(n.node);
            let mc = patch.pullback_metric_connection([y1, y2, 0.0]).unwrap();
            let hi = mc.metric.fixed_view::<2, 2>(0, 0).into_owned().try_inverse().unwrap();
            let mut f = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    f += hi[(a, b)] * mc.christoffel[2][a][b];
                }
            }
            assert!((n.forcing - f).abs() < 1e-13);
        }
    }
}
