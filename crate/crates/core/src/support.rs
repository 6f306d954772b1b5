//! Support surface Γ = ∂U given locally as a graph `x2 = φ(x1, x3)` over its
//! tangent plane at a base point, together with the tubular chart
//!
//! ```text
//! Φ(y1, y2, y3) = (y1, φ(y1, y3), y3) + y2 ν(y1, y3),
//! ν = (-∂1φ, 1, -∂3φ) / sqrt(1 + |∇φ|²),
//! ```
//!
//! which flattens a neighborhood of Γ: `y2` is the signed distance to Γ
//! (positive inside U) and reflection across Γ becomes `y2 ↦ -y2`.
//!
//! All chart computations happen in the patch frame; public entry points take
//! and return world coordinates.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const NEWTON_MAX_ITER: usize = 50;

/// Height function φ and its derivatives up to third order at one point.
///
/// Index 0 refers to `y1`, index 1 to `y3`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeightJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    pub third: [[[f64; 2]; 2]; 2],
}

impl HeightJet {
    fn scaled(mut self, s: f64) -> Self {
        // φ_s(y) = φ(s y) / s
        self.value /= s;
        for i in 0..2 {
            for j in 0..2 {
                self.hess[i][j] *= s;
                for k in 0..2 {
                    self.third[i][j][k] *= s * s;
                }
            }
        }
        self
    }

    pub fn hess_norm(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.hess {
            for v in row {
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn third_norm(&self) -> f64 {
        self.third_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn third_flat(&self) -> [f64; 8] {
        let t = &self.third;
        [t[0][0][0], t[0][0][1], t[0][1][0], t[0][1][1], t[1][0][0], t[1][0][1], t[1][1][0], t[1][1][1]]
    }
}

/// φ sampled on a uniform lattice; derivatives by fourth-order central
/// differences, evaluated off-lattice by Catmull–Rom interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledHeight {
    origin: [f64; 2],
    spacing: f64,
    n1: usize,
    n3: usize,
    values: Vec<f64>,
    // value, d1, d3, d11, d13, d33, d111, d113, d133, d333
    fields: Vec<[f64; 10]>,
}

const D0: &[(i64, f64)] = &[(0, 1.0)];
const D1: &[(i64, f64)] = &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D2: &[(i64, f64)] = &[(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];
const D3: &[(i64, f64)] = &[(-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0), (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0)];

impl SampledHeight {
    /// `values[k3 * n1 + k1]` is φ at `(origin[0] + k1 h, origin[1] + k3 h)`.
    pub fn new(origin: [f64; 2], spacing: f64, n1: usize, n3: usize, values: Vec<f64>) -> Result<Self> {
        if spacing <= 0.0 || !spacing.is_finite() {
            return Err(Error::InvalidPatch("lattice spacing must be positive".into()));
        }
        if n1 < 12 || n3 < 12 || values.len() != n1 * n3 {
            return Err(Error::InvalidPatch(format!(
                "lattice needs at least 12x12 values matching n1*n3, got {}x{} with {} values",
                n1,
                n3,
                values.len()
            )));
        }
        let mut out = SampledHeight { origin, spacing, n1, n3, values, fields: Vec::new() };
        out.fields = out.derivative_fields();
        Ok(out)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Samples a closure on a square lattice of half-width `half_width` centred at 0.
    pub fn from_fn(half_width: f64, spacing: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let m = (half_width / spacing).ceil() as i64 + 4;
        let n = (2 * m + 1) as usize;
        let origin = [-(m as f64) * spacing, -(m as f64) * spacing];
        let mut values = Vec::with_capacity(n * n);
        for k3 in 0..n {
            for k1 in 0..n {
                values.push(f(origin[0] + k1 as f64 * spacing, origin[1] + k3 as f64 * spacing));
            }
        }
        Self::new(origin, spacing, n, n, values)
    }

    fn at(&self, k1: i64, k3: i64) -> Option<f64> {
        if k1 < 0 || k3 < 0 || k1 >= self.n1 as i64 || k3 >= self.n3 as i64 {
            None
        } else {
            Some(self.values[k3 as usize * self.n1 + k1 as usize])
        }
    }

    fn apply(&self, k1: i64, k3: i64, a: &[(i64, f64)], b: &[(i64, f64)], order: i32) -> f64 {
        let mut acc = 0.0;
        for &(o1, w1) in a {
            for &(o3, w3) in b {
                match self.at(k1 + o1, k3 + o3) {
                    Some(v) => acc += w1 * w3 * v,
                    None => return f64::NAN,
                }
            }
        }
        acc / self.spacing.powi(order)
    }

    fn derivative_fields(&self) -> Vec<[f64; 10]> {
        let mut out = Vec::with_capacity(self.values.len());
        for k3 in 0..self.n3 as i64 {
            for k1 in 0..self.n1 as i64 {
                out.push([
                    self.apply(k1, k3, D0, D0, 0),
                    self.apply(k1, k3, D1, D0, 1),
                    self.apply(k1, k3, D0, D1, 1),
                    self.apply(k1, k3, D2, D0, 2),
                    self.apply(k1, k3, D1, D1, 2),
                    self.apply(k1, k3, D0, D2, 2),
                    self.apply(k1, k3, D3, D0, 3),
                    self.apply(k1, k3, D2, D1, 3),
                    self.apply(k1, k3, D1, D2, 3),
                    self.apply(k1, k3, D0, D3, 3),
                ]);
            }
        }
        out
    }

    fn jet(&self, y1: f64, y3: f64) -> Result<HeightJet> {
        let s1 = (y1 - self.origin[0]) / self.spacing;
        let s3 = (y3 - self.origin[1]) / self.spacing;
        let k1 = s1.floor() as i64;
        let k3 = s3.floor() as i64;
        let w1 = catmull_rom(s1 - k1 as f64);
        let w3 = catmull_rom(s3 - k3 as f64);
        let mut f = [0.0; 10];
        for (a, wa) in w3.iter().enumerate() {
            for (b, wb) in w1.iter().enumerate() {
                let q1 = k1 + b as i64 - 1;
                let q3 = k3 + a as i64 - 1;
                if q1 < 0 || q3 < 0 || q1 >= self.n1 as i64 || q3 >= self.n3 as i64 {
                    return Err(Error::InvalidPatch(format!("({y1}, {y3}) is outside the sampled lattice")));
                }
                let node = &self.fields[q3 as usize * self.n1 + q1 as usize];
                for (acc, v) in f.iter_mut().zip(node.iter()) {
                    *acc += wa * wb * v;
                }
            }
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPatch(format!("({y1}, {y3}) is too close to the lattice edge")));
        }
        Ok(HeightJet {
            value: f[0],
            grad: [f[1], f[2]],
            hess: [[f[3], f[4]], [f[4], f[5]]],
            third: [[[f[6], f[7]], [f[7], f[8]]], [[f[7], f[8]], [f[8], f[9]]]],
        })
    }
}

fn catmull_rom(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [0.5 * (-s3 + 2.0 * s2 - s), 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0), 0.5 * (-3.0 * s3 + 4.0 * s2 + s), 0.5 * (s3 - s2)]
}

/// Catalog of height functions.
#[derive(Debug, Clone, PartialEq)]
pub enum HeightFunction {
    /// φ ≡ 0.
    Flat,
    /// φ = a y1² / 2.
    Paraboloid {
        a: f64,
    },
    /// Inside of a ball of the given radius seen from its boundary:
    /// φ = R - sqrt(R² - y1² - y3²).
    SphereCap {
        radius: f64,
    },
    Sampled(SampledHeight),
}

impl HeightFunction {
    fn jet(&self, y1: f64, y3: f64) -> Result<HeightJet> {
        match self {
            HeightFunction::Flat => Ok(HeightJet::default()),
            HeightFunction::Paraboloid { a } => {
                Ok(HeightJet { value: 0.5 * a * y1 * y1, grad: [a * y1, 0.0], hess: [[*a, 0.0], [0.0, 0.0]], third: Default::default() })
            }
            HeightFunction::SphereCap { radius } => {
                let y = [y1, y3];
                let rho2 = y1 * y1 + y3 * y3;
                let s2 = radius * radius - rho2;
                if s2 <= 0.0 {
                    return Err(Error::InvalidPatch(format!("({y1}, {y3}) lies outside the sphere cap of radius {radius}")));
                }
                let s = s2.sqrt();
                let s3 = s2 * s;
                let s5 = s3 * s2;
                let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                let mut jet = HeightJet { value: radius - s, ..Default::default() };
                for i in 0..2 {
                    jet.grad[i] = y[i] / s;
                    for j in 0..2 {
                        jet.hess[i][j] = delta(i, j) / s + y[i] * y[j] / s3;
                        for k in 0..2 {
                            jet.third[i][j][k] =
                                (delta(i, j) * y[k] + delta(i, k) * y[j] + delta(j, k) * y[i]) / s3 + 3.0 * y[i] * y[j] * y[k] / s5;
                        }
                    }
                }
                Ok(jet)
            }
            HeightFunction::Sampled(s) => s.jet(y1, y3),
        }
    }

    fn name(&self) -> String {
        match self {
            HeightFunction::Flat => "flat".into(),
            HeightFunction::Paraboloid { a } => format!("paraboloid:{a}"),
            HeightFunction::SphereCap { radius } => format!("sphere_cap:{radius}"),
            HeightFunction::Sampled(_) => "sampled".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchKind {
    Flat,
    AnalyticQuadric,
    Sampled,
}

/// Position and first/second derivatives of Φ at a chart point, in the patch frame.
#[derive(Debug, Clone, Copy)]
pub struct ChartJet {
    pub position: Vec3,
    pub d: [Vec3; 3],
    pub dd: [[Vec3; 3]; 3],
}

impl ChartJet {
    pub fn metric(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.d[i].dot(&self.d[j]))
    }
}

/// Pull-back metric `h_ij = ∂iΦ·∂jΦ` and its Levi-Civita connection,
/// `christoffel[k][i][j] = Γ^k_ij`.
#[derive(Debug, Clone, Copy)]
pub struct MetricConnection {
    pub metric: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub christoffel: [[[f64; 3]; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Vec3,
    pub distance: f64,
    pub gradient: Vec3,
    pub chart: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaReport {
    pub max_hessian: f64,
    pub max_third: f64,
    pub third_lipschitz: f64,
    pub min_mean_curvature: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Measured constants of the near-identity estimates of the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartConstants {
    /// max |Φ(Y) - Y| / (κ |Y|²)
    pub displacement: f64,
    /// max |h_ij - δ_ij| / (κ |Y|)
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportPatch {
    height: HeightFunction,
    scale: f64,
    kappa: f64,
    chart_radius: f64,
    origin: Vec3,
    frame: Matrix3<f64>,
}

impl SupportPatch {
    pub fn flat() -> Self {
        SupportPatch {
            height: HeightFunction::Flat,
            scale: 1.0,
            kappa: 0.0,
            chart_radius: f64::INFINITY,
            origin: Vec3::zeros(),
            frame: Matrix3::identity(),
        }
    }

    pub fn new(height: HeightFunction, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidPatch(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        let flat = matches!(height, HeightFunction::Flat);
        if kappa == 0.0 && !flat {
            return Err(Error::InvalidPatch("kappa = 0 is only admitted for a flat patch".into()));
        }
        match &height {
            HeightFunction::Paraboloid { a } if !a.is_finite() => {
                return Err(Error::InvalidPatch("paraboloid coefficient must be finite".into()))
            }
            HeightFunction::SphereCap { radius } if !(*radius > 0.0) => {
                return Err(Error::InvalidPatch("sphere cap radius must be positive".into()))
            }
            _ => {}
        }
        let mut chart_radius = if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY };
        if let HeightFunction::SphereCap { radius } = height {
            chart_radius = chart_radius.min(radius);
        }
        let patch = SupportPatch { height, scale: 1.0, kappa, chart_radius, origin: Vec3::zeros(), frame: Matrix3::identity() };
        let jet = patch.height_jet(0.0, 0.0)?;
        let tol = 1e-8;
        if jet.value.abs() > tol || jet.grad[0].abs() > tol || jet.grad[1].abs() > tol {
            return Err(Error::InvalidPatch("φ(0,0) and ∇φ(0,0) must vanish".into()));
        }
        Ok(patch)
    }

    pub fn paraboloid(a: f64, kappa: f64) -> Result<Self> {
        Self::new(HeightFunction::Paraboloid { a }, kappa)
    }

    pub fn sphere_cap(radius: f64, kappa: f64) -> Result<Self> {
        Self::new(HeightFunction::SphereCap { radius }, kappa)
    }

    /// Caps the chart radius at `bound` (the default is κ⁻¹).
    pub fn with_chart_radius(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::InvalidPatch("chart radius must be positive".into()));
        }
        self.chart_radius = self.chart_radius.min(bound);
        Ok(self)
    }

    /// Places the patch at `origin` with orthonormal axes (columns of `frame`);
    /// the second column is ν(O).
    pub fn with_orientation(mut self, origin: Vec3, frame: Matrix3<f64>) -> Result<Self> {
        let err = (frame.transpose() * frame - Matrix3::identity()).abs().max();
        if err > 1e-10 || frame.determinant() < 0.0 {
            return Err(Error::InvalidPatch("frame must be a rotation".into()));
        }
        self.origin = origin;
        self.frame = frame;
        Ok(self)
    }

    /// The patch of (Γ - p) / λ.
    pub fn rescaled(&self, p: &Vec3, lambda: f64) -> Self {
        let mut out = self.clone();
        out.origin = (self.origin - p) / lambda;
        out.scale = self.scale * lambda;
        out.kappa = self.kappa * lambda;
        out.chart_radius = self.chart_radius / lambda;
        out
    }

    pub fn kind(&self) -> PatchKind {
        match self.height {
            HeightFunction::Flat => PatchKind::Flat,
            HeightFunction::Sampled(_) => PatchKind::Sampled,
            _ => PatchKind::AnalyticQuadric,
        }
    }

    pub fn is_flat(&self) -> bool {
        self.kind() == PatchKind::Flat
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn frame(&self) -> Matrix3<f64> {
        self.frame
    }

    pub fn phi_name(&self) -> String {
        self.height.name()
    }

    pub fn height_jet(&self, y1: f64, y3: f64) -> Result<HeightJet> {
        let s = self.scale;
        Ok(self.height.jet(s * y1, s * y3)?.scaled(s))
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.origin + self.frame * local
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.frame.transpose() * (world - self.origin)
    }

    pub fn vector_to_world(&self, v: &Vec3) -> Vec3 {
        self.frame * v
    }

    pub fn vector_to_local(&self, v: &Vec3) -> Vec3 {
        self.frame.transpose() * v
    }

    fn check_range(&self, y: &[f64; 3]) -> Result<()> {
        let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if !(norm < self.chart_radius) {
            return Err(Error::ChartOutOfRange { norm, radius: self.chart_radius });
        }
        Ok(())
    }

    /// Φ and its first two derivatives in the patch frame.
    pub fn chart_jet(&self, y: [f64; 3]) -> Result<ChartJet> {
        self.check_range(&y)?;
        let jet = self.height_jet(y[0], y[2])?;
        Ok(chart_jet_from_height(&jet, y))
    }

    pub fn tubular_map_local(&self, y: [f64; 3]) -> Result<Vec3> {
        self.check_range(&y)?;
        if self.is_flat() {
            return Ok(Vec3::new(y[0], y[1], y[2]));
        }
        let jet = self.height_jet(y[0], y[2])?;
        let nu = unit_normal(&jet);
        Ok(Vec3::new(y[0], jet.value, y[2]) + y[1] * nu)
    }

    pub fn tubular_map(&self, y: [f64; 3]) -> Result<Vec3> {
        Ok(self.to_world(&self.tubular_map_local(y)?))
    }

    /// DΦ(Y) in world coordinates; column i is ∂iΦ.
    pub fn chart_jacobian(&self, y: [f64; 3]) -> Result<Matrix3<f64>> {
        let cj = self.chart_jet(y)?;
        Ok(self.frame * Matrix3::from_columns(&cj.d))
    }

    /// Inward unit normal ν(y1, y3) in world coordinates.
    pub fn normal(&self, y1: f64, y3: f64) -> Result<Vec3> {
        Ok(self.vector_to_world(&unit_normal(&self.height_jet(y1, y3)?)))
    }

    /// Chart coordinates of a world point by Newton iteration on Φ.
    pub fn chart_coordinates(&self, x: &Vec3) -> Result<[f64; 3]> {
        let target = self.to_local(x);
        if self.is_flat() {
            let y = [target.x, target.y, target.z];
            self.check_range(&y)?;
            return Ok(y);
        }
        let length = if self.chart_radius.is_finite() { self.chart_radius } else { target.norm().max(1.0) };
        let tol = 1e-12 * length;
        let mut y = target;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let yy = [y.x, y.y, y.z];
            let cj = self.chart_jet(yy)?;
            let r = cj.position - target;
            residual = r.norm();
            if residual <= tol {
                return Ok(yy);
            }
            let jac = Matrix3::from_columns(&cj.d);
            let step = jac.lu().solve(&r).ok_or(Error::NoConvergence { residual })?;
            y -= step;
        }
        Err(Error::NoConvergence { residual })
    }

    pub fn project_and_distance(&self, x: &Vec3) -> Result<Projection> {
        let y = self.chart_coordinates(x)?;
        let point = self.tubular_map([y[0], 0.0, y[2]])?;
        let gradient = self.normal(y[0], y[2])?;
        Ok(Projection { point, distance: y[1], gradient, chart: y })
    }

    /// Reflection across Γ: X̃ = 2X̊ - X = Φ(y1, -y2, y3).
    pub fn reflect(&self, x: &Vec3) -> Result<Vec3> {
        if self.is_flat() {
            let mut local = self.to_local(x);
            local.y = -local.y;
            return Ok(self.to_world(&local));
        }
        let y = self.chart_coordinates(x)?;
        self.tubular_map([y[0], -y[1], y[2]])
    }

    /// Signed distance to Γ, positive in U.
    pub fn signed_distance(&self, x: &Vec3) -> Result<f64> {
        if self.is_flat() {
            return Ok(self.to_local(x).y);
        }
        Ok(self.chart_coordinates(x)?[1])
    }

    /// Whether X lies in the complementary ball B̃_r(P): X ∈ U and X̃ ∈ B_r(P) \ U.
    pub fn in_complementary_ball(&self, p: &Vec3, r: f64, x: &Vec3) -> Result<bool> {
        self.complementary_membership(p, r, x, false)
    }

    /// Same test with U replaced by its closure for X, so that samples on Γ
    /// (which carry area in the discrete setting) are counted.
    pub(crate) fn complementary_membership(&self, p: &Vec3, r: f64, x: &Vec3, closed: bool) -> Result<bool> {
        if !(r > 0.0) {
            return Err(Error::InvalidPatch(format!("ball radius must be positive, got {r}")));
        }
        let d = self.signed_distance(x)?;
        let inside = if closed { d >= 0.0 } else { d > 0.0 };
        if !inside {
            return Ok(false);
        }
        let xt = self.reflect(x)?;
        if (xt - p).norm() >= r {
            return Ok(false);
        }
        // X̃ must lie outside U; X̃ on Γ counts as outside since U is open.
        Ok(self.signed_distance(&xt)? <= 0.0)
    }

    pub fn pullback_metric_connection(&self, y: [f64; 3]) -> Result<MetricConnection> {
        let cj = self.chart_jet(y)?;
        metric_connection(&cj)
    }

    /// ∂k h_ij by the product rule, `out[k][(i, j)]`.
    pub fn metric_derivatives(&self, y: [f64; 3]) -> Result<[Matrix3<f64>; 3]> {
        let cj = self.chart_jet(y)?;
        Ok(std::array::from_fn(|k| Matrix3::from_fn(|i, j| cj.dd[k][i].dot(&cj.d[j]) + cj.d[i].dot(&cj.dd[k][j]))))
    }

    /// Mean curvature of Γ at (y1, y3) with respect to the inward normal.
    pub fn mean_curvature(&self, y1: f64, y3: f64) -> Result<f64> {
        let j = self.height_jet(y1, y3)?;
        Ok(graph_mean_curvature(&j))
    }

    /// Second fundamental form A_Γ(T, T) = -T·D_T ν for a world tangent vector
    /// at the point of Γ above (y1, y3).
    pub fn second_form(&self, y1: f64, y3: f64, tangent: &Vec3) -> Result<f64> {
        let j = self.height_jet(y1, y3)?;
        let t = self.vector_to_local(tangent);
        let c = [t.x, t.z];
        let m = (1.0 + j.grad[0] * j.grad[0] + j.grad[1] * j.grad[1]).sqrt();
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += j.hess[a][b] * c[a] * c[b];
            }
        }
        Ok(s / m)
    }

    /// Hessian of the signed distance by central differences of ∇d.
    pub fn distance_hessian(&self, x: &Vec3) -> Result<Matrix3<f64>> {
        if self.is_flat() {
            return Ok(Matrix3::zeros());
        }
        let step = 1e-5 * if self.chart_radius.is_finite() { self.chart_radius } else { 1.0 };
        let mut cols = [Vec3::zeros(); 3];
        for (k, col) in cols.iter_mut().enumerate() {
            let mut e = Vec3::zeros();
            e[k] = step;
            let gp = self.project_and_distance(&(x + e))?.gradient;
            let gm = self.project_and_distance(&(x - e))?.gradient;
            *col = (gp - gm) / (2.0 * step);
        }
        let m = Matrix3::from_columns(&cols);
        Ok(0.5 * (m + m.transpose()))
    }

    /// Checks the κ-graph bounds and mean convexity on a lattice of spacing
    /// at most `chart_radius / 64` over the chart disk.
    pub fn verify_kappa_condition(&self) -> KappaReport {
        let radius = if self.chart_radius.is_finite() { self.chart_radius } else { 1.0 };
        let n: i64 = 64;
        let spacing = radius / n as f64;
        let mut jets: Vec<Option<HeightJet>> = Vec::new();
        let side = (2 * n + 1) as usize;
        for k3 in -n..=n {
            for k1 in -n..=n {
                let y1 = k1 as f64 * spacing;
                let y3 = k3 as f64 * spacing;
                let inside = (y1 * y1 + y3 * y3).sqrt() < radius * (1.0 - 1e-12);
                jets.push(if inside { self.height_jet(y1, y3).ok() } else { None });
            }
        }
        let mut report = KappaReport {
            max_hessian: 0.0,
            max_third: 0.0,
            third_lipschitz: 0.0,
            min_mean_curvature: f64::INFINITY,
            samples: 0,
            pass: false,
        };
        let at = |a: i64, b: i64| -> Option<&HeightJet> {
            if a < 0 || b < 0 || a >= side as i64 || b >= side as i64 {
                None
            } else {
                jets[b as usize * side + a as usize].as_ref()
            }
        };
        for b in 0..side as i64 {
            for a in 0..side as i64 {
                let Some(j) = at(a, b) else { continue };
                report.samples += 1;
                report.max_hessian = report.max_hessian.max(j.hess_norm());
                report.max_third = report.max_third.max(j.third_norm());
                report.min_mean_curvature = report.min_mean_curvature.min(graph_mean_curvature(j));
                for (da, db) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                    if let Some(k) = at(a + da, b + db) {
                        let dist = spacing * ((da * da + db * db) as f64).sqrt();
                        let t1 = j.third_flat();
                        let t2 = k.third_flat();
                        let diff: f64 = t1.iter().zip(t2.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                        report.third_lipschitz = report.third_lipschitz.max(diff / dist);
                    }
                }
            }
        }
        let k = self.kappa;
        let slack = 1e-12;
        report.pass = report.samples > 0
            && report.max_hessian <= k + slack
            && report.max_third <= k * k + slack
            && report.third_lipschitz <= k * k * k + slack
            && report.min_mean_curvature >= -1e-8;
        report
    }

    /// Measured constants in |Φ(Y) - Y| ≤ C κ |Y|² and |h - δ| ≤ C κ |Y| over a
    /// lattice of chart points with |Y| ≤ `fraction` · chart radius.
    pub fn chart_constants(&self, fraction: f64) -> ChartConstants {
        let mut out = ChartConstants { displacement: 0.0, metric: 0.0 };
        if self.kappa == 0.0 {
            return out;
        }
        let r = fraction * self.chart_radius;
        let n = 8;
        for a in -n..=n {
            for b in -n..=n {
                for c in -n..=n {
                    let y = [a as f64 * r / n as f64, b as f64 * r / n as f64, c as f64 * r / n as f64];
                    let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                    if norm == 0.0 || norm > r {
                        continue;
                    }
                    let Ok(cj) = self.chart_jet(y) else { continue };
                    let disp = (cj.position - Vec3::new(y[0], y[1], y[2])).norm();
                    out.displacement = out.displacement.max(disp / (self.kappa * norm * norm));
                    let dev = (cj.metric() - Matrix3::identity()).abs().max();
                    out.metric = out.metric.max(dev / (self.kappa * norm));
                }
            }
        }
        out
    }
}

fn graph_mean_curvature(j: &HeightJet) -> f64 {
    let (p, q) = (j.grad[0], j.grad[1]);
    let m2 = 1.0 + p * p + q * q;
    ((1.0 + q * q) * j.hess[0][0] - 2.0 * p * q * j.hess[0][1] + (1.0 + p * p) * j.hess[1][1]) / (m2 * m2.sqrt())
}

fn unit_normal(j: &HeightJet) -> Vec3 {
    Vec3::new(-j.grad[0], 1.0, -j.grad[1]).normalize()
}

pub(crate) fn chart_jet_from_height(jet: &HeightJet, y: [f64; 3]) -> ChartJet {
    let y2 = y[1];
    // n = (-φ1, 1, -φ3) and its derivatives in the tangent directions a, b.
    let n = Vec3::new(-jet.grad[0], 1.0, -jet.grad[1]);
    let na: [Vec3; 2] = std::array::from_fn(|a| Vec3::new(-jet.hess[0][a], 0.0, -jet.hess[1][a]));
    let nab: [[Vec3; 2]; 2] = std::array::from_fn(|a| std::array::from_fn(|b| Vec3::new(-jet.third[0][a][b], 0.0, -jet.third[1][a][b])));
    let m = n.norm();
    let m3 = m * m * m;
    let m5 = m3 * m * m;
    let nu = n / m;
    let dn: [f64; 2] = std::array::from_fn(|a| n.dot(&na[a]));
    let nu_a: [Vec3; 2] = std::array::from_fn(|a| na[a] / m - n * (dn[a] / m3));
    let nu_ab: [[Vec3; 2]; 2] = std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            nab[a][b] / m - na[a] * (dn[b] / m3) - na[b] * (dn[a] / m3) - n * ((na[a].dot(&na[b]) + n.dot(&nab[a][b])) / m3)
                + n * (3.0 * dn[a] * dn[b] / m5)
        })
    });

    let surf = Vec3::new(y[0], jet.value, y[2]);
    let position = surf + y2 * nu;
    let t1 = Vec3::new(1.0, jet.grad[0], 0.0);
    let t3 = Vec3::new(0.0, jet.grad[1], 1.0);
    let d = [t1 + y2 * nu_a[0], nu, t3 + y2 * nu_a[1]];

    let hvec = |a: usize, b: usize| Vec3::new(0.0, jet.hess[a][b], 0.0);
    let d00 = hvec(0, 0) + y2 * nu_ab[0][0];
    let d02 = hvec(0, 1) + y2 * nu_ab[0][1];
    let d22 = hvec(1, 1) + y2 * nu_ab[1][1];
    let d01 = nu_a[0];
    let d21 = nu_a[1];
    let zero = Vec3::zeros();
    let dd = [[d00, d01, d02], [d01, zero, d21], [d02, d21, d22]];
    ChartJet { position, d, dd }
}

pub(crate) fn metric_connection(cj: &ChartJet) -> Result<MetricConnection> {
    let h = cj.metric();
    let det = h.determinant();
    if !(det > 0.0) {
        return Err(Error::SingularMetric { det });
    }
    let inv = h.try_inverse().ok_or(Error::SingularMetric { det })?;
    // Γ^k_ij = h^{kl} (∂ijΦ · ∂lΦ)
    let mut first = [[[0.0; 3]; 3]; 3];
    for l in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                first[l][i][j] = cj.dd[i][j].dot(&cj.d[l]);
            }
        }
    }
    let mut christoffel = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += inv[(k, l)] * first[l][i][j];
                }
                christoffel[k][i][j] = s;
            }
        }
    }
    Ok(MetricConnection { metric: h, inverse: inv, christoffel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn parabola() -> SupportPatch {
        SupportPatch::paraboloid(1.0, 1.0).unwrap().with_chart_radius(2.0).unwrap()
    }

    #[test]
    fn flat_chart_is_identity() {
        let p = SupportPatch::flat();
        let x = p.tubular_map([0.3, 0.2, -0.1]).unwrap();
        assert_eq!(x, Vec3::new(0.3, 0.2, -0.1));
        let mc = p.pullback_metric_connection([0.3, 0.2, -0.1]).unwrap();
        assert_eq!(mc.metric, Matrix3::identity());
        assert!(mc.christoffel.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn parabola_chart_values() {
        // κ = 1 would put Y = (1, 0, 0) on the chart rim; κ = 0.5 keeps it inside
        let p = SupportPatch::paraboloid(1.0, 0.5).unwrap();
        let x = p.tubular_map([1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x, Vec3::new(1.0, 0.5, 0.0), epsilon = 1e-15);
        let x = p.tubular_map([0.0, 0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(x, Vec3::new(0.0, 0.5, 0.0), epsilon = 1e-15);
        let mc = p.pullback_metric_connection([0.2, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(mc.metric[(0, 0)], 1.04, epsilon = 1e-14);
    }

    #[test]
    fn chart_out_of_range() {
        let p = SupportPatch::paraboloid(1.0, 1.0).unwrap();
        assert!(matches!(p.tubular_map([1.0, 0.0, 0.0]), Err(Error::ChartOutOfRange { .. })));
    }

    #[test]
    fn jacobian_at_origin_is_identity() {
        for p in [parabola(), SupportPatch::sphere_cap(2.0, 1.0).unwrap()] {
            let j = p.chart_jacobian([0.0, 0.0, 0.0]).unwrap();
            assert_abs_diff_eq!(j, Matrix3::identity(), epsilon = 1e-14);
            assert_abs_diff_eq!(p.tubular_map([0.0; 3]).unwrap(), Vec3::zeros(), epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_inverts_chart() {
        let p = parabola();
        let x = p.tubular_map([0.4, 0.3, 0.0]).unwrap();
        let pr = p.project_and_distance(&x).unwrap();
        assert_abs_diff_eq!(pr.distance, 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(x - pr.distance * pr.gradient, pr.point, epsilon = 1e-12);

        let flat = SupportPatch::flat();
        let pr = flat.project_and_distance(&Vec3::new(1.0, 0.7, 2.0)).unwrap();
        assert_eq!(pr.point, Vec3::new(1.0, 0.0, 2.0));
        assert_eq!(pr.distance, 0.7);
        assert_eq!(pr.gradient, Vec3::new(0.0, 1.0, 0.0));

        let on = p.tubular_map([0.5, 0.0, 0.2]).unwrap();
        assert_abs_diff_eq!(p.project_and_distance(&on).unwrap().point, on, epsilon = 1e-12);
    }

    #[test]
    fn reflection_values() {
        let flat = SupportPatch::flat();
        assert_eq!(flat.reflect(&Vec3::new(1.0, 0.7, 2.0)).unwrap(), Vec3::new(1.0, -0.7, 2.0));
        let p = parabola();
        let x = p.tubular_map([0.4, 0.3, 0.0]).unwrap();
        let expected = p.tubular_map([0.4, -0.3, 0.0]).unwrap();
        assert_abs_diff_eq!(p.reflect(&x).unwrap(), expected, epsilon = 1e-9);
        let on = p.tubular_map([0.4, 0.0, 0.1]).unwrap();
        assert_abs_diff_eq!(p.reflect(&on).unwrap(), on, epsilon = 1e-12);
    }

    #[test]
    fn complementary_ball_cases() {
        let flat = SupportPatch::flat();
        let p = Vec3::new(0.0, 0.5, 0.0);
        for x in [Vec3::new(0.0, 0.1, 0.0), Vec3::new(0.1, 0.45, 0.0)] {
            assert!(!flat.in_complementary_ball(&p, 0.3, &x).unwrap());
        }
        let p = Vec3::new(0.0, 0.2, 0.0);
        assert!(flat.in_complementary_ball(&p, 0.5, &Vec3::new(0.0, 0.1, 0.0)).unwrap());
        assert!(!flat.in_complementary_ball(&p, 0.5, &Vec3::new(0.0, -0.1, 0.0)).unwrap());
    }

    #[test]
    fn boundary_orthogonality_of_metric() {
        for p in [parabola(), SupportPatch::sphere_cap(2.0, 1.0).unwrap()] {
            for (y1, y3) in [(0.3, 0.1), (-0.5, 0.4), (0.1, -0.6)] {
                let mc = p.pullback_metric_connection([y1, 0.0, y3]).unwrap();
                assert_abs_diff_eq!(mc.metric[(0, 1)], 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(mc.metric[(2, 1)], 0.0, epsilon = 1e-12);
                let mc = p.pullback_metric_connection([y1, 0.2, y3]).unwrap();
                assert_abs_diff_eq!(mc.metric[(1, 1)], 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn kappa_condition_examples() {
        assert!(SupportPatch::flat().verify_kappa_condition().pass);
        let r = SupportPatch::paraboloid(1.0, 0.5).unwrap().verify_kappa_condition();
        assert!(!r.pass);
        assert_abs_diff_eq!(r.max_hessian, 1.0, epsilon = 1e-12);
        let r = SupportPatch::sphere_cap(4.0, 1.0).unwrap().verify_kappa_condition();
        assert!(!SupportPatch::sphere_cap(2.0, 1.0).unwrap().verify_kappa_condition().pass);
        assert!(r.pass, "{r:?}");
        assert!(r.min_mean_curvature > 0.0);
    }

    #[test]
    fn rejects_bad_kappa() {
        assert!(SupportPatch::paraboloid(1.0, 0.0).is_err());
        assert!(SupportPatch::paraboloid(1.0, -1.0).is_err());
        assert!(SupportPatch::new(HeightFunction::Flat, 0.0).is_ok());
    }

    #[test]
    fn second_form_of_sphere_cap() {
        // inward normal of a ball: A_Γ(T, T) = 1/R for unit tangents
        let p = SupportPatch::sphere_cap(2.0, 1.0).unwrap();
        let a = p.second_form(0.0, 0.0, &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p.mean_curvature(0.3, 0.2).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sampled_patch_matches_analytic_derivatives() {
        let r = 2.0;
        let s = SampledHeight::from_fn(0.9, 0.01, |a, b| r - (r * r - a * a - b * b).sqrt()).unwrap();
        let sampled = SupportPatch::new(HeightFunction::Sampled(s), 1.0).unwrap();
        let exact = SupportPatch::sphere_cap(r, 1.0).unwrap();
        for (y1, y3) in [(0.123, -0.301), (0.5, 0.2), (-0.33, 0.0)] {
            let a = sampled.height_jet(y1, y3).unwrap();
            let b = exact.height_jet(y1, y3).unwrap();
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-7);
            for i in 0..2 {
                assert_abs_diff_eq!(a.grad[i], b.grad[i], epsilon = 1e-6);
                for j in 0..2 {
                    assert_abs_diff_eq!(a.hess[i][j], b.hess[i][j], epsilon = 1e-5);
                    for k in 0..2 {
                        assert_abs_diff_eq!(a.third[i][j][k], b.third[i][j][k], epsilon = 1e-3);
                    }
                }
            }
        }
        assert_eq!(sampled.kind(), PatchKind::Sampled);
    }
}
