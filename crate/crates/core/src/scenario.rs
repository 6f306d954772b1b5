//! Scenario files: TOML with a fixed key catalog, defaults filled in and
//! echoed back, and validation errors that name the offending key.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytic::ExactSolution;
use crate::flow::{FlowConfig, OuterBc, Scheme};
use crate::grid::{DomainShape, Grid};
use crate::monitors::{DensityQuery, Location};
use crate::samples::Topology;
use crate::support::{HeightFunction, SampledHeight, SupportPatch, Vec3};
use crate::surface::GraphSurface;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Validation { key: key.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKindSpec {
    Flat,
    AnalyticQuadric,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    #[serde(default = "PatchSpec::default_kind")]
    pub kind: PatchKindSpec,
    /// `flat`, `paraboloid:a` or `sphere_cap:R`.
    #[serde(default = "PatchSpec::default_phi")]
    pub phi: String,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_radius: Option<f64>,
    /// lattice used when kind = "sampled"
    #[serde(default = "PatchSpec::default_sample_spacing")]
    pub sample_spacing: f64,
    #[serde(default = "PatchSpec::default_sample_half_width")]
    pub sample_half_width: f64,
}

impl PatchSpec {
    fn default_kind() -> PatchKindSpec {
        PatchKindSpec::Flat
    }
    fn default_phi() -> String {
        "flat".into()
    }
    fn default_sample_spacing() -> f64 {
        0.02
    }
    fn default_sample_half_width() -> f64 {
        1.0
    }
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec {
            kind: PatchKindSpec::Flat,
            phi: "flat".into(),
            kappa: 0.0,
            chart_radius: None,
            sample_spacing: 0.02,
            sample_half_width: 1.0,
        }
    }
}

/// Parses the catalog name into a height function.
pub fn parse_phi(phi: &str) -> Result<HeightFunction, ConfigError> {
    let (name, arg) = match phi.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (phi.trim(), None),
    };
    let number = |a: Option<&str>| -> Result<f64, ConfigError> {
        let a = a.ok_or_else(|| invalid("patch.phi", format!("`{name}` needs a parameter, e.g. `{name}:1.0`")))?;
        a.parse::<f64>().map_err(|_| invalid("patch.phi", format!("`{a}` is not a number")))
    };
    match name {
        "flat" if arg.is_none() => Ok(HeightFunction::Flat),
        "paraboloid" => Ok(HeightFunction::Paraboloid { a: number(arg)? }),
        "sphere_cap" => Ok(HeightFunction::SphereCap { radius: number(arg)? }),
        _ => Err(invalid("patch.phi", format!("`{phi}` is not one of flat, paraboloid:a, sphere_cap:R"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_shape")]
    pub shape: DomainShape,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_dom: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl GridSpec {
    fn default_shape() -> DomainShape {
        DomainShape::HalfDisk
    }
}

fn commensurate(key: &str, extent: f64, h: f64) -> Result<(), ConfigError> {
    let n = extent / h;
    if !(extent > 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
        return Err(invalid(key, format!("{extent} must be a positive multiple of h = {h}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactKind {
    Plane,
    HalfPlane,
    Sphere,
    Hemisphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// u ≡ value
    Constant {
        #[serde(default)]
        value: f64,
    },
    /// u = value + slope y1
    Tilted {
        #[serde(default)]
        value: f64,
        slope: f64,
    },
    /// u = amplitude exp(−|y|²/width²)
    Bump { amplitude: f64, width: f64 },
    /// Graph of an exact solution at t = 0.
    Exact {
        solution: ExactKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default)]
        point: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normal: Option<[f64; 3]>,
    },
    /// Lines `i j u` for every active and rim node, relative to the scenario file.
    Heights { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default = "FlowSpec::default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub t_end: f64,
    #[serde(default = "FlowSpec::default_stride")]
    pub snapshot_stride: usize,
    /// `explicit` or `semi-implicit`
    #[serde(default = "FlowSpec::default_scheme")]
    pub scheme: String,
    /// `frozen`, `dirichlet_exact` or `periodic_strip`
    #[serde(default = "FlowSpec::default_outer_bc")]
    pub outer_bc: String,
    #[serde(default = "FlowSpec::default_blowup")]
    pub blowup_threshold: f64,
    #[serde(default = "FlowSpec::default_implicit_factor")]
    pub implicit_dt_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_radius: Option<f64>,
}

impl FlowSpec {
    fn default_cfl() -> f64 {
        0.2
    }
    fn default_stride() -> usize {
        10
    }
    fn default_scheme() -> String {
        "explicit".into()
    }
    fn default_outer_bc() -> String {
        "frozen".into()
    }
    fn default_blowup() -> f64 {
        0.5
    }
    fn default_implicit_factor() -> f64 {
        4.0
    }
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            cfl: 0.2,
            t_end: 0.0,
            snapshot_stride: 10,
            scheme: "explicit".into(),
            outer_bc: "frozen".into(),
            blowup_threshold: 0.5,
            implicit_dt_factor: 4.0,
            tracked_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub point: [f64; 3],
    pub terminal_time: f64,
    /// `interior` (needs `r`) or `boundary` (uses `kappa`, default 0)
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub sample_times: Vec<f64>,
}

impl DensitySpec {
    pub fn query(&self, key: &str) -> Result<DensityQuery, ConfigError> {
        let location = match self.location.as_str() {
            "interior" => {
                let r = self.r.ok_or_else(|| invalid(&format!("{key}.r"), "interior queries need a cutoff radius"))?;
                if !(r > 0.0) {
                    return Err(invalid(&format!("{key}.r"), "must be positive"));
                }
                Location::Interior { r }
            }
            "boundary" => {
                let kappa = self.kappa.unwrap_or(0.0);
                if !(kappa >= 0.0) {
                    return Err(invalid(&format!("{key}.kappa"), "must be non-negative"));
                }
                Location::Boundary { kappa }
            }
            other => return Err(invalid(&format!("{key}.location"), format!("`{other}` is not interior or boundary"))),
        };
        if self.sample_times.is_empty() || self.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(&format!("{key}.sample_times"), "must be a non-empty increasing list"));
        }
        if let Some(&t) = self.sample_times.iter().find(|&&t| t >= self.terminal_time) {
            return Err(invalid(&format!("{key}.sample_times"), format!("{t} is not before terminal_time")));
        }
        Ok(DensityQuery {
            point: Vec3::from(self.point),
            terminal_time: self.terminal_time,
            location,
            sample_times: self.sample_times.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub epsilon: f64,
    pub radii: Vec<f64>,
}

impl ScanSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("scan.epsilon", "must be positive"));
        }
        if self.radii.is_empty() || !(self.radii[0] > 0.0) || self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("scan.radii", "must be positive and increasing"));
        }
        Ok(())
    }
}

/// Density and scan requests, shared by scenarios and `monitor` query files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Queries {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
}

impl Queries {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let q: Queries = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (k, d) in self.density.iter().enumerate() {
            d.query(&format!("density[{k}]"))?;
        }
        if let Some(s) = &self.scan {
            s.validate()?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty() && self.scan.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "Scenario::default_output")]
    pub output: PathBuf,
    /// `disk` or `sphere`, declares χ for the energy identity
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
    #[serde(default)]
    pub patch: PatchSpec,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    /// Directory of the scenario file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    fn default_output() -> PathBuf {
        PathBuf::from("out")
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut s = Self::parse(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    /// The scenario with every default written out.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn output_dir(&self) -> PathBuf {
        if self.output.is_absolute() {
            self.output.clone()
        } else {
            self.base_dir.join(&self.output)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.patch()?;
        self.grid()?;
        self.flow_config()?;
        self.topology()?;
        self.queries().validate()?;
        if let InitialSpec::Bump { width, .. } = self.initial {
            if !(width > 0.0) {
                return Err(invalid("initial.width", "must be positive"));
            }
        }
        self.exact_solution()?;
        Ok(())
    }

    pub fn queries(&self) -> Queries {
        Queries { density: self.density.clone(), scan: self.scan.clone() }
    }

    pub fn topology(&self) -> Result<Option<Topology>, ConfigError> {
        match self.topology.as_deref() {
            None => Ok(None),
            Some("disk") => Ok(Some(Topology::Disk)),
            Some("sphere") => Ok(Some(Topology::Sphere)),
            Some(other) => Err(invalid("topology", format!("`{other}` is not disk or sphere"))),
        }
    }

    pub fn patch(&self) -> Result<SupportPatch, ConfigError> {
        let p = &self.patch;
        if !(p.kappa >= 0.0) || !p.kappa.is_finite() {
            return Err(invalid("patch.kappa", format!("must be finite and >= 0, got {}", p.kappa)));
        }
        let phi = parse_phi(&p.phi)?;
        let height = match (p.kind, phi) {
            (PatchKindSpec::Flat, HeightFunction::Flat) => HeightFunction::Flat,
            (PatchKindSpec::Flat, _) => return Err(invalid("patch.phi", "a flat patch has phi = \"flat\"")),
            (_, HeightFunction::Flat) => return Err(invalid("patch.phi", "curved kinds need a non-flat phi")),
            (PatchKindSpec::AnalyticQuadric, h) => h,
            (PatchKindSpec::Sampled, h) => {
                if !(p.sample_spacing > 0.0) {
                    return Err(invalid("patch.sample_spacing", "must be positive"));
                }
                let analytic = SupportPatch::new(h, p.kappa.max(1e-300)).map_err(|e| invalid("patch", e))?;
                let f = |y1: f64, y3: f64| analytic.height_jet(y1, y3).map(|j| j.value).unwrap_or(f64::NAN);
                let s = SampledHeight::from_fn(p.sample_half_width, p.sample_spacing, f).map_err(|e| invalid("patch.sample_spacing", e))?;
                if s_has_nan(&s) {
                    return Err(invalid("patch.sample_half_width", "lattice leaves the domain of phi"));
                }
                HeightFunction::Sampled(s)
            }
        };
        if p.kappa == 0.0 && !matches!(height, HeightFunction::Flat) {
            return Err(invalid("patch.kappa", "kappa = 0 is only admitted for a flat patch"));
        }
        let mut patch = SupportPatch::new(height, p.kappa).map_err(|e| invalid("patch", e))?;
        if let Some(r) = p.chart_radius {
            patch = patch.with_chart_radius(r).map_err(|e| invalid("patch.chart_radius", e))?;
        }
        Ok(patch)
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.grid;
        if !(g.h > 0.0) || !g.h.is_finite() {
            return Err(invalid("grid.h", "must be positive"));
        }
        match g.shape {
            DomainShape::HalfDisk | DomainShape::Disk => {
                let r = g.r_dom.ok_or_else(|| invalid("grid.r_dom", "required for disk shapes"))?;
                commensurate("grid.r_dom", r, g.h)?;
                if g.length.is_some() || g.width.is_some() {
                    return Err(invalid("grid.length", "only strips take length and width"));
                }
                let grid = if g.shape == DomainShape::HalfDisk { Grid::half_disk(r, g.h) } else { Grid::disk(r, g.h) };
                grid.map_err(|e| invalid("grid", e))
            }
            DomainShape::Strip => {
                let l = g.length.ok_or_else(|| invalid("grid.length", "required for strips"))?;
                let w = g.width.ok_or_else(|| invalid("grid.width", "required for strips"))?;
                commensurate("grid.length", l, g.h)?;
                commensurate("grid.width", w, g.h)?;
                if g.r_dom.is_some() {
                    return Err(invalid("grid.r_dom", "strips take length and width"));
                }
                Grid::strip(l, w, g.h).map_err(|e| invalid("grid", e))
            }
        }
    }

    pub fn exact_solution(&self) -> Result<Option<ExactSolution>, ConfigError> {
        let InitialSpec::Exact { solution, r0, center, point, normal } = &self.initial else { return Ok(None) };
        let radius = |r0: &Option<f64>| -> Result<f64, ConfigError> {
            match r0 {
                Some(r) if *r > 0.0 => Ok(*r),
                _ => Err(invalid("initial.r0", "spheres need a positive r0")),
            }
        };
        let unit = |n: &Option<[f64; 3]>| -> Result<Vec3, ConfigError> {
            let n = Vec3::from(n.ok_or_else(|| invalid("initial.normal", "planes need a normal"))?);
            if !(n.norm() > 0.0) {
                return Err(invalid("initial.normal", "must be non-zero"));
            }
            Ok(n.normalize())
        };
        Ok(Some(match solution {
            ExactKind::Plane => ExactSolution::Plane { point: Vec3::from(*point), normal: unit(normal)? },
            ExactKind::HalfPlane => ExactSolution::HalfPlane { point: Vec3::from(*point), normal: unit(normal)? },
            ExactKind::Sphere => ExactSolution::Sphere { center: Vec3::from(*center), r0: radius(r0)? },
            ExactKind::Hemisphere => ExactSolution::Hemisphere { center: Vec3::from(*center), r0: radius(r0)? },
        }))
    }

    /// Singular time of an exact initial datum, R0²/4 for spheres.
    pub fn singular_time(&self) -> Option<f64> {
        self.exact_solution().ok().flatten().and_then(|e| e.singular_time())
    }

    pub fn flow_config(&self) -> Result<FlowConfig, ConfigError> {
        let f = &self.flow;
        if !(f.cfl > 0.0 && f.cfl <= 0.25) {
            return Err(invalid("flow.cfl", format!("must lie in (0, 0.25], got {}", f.cfl)));
        }
        if !(f.t_end >= 0.0) || !f.t_end.is_finite() {
            return Err(invalid("flow.t_end", "must be finite and non-negative"));
        }
        if f.snapshot_stride == 0 {
            return Err(invalid("flow.snapshot_stride", "must be at least 1"));
        }
        if !(f.blowup_threshold > 0.0) {
            return Err(invalid("flow.blowup_threshold", "must be positive"));
        }
        if !(f.implicit_dt_factor >= 1.0) {
            return Err(invalid("flow.implicit_dt_factor", "must be at least 1"));
        }
        let scheme = match f.scheme.as_str() {
            "explicit" | "explicit-euler" => Scheme::ExplicitEuler,
            "semi-implicit" => Scheme::SemiImplicit,
            other => return Err(invalid("flow.scheme", format!("`{other}` is not explicit or semi-implicit"))),
        };
        let strip = self.grid.shape == DomainShape::Strip;
        let outer_bc = match f.outer_bc.as_str() {
            "frozen" if !strip => OuterBc::Frozen,
            "periodic_strip" if strip => OuterBc::PeriodicStrip,
            "dirichlet_exact" if !strip => {
                let e = self.exact_solution()?.ok_or_else(|| invalid("flow.outer_bc", "dirichlet_exact needs an exact initial surface"))?;
                OuterBc::DirichletExact(e)
            }
            "frozen" | "dirichlet_exact" | "periodic_strip" => {
                return Err(invalid("flow.outer_bc", "periodic_strip goes with strip grids and only with them"))
            }
            other => return Err(invalid("flow.outer_bc", format!("`{other}` is not frozen, dirichlet_exact or periodic_strip"))),
        };
        if let Some(r) = f.tracked_radius {
            let ok = self.grid.shape == DomainShape::HalfDisk && r > 0.0 && self.grid.r_dom.is_some_and(|rd| r < rd);
            if !ok {
                return Err(invalid("flow.tracked_radius", "needs a half-disk grid and 0 < radius < r_dom"));
            }
        }
        Ok(FlowConfig {
            cfl: f.cfl,
            t_end: f.t_end,
            snapshot_stride: f.snapshot_stride,
            outer_bc,
            scheme,
            blowup_threshold: f.blowup_threshold,
            implicit_dt_factor: f.implicit_dt_factor,
            tracked_radius: f.tracked_radius,
        })
    }

    /// Builds the initial graph; numerical failures of exact data surface as
    /// crate errors, configuration problems as validation errors.
    pub fn initial_surface(&self) -> Result<std::result::Result<GraphSurface, crate::Error>, ConfigError> {
        let patch = Arc::new(self.patch()?);
        let grid = Arc::new(self.grid()?);
        let topology = self.topology()?;
        let surface = match &self.initial {
            InitialSpec::Constant { value } => GraphSurface::from_fn(grid, patch, 0.0, |_, _| *value),
            InitialSpec::Tilted { value, slope } => GraphSurface::from_fn(grid, patch, 0.0, |y1, _| value + slope * y1),
            InitialSpec::Bump { amplitude, width } => {
                GraphSurface::from_fn(grid, patch, 0.0, |y1, y2| amplitude * (-(y1 * y1 + y2 * y2) / (width * width)).exp())
            }
            InitialSpec::Exact { .. } => {
                if !patch.is_flat() {
                    return Err(invalid("initial.solution", "exact initial surfaces need a flat patch"));
                }
                let e = self.exact_solution()?.expect("exact initial");
                e.graph(grid, patch, 0.0)
            }
            InitialSpec::Heights { file } => {
                let path = if file.is_absolute() { file.clone() } else { self.base_dir.join(file) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
                let (u, _) = crate::io::parse_heights(&text, &grid).map_err(|e| invalid("initial.file", e))?;
                GraphSurface::new(grid, patch, u, 0.0)
            }
        };
        Ok(surface.map(|s| match topology {
            Some(t) => s.with_topology(Some(t)),
            None => s,
        }))
    }
}

fn s_has_nan(s: &SampledHeight) -> bool {
    s.values().iter().any(|v| !v.is_finite())
}

/// One density query per `[[density]]` entry, keyed for error messages.
pub fn density_queries(q: &Queries) -> Result<Vec<DensityQuery>, ConfigError> {
    q.density.iter().enumerate().map(|(k, d)| d.query(&format!("density[{k}]"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
h = 0.0625
r_dom = 0.5

[initial]
kind = "constant"
"#;

    #[test]
    fn minimal_scenario_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.flow.cfl, 0.2);
        assert_eq!(s.flow_config().unwrap().scheme, Scheme::ExplicitEuler);
        assert!(s.patch().unwrap().is_flat());
        assert!(s.resolved_toml().contains("cfl = 0.2"));
    }

    #[test]
    fn negative_kappa_names_key() {
        let text = format!("{MINIMAL}\n[patch]\nkappa = -1.0\n");
        match Scenario::parse(&text) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "patch.kappa"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}\n[flow]\ncfl = 0.1\nspeed = 3\n");
        match Scenario::parse(&text) {
            Err(ConfigError::Parse(m)) => assert!(m.contains("speed"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("kind = \"constant\"", "kind = \"constant\"\nheight = 1");
        assert!(matches!(Scenario::parse(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn hemisphere_singular_time() {
        let text = r#"
[grid]
h = 0.03125
r_dom = 0.5
[initial]
kind = "exact"
solution = "hemisphere"
r0 = 1.2
[flow]
t_end = 0.1
outer_bc = "dirichlet_exact"
"#;
        let s = Scenario::parse(text).unwrap();
        assert!((s.singular_time().unwrap() - 0.36).abs() < 1e-15);
        assert!(matches!(s.flow_config().unwrap().outer_bc, OuterBc::DirichletExact(_)));
        assert!(s.initial_surface().unwrap().is_ok());
    }

    #[test]
    fn incommensurate_grid() {
        let text = MINIMAL.replace("r_dom = 0.5", "r_dom = 0.51");
        assert!(matches!(Scenario::parse(&text), Err(ConfigError::Validation { key, .. }) if key == "grid.r_dom"));
    }

    #[test]
    fn phi_catalog() {
        assert_eq!(parse_phi("paraboloid:0.5").unwrap(), HeightFunction::Paraboloid { a: 0.5 });
        assert_eq!(parse_phi("sphere_cap:4").unwrap(), HeightFunction::SphereCap { radius: 4.0 });
        assert!(parse_phi("cylinder:1").is_err());
        assert!(parse_phi("paraboloid").is_err());
    }

    #[test]
    fn sampled_patch_builds() {
        let text = format!("{MINIMAL}\n[patch]\nkind = \"sampled\"\nphi = \"paraboloid:0.5\"\nkappa = 1.0\n");
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(s.patch().unwrap().kind(), crate::support::PatchKind::Sampled);
    }
}
