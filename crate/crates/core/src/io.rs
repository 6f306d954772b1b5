//! Persistence: CSV series, mesh dumps, height files for exact reloads and
//! the run manifest with per-file checksums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::flow::{MonitorSample, Snapshot, SnapshotSurface, StopReason, TrackedSample, Trajectory};
use crate::grid::{Grid, NodeKind};
use crate::monitors::{DensityReport, SingularScan};
use crate::rescaling::PlanarityReport;
use crate::scenario::{ConfigError, Scenario};
use crate::surface::GraphSurface;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] crate::Error),
}

fn io_err(path: &Path, e: std::io::Error) -> PersistError {
    PersistError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub const MONITOR_HEADER: &str = "t,area,perimeter,energy,max_H,max_A";

pub fn monitors_csv(samples: &[MonitorSample]) -> String {
    let mut s = String::from(MONITOR_HEADER);
    s.push('\n');
    for m in samples {
        let _ = writeln!(s, "{},{},{},{},{},{}", m.t, m.area, m.perimeter, m.energy, m.max_h, m.max_a);
    }
    s
}

fn parse_row(line: &str, n: usize, lineno: usize) -> Result<Vec<f64>, PersistError> {
    let v: Vec<f64> = line
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| PersistError::Format(format!("line {lineno}: {e}")))?;
    if v.len() != n {
        return Err(PersistError::Format(format!("line {lineno}: expected {n} columns, found {}", v.len())));
    }
    Ok(v)
}

pub fn parse_monitors_csv(text: &str) -> Result<Vec<MonitorSample>, PersistError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MONITOR_HEADER) {
        return Err(PersistError::Format(format!("monitor CSV must start with `{MONITOR_HEADER}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let v = parse_row(l, 6, k + 2)?;
            Ok(MonitorSample { t: v[0], area: v[1], perimeter: v[2], energy: v[3], max_h: v[4], max_a: v[5] })
        })
        .collect()
}

pub fn tracked_csv(samples: &[TrackedSample]) -> String {
    let mut s = String::from("t,area,willmore\n");
    for m in samples {
        let _ = writeln!(s, "{},{},{}", m.t, m.area, m.willmore);
    }
    s
}

pub fn density_csv(report: &DensityReport) -> String {
    let mut s = String::from("t,value,violation\n");
    for k in 0..report.times.len() {
        let _ = writeln!(s, "{},{},{}", report.times[k], report.values[k], report.violations[k]);
    }
    s
}

pub fn scan_csv(scan: &SingularScan) -> String {
    let mut s = String::from("px,py,pz,r,mass,flagged\n");
    for c in &scan.candidates {
        for (r, m) in scan.radii.iter().zip(&c.masses) {
            let _ = writeln!(s, "{},{},{},{},{},{}", c.point[0], c.point[1], c.point[2], r, m, u8::from(c.flagged));
        }
    }
    s
}

pub fn clusters_csv(scan: &SingularScan) -> String {
    let mut s = String::from("cx,cy,cz,members\n");
    for c in &scan.clusters {
        let _ = writeln!(s, "{},{},{},{}", c.centroid[0], c.centroid[1], c.centroid[2], c.members);
    }
    s
}

pub fn planarity_csv(report: &PlanarityReport) -> String {
    let n = report.fit_normal;
    format!("deviation,sheets,fit_nx,fit_ny,fit_nz\n{},{},{},{},{}\n", report.deviation, report.sheets, n[0], n[1], n[2])
}

/// Header `# t <t> step <step>`, then `i j u` per active and rim node.
pub fn heights_text(surface: &GraphSurface, step: usize) -> String {
    let mut s = format!("# t {} step {}\n", surface.t, step);
    for k in 0..surface.grid.len() {
        if surface.grid.kind(k) == NodeKind::Outside {
            continue;
        }
        let (i, j) = surface.grid.ij(k);
        let _ = writeln!(s, "{i} {j} {}", surface.u[k]);
    }
    s
}

/// Heights per storage node and the optional `(t, step)` header.
pub type ParsedHeights = (Vec<f64>, Option<(f64, usize)>);

/// Inverse of [`heights_text`]; the header is optional. Every active and
/// rim node of `grid` must be listed.
pub fn parse_heights(text: &str, grid: &Grid) -> Result<ParsedHeights, String> {
    let mut u = vec![f64::NAN; grid.len()];
    let mut header = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if let ["t", t, "step", k] = parts.as_slice() {
                let t = t.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1))?;
                let k = k.parse::<usize>().map_err(|e| format!("line {}: {e}", n + 1))?;
                header = Some((t, k));
            }
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [i, j, v] = parts.as_slice() else {
            return Err(format!("line {}: expected `i j u`", n + 1));
        };
        let i = i.parse::<i64>().map_err(|e| format!("line {}: {e}", n + 1))?;
        let j = j.parse::<i64>().map_err(|e| format!("line {}: {e}", n + 1))?;
        let v = v.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1))?;
        let k = grid.raw_index(i, j).filter(|&k| grid.kind(k) != NodeKind::Outside);
        let k = k.ok_or_else(|| format!("line {}: ({i}, {j}) is not a grid node", n + 1))?;
        u[k] = v;
    }
    if let Some(k) = (0..grid.len()).find(|&k| grid.kind(k) != NodeKind::Outside && u[k].is_nan()) {
        let (i, j) = grid.ij(k);
        return Err(format!("node ({i}, {j}) has no value"));
    }
    Ok((u, header))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario_hash: String,
    pub code_version: String,
    pub stop_reason: String,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_time: Option<f64>,
    #[serde(default)]
    pub t_final: f64,
    #[serde(default)]
    pub snapshots: Vec<usize>,
    /// file name -> sha256
    pub files: BTreeMap<String, String>,
}

/// Collects emitted files and their checksums; writes are serialized.
pub struct OutputDir {
    pub path: PathBuf,
    pub files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self, PersistError> {
        std::fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
        Ok(OutputDir { path: path.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), PersistError> {
        let p = self.path.join(name);
        std::fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes `manifest.json` listing everything put so far.
    pub fn finish(self, mut manifest: Manifest) -> Result<Manifest, PersistError> {
        manifest.files = self.files;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let p = self.path.join("manifest.json");
        std::fs::write(&p, text + "\n").map_err(|e| io_err(&p, e))?;
        Ok(manifest)
    }
}

pub fn snapshot_obj(snapshot: &Snapshot, spacing: f64) -> Result<Vec<u8>, PersistError> {
    let samples = snapshot.samples(spacing)?;
    let mut buf = Vec::new();
    samples.write_obj(&mut buf).map_err(|e| PersistError::Format(e.to_string()))?;
    Ok(buf)
}

/// Writes the scenario echo, monitor series, snapshots and, last, the manifest.
pub fn persist_run(
    out: &mut OutputDir,
    scenario_text: &str,
    scenario: &Scenario,
    traj: Option<&Trajectory>,
    stop_reason: &str,
    wall_time_s: f64,
) -> Result<Manifest, PersistError> {
    out.put("scenario.toml", scenario.resolved_toml().as_bytes())?;
    let mut manifest = Manifest {
        scenario_hash: sha256_hex(scenario_text.as_bytes()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        stop_reason: stop_reason.to_string(),
        wall_time_s,
        singular_time: scenario.singular_time(),
        t_final: 0.0,
        snapshots: Vec::new(),
        files: BTreeMap::new(),
    };
    if let Some(traj) = traj {
        out.put("monitors.csv", monitors_csv(&traj.monitors).as_bytes())?;
        if !traj.tracked.is_empty() {
            out.put("tracked.csv", tracked_csv(&traj.tracked).as_bytes())?;
        }
        for snap in &traj.snapshots {
            out.put(&format!("snap_{}.obj", snap.step), &snapshot_obj(snap, traj.spacing)?)?;
            if let SnapshotSurface::Graph(g) = &snap.surface {
                out.put(&format!("snap_{}.heights", snap.step), heights_text(g, snap.step).as_bytes())?;
            }
            manifest.snapshots.push(snap.step);
        }
        manifest.t_final = traj.snapshots.last().map_or(0.0, |s| s.t);
    }
    Ok(manifest)
}

fn read(path: &Path) -> Result<String, PersistError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn stop_reason_from(text: &str) -> StopReason {
    if text == "completed" {
        return StopReason::Completed;
    }
    if let Some(v) = text.strip_prefix("blowup (max h|A| = ").and_then(|r| r.strip_suffix(')')) {
        if let Ok(max_ha) = v.parse() {
            return StopReason::Blowup { max_ha };
        }
    }
    StopReason::Error(crate::Error::Recorded(text.trim_start_matches("error: ").to_string()))
}

/// Reloads a run directory, checking every listed checksum.
pub fn load_trajectory(dir: &Path) -> Result<(Scenario, Manifest, Trajectory), PersistError> {
    let mpath = dir.join("manifest.json");
    if !mpath.is_file() {
        return Err(PersistError::Format(format!("{} is not a run directory (no manifest.json)", dir.display())));
    }
    let manifest: Manifest = serde_json::from_str(&read(&mpath)?).map_err(|e| PersistError::Format(format!("manifest.json: {e}")))?;
    for (name, sum) in &manifest.files {
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(|e| io_err(&p, e))?;
        if &sha256_hex(&bytes) != sum {
            return Err(PersistError::Format(format!("{name}: checksum mismatch")));
        }
    }
    let mut scenario = Scenario::parse(&read(&dir.join("scenario.toml"))?)?;
    scenario.base_dir = dir.to_path_buf();
    let grid = Arc::new(scenario.grid()?);
    let patch = Arc::new(scenario.patch()?);
    let topology = scenario.topology()?.or(match scenario.initial {
        crate::scenario::InitialSpec::Exact { solution: crate::scenario::ExactKind::Hemisphere, .. } => Some(crate::Topology::Disk),
        _ => None,
    });
    let monitors = match manifest.files.contains_key("monitors.csv") {
        true => parse_monitors_csv(&read(&dir.join("monitors.csv"))?)?,
        false => Vec::new(),
    };
    let mut snapshots = Vec::new();
    let mut neumann_max = 0.0f64;
    for &step in &manifest.snapshots {
        let name = format!("snap_{step}.heights");
        let (u, header) = parse_heights(&read(&dir.join(&name))?, &grid).map_err(|e| PersistError::Format(format!("{name}: {e}")))?;
        let t = header.map(|h| h.0).ok_or_else(|| PersistError::Format(format!("{name}: missing header")))?;
        let g = GraphSurface::new(grid.clone(), patch.clone(), u, t)?.with_topology(topology);
        neumann_max = neumann_max.max(g.neumann_residual());
        snapshots.push(Snapshot { step, t, surface: SnapshotSurface::Graph(g) });
    }
    let traj = Trajectory {
        snapshots,
        monitors,
        tracked: Vec::new(),
        stop_reason: stop_reason_from(&manifest.stop_reason),
        neumann_max,
        spacing: grid.h(),
        exact: None,
    };
    Ok((scenario, manifest, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run, FlowConfig};
    use crate::samples::read_obj_vertices;
    use crate::support::SupportPatch;

    fn small_run() -> (Scenario, Trajectory) {
        let text = r#"
[grid]
h = 0.0625
r_dom = 0.5
[initial]
kind = "bump"
amplitude = 0.05
width = 0.2
[flow]
t_end = 0.002
snapshot_stride = 5
"#;
        let s = Scenario::parse(text).unwrap();
        let init = s.initial_surface().unwrap().unwrap();
        let traj = run(&init, &s.flow_config().unwrap()).unwrap();
        (s, traj)
    }

    #[test]
    fn run_round_trip_is_exact() {
        let (s, traj) = small_run();
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let m = persist_run(&mut out, "x", &s, Some(&traj), "completed", 0.0).unwrap();
        out.finish(m).unwrap();
        let (_, manifest, back) = load_trajectory(dir.path()).unwrap();
        assert!(manifest.files.contains_key("monitors.csv") && manifest.files.contains_key("snap_0.obj"));
        assert_eq!(back.snapshots.len(), traj.snapshots.len());
        for (a, b) in traj.snapshots.iter().zip(&back.snapshots) {
            assert_eq!(a.t, b.t);
            let (sa, sb) = (a.samples(0.0).unwrap(), b.samples(0.0).unwrap());
            assert_eq!(sa.points, sb.points);
            let obj = std::fs::read_to_string(dir.path().join(format!("snap_{}.obj", a.step))).unwrap();
            let verts = read_obj_vertices(&obj).unwrap();
            assert!(verts.iter().zip(&sa.points).all(|(v, p)| *v == p.point.position));
        }
        for (a, b) in traj.monitors.iter().zip(&back.monitors) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.energy, b.energy);
        }
    }

    #[test]
    fn tampered_file_is_detected() {
        let (s, traj) = small_run();
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let m = persist_run(&mut out, "x", &s, Some(&traj), "completed", 0.0).unwrap();
        out.finish(m).unwrap();
        std::fs::write(dir.path().join("monitors.csv"), "t,area,perimeter,energy,max_H,max_A\n").unwrap();
        assert!(matches!(load_trajectory(dir.path()), Err(PersistError::Format(_))));
    }

    #[test]
    fn heights_reject_missing_nodes() {
        let grid = Arc::new(Grid::half_disk(0.25, 0.0625).unwrap());
        let g = GraphSurface::from_fn(grid.clone(), Arc::new(SupportPatch::flat()), 0.5, |y1, _| y1).unwrap();
        let text = heights_text(&g, 3);
        let (u, h) = parse_heights(&text, &grid).unwrap();
        assert_eq!(h, Some((0.5, 3)));
        assert!(u.iter().zip(&g.u).all(|(a, b)| a == b || (a.is_nan() && b.is_nan())));
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(parse_heights(&cut, &grid).is_err());
    }

    #[test]
    fn csv_headers() {
        assert!(monitors_csv(&[]).starts_with("t,area,perimeter,energy,max_H,max_A\n"));
        let _ = FlowConfig::default();
    }
}
