//! Command-line driver. Exit codes: 0 success, 1 verification failure,
//! 2 validation error, 3 numerical abort.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::flow::run;
use crate::io::{self, Manifest, OutputDir, PersistError};
use crate::monitors::{monotonicity_report, singular_set_scan};
use crate::rescaling::{normalized_frame, parabolic_rescale, planarity_multiplicity};
use crate::scenario::{density_queries, ConfigError, Queries, Scenario};
use crate::support::Vec3;
use crate::verify;

pub const THREADS_ENV: &str = "FBMCF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fbmcf", version, about = "Mean curvature flow with a free boundary on a support surface")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the scenario and persist its trajectory.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Density and singular-set queries on a persisted run.
    Monitor { dir: PathBuf, query_file: PathBuf },
    /// Parabolic or normalized frame of a persisted run, with planarity.
    Rescale(RescaleArgs),
    /// Run the acceptance suite.
    Verify {
        /// Skip the criteria that need long grid runs.
        #[arg(long)]
        fast: bool,
    },
}

#[derive(Debug, Args)]
pub struct RescaleArgs {
    pub dir: PathBuf,
    /// Spacetime centre, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub point: Vec3,
    #[arg(long)]
    pub terminal_time: f64,
    #[arg(long, conflicts_with = "s", required_unless_present = "s")]
    pub lambda: Option<f64>,
    /// Normalized-flow time; the frame is taken at λ = e^{−s/2}, τ = −1.
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true, conflicts_with = "s")]
    pub tau: f64,
    /// Planarity region, in frame coordinates.
    #[arg(long, default_value_t = 0.5)]
    pub region_radius: f64,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub region_center: Option<Vec3>,
    /// Exclusion ball `x,y,z,r`; repeatable.
    #[arg(long = "exclude", value_parser = parse_ball, allow_hyphen_values = true)]
    pub exclude: Vec<(Vec3, f64)>,
    /// Subdirectory of `dir` that receives the frame.
    #[arg(long, default_value = "rescale")]
    pub out: PathBuf,
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(',').map(|c| c.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v = parse_numbers(s, 3)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn parse_ball(s: &str) -> Result<(Vec3, f64), String> {
    let v = parse_numbers(s, 4)?;
    Ok((Vec3::new(v[0], v[1], v[2]), v[3]))
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn validation(message: impl ToString) -> Self {
        Failure { code: 2, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::validation(e)
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure { code: if e.is_numerical() { 3 } else { 2 }, message: e.to_string() }
    }
}

impl From<PersistError> for Failure {
    fn from(e: PersistError) -> Self {
        match e {
            PersistError::Numerical(e) => e.into(),
            other => Failure::validation(other),
        }
    }
}

/// Sizes the global rayon pool from the environment.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Failure::validation(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(Failure::validation(format!("{THREADS_ENV} must be at least 1")));
    }
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn execute(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Run { scenario, output } => command_run(&scenario, output.as_deref()),
        Command::Monitor { dir, query_file } => command_monitor(&dir, &query_file),
        Command::Rescale(args) => command_rescale(&args),
        Command::Verify { fast } => Ok(command_verify(fast)),
    }
}

fn run_queries(out: &mut OutputDir, traj: &crate::flow::Trajectory, queries: &Queries) -> Result<(), Failure> {
    for (k, q) in density_queries(queries)?.iter().enumerate() {
        let report = monotonicity_report(traj, q)?;
        out.put(&format!("density_{k}.csv"), io::density_csv(&report).as_bytes())?;
        println!(
            "density {k}: limit {:.6}, max upward violation {:.3e}{}",
            report.limit_estimate,
            report.max_upward_violation,
            if report.flat { ", flat" } else { "" }
        );
    }
    if let Some(s) = &queries.scan {
        let scan = singular_set_scan(traj, s.epsilon, &s.radii)?;
        out.put("scan.csv", io::scan_csv(&scan).as_bytes())?;
        out.put("scan_clusters.csv", io::clusters_csv(&scan).as_bytes())?;
        println!("scan: {} cluster(s), bound {:.3}", scan.clusters.len(), scan.count_bound);
    }
    Ok(())
}

pub fn command_run(path: &Path, output: Option<&Path>) -> Result<u8, Failure> {
    let start = Instant::now();
    let text = std::fs::read_to_string(path).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    let mut scenario = Scenario::parse(&text)?;
    scenario.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = scenario.flow_config()?;
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| scenario.output_dir());
    let mut out = OutputDir::create(&dir)?;
    let initial = match scenario.initial_surface()? {
        Ok(s) => s,
        Err(e) => return abort(out, &text, &scenario, e, start),
    };
    let traj = match run(&initial, &config) {
        Ok(t) => t,
        Err(e) => return abort(out, &text, &scenario, e, start),
    };
    let reason = traj.stop_reason.to_string();
    let mut manifest = io::persist_run(&mut out, &text, &scenario, Some(&traj), &reason, 0.0)?;
    let queries = scenario.queries();
    let query_result = if traj.snapshots.len() > 1 && !queries.is_empty() { run_queries(&mut out, &traj, &queries) } else { Ok(()) };
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    let manifest = out.finish(manifest)?;
    println!(
        "{}: {} snapshot(s), t = {}, stop reason: {}",
        dir.display(),
        manifest.snapshots.len(),
        manifest.t_final,
        manifest.stop_reason
    );
    if let Some(ts) = manifest.singular_time {
        println!("singular time {ts}");
    }
    query_result?;
    Ok(if traj.stop_reason.reached_end() { 0 } else { 3 })
}

/// Persists the failure as the stop reason, then reports it.
fn abort(mut out: OutputDir, text: &str, scenario: &Scenario, e: crate::Error, start: Instant) -> Result<u8, Failure> {
    let m = io::persist_run(&mut out, text, scenario, None, &format!("error: {e}"), start.elapsed().as_secs_f64())?;
    out.finish(m)?;
    Err(e.into())
}

fn side_manifest(source: &str, wall: f64) -> Manifest {
    Manifest {
        scenario_hash: io::sha256_hex(source.as_bytes()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        stop_reason: "completed".into(),
        wall_time_s: wall,
        singular_time: None,
        t_final: 0.0,
        snapshots: Vec::new(),
        files: Default::default(),
    }
}

pub fn command_monitor(dir: &Path, query_file: &Path) -> Result<u8, Failure> {
    let start = Instant::now();
    let (_, _, traj) = io::load_trajectory(dir)?;
    let text = std::fs::read_to_string(query_file).map_err(|e| Failure::validation(format!("{}: {e}", query_file.display())))?;
    let queries = Queries::parse(&text)?;
    if queries.is_empty() {
        return Err(Failure::validation("query file has no [[density]] or [scan] entries"));
    }
    let mut out = OutputDir::create(&dir.join("monitor"))?;
    run_queries(&mut out, &traj, &queries)?;
    out.finish(side_manifest(&text, start.elapsed().as_secs_f64()))?;
    Ok(0)
}

pub fn command_rescale(args: &RescaleArgs) -> Result<u8, Failure> {
    let start = Instant::now();
    let (_, _, traj) = io::load_trajectory(&args.dir)?;
    let frame = match (args.lambda, args.s) {
        (Some(l), None) => parabolic_rescale(&traj, &args.point, args.terminal_time, l, args.tau)?,
        (None, Some(s)) => normalized_frame(&traj, &args.point, args.terminal_time, s)?,
        _ => return Err(Failure::validation("give exactly one of --lambda or --s")),
    };
    let center = args.region_center.unwrap_or_else(Vec3::zeros);
    let report = planarity_multiplicity(&frame, &center, args.region_radius, &args.exclude)?;
    let mut out = OutputDir::create(&args.dir.join(&args.out))?;
    let mut mesh = Vec::new();
    frame.samples.write_obj(&mut mesh).map_err(Failure::validation)?;
    out.put("frame.obj", &mesh)?;
    out.put("planarity.csv", io::planarity_csv(&report).as_bytes())?;
    let mut m = side_manifest(&format!("{args:?}"), start.elapsed().as_secs_f64());
    m.t_final = frame.source_time;
    out.finish(m)?;
    println!(
        "frame λ = {:.6e}, τ = {:.6} (snapshot offset {:.3e}); deviation {:.3e}, sheets {}",
        frame.lambda,
        frame.tau(),
        frame.time_offset,
        report.deviation,
        report.sheets
    );
    Ok(0)
}

pub fn command_verify(fast: bool) -> u8 {
    let results = verify::run_all(fast, |r| println!("{r}"));
    let failed = results.iter().filter(|r| r.status == verify::Status::Fail).count();
    let passed = results.iter().filter(|r| r.passed()).count();
    println!("{passed} passed, {failed} failed, {} skipped", results.len() - passed - failed);
    u8::from(failed > 0)
}
