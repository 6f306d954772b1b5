use std::path::Path;
use std::process::{Command, Output};

fn fbmcf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbmcf")).args(args).current_dir(dir).env_remove("FBMCF_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const BUMP: &str = r#"
output = "out"

[grid]
h = 0.0625
r_dom = 0.5

[initial]
kind = "bump"
amplitude = 0.05
width = 0.25

[flow]
t_end = 0.003
snapshot_stride = 4
"#;

const HEMISPHERE: &str = r#"
output = "hemi"
topology = "disk"

[grid]
h = 0.03125
r_dom = 0.375

[initial]
kind = "exact"
solution = "hemisphere"
r0 = 1.0

[flow]
t_end = 0.02
snapshot_stride = 5
outer_bc = "dirichlet_exact"

[[density]]
point = [0.0, 0.15, 0.965]
terminal_time = 0.02
location = "interior"
r = 0.03
sample_times = [0.0192, 0.0194, 0.0196, 0.0198]
"#;

#[test]
fn run_writes_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bump.toml"), BUMP).unwrap();
    let o = fbmcf(&["run", "bump.toml"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    let csv = std::fs::read_to_string(out.join("monitors.csv")).unwrap();
    assert!(csv.starts_with("t,area,perimeter,energy,max_H,max_A\n"));
    let obj = std::fs::read_to_string(out.join("snap_0.obj")).unwrap();
    assert!(obj.lines().next().unwrap().starts_with("v "));
    let faces: Vec<&str> = obj.lines().filter(|l| l.starts_with("f ")).collect();
    assert!(!faces.is_empty());
    let min_index = faces.iter().flat_map(|l| l[2..].split(' ').map(|x| x.parse::<usize>().unwrap())).min().unwrap();
    assert_eq!(min_index, 1);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stop_reason"], "completed");
    for key in ["scenario_hash", "code_version", "wall_time_s", "files"] {
        assert!(manifest.get(key).is_some(), "{key}");
    }
    let files = manifest["files"].as_object().unwrap();
    assert!(files.contains_key("monitors.csv") && files.contains_key("scenario.toml"));
    let echoed = std::fs::read_to_string(out.join("scenario.toml")).unwrap();
    assert!(echoed.contains("cfl = 0.2") && echoed.contains("scheme = \"explicit\""));
}

#[test]
fn identical_scenarios_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bump.toml"), BUMP).unwrap();
    assert_eq!(code(&fbmcf(&["run", "bump.toml", "--output", "a"], tmp.path())), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_fbmcf"))
        .args(["run", "bump.toml", "--output", "b"])
        .current_dir(tmp.path())
        .env("FBMCF_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["monitors.csv", "snap_0.obj", "snap_4.heights"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn past_singularity_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let text = HEMISPHERE.replace("t_end = 0.02", "t_end = 0.3").replace("[[density]]", "[[unused]]");
    let text = &text[..text.find("[[unused]]").unwrap()];
    std::fs::write(tmp.path().join("s.toml"), text).unwrap();
    let o = fbmcf(&["run", "s.toml"], tmp.path());
    assert_eq!(code(&o), 3);
    let manifest = std::fs::read_to_string(tmp.path().join("hemi/manifest.json")).unwrap();
    assert!(manifest.contains("singular time"), "{manifest}");
}

#[test]
fn validation_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("k.toml"), format!("{BUMP}\n[patch]\nkappa = -1.0\n")).unwrap();
    let o = fbmcf(&["run", "k.toml"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("patch.kappa"));
    std::fs::write(tmp.path().join("u.toml"), BUMP.replace("t_end", "t_stop")).unwrap();
    assert_eq!(code(&fbmcf(&["run", "u.toml"], tmp.path())), 2);
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    std::fs::write(tmp.path().join("q.toml"), "").unwrap();
    assert_eq!(code(&fbmcf(&["monitor", "empty", "q.toml"], tmp.path())), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_fbmcf")).args(["verify", "--fast"]).env("FBMCF_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn monitor_and_rescale_on_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("h.toml"), HEMISPHERE).unwrap();
    let o = fbmcf(&["run", "h.toml"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("singular time 0.25"));
    let d = std::fs::read_to_string(tmp.path().join("hemi/density_0.csv")).unwrap();
    assert!(d.starts_with("t,value,violation\n") && d.lines().count() == 5);

    let q = "[scan]\nepsilon = 1.0\nradii = [0.05, 0.1]\n";
    std::fs::write(tmp.path().join("q.toml"), q).unwrap();
    let o = fbmcf(&["monitor", "hemi", "q.toml"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let scan = std::fs::read_to_string(tmp.path().join("hemi/monitor/scan.csv")).unwrap();
    assert!(scan.starts_with("px,py,pz,r,mass,flagged\n"));
    assert!(tmp.path().join("hemi/monitor/manifest.json").is_file());

    let o = fbmcf(
        &[
            "rescale",
            "hemi",
            "--point",
            "0,0,0",
            "--terminal-time",
            "0.25",
            "--lambda",
            "0.48",
            "--tau",
            "-1",
            "--region-center",
            "0,0.2,1.99",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = std::fs::read_to_string(tmp.path().join("hemi/rescale/planarity.csv")).unwrap();
    assert!(p.starts_with("deviation,sheets,fit_nx,fit_ny,fit_nz\n"));
    assert!(std::fs::read_to_string(tmp.path().join("hemi/rescale/frame.obj")).unwrap().starts_with("v "));

    let o = fbmcf(
        &[
            "rescale",
            "hemi",
            "--point",
            "0,0,0",
            "--terminal-time",
            "0.25",
            "--s",
            "1.42",
            "--out",
            "nmcf",
            "--region-center",
            "0,0.2,1.99",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = fbmcf(&["rescale", "hemi", "--point", "0,0,0", "--terminal-time", "0.25", "--lambda", "0.01"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn fast_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fbmcf(&["verify", "--fast"], tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 12);
}
