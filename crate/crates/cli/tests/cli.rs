use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENE: &str = r#"
[domain]
dx = 0.0625
dims = [16, 16, 16]

[mesh]
bounds = { min = [0.3, 0.2, 0.3], max = [0.7, 0.6, 0.7] }
dx = 0.1

[time]
steps = 4
frame_substeps = 2

[[solids]]
shape = "sphere"
center = [0.5, 0.4, 0.5]
radius = 0.08

[[water.grid]]
shape = "half_space"
point = [0.0, 0.3, 0.0]
normal = [0.0, 1.0, 0.0]

[[water.vof]]
region = "sphere"
center = [0.5, 0.53, 0.5]
radius = 0.06

[output]
record_timings = false
"#;

fn tetvof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tetvof"))
        .args(args)
        .env("TETVOF_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bake_verify_sim_report_surface() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let bake = dir.path().join("scene.bake");
    let out = dir.path().join("run");

    let o = tetvof(&["bake", "--scene", s(&scene), "--out", s(&bake)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = tetvof(&["bake", "verify", s(&bake)]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("ok:"));

    let o = tetvof(&["sim", "--scene", s(&scene), "--bake", s(&bake), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("max cons. error"));
    let csv = out.join("diagnostics.csv");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("frame,vof_vol,particle_vol,grid_vol,ledger_in,ledger_out,cons_err_rel"));
    assert_eq!(text.lines().count(), 5);

    let summary = dir.path().join("summary.csv");
    let o = tetvof(&["report", "--csv", s(&csv), "--scene", s(&scene), "--out", s(&summary)]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(fs::read_to_string(&summary)
        .unwrap()
        .starts_with("rows,mean_cons_err,max_cons_err"));

    let o = tetvof(&["surface", "--dir", s(&out), "--frames", "0..2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in 0..=2 {
        let obj = fs::read_to_string(out.join(format!("surface_{f:05}.obj"))).unwrap();
        assert!(obj.lines().any(|l| l.starts_with("f ")));
    }
}

#[test]
fn same_seed_same_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = tetvof(&[
            "sim",
            "--scene",
            s(&scene),
            "--out",
            s(&out),
            "--seed",
            "9",
            "--no-dumps",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(!out.join("water_00000.bin").exists());
        fs::read(out.join("diagnostics.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn report_fails_above_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(
        &csv,
        "frame,vof_vol,particle_vol,grid_vol,ledger_in,ledger_out,cons_err_rel,mom_x,mom_y,mom_z,ms_advect,ms_conserve,ms_project\n\
         1,1,0,0,0,0,0.00001,0,0,0,0,0,0\n\
         2,1,0,0,0,0,0.00002,0,0,0,0,0,0\n",
    )
    .unwrap();
    let o = tetvof(&["report", "--csv", s(&csv), "--max-error", "1.5e-5"]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("FAIL"));
    let o = tetvof(&["report", "--csv", s(&csv), "--max-error", "2e-5"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("mean cons. error:   0.001500%"));

    fs::write(&csv, "frame,oops\n1,2\n").unwrap();
    let o = tetvof(&["report", "--csv", s(&csv)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("malformed"));
}

#[test]
fn bad_scene_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.toml");
    fs::write(&scene, format!("{SCENE}\n[coupling]\nbeta = 1.5\n")).unwrap();
    let o = tetvof(&["sim", "--scene", s(&scene), "--out", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("coupling.beta"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn grid_only_baseline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let out = dir.path().join("g");
    let o = tetvof(&[
        "sim",
        "--scene",
        s(&scene),
        "--out",
        s(&out),
        "--compare-levelset-only",
        "--steps",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("grid volume:"));
    assert_eq!(
        fs::read_to_string(out.join("diagnostics.csv")).unwrap().lines().count(),
        3
    );
}

#[test]
fn missing_dumps_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = tetvof(&["surface", "--dir", s(dir.path()), "--frames", "3..3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("water_00003.bin"), "{}", stderr(&o));
}
