use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn sclab(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sclab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// A bundled config copied into `dir` with its model path made absolute and
/// `edit` applied to the text.
fn variant(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let src = std::fs::read_to_string(configs().join(name)).unwrap();
    let models = configs().join("models");
    let src = src.replace("file = \"models/", &format!("file = \"{}/", models.display()));
    let p = dir.join(name);
    std::fs::write(&p, edit(src)).unwrap();
    p
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (head, rows)
}

fn column(p: &Path, name: &str) -> Vec<f64> {
    let (head, rows) = read_csv(p);
    let i = head.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn forward_writes_snapshots_and_a_flat_energy_history() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sclab(&["forward"], &configs().join("homogeneous_1d.toml"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let e = column(&tmp.path().join("energy.csv"), "energy");
    assert_eq!(e.len(), 2001);
    let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0];
    assert!(drift < 1e-9, "{drift}");
    let snaps = read_csv(&tmp.path().join("snapshots.csv")).1;
    assert_eq!(snaps.len(), 3);
    for s in &snaps {
        let len = std::fs::metadata(tmp.path().join(&s[3])).unwrap().len();
        assert_eq!(len, 2 * 3751 * 8);
    }
}

#[test]
fn cfl_violation_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "homogeneous_1d.toml", |s| {
        s.replace("dt = 0.0005", "dt = 0.005")
    });
    let o = sclab(&["forward"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CFL"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").join("energy.csv").exists());
}

#[test]
fn missing_model_file_echoes_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "homogeneous_1d.toml", |s| {
        s.replace("homogeneous_1d.toml\"", "nowhere.toml\"")
    });
    let o = sclab(&["forward"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("FileNotFound") && err.contains("nowhere.toml"), "{err}");
}

#[test]
fn malformed_config_lists_every_unknown_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "homogeneous_1d.toml", |s| {
        s.replace("[forward]", "colour = 3\n\n[forward]\nspeed_of_light = 1.0")
    });
    let o = sclab(&["forward"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("chain.colour") && err.contains("forward.speed_of_light"), "{err}");
}

#[test]
fn control_norms_do_not_increase() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sclab(&["control"], &configs().join("two_layer_1d.toml"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let n = column(&tmp.path().join("norms.csv"), "norm");
    assert_eq!(n.len(), 9);
    for w in n.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-3), "{n:?}");
    }
}

#[test]
fn control_with_k_zero_has_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "two_layer_1d.toml", |s| {
        s.replace("t = 0.4\nk = 8", "t = 0.4\nk = 0")
    });
    let o = sclab(&["control"], &cfg, &tmp.path().join("out"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&tmp.path().join("out/norms.csv")).1.len(), 1);
}

#[test]
fn outside_mode_refuses_data_inside_omega() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "two_layer_1d.toml", |s| {
        s.replace("center = [0.15, 0.0], radius = 0.1", "center = [1.0, 0.0], radius = 0.1")
    });
    let o = sclab(&["control", "--mode", "outside"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SupportViolation"), "{}", stderr(&o));
}

#[test]
fn homogeneous_chart_has_unit_speed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sclab(
        &["reconstruct-speed", "--workers", "2"],
        &configs().join("homogeneous_1d.toml"),
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let c = column(&tmp.path().join("chart.csv"), "c_est");
    assert_eq!(c.len(), 16);
    for v in &c {
        assert!((v - 1.0).abs() < 0.05, "{c:?}");
    }
}

#[test]
fn two_layer_scan_finds_one_interface_and_homogeneous_none() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let o = sclab(&["locate-interfaces"], &configs().join("two_layer_1d.toml"), &a);
    assert!(o.status.success(), "{}", stderr(&o));
    let depth = column(&a.join("interfaces.csv"), "depth");
    assert_eq!(depth.len(), 1);
    assert!((depth[0] - 0.5).abs() <= 0.025, "{depth:?}");
    let tr = column(&a.join("interfaces.csv"), "transmission")[0];
    assert!((tr - 8.0 / 9.0).abs() < 0.05, "{tr}");
    let b = tmp.path().join("b");
    let o = sclab(&["locate-interfaces"], &configs().join("homogeneous_1d.toml"), &b);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(column(&b.join("interfaces.csv"), "depth").is_empty());
}

#[test]
fn runs_are_byte_identical_and_manifests_reproduce_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_layer_1d.toml");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = sclab(&["control", "--workers", workers], &cfg, dir);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = sclab(&["control"], &a.join("manifest.toml"), &c);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["norms.csv", "report.csv", "h_last.bin"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, std::fs::read(c.join(f)).unwrap(), "{f}");
    }
    let m = std::fs::read_to_string(a.join("manifest.toml")).unwrap();
    // defaults are resolved, the model is inlined
    assert!(m.contains("dt = ") && m.contains("tol = ") && m.contains("[[model.regions]]"), "{m}");
    // a manifest run writes the same manifest back
    let m2 = std::fs::read_to_string(c.join("manifest.toml")).unwrap();
    assert_eq!(m.replace("workers = 1", ""), m2.replace("workers = 1", ""));
}

#[test]
fn rays_and_regularity_on_the_plane_demo() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_layer_2d.toml");
    let o = sclab(&["trace-ray"], &cfg, &tmp.path().join("ray"));
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, cross) = read_csv(&tmp.path().join("ray/crossings.csv"));
    assert_eq!(cross.len(), 1);
    let snell: f64 = cross[0][8].parse().unwrap();
    assert!(snell < 1e-9);
    let o = sclab(&["check-regularity"], &cfg, &tmp.path().join("reg"));
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&tmp.path().join("reg/regularity.csv"));
    let kinds: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(kinds, ["regular", "regular", "multipath"]);
}

#[test]
fn missing_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sclab(&["check-regularity"], &configs().join("two_layer_1d.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[regularity]"));
}
