use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arlequin_core::io::ENERGY_HEADER;

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("commands").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn arlequin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arlequin")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn demo_inputs(name: &str) -> PathBuf {
    let dir = scratch(name);
    assert!(arlequin(&["demo", "--out-dir", path(&dir)]).status.success());
    dir
}

fn prep_demo(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "prep",
        "--mesh",
        path(&dir.join("mesh.txt")),
        "--atoms",
        path(&dir.join("atoms.txt")),
        "--config",
        path(&dir.join("config.txt")),
        "--out-dir",
        path(dir),
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    arlequin(&refs)
}

fn simulate_demo(dir: &Path, extra: &[&str]) -> Output {
    let mesh = dir.join("mesh.txt");
    let atoms = dir.join("atoms.txt");
    let mut args = vec!["simulate", "--mesh", path(&mesh), "--atoms", path(&atoms), "--out-dir", path(dir)];
    args.extend_from_slice(extra);
    arlequin(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn prep_writes_boundary_labels_into_alpha() {
    let dir = demo_inputs("labels");
    let out = prep_demo(&dir, &["--method", "direct", "--method", "temperature"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let map = std::fs::read_to_string(dir.join("coupling_map.txt")).unwrap();
    let sides: BTreeMap<String, f64> = map
        .split("[sides]")
        .nth(1)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(' '))
        .map(|(n, s)| (n.to_string(), if s == "fe_side" { 1.0 } else { 0.0 }))
        .collect();
    // outer and inner loops of the two-element ring around the hole
    assert_eq!(sides.len(), 4 * 9 + 4 * 5);
    for method in ["direct", "temperature"] {
        let csv = std::fs::read_to_string(dir.join(format!("alpha_{method}.csv"))).unwrap();
        let mut checked = 0;
        for row in csv.lines().skip(1) {
            let f: Vec<&str> = row.split(',').collect();
            if f[0] == "node" {
                if let Some(expected) = sides.get(f[1]) {
                    assert_eq!(f.last().unwrap().parse::<f64>().unwrap(), *expected, "{method} {row}");
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, sides.len());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> =
        manifest["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["coupling_map.txt", "alpha_direct.csv", "alpha_temperature.csv"]);
}

#[test]
fn prep_manifest_hashes_are_stable() {
    let dir = demo_inputs("hashes");
    let hashes = || {
        assert!(prep_demo(&dir, &[]).status.success());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        (m["inputs"].clone(), m["outputs"].clone())
    };
    assert_eq!(hashes(), hashes());
}

#[test]
fn empty_atom_file_warns_and_succeeds() {
    let dir = demo_inputs("empty");
    std::fs::write(dir.join("atoms.txt"), "2 0\n").unwrap();
    let out = prep_demo(&dir, &[]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    let map = std::fs::read_to_string(dir.join("coupling_map.txt")).unwrap();
    assert_eq!(map, "[coupling_elements]\n[atom_locations]\n[boundary]\n[sides]\n");
}

#[test]
fn anchor_outside_md_region_exits_3() {
    let dir = demo_inputs("anchor");
    let config = std::fs::read_to_string(dir.join("config.txt")).unwrap();
    std::fs::write(dir.join("config.txt"), config.replace("anchors = 50,50,0", "anchors = 7.5,3.25,0")).unwrap();
    let out = prep_demo(&dir, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("7.5") && stderr(&out).contains("3.25"), "{}", stderr(&out));
}

#[test]
fn unparsable_mesh_exits_2() {
    let dir = demo_inputs("parse");
    std::fs::write(dir.join("mesh.txt"), "2 1 0\n1 0.0 zero\n").unwrap();
    assert_eq!(prep_demo(&dir, &[]).status.code(), Some(2));
}

#[test]
fn one_sided_heat_problem_exits_4() {
    // a bar strip with an anchor beyond each end labels both ends md_side
    let dir = scratch("heat");
    std::fs::write(
        dir.join("mesh.txt"),
        "1 5 4\n1 0\n2 1\n3 2\n4 3\n5 4\n1 bar2 1 2\n2 bar2 2 3\n3 bar2 3 4\n4 bar2 4 5\n",
    )
    .unwrap();
    std::fs::write(dir.join("atoms.txt"), "1 4\n1 0.5 1\n2 1.5 1\n3 2.5 1\n4 3.5 1\n").unwrap();
    std::fs::write(dir.join("config.txt"), "anchors = -1;5\nalpha_method = temperature\n").unwrap();
    let out = prep_demo(&dir, &[]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    std::fs::write(dir.join("config.txt"), "anchors = -1\nalpha_method = temperature\n").unwrap();
    assert!(prep_demo(&dir, &[]).status.success());
}

#[test]
fn simulate_without_prep_exits_2() {
    let dir = demo_inputs("missing");
    let out = simulate_demo(&dir, &["--config", path(&dir.join("config.txt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("coupling_map.txt"));
}

#[test]
fn zero_steps_give_header_only() {
    let dir = demo_inputs("zero");
    assert!(prep_demo(&dir, &[]).status.success());
    let config = std::fs::read_to_string(dir.join("config.txt")).unwrap();
    std::fs::write(dir.join("config.txt"), config.replace("steps = 220", "steps = 0")).unwrap();
    let out = simulate_demo(&dir, &["--config", path(&dir.join("config.txt")), "--variant", "none"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(dir.join("energy_none.csv")).unwrap(), format!("{ENERGY_HEADER}\n"));
}

#[test]
fn oversized_time_step_exits_5() {
    let dir = demo_inputs("unstable");
    assert!(prep_demo(&dir, &[]).status.success());
    let config = std::fs::read_to_string(dir.join("config.txt")).unwrap();
    std::fs::write(dir.join("config.txt"), config.replace("dt = 0.04", "dt = 1")).unwrap();
    let out = simulate_demo(&dir, &["--config", path(&dir.join("config.txt")), "--variant", "none"]);
    assert_eq!(out.status.code(), Some(5));
}

fn compare(a: &Path, b: &Path) -> Output {
    arlequin(&["compare", path(a), path(b)])
}

#[test]
fn compare_reports_deviations() {
    let dir = demo_inputs("compare");
    assert!(prep_demo(&dir, &[]).status.success());
    let config = std::fs::read_to_string(dir.join("config.txt")).unwrap();
    std::fs::write(dir.join("config.txt"), config.replace("steps = 220", "steps = 20")).unwrap();
    for variant in ["none", "arlequin_direct"] {
        let out = simulate_demo(&dir, &["--config", path(&dir.join("config.txt")), "--variant", variant]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let none = dir.join("energy_none.csv");
    let direct = dir.join("energy_arlequin_direct.csv");

    let same = compare(&none, &none);
    assert!(same.status.success());
    let text = String::from_utf8(same.stdout).unwrap();
    for line in text.lines().skip(1).filter(|l| !l.starts_with("reflection")) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), 0.0, "{line}");
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0, "{line}");
    }

    let differ = compare(&none, &direct);
    assert!(differ.status.success());
    let text = String::from_utf8(differ.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 8 + 1);
    for line in text.lines().skip(1).take(8) {
        let rms: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(rms.is_finite());
    }

    let short = dir.join("short.csv");
    let body = std::fs::read_to_string(&none).unwrap();
    std::fs::write(&short, body.lines().take(5).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(compare(&none, &short).status.code(), Some(2));
}
