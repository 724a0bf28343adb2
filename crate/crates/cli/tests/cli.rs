use std::path::Path;
use std::process::{Command, Output};

use semiclassical::config::REFERENCE;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_semiclassical"));
    c.env_remove("SNLS_OUT");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn files_under(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" || p.parent() != Some(root) {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}

fn assert_inventory(root: &Path) {
    let m = json(&root.join("manifest.json"));
    let listed: Vec<String> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().to_string()).collect();
    assert_eq!(listed, files_under(root));
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(root.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn limit_writes_table_set_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["limit"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let root = dir.path().join("limit");
    let table = std::fs::read_to_string(root.join("energy_table.csv")).unwrap();
    let e1: f64 = table.lines().find(|l| l.starts_with("1.0")).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((e1 - 4.0 / 3.0).abs() < 1e-3);
    assert_inventory(&root);
    let m = json(&root.join("manifest.json"));
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["started_unix_ms"].as_u64().unwrap() <= m["finished_unix_ms"].as_u64().unwrap());
    assert_eq!(m["cutoff"]["phi"]["hi"], 0.7);
}

#[test]
fn digest_ignores_key_order() {
    let dir = tempfile::tempdir().unwrap();
    let shuffled = dir.path().join("shuffled.toml");
    // Sections reversed, keys within [problem] permuted.
    let mut sections: Vec<&str> = REFERENCE.split("\n\n").collect();
    sections.reverse();
    let text = sections.join("\n\n").replace("dim = 1\nh = 0.1\n", "h = 0.1\ndim = 1\n");
    std::fs::write(&shuffled, format!("# reordered\n{text}\n")).unwrap();
    let a = run(&["limit"], &dir.path().join("a"));
    let b = bin().args(["limit", "--config"]).arg(&shuffled).arg("--out").arg(dir.path().join("b")).output().unwrap();
    assert!(a.status.success() && b.status.success(), "{}", stderr(&b));
    let da = json(&dir.path().join("a/limit/manifest.json"))["config_sha256"].clone();
    let db = json(&dir.path().join("b/limit/manifest.json"))["config_sha256"].clone();
    assert_eq!(da, db);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("limit").env("SNLS_OUT", dir.path()).output().unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("limit/manifest.json").is_file());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, REFERENCE.replace("h = 0.1", "h = 0.1\nh = 0.2")).unwrap();
    let o = bin().args(["limit", "--config"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    std::fs::write(&bad, format!("{REFERENCE}masses = [1.0, 1.8, 1.2]\n")).unwrap();
    let o = bin().args(["limit", "--config"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("masses[1] = 1.8 then masses[2] = 1.2"), "{}", stderr(&o));

    std::fs::write(&bad, format!("{REFERENCE}masses = []\n")).unwrap();
    let o = bin().args(["limit", "--config"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["verify", "bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("decay, recursion, directional, floor, all"));
}

#[test]
fn solve_preconditions_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--eps", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`limit`"));

    assert!(run(&["limit"], dir.path()).status.success());
    let o = run(&["solve", "--eps", "0.6"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("box-adequacy threshold 0.4798"), "{}", stderr(&o));
    assert_eq!(run(&["solve"], dir.path()).status.code(), Some(2));

    let o = run(&["solve", "--eps", "0.1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let root = dir.path().join("solve-eps0.1");
    let rec = json(&root.join("solve.json"));
    assert_eq!(rec["energy"]["penalty"], 0.0);
    assert!(rec["dist_to_max"].as_f64().unwrap() <= 0.5);
    assert_eq!(json(&root.join("energy.json")), rec["energy"]);
    let trace = std::fs::read_to_string(root.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,energy,residual,upsilon_1,phi,step,increment,lipschitz\n"));
    let v = semiclassical::snapshot::read_snapshot(&root.join("field.snls")).unwrap();
    assert!((v.grid().half_width() - 4.0).abs() < 1e-12);
    assert_inventory(&root);
}

#[test]
fn sweep_rows_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["limit"], dir.path()).status.success());
    let o = run(&["sweep", "--eps", "0.05,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("strictly decreasing"));

    let o = run(&["sweep", "--eps", "0.1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "eps,dist,gamma,c_eps,decay_c,status");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].ends_with(",ok"));

    // A row beyond the box threshold fails without stopping the others.
    let o = run(&["sweep", "--eps", "0.6,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("failed: eps = 0.6"));
    assert!(csv.lines().nth(2).unwrap().ends_with(",ok"));
    assert_inventory(&dir.path().join("sweep"));
}

#[test]
fn verify_and_degree() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["limit"], dir.path()).status.success());
    let o = run(&["verify", "decay"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let d = json(&dir.path().join("verify-decay/decay.json"));
    let rate = d["control"]["rate"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&rate));

    let o = run(&["verify", "recursion", "--seed", "11"], dir.path());
    assert!(o.status.success());
    assert_eq!(json(&dir.path().join("verify-recursion/recursion.json"))["rejected"], 100);

    // The annulus-regime spread check fails on the full sweep.
    let o = run(&["verify", "floor"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    let csv = std::fs::read_to_string(dir.path().join("verify-floor/verify.csv")).unwrap();
    assert!(csv.starts_with("eps,regime,min_dual_norm,witness_id\n"));
    assert_eq!(csv.lines().count(), 9);
    assert_inventory(&dir.path().join("verify-floor"));

    let o = run(&["degree", "--eps", "0.1"], dir.path());
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "-1");
}

#[test]
fn refuses_foreign_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("limit")).unwrap();
    std::fs::write(dir.path().join("limit/notes.txt"), "keep").unwrap();
    let o = run(&["limit"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("limit/notes.txt").is_file());
}

#[test]
fn shipped_reference_config_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let text = std::fs::read_to_string(path).unwrap();
    let a = semiclassical::config::Config::parse(&text).unwrap();
    let b = semiclassical::config::Config::parse(REFERENCE).unwrap();
    assert_eq!(a, b);
}
