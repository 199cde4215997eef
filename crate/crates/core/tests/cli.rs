use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpcheck"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generated_fat_tree_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, code, verdict) in [("correct", 0, "pass"), ("corrupt", 2, "violation")] {
        let spec = dir.path().join(format!("{mode}.json"));
        let out = bin().args(["gen", "fat-tree", "--k", "4", "--statics", mode]).output().unwrap();
        assert!(out.status.success());
        std::fs::write(&spec, &out.stdout).unwrap();
        let res = dir.path().join(mode);
        let st =
            bin().arg("run").arg(&spec).arg("-o").arg(&res).args(["--max-failures", "1"]).status().unwrap();
        assert_eq!(st.code(), Some(code));
        let v = json(&res.join("verdicts.json"));
        assert_eq!(v["verdict"], verdict);
        assert!(json(&res.join("stats.json"))["total"]["scenarios"].as_u64().unwrap() > 0);
        if code == 2 {
            let trail = json(&res.join(v["violation"]["trail"].as_str().unwrap()));
            assert!(!trail.as_array().unwrap().is_empty());
        }
    }
}

#[test]
fn wedgie_violation_names_source_and_trail() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().arg("run").arg(fixture("wedgie.json")).arg("-o").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let v = json(&dir.path().join("verdicts.json"));
    assert_eq!(v["violation"]["source"], "b");
    assert_eq!(v["violation"]["path"], serde_json::json!(["b", "o"]));
}

#[test]
fn pec_dump_lists_loopbacks_and_prefixes() {
    let out = bin().args(["pec", "dump"]).arg(fixture("ibgp4.json")).output().unwrap();
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let row = rows.iter().find(|r| r["lo"] == "192.168.0.3").unwrap();
    assert_eq!(row["hi"], "192.168.0.3");
    assert_eq!(row["prefixes"], serde_json::json!(["192.168.0.3/32"]));
    assert!(rows.iter().any(|r| r["prefixes"] == serde_json::json!(["100.0.0.0/24"])));
}

#[test]
fn fib_dump_resolves_ibgp_next_hops() {
    let out = bin().args(["fib", "dump"]).arg(fixture("ibgp4.json")).output().unwrap();
    assert!(out.status.success());
    let graphs: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let g = graphs.iter().find(|g| g["ranges"] == serde_json::json!(["[200.0.0.0, 200.0.0.255]"])).unwrap();
    assert_eq!(g["nodes"]["r3"]["next_hops"], serde_json::json!(["r2"]), "{g}");
    assert_eq!(g["nodes"]["r3"]["source"], "ibgp");
    assert_eq!(g["nodes"]["r4"]["action"], "local");
}

#[test]
fn oracle_reports_both_disagree_like_states() {
    let out = bin()
        .args(["oracle"])
        .arg(fixture("wedgie.json"))
        .args(["--prefix", "10.0.0.0/24", "--protocol", "bgp"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"].as_array().map(|a| a.len()), Some(2), "{v}");
}

#[test]
fn bad_spec_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, "{\"nodes\": [{\"id\": \"a\"}], \"links\": [{\"a\": \"a\", \"b\": \"zz\"}]}")
        .unwrap();
    let out = bin().arg("run").arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
}

#[test]
fn verdicts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("ring.json");
    let out = bin().args(["gen", "ring", "--n", "6"]).output().unwrap();
    std::fs::write(&spec, &out.stdout).unwrap();
    let mut docs = Vec::new();
    for i in 0..2 {
        let res = dir.path().join(format!("r{i}"));
        let st = bin()
            .arg("run")
            .arg(&spec)
            .arg("-o")
            .arg(&res)
            .args(["--max-failures", "1", "--parallel", "2"])
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        docs.push(std::fs::read(res.join("verdicts.json")).unwrap());
    }
    assert_eq!(docs[0], docs[1]);
}
