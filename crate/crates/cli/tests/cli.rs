use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slowmix"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_FK: &str = r#"{
  "suite": "fk-verify",
  "seed": 11,
  "sweep": {"l": [2], "beta": [1.0], "h": [0.0, 0.3]},
  "params": {"pairs": 4, "samples": 20000}
}
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn schema_is_json() {
    let o = run(&["schema"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("properties").is_some());
}

#[test]
fn shipped_configs_validate() {
    let mut seen = 0;
    for e in fs::read_dir(configs_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            let o = run(&["validate", "--config", p.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), stderr(&o));
            seen += 1;
        }
    }
    assert_eq!(seen, 8);
}

#[test]
fn malformed_config_points_at_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\n  \"suite\": \"fk-verify\",\n  \"seed\": 3,,\n}\n");
    let o = run(&["run", "fk-verify", "--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bad.json:3:"), "{e}");
    assert!(e.contains("\"seed\": 3,,"), "{e}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_fields_and_ranges_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(
        dir.path(),
        "typo.json",
        "{\n  \"suite\": \"fk-verify\",\n  \"params\": {\n    \"pairz\": 3\n  }\n}\n",
    );
    let o = run(&["validate", "--config", typo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("typo.json:4:") && e.contains("pairz"), "{e}");

    let neg = write(dir.path(), "neg.json", "{\n  \"suite\": \"fk-verify\",\n  \"sweep\": {\"beta\": [-1.0]}\n}\n");
    let e = stderr(&run(&["validate", "--config", neg.to_str().unwrap()]));
    assert!(e.contains("neg.json:3:") && e.contains("beta"), "{e}");

    let other = write(dir.path(), "other.json", "{\"suite\": \"nope\"}");
    assert_eq!(run(&["validate", "--config", other.to_str().unwrap()]).status.code(), Some(2));

    let ok = write(dir.path(), "ok.json", SMALL_FK);
    let o = run(&["run", "lightcone", "--config", ok.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fk-verify"));
    let o = run(&["run", "fk-verify", "--config", ok.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["run", "fk-verify"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--config", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn fk_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fk.json", SMALL_FK);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "fk-verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ca = csvs(&a);
    assert_eq!(ca.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), ["pairs.csv", "summary.csv"]);
    assert_eq!(ca, csvs(&b));
    let header = String::from_utf8_lossy(&ca[0].1).lines().next().unwrap().to_string();
    assert_eq!(header, "l,beta,h,pair,metric,value,stderr");

    let m: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["master_seed"], 11);
    assert_eq!(m["point_seeds"].as_array().unwrap().len(), 2);
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(a.join(f["name"].as_str().unwrap())).unwrap();
        use sha2::Digest;
        let hex: String = sha2::Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"], hex);
    }
    let b_manifest: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_sha256"], b_manifest["config_sha256"]);

    // rerun from the manifest alone
    let c = dir.path().join("c");
    let o = run(&["run", "fk-verify", "--config", a.join("manifest.json").to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(csvs(&c), ca);

    // a different seed changes the sampled columns
    let d = dir.path().join("d");
    let o = run(&["run", "fk-verify", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--seed", "12"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(csvs(&d), ca);
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strict.json",
        r#"{"suite": "fk-verify", "sweep": {"l": [2], "beta": [1.0], "h": [0.5]},
            "params": {"pairs": 2, "samples": 2000, "max_rel_stderr": 1e-9}}"#,
    );
    let out = dir.path().join("o");
    let o = run(&["run", "fk-verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL"));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "assertion_failed");
    assert!(!m["failures"].as_array().unwrap().is_empty());
}

#[test]
fn quick_suites_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("chen-truncation", r#"{"suite": "chen-truncation"}"#),
        ("classical-barrier", r#"{"suite": "classical-barrier", "sweep": {"n": [50, 100, 150, 200]}}"#),
        ("code-expansion", ""),
    ];
    for (suite, text) in cases {
        let cfg = if text.is_empty() {
            configs_dir().join(format!("{suite}.json"))
        } else {
            write(dir.path(), &format!("{suite}.json"), text)
        };
        let out = dir.path().join(suite);
        let o = run(&["run", suite, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{suite}: {}", stderr(&o));
        assert!(out.join("manifest.json").exists());
        assert!(!csvs(&out).is_empty());
    }
}
