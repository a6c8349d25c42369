use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lockbreak::netlist::library::{C17_BENCH, MAJORITY_BENCH};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lockbreak"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sarlock_majority_ol_recovers_key() {
    let d = tempfile::tempdir().unwrap();
    let maj = write(d.path(), "maj.bench", MAJORITY_BENCH);
    let locked = d.path().join("sar.bench");
    let o = run(&[
        "lock",
        s(&maj),
        "--scheme",
        "sarlock",
        "--key",
        "100",
        "--pairing",
        "0,2,1",
        "--out",
        s(&locked),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(locked.with_extension("json").exists());
    let o = run(&["attack", s(&locked), "--mode", "ol"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["key"], "100");
    assert_eq!(r["classification"], "SFLT_KEY_FOUND");
    assert!(r["confidence"]
        .as_object()
        .unwrap()
        .values()
        .all(|c| c == "PROVEN"));
}

#[test]
fn ttlock_majority_og_with_simulated_oracle() {
    let d = tempfile::tempdir().unwrap();
    let maj = write(d.path(), "maj.bench", MAJORITY_BENCH);
    let locked = d.path().join("tt.bench");
    let o = run(&[
        "lock",
        s(&maj),
        "--scheme",
        "ttlock",
        "--key",
        "010",
        "--pairing",
        "0,2,1",
        "--out",
        s(&locked),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&["attack", s(&locked), "--mode", "og", "--oracle", s(&maj)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["key"], "010");
    assert_eq!(r["match_pattern"], "100");
    assert_eq!(r["verified"], true);
}

#[test]
fn external_oracle_process() {
    let d = tempfile::tempdir().unwrap();
    let maj = write(d.path(), "maj.bench", MAJORITY_BENCH);
    let locked = d.path().join("cac.bench");
    assert_eq!(
        code(&run(&[
            "lock",
            s(&maj),
            "--scheme",
            "cac",
            "--key",
            "110",
            "--out",
            s(&locked)
        ])),
        0
    );
    let cmd = format!(
        "cmd:{} oracle-serve {}",
        env!("CARGO_BIN_EXE_lockbreak"),
        s(&maj)
    );
    let o = run(&["attack", s(&locked), "--mode", "og", "--oracle", &cmd]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["key"], "110");
}

#[test]
fn og_without_oracle_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let maj = write(d.path(), "maj.bench", MAJORITY_BENCH);
    let locked = d.path().join("tt.bench");
    run(&[
        "lock",
        s(&maj),
        "--scheme",
        "ttlock",
        "--key",
        "010",
        "--out",
        s(&locked),
    ]);
    assert_eq!(code(&run(&["attack", s(&locked), "--mode", "og"])), 1);
}

#[test]
fn lock_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let maj = write(d.path(), "maj.bench", MAJORITY_BENCH);
    assert_eq!(code(&run(&["lock", s(&maj), "--key", "100"])), 1);
    assert_eq!(code(&run(&["lock", s(&maj), "--scheme", "sarlock"])), 1);
    assert_eq!(
        code(&run(&[
            "lock",
            s(&maj),
            "--scheme",
            "nosuch",
            "--key",
            "100"
        ])),
        1
    );
    assert_eq!(code(&run(&["bogus"])), 1);
}

#[test]
fn lock_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let c17 = write(d.path(), "c17.bench", C17_BENCH);
    let a = run(&[
        "lock",
        s(&c17),
        "--scheme",
        "antisat",
        "--key-bits",
        "4",
        "--seed",
        "9",
    ]);
    let b = run(&[
        "lock",
        s(&c17),
        "--scheme",
        "antisat",
        "--key-bits",
        "4",
        "--seed",
        "9",
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let maj = write(d.path(), "maj.bench", MAJORITY_BENCH);
    let locked = d.path().join("sar.bench");
    run(&[
        "lock",
        s(&maj),
        "--scheme",
        "sarlock",
        "--key",
        "101",
        "--out",
        s(&locked),
    ]);
    let v = |k: &str| {
        code(&run(&[
            "verify",
            s(&locked),
            "--key",
            k,
            "--original",
            s(&maj),
        ]))
    };
    assert_eq!(v("101"), 0);
    assert_eq!(v("100"), 2);
    assert_eq!(v("1x1"), 1);
    assert_eq!(v("1010"), 1);
    let o = run(&[
        "verify",
        s(&locked),
        "--key",
        "101",
        "--oracle",
        &format!("bench:{}", s(&maj)),
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn antisat_ol_report_has_counts() {
    let d = tempfile::tempdir().unwrap();
    let c17 = write(d.path(), "c17.bench", C17_BENCH);
    let locked = d.path().join("as.bench");
    assert_eq!(
        code(&run(&[
            "lock",
            s(&c17),
            "--scheme",
            "antisat",
            "--key-bits",
            "4",
            "--out",
            s(&locked)
        ])),
        0
    );
    let o = run(&["attack", s(&locked)]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["deciphered"], 4);
    assert_eq!(r["key_bits"].as_object().unwrap().len(), 4);
    assert!(r["timings"]["total_ms"].is_number());
}

#[test]
fn unclassifiable_lock_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let bench = "INPUT(a)\nINPUT(b)\nINPUT(keyinput1)\nINPUT(keyinput2)\nOUTPUT(y)\nOUTPUT(z)\n\
                 y = XOR(a, keyinput1)\nz = XOR(b, keyinput2)\n";
    let p = write(d.path(), "two.bench", bench);
    assert_eq!(code(&run(&["attack", s(&p)])), 2);
}

#[test]
fn corpus_is_deterministic_and_reportable() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b] {
        let o = run(&[
            "corpus",
            "--out",
            s(out),
            "--circuits",
            "c17",
            "--key-bits",
            "4",
            "--seed",
            "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ma = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert_eq!(
        ma,
        std::fs::read_to_string(b.join("manifest.json")).unwrap()
    );
    let m: serde_json::Value = serde_json::from_str(&ma).unwrap();
    assert_eq!(m.as_array().unwrap().len(), 18);
    for e in m.as_array().unwrap() {
        let f = e["file"].as_str().unwrap();
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
    let o = run(&["report", s(&a), "--mode", "og", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let rows = r["bundles"].as_array().unwrap();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|row| row["success"] == true), "{rows:#?}");
}

#[test]
fn solve_dimacs() {
    let d = tempfile::tempdir().unwrap();
    let sat = write(d.path(), "s.cnf", "p cnf 2 2\n1 2 0\n-1 0\n");
    let unsat = write(d.path(), "u.cnf", "p cnf 1 2\n1 0\n-1 0\n");
    let o = run(&["solve", s(&sat)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("s SATISFIABLE"));
    let o = run(&["solve", s(&unsat)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("s UNSATISFIABLE"));
}
