#![allow(dead_code)]

use std::collections::BTreeMap;

use lockbreak::encode::build_miter;
use lockbreak::key::parse_key;
use lockbreak::locking::{choose_protected_inputs, lock, LockSpec, LockedBundle, Scheme};
use lockbreak::netlist::{library, Circuit, Tri};
use lockbreak::solve::{solve_sat, SatStatus};

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Majority locked as in the worked example: x1-k1, x2-k3, x3-k2.
pub fn worked_example(scheme: Scheme, key: &str) -> LockedBundle {
    let mut spec =
        LockSpec::random(scheme, names(&["x1", "x2", "x3"]), 7).with_pairing(vec![0, 2, 1]);
    spec.secret_key = parse_key(key).unwrap();
    lock(&library::majority(), &spec).unwrap()
}

pub fn bundle(original: &Circuit, scheme: Scheme, n_protected: usize, seed: u64) -> LockedBundle {
    let prot = choose_protected_inputs(original, n_protected, seed).unwrap();
    lock(original, &LockSpec::random(scheme, prot, seed)).unwrap()
}

/// Independent brute-force equivalence on the shared input names.
pub fn brute_equivalent(a: &Circuit, b: &Circuit, fixed: &BTreeMap<String, bool>) -> bool {
    let free: Vec<String> = a
        .inputs()
        .iter()
        .filter(|n| !fixed.contains_key(*n))
        .cloned()
        .collect();
    assert!(free.len() <= 20);
    for m in 0..1u64 << free.len() {
        let val = |n: &String| match fixed.get(n) {
            Some(v) => *v,
            None => (m >> free.iter().position(|f| f == n).expect("shared input")) & 1 == 1,
        };
        let ia: Vec<bool> = a.inputs().iter().map(val).collect();
        let ib: Vec<bool> = b.inputs().iter().map(val).collect();
        if a.eval_bool(&ia) != b.eval_bool(&ib) {
            return false;
        }
    }
    true
}

pub fn miter_unsat(a: &Circuit, b: &Circuit) -> bool {
    solve_sat(&build_miter(a, b, &BTreeMap::new()).unwrap(), None).status == SatStatus::Unsat
}

pub fn key_map(b: &LockedBundle, key: &[bool]) -> BTreeMap<String, Tri> {
    b.key_names()
        .into_iter()
        .zip(key.iter().map(|&v| Tri::from_bool(v)))
        .collect()
}
