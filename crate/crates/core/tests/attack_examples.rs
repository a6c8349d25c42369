mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{miter_unsat, names, worked_example};
use lockbreak::attack::*;
use lockbreak::key::parse_key;
use lockbreak::locking::Scheme;
use lockbreak::netlist::{library, parse_bench, Circuit, GateKind, Tri, DEFAULT_KEY_PREFIX};
use lockbreak::oracle::OracleHandle;

fn set(v: &[String]) -> BTreeSet<String> {
    v.iter().cloned().collect()
}

#[test]
fn sarlock_critical_signal_and_unit() {
    let b = worked_example(Scheme::Sarlock, "100");
    let cs1 = find_critical_signal(&b.locked).unwrap();
    // cs1 feeds the flip XOR on the target output
    let flip = b.locked.gate_of("maj").unwrap();
    assert_eq!(flip.kind, GateKind::Xor);
    assert!(flip.fanins.contains(&cs1.net));
    let (unit, usc) = extract_unit(&b.locked, &cs1.net).unwrap();
    assert_eq!(
        set(unit.inputs()),
        set(&names(&[
            "x1",
            "x2",
            "x3",
            "keyinput1",
            "keyinput2",
            "keyinput3"
        ]))
    );
    assert!(usc.key_inputs().is_empty());
    assert!(usc.inputs().contains(&cs1.net));
    // usc: majority gates plus the flip XOR
    assert_eq!(usc.gates().len(), 5);
    let stitched = recompose(&b.locked, &unit, &usc, &cs1.net).unwrap();
    assert!(miter_unsat(&b.locked, &stitched));
}

#[test]
fn sarlock_qbf_recovers_key() {
    let b = worked_example(Scheme::Sarlock, "100");
    let report = attack(&b.locked, &AttackConfig::default(), None).unwrap();
    assert_eq!(report.classification, Classification::SfltKeyFound);
    assert_eq!(report.key, "100");
    assert!(report.all_proven());
    assert!(report.verified);
    let removal = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
    assert!(!comparator_check(&removal.unit, &removal.associations));
}

#[test]
fn ttlock_restore_unit_is_comparator() {
    let b = worked_example(Scheme::Ttlock, "010");
    let r = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
    assert!(r.qbf.key.is_none());
    assert!(r
        .qbf
        .attempts
        .iter()
        .all(|a| a.status == lockbreak::solve::QbfStatus::False));
    assert_eq!(r.classification, Classification::RestoreUnit);
    let pairs: BTreeMap<&str, &str> = r
        .associations
        .pairs
        .iter()
        .map(|a| (a.ppi.as_str(), a.keys[0].key.as_str()))
        .collect();
    assert_eq!(pairs["x1"], "keyinput1");
    assert_eq!(pairs["x2"], "keyinput3");
    assert_eq!(pairs["x3"], "keyinput2");
    // comparator: three match gates and an AND tree, nothing else
    let kinds = r.unit.kind_histogram();
    let and_count = kinds.get(&GateKind::And).copied().unwrap_or(0);
    assert_eq!(and_count, 2);
    assert!(r.unit.gates().len() >= 5);
    assert!(comparator_check(&r.unit, &r.associations));
    // locked subcircuit: one output over the three inputs
    let sub = extract_locked_subcircuit(&r.usc, &r.cs1.net, r.nonflip).unwrap();
    assert_eq!(sub.outputs().len(), 1);
    assert_eq!(set(sub.inputs()), set(&names(&["x1", "x2", "x3"])));
}

#[test]
fn ttlock_og_attack_worked_example() {
    let b = worked_example(Scheme::Ttlock, "010");
    let mut oracle = OracleHandle::simulated(&b.original);
    let cfg = AttackConfig {
        mode: Mode::Og,
        ..AttackConfig::default()
    };
    let report = attack(&b.locked, &cfg, Some(&mut oracle)).unwrap();
    assert_eq!(report.key, "010");
    assert_eq!(report.match_pattern.as_deref(), Some("100"));
    assert!(report.verified && report.all_proven());
    assert!(
        report.oracle_queries <= 8,
        "{} queries",
        report.oracle_queries
    );
    let key: BTreeMap<String, Tri> = report.key_bits.clone();
    assert!(verify_key(&b.locked, &key, Reference::Original(&b.original)).unwrap());
}

#[test]
fn og_requires_oracle() {
    let b = worked_example(Scheme::Ttlock, "010");
    let cfg = AttackConfig {
        mode: Mode::Og,
        ..AttackConfig::default()
    };
    assert!(matches!(
        attack(&b.locked, &cfg, None),
        Err(AttackError::NoOracle)
    ));
}

#[test]
fn cac_og_attack_recovers_pattern() {
    let b = worked_example(Scheme::Cac, "110");
    let mut oracle = OracleHandle::simulated(&b.original);
    let cfg = AttackConfig {
        mode: Mode::Og,
        ..AttackConfig::default()
    };
    let report = attack(&b.locked, &cfg, Some(&mut oracle)).unwrap();
    assert!(report.verified);
    assert_eq!(report.match_pattern, b.protected_pattern_string());
    assert!(verify_key(
        &b.locked,
        &report.key_bits,
        Reference::Original(&b.original)
    )
    .unwrap());
}

#[test]
fn disjoint_key_paths_have_no_critical_signal() {
    let c = parse_bench(
        "INPUT(a)\nINPUT(b)\nINPUT(keyinput1)\nINPUT(keyinput2)\nOUTPUT(o1)\nOUTPUT(o2)\n\
         o1 = XOR(a, keyinput1)\no2 = XOR(b, keyinput2)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    assert!(matches!(
        find_critical_signal(&c),
        Err(AttackError::NotSfltOrDflt(_))
    ));
}

#[test]
fn single_key_xor_critical_signal_is_the_key() {
    let c = parse_bench(
        "INPUT(a)\nINPUT(keyinput1)\nOUTPUT(o)\no = XOR(a, keyinput1)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    let cs1 = find_critical_signal(&c).unwrap();
    assert_eq!(cs1.net, "keyinput1");
    let (unit, usc) = extract_unit(&c, &cs1.net).unwrap();
    assert!(usc.key_inputs().is_empty());
    assert!(miter_unsat(
        &c,
        &recompose(&c, &unit, &usc, &cs1.net).unwrap()
    ));
}

#[test]
fn no_keys_is_an_error() {
    assert!(matches!(
        find_critical_signal(&library::majority()),
        Err(AttackError::NoKeys)
    ));
}

#[test]
fn free_floating_key_is_unassociated() {
    let c = parse_bench(
        "INPUT(x)\nINPUT(keyinput1)\nINPUT(keyinput2)\nOUTPUT(o)\n\
         e = XNOR(x, keyinput1)\no = AND(e, keyinput2)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    let a = associate_ppi_keys(&c);
    assert_eq!(a.unassociated_keys, names(&["keyinput2"]));
    assert_eq!(a.pairs.len(), 1);
    assert_eq!(a.pairs[0].keys[0].key, "keyinput1");
    assert!(!a.pairs[0].keys[0].offset);
}

#[test]
fn single_xnor_pair_is_a_comparator() {
    let c = parse_bench(
        "INPUT(x)\nINPUT(keyinput1)\nOUTPUT(o)\no = XNOR(x, keyinput1)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    assert!(comparator_check(&c, &associate_ppi_keys(&c)));
}

#[test]
fn anti_sat_ppis_have_two_keys() {
    let mut spec =
        lockbreak::locking::LockSpec::random(Scheme::Antisat, names(&["x1", "x2", "x3"]), 3);
    spec.secret_key = parse_key("101100").unwrap();
    let b = lockbreak::locking::lock(&library::majority(), &spec).unwrap();
    let r = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
    assert_eq!(r.associations.pairs.len(), 3);
    assert!(r.associations.pairs.iter().all(|a| a.keys.len() == 2));
    assert_eq!(r.classification, Classification::SfltKeyFound);
}

#[test]
fn guesser_on_and_and_xor() {
    let and = parse_bench(
        "INPUT(x)\nINPUT(y)\nINPUT(keyinput1)\nOUTPUT(o)\na = AND(x, y)\no = AND(keyinput1, a)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    let g = constant_propagation_guess(&and, &names(&["keyinput1"])).unwrap();
    assert_eq!(g["keyinput1"], Tri::Zero);
    let xor = parse_bench(
        "INPUT(x)\nINPUT(keyinput1)\nOUTPUT(o)\no = XOR(x, keyinput1)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    let g = constant_propagation_guess(&xor, &names(&["keyinput1"])).unwrap();
    assert_eq!(g["keyinput1"], Tri::X);
}

#[test]
fn ttlock_ol_deciphers_bits() {
    let b = worked_example(Scheme::Ttlock, "010");
    let report = attack(&b.locked, &AttackConfig::default(), None).unwrap();
    assert_eq!(report.mode, Mode::Ol);
    assert!(report.deciphered >= 1);
    assert!(!report.verified);
}

#[test]
fn fsc_patch_restores_majority() {
    let b = worked_example(Scheme::Ttlock, "010");
    let r = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
    let fsc = extract_locked_subcircuit(&r.usc, &r.cs1.net, r.nonflip).unwrap();
    let ppis = names(&["x1", "x2", "x3"]);
    // x3x2x1 = 100
    let patched = reconstruct_fsc_patch(&fsc, &ppis, &[vec![false, false, true]]).unwrap();
    assert!(common::brute_equivalent(
        &patched,
        &library::majority(),
        &BTreeMap::new()
    ));
    assert!(matches!(
        reconstruct_fsc_patch(&fsc, &ppis, &[]),
        Err(AttackError::EmptyPatterns)
    ));
}

#[test]
fn fsc_patch_two_patterns() {
    // majority with flips at 100 and 011 (x3x2x1)
    let c = parse_bench(
        "INPUT(x1)\nINPUT(x2)\nINPUT(x3)\nOUTPUT(o)\n\
         a12 = AND(x1, x2)\na13 = AND(x1, x3)\na23 = AND(x2, x3)\nm = OR(a12, a13, a23)\n\
         n1 = NOT(x1)\nn2 = NOT(x2)\np = AND(n1, n2, x3)\nq = AND(x1, x2, n3)\nn3 = NOT(x3)\n\
         h = OR(p, q)\no = XOR(m, h)\n",
        DEFAULT_KEY_PREFIX,
    )
    .unwrap();
    let ppis = names(&["x1", "x2", "x3"]);
    let patched = reconstruct_fsc_patch(
        &c,
        &ppis,
        &[vec![false, false, true], vec![true, true, false]],
    )
    .unwrap();
    assert!(common::brute_equivalent(
        &patched,
        &library::majority(),
        &BTreeMap::new()
    ));
}

#[test]
fn verify_key_rejects_x_and_wrong_keys() {
    let b = worked_example(Scheme::Sarlock, "100");
    let mut k = common::key_map(&b, &parse_key("100").unwrap());
    assert!(verify_key(&b.locked, &k, Reference::Original(&b.original)).unwrap());
    k.insert("keyinput2".into(), Tri::X);
    assert!(matches!(
        verify_key(&b.locked, &k, Reference::Original(&b.original)),
        Err(AttackError::IncompleteKey(_))
    ));
    let wrong = common::key_map(&b, &parse_key("101").unwrap());
    assert!(!verify_key(&b.locked, &wrong, Reference::Original(&b.original)).unwrap());
    let mut oracle = OracleHandle::simulated(&b.original);
    let good = common::key_map(&b, &parse_key("100").unwrap());
    assert!(verify_key(&b.locked, &good, Reference::Oracle(&mut oracle)).unwrap());
}

#[test]
fn report_json_has_schema_fields() {
    let b = worked_example(Scheme::Sarlock, "100");
    let report = attack(&b.locked, &AttackConfig::default(), None).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    for f in [
        "schema_version",
        "mode",
        "key_bits",
        "confidence",
        "cs1",
        "classification",
        "candidates",
        "oracle_queries",
        "timings",
        "verified",
    ] {
        assert!(v.get(f).is_some(), "missing {f}");
    }
    assert_eq!(v["mode"], "OL");
    assert_eq!(v["key_bits"]["keyinput3"], "1");
    assert_eq!(v["confidence"]["keyinput3"], "PROVEN");
}

#[allow(dead_code)]
fn _unused(_: &Circuit) {}
