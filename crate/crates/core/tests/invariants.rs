mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use lockbreak::attack::{
    extract_locked_subcircuit, generate_candidates, recompose, removal_phase, score_guess,
    verify_key, AttackConfig, Reference,
};
use lockbreak::encode::build_unit_qbf;
use lockbreak::locking::{choose_protected_inputs, lock, LockSpec, LockedBundle, Scheme};
use lockbreak::netlist::library::random_circuit;
use lockbreak::netlist::{randomize_structure, Tri};
use lockbreak::solve::{expand_2qbf, solve_2qbf};

fn small_bundle(seed: u64, scheme: Scheme, n_prot: usize) -> Option<LockedBundle> {
    let c = random_circuit(8, 2, 30, seed);
    let prot = choose_protected_inputs(&c, n_prot, seed).ok()?;
    Some(
        lock(&c, &LockSpec::random(scheme, prot, seed))
            .ok()?
            .randomized(seed ^ 0x55),
    )
}

fn scheme() -> impl Strategy<Value = Scheme> {
    proptest::sample::select(Scheme::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn secret_key_restores_function(seed in 0u64..10_000, s in scheme(), n in 2usize..5) {
        let Some(b) = small_bundle(seed, s, n) else { return Ok(()) };
        let key = common::key_map(&b, &b.spec.secret_key);
        prop_assert!(verify_key(&b.locked, &key, Reference::Original(&b.original)).unwrap());
    }

    #[test]
    fn randomize_structure_preserves_function(seed in 0u64..10_000, r in 0u64..1000) {
        let c = random_circuit(7, 2, 25, seed);
        let d = randomize_structure(&c, r);
        prop_assert!(common::brute_equivalent(&c, &d, &BTreeMap::new()));
    }

    #[test]
    fn unit_and_usc_recompose_to_locked(seed in 0u64..10_000, s in scheme(), n in 2usize..5) {
        let Some(b) = small_bundle(seed, s, n) else { return Ok(()) };
        let r = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
        prop_assert!(r.usc.key_inputs().is_empty());
        prop_assert!(r.usc.inputs().iter().all(|i| !b.locked.is_key_input(i)));
        let back = recompose(&b.locked, &r.unit, &r.usc, &r.cs1.net).unwrap();
        prop_assert!(common::brute_equivalent(&b.locked, &back, &BTreeMap::new()));
    }

    #[test]
    fn qbf_keys_unlock(seed in 0u64..10_000, n in 2usize..5) {
        let s = [Scheme::Sarlock, Scheme::Antisat, Scheme::Caslock, Scheme::GenAntisat][(seed % 4) as usize];
        let Some(b) = small_bundle(seed, s, n) else { return Ok(()) };
        let r = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
        if let Some(k) = &r.qbf.key {
            let key = k.iter().map(|(n, v)| (n.clone(), Tri::from_bool(*v))).collect();
            prop_assert!(verify_key(&b.locked, &key, Reference::Original(&b.original)).unwrap());
        }
    }

    #[test]
    fn candidate_order_is_deterministic(seed in 0u64..10_000, n in 2usize..6) {
        let s = if seed % 2 == 0 { Scheme::Ttlock } else { Scheme::Cac };
        let Some(b) = small_bundle(seed, s, n) else { return Ok(()) };
        let r = removal_phase(&b.locked, &AttackConfig::default()).unwrap();
        let sub = extract_locked_subcircuit(&r.usc, &r.cs1.net, r.nonflip).unwrap();
        let a = generate_candidates(&sub, &r.ppis, None);
        let c = generate_candidates(&sub, &r.ppis, None);
        prop_assert_eq!(&a, &c);
        prop_assert!(a.windows(2).all(|w| w[0].pattern.x_count() <= w[1].pattern.x_count()));
    }

    #[test]
    fn scores_are_bounded(seed in 0u64..10_000, s in scheme(), guess in proptest::collection::vec(0u8..3, 8)) {
        let Some(b) = small_bundle(seed, s, 3) else { return Ok(()) };
        let bits: BTreeMap<String, Tri> = b
            .key_names()
            .into_iter()
            .zip(guess.iter().cycle())
            .map(|(k, g)| (k, [Tri::Zero, Tri::One, Tri::X][*g as usize]))
            .collect();
        let (cdk, dk) = score_guess(&b, &bits);
        prop_assert!(cdk <= dk && dk <= b.spec.key_width);
    }

    #[test]
    fn cegar_matches_expansion(seed in 0u64..10_000, total in 2usize..10, v in any::<bool>()) {
        let c = random_circuit(total, 1, 3 * total, seed);
        let split = 1 + (seed as usize) % (total - 1);
        let (p, k) = c.inputs().split_at(split);
        let q = build_unit_qbf(&c, p, k, v).unwrap();
        prop_assert_eq!(solve_2qbf(&q, None).status, expand_2qbf(&q, 12).unwrap().status);
    }
}
