use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttackError, Result};
use crate::encode::build_miter;
use crate::locking::LockedBundle;
use crate::netlist::{
    exhaustive_block, exhaustive_blocks, substitute, Circuit, Gate, GateKind, Substitution, Tri,
};
use crate::oracle::OracleHandle;
use crate::solve::{solve_sat, SatStatus};

/// What a key is checked against.
pub enum Reference<'a> {
    Original(&'a Circuit),
    Oracle(&'a mut OracleHandle),
}

/// Largest primary-input count verified by enumeration; above it a miter
/// is solved instead.
pub const EXHAUSTIVE_LIMIT: usize = 24;
const ORACLE_VECTORS: usize = 256;

fn full_key(locked: &Circuit, key: &BTreeMap<String, Tri>) -> Result<BTreeMap<String, bool>> {
    locked
        .key_inputs()
        .iter()
        .map(|k| match key.get(k).and_then(|t| t.to_bool()) {
            Some(b) => Ok((k.clone(), b)),
            None => Err(AttackError::IncompleteKey(k.clone())),
        })
        .collect()
}

/// True iff `locked` under `key` matches the reference: exhaustively or by
/// miter against an original, on random vectors against an oracle.
pub fn verify_key(
    locked: &Circuit,
    key: &BTreeMap<String, Tri>,
    reference: Reference,
) -> Result<bool> {
    let key = full_key(locked, key)?;
    let pis = locked.primary_inputs();
    match reference {
        Reference::Original(orig) if pis.len() <= EXHAUSTIVE_LIMIT => {
            let (blocks, mask) = exhaustive_blocks(pis.len());
            let pi_pos: BTreeMap<&str, usize> = pis
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_str(), i))
                .collect();
            for b in 0..blocks {
                let ex = exhaustive_block(pis.len(), b);
                let lw: Vec<u64> = locked
                    .inputs()
                    .iter()
                    .map(|n| match pi_pos.get(n.as_str()) {
                        Some(&i) => ex[i],
                        None if key[n] => !0,
                        None => 0,
                    })
                    .collect();
                let ow: Vec<u64> = orig
                    .inputs()
                    .iter()
                    .map(|n| pi_pos.get(n.as_str()).map_or(0, |&i| ex[i]))
                    .collect();
                let a = locked.eval_words(&lw);
                let o = orig.eval_words(&ow);
                if a.iter().zip(&o).any(|(x, y)| (x ^ y) & mask != 0) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Reference::Original(orig) => {
            let map = key
                .iter()
                .map(|(k, v)| (k.clone(), Substitution::Const(*v)))
                .collect();
            let fixed = substitute(locked, &map)?;
            let f = build_miter(orig, &fixed, &BTreeMap::new())?;
            Ok(solve_sat(&f, None).status == SatStatus::Unsat)
        }
        Reference::Oracle(oracle) => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7665_7269);
            for _ in 0..ORACLE_VECTORS / 64 {
                let pw: Vec<u64> = pis.iter().map(|_| rng.gen()).collect();
                let want = oracle.query_words(&pw, 64)?;
                let mut it = pw.iter();
                let lw: Vec<u64> = locked
                    .inputs()
                    .iter()
                    .map(|n| match key.get(n) {
                        Some(true) => !0,
                        Some(false) => 0,
                        None => *it.next().expect("primary inputs in order"),
                    })
                    .collect();
                if locked.eval_words(&lw) != want {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// XORs every output of `fsc` with an OR of comparators, one per pattern
/// over `ppis`, undoing the flips at those patterns.
pub fn reconstruct_fsc_patch(
    fsc: &Circuit,
    ppis: &[String],
    patterns: &[Vec<bool>],
) -> Result<Circuit> {
    if patterns.is_empty() {
        return Err(AttackError::EmptyPatterns);
    }
    let mut taken: std::collections::HashSet<String> = fsc
        .inputs()
        .iter()
        .chain(fsc.gates().iter().map(|g| &g.output))
        .cloned()
        .collect();
    let mut fresh = |stem: &str| {
        let n = (0..)
            .map(|i| format!("{stem}{i}"))
            .find(|n| !taken.contains(n))
            .unwrap();
        taken.insert(n.clone());
        n
    };
    let mut inputs = fsc.inputs().to_vec();
    for p in ppis {
        if !inputs.contains(p) {
            inputs.push(p.clone());
        }
    }
    let mut gates: Vec<Gate> = Vec::new();
    let mut inverted: BTreeMap<&str, String> = BTreeMap::new();
    let mut terms = Vec::new();
    for pat in patterns {
        assert_eq!(pat.len(), ppis.len(), "pattern width");
        let mut lits = Vec::new();
        for (x, &v) in ppis.iter().zip(pat) {
            if v {
                lits.push(x.clone());
            } else {
                let n = inverted.entry(x.as_str()).or_insert_with(|| {
                    let n = fresh("patch_n");
                    gates.push(Gate::new(n.clone(), GateKind::Not, &[x.as_str()]));
                    n
                });
                lits.push(n.clone());
            }
        }
        let t = fresh("patch_t");
        let kind = if lits.len() == 1 {
            GateKind::Buf
        } else {
            GateKind::And
        };
        gates.push(Gate {
            output: t.clone(),
            kind,
            fanins: lits,
        });
        terms.push(t);
    }
    let hit = fresh("patch_hit");
    let kind = if terms.len() == 1 {
        GateKind::Buf
    } else {
        GateKind::Or
    };
    gates.push(Gate {
        output: hit.clone(),
        kind,
        fanins: terms,
    });
    let mut renamed: BTreeMap<String, String> = BTreeMap::new();
    let mut outputs = Vec::new();
    for o in fsc.outputs() {
        if fsc.is_input(o) {
            let n = fresh(&format!("{o}_patched"));
            gates.push(Gate::new(
                n.clone(),
                GateKind::Xor,
                &[o.as_str(), hit.as_str()],
            ));
            outputs.push(n);
        } else {
            let inner = fresh(&format!("{o}_fsc"));
            renamed.insert(o.clone(), inner.clone());
            gates.push(Gate::new(
                o.clone(),
                GateKind::Xor,
                &[inner.as_str(), hit.as_str()],
            ));
            outputs.push(o.clone());
        }
    }
    let map = |n: &String| renamed.get(n).cloned().unwrap_or_else(|| n.clone());
    let mut all: Vec<Gate> = fsc
        .gates()
        .iter()
        .map(|g| Gate {
            output: map(&g.output),
            kind: g.kind,
            fanins: g.fanins.iter().map(map).collect(),
        })
        .collect();
    all.extend(gates);
    Ok(Circuit::new(
        format!("{}_patched", fsc.name()),
        inputs,
        vec![],
        outputs,
        all,
    )?)
}

/// `(cdk, dk)`: correctly deciphered and deciphered key bits against the
/// bundle's secret. A complete key that unlocks the circuit scores fully.
/// Otherwise, for the Anti-SAT family, a pair with both bits deciphered
/// counts as correct when its XOR matches the secret's, since every such
/// key is functionally correct.
pub fn score_guess(bundle: &LockedBundle, bits: &BTreeMap<String, Tri>) -> (usize, usize) {
    let names = bundle.key_names();
    let secret = &bundle.spec.secret_key;
    let val = |i: usize| bits.get(&names[i]).and_then(|t| t.to_bool());
    let dk = (0..names.len()).filter(|&i| val(i).is_some()).count();
    if dk == names.len()
        && verify_key(&bundle.locked, bits, Reference::Original(&bundle.original)).unwrap_or(false)
    {
        return (dk, dk);
    }
    let mut cdk = 0;
    if bundle.spec.scheme.is_anti_sat_family() {
        let n = names.len() / 2;
        for j in 0..n {
            let (a, b) = (bundle.pairing[j], bundle.pairing[n + j]);
            match (val(a), val(b)) {
                (Some(x), Some(y)) => {
                    if x ^ y == secret[a] ^ secret[b] {
                        cdk += 2;
                    }
                }
                (Some(x), None) => cdk += (x == secret[a]) as usize,
                (None, Some(y)) => cdk += (y == secret[b]) as usize,
                (None, None) => {}
            }
        }
    } else {
        cdk = (0..names.len())
            .filter(|&i| val(i) == Some(secret[i]))
            .count();
    }
    (cdk, dk)
}
