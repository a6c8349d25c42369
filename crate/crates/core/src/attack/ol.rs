use std::collections::BTreeMap;
use std::time::Instant;

use super::removal::{extract_locked_subcircuit, RemovalResult};
use super::{AttackConfig, AttackReport, Classification, Confidence, Mode, Result};
use crate::netlist::{substitute, Circuit, GateKind, Substitution, Tri};

/// Non-constant gates and their fanin literals, compared in that order.
fn cost(c: &Circuit) -> (usize, usize) {
    c.gates()
        .iter()
        .filter(|g| !matches!(g.kind, GateKind::Const0 | GateKind::Const1))
        .fold((0, 0), |(n, l), g| (n + 1, l + g.fanins.len()))
}

/// Per key: simplify under k=0 and k=1 and guess the value that removes
/// more gates, then more literals; X on a tie or when `k` is not an input.
pub fn constant_propagation_guess(c: &Circuit, keys: &[String]) -> Result<BTreeMap<String, Tri>> {
    let mut out = BTreeMap::new();
    for k in keys {
        if !c.is_input(k) {
            out.insert(k.clone(), Tri::X);
            continue;
        }
        let mut left = [(0usize, 0usize); 2];
        for (v, slot) in left.iter_mut().enumerate() {
            let mut m = BTreeMap::new();
            m.insert(k.clone(), Substitution::Const(v == 1));
            *slot = cost(&substitute(c, &m)?);
        }
        let guess = match left[0].cmp(&left[1]) {
            std::cmp::Ordering::Less => Tri::Zero,
            std::cmp::Ordering::Greater => Tri::One,
            std::cmp::Ordering::Equal => Tri::X,
        };
        out.insert(k.clone(), guess);
    }
    Ok(out)
}

/// The unit with every protected input tied to 0.
pub fn ppi_stripped_unit(removal: &RemovalResult) -> Result<Circuit> {
    let map = removal
        .ppis
        .iter()
        .map(|p| (p.clone(), Substitution::Const(false)))
        .collect();
    Ok(substitute(&removal.unit, &map)?)
}

/// The locked subcircuit with each protected input replaced by its
/// associated key (inverted when the pair matches on differing values).
pub fn ppi_substituted_subcircuit(removal: &RemovalResult) -> Result<Circuit> {
    let sub = extract_locked_subcircuit(&removal.usc, &removal.cs1.net, removal.nonflip)?;
    let links: Vec<(String, String, bool)> = removal
        .associations
        .pairs
        .iter()
        .filter(|a| sub.is_input(&a.ppi))
        .filter_map(|a| {
            a.keys
                .first()
                .map(|l| (a.ppi.clone(), l.key.clone(), l.offset))
        })
        .collect();
    let (name, mut inputs, _, outputs, gates) = sub.into_parts();
    let mut keys: Vec<String> = Vec::new();
    for (_, k, _) in &links {
        if !keys.contains(k) {
            keys.push(k.clone());
        }
    }
    inputs.extend(keys.iter().cloned());
    let widened = Circuit::new(name, inputs, keys, outputs, gates)?;
    let map = links
        .into_iter()
        .map(|(x, k, off)| {
            let s = if off {
                Substitution::InvertedNet(k)
            } else {
                Substitution::Net(k)
            };
            (x, s)
        })
        .collect();
    Ok(substitute(&widened, &map)?)
}

/// Oracle-less key recovery. QBF keys are kept as proven; otherwise the
/// guesser runs on the PPI-stripped unit (single flip) or on the
/// PPI-substituted locked subcircuit (restore unit).
pub fn ol_attack(
    locked: &Circuit,
    removal: &RemovalResult,
    _cfg: &AttackConfig,
) -> Result<AttackReport> {
    let start = Instant::now();
    let mut r = AttackReport::new(locked.name(), Mode::Ol, removal);
    if let Some(key) = &removal.qbf.key {
        for (k, v) in key {
            r.set_bit(k, Tri::from_bool(*v), Confidence::Proven);
        }
        r.verified = true;
    } else {
        let target = if removal.classification == Classification::RestoreUnit {
            ppi_substituted_subcircuit(removal)?
        } else {
            ppi_stripped_unit(removal)?
        };
        for (k, v) in constant_propagation_guess(&target, &removal.keys)? {
            r.set_bit(&k, v, Confidence::Guessed);
        }
    }
    r.refresh();
    r.verified &= r.all_proven();
    r.timings.ol_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}
