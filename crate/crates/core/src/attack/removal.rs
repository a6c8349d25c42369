use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sorted_keys, AttackConfig, AttackError, Classification, Result};
use crate::encode::{build_miter, build_unit_qbf, tseitin, PairHint};
use crate::netlist::{fanin_cone, fanout_cone, Circuit, Gate, GateKind, Substitution};
use crate::solve::{solve_2qbf, solve_sat, QbfStatus, SatStatus, SolverStats};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalSignal {
    pub net: String,
    /// Other nets passing the same test at the same level.
    pub ambiguous: Vec<String>,
}

/// One key input meeting a protected input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyLink {
    pub key: String,
    /// The pair matches when `ppi XOR key == offset`.
    pub offset: bool,
    /// Gate where the pair meets.
    pub gate: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Association {
    pub ppi: String,
    pub keys: Vec<KeyLink>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Associations {
    /// In unit input order.
    pub pairs: Vec<Association>,
    pub unassociated_keys: Vec<String>,
}

impl Associations {
    /// Every PPI has exactly one key and every key is used once.
    pub fn is_one_to_one(&self) -> bool {
        let mut seen = HashSet::new();
        self.unassociated_keys.is_empty()
            && self
                .pairs
                .iter()
                .all(|a| a.keys.len() == 1 && seen.insert(a.keys[0].key.clone()))
    }

    pub fn get(&self, ppi: &str) -> Option<&Association> {
        self.pairs.iter().find(|a| a.ppi == ppi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QbfAttempt {
    pub cs1_value: bool,
    pub status: QbfStatus,
    pub iterations: usize,
    pub elapsed_ms: f64,
    #[serde(skip)]
    pub stats: SolverStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QbfOutcome {
    pub attempts: Vec<QbfAttempt>,
    /// Key values over the unit's key inputs, present on TRUE.
    pub key: Option<BTreeMap<String, bool>>,
    pub timed_out: bool,
}

#[derive(Debug, Clone)]
pub struct RemovalResult {
    pub cs1: CriticalSignal,
    pub unit: Circuit,
    pub usc: Circuit,
    /// Non-key inputs of the unit.
    pub ppis: Vec<String>,
    /// Key inputs of the locked circuit, `k_1` first.
    pub keys: Vec<String>,
    pub associations: Associations,
    /// Value cs1 takes when no flip is injected.
    pub nonflip: bool,
    pub qbf: QbfOutcome,
    pub classification: Classification,
}

/// Lowest-level net that every key reaches and that blocks all key paths
/// to the outputs. Ties at that level go to the first in topological
/// order and are reported as ambiguous.
pub fn find_critical_signal(locked: &Circuit) -> Result<CriticalSignal> {
    let keys: Vec<usize> = locked
        .key_inputs()
        .iter()
        .map(|k| locked.net_id(k).expect("key inputs are nets"))
        .collect();
    if keys.is_empty() {
        return Err(AttackError::NoKeys);
    }
    let n = locked.num_nets();
    let mut inter = vec![true; n];
    for &k in &keys {
        let m = locked.fanout_mask(&[k]);
        for (a, b) in inter.iter_mut().zip(m) {
            *a &= b;
        }
    }
    let base = locked.inputs().len();
    let mut pos = vec![0usize; n];
    for (i, p) in pos.iter_mut().enumerate().take(base) {
        *p = i;
    }
    for (i, &g) in locked.topo_order().iter().enumerate() {
        pos[base + g] = base + i;
    }
    let levels = locked.levels();
    let mut cands: Vec<usize> = (0..n).filter(|&i| inter[i]).collect();
    if cands.is_empty() {
        return Err(AttackError::NotSfltOrDflt(
            "key fanout cones share no net".into(),
        ));
    }
    cands.sort_by_key(|&i| (levels[i], pos[i]));

    let blocks_all = |blocked: usize| {
        let mut mark = vec![false; n];
        for &k in &keys {
            if k != blocked {
                mark[k] = true;
            }
        }
        for &g in locked.topo_order() {
            let out = base + g;
            if out != blocked && locked.fanin_ids(g).iter().any(|&f| mark[f]) {
                mark[out] = true;
            }
        }
        !locked.output_ids().iter().any(|&o| mark[o])
    };
    let first = cands.iter().position(|&c| blocks_all(c)).ok_or_else(|| {
        AttackError::NotSfltOrDflt("no common net dominates all key paths".into())
    })?;
    let lvl = levels[cands[first]];
    let ambiguous = cands[first + 1..]
        .iter()
        .take_while(|&&c| levels[c] == lvl)
        .filter(|&&c| blocks_all(c))
        .map(|&c| locked.net_name(c).to_string())
        .collect();
    Ok(CriticalSignal {
        net: locked.net_name(cands[first]).to_string(),
        ambiguous,
    })
}

/// Splits `locked` at `cs1` into the unit driving it and the unit-stripped
/// circuit, where cs1 is a primary input. Shared logic stays in both.
pub fn extract_unit(locked: &Circuit, cs1: &str) -> Result<(Circuit, Circuit)> {
    let unit = fanin_cone(locked, cs1)?.with_name(format!("{}_unit", locked.name()));
    let gates: Vec<Gate> = locked
        .gates()
        .iter()
        .filter(|g| g.output != cs1)
        .cloned()
        .collect();
    let mut inputs: Vec<String> = locked
        .inputs()
        .iter()
        .filter(|i| i.as_str() != cs1)
        .cloned()
        .collect();
    inputs.push(cs1.to_string());
    let keys: Vec<String> = locked
        .key_inputs()
        .iter()
        .filter(|k| k.as_str() != cs1)
        .cloned()
        .collect();
    let swept = Circuit::new(
        format!("{}_usc", locked.name()),
        inputs,
        keys.clone(),
        locked.outputs().to_vec(),
        gates,
    )?
    .sweep();
    let key_set: HashSet<&String> = keys.iter().collect();
    if let Some(g) = swept
        .gates()
        .iter()
        .find(|g| g.fanins.iter().any(|f| key_set.contains(f)))
    {
        return Err(AttackError::NotSfltOrDflt(format!(
            "key reaches `{}` outside the unit",
            g.output
        )));
    }
    if let Some(o) = swept.outputs().iter().find(|o| key_set.contains(o)) {
        return Err(AttackError::NotSfltOrDflt(format!(
            "key `{o}` is an output"
        )));
    }
    let (name, inputs, _, outputs, gates) = swept.into_parts();
    let inputs = inputs
        .into_iter()
        .filter(|i| !key_set.contains(i))
        .collect();
    let usc = Circuit::new(name, inputs, vec![], outputs, gates)?;
    Ok((unit, usc))
}

/// Reconnects `unit` to `usc` at `cs1`. Unit gates whose names clash with
/// the USC are renamed; the result has the locked circuit's interface.
pub fn recompose(locked: &Circuit, unit: &Circuit, usc: &Circuit, cs1: &str) -> Result<Circuit> {
    let unit_out = &unit.outputs()[0];
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut taken: HashSet<String> = usc
        .inputs()
        .iter()
        .chain(usc.gates().iter().map(|g| &g.output))
        .cloned()
        .collect();
    taken.extend(locked.inputs().iter().cloned());
    for g in unit.gates() {
        if g.output == *unit_out {
            continue;
        }
        if taken.contains(&g.output) {
            let fresh = (1..)
                .map(|i| format!("{}_u{i}", g.output))
                .find(|n| !taken.contains(n) && !unit.contains(n))
                .unwrap();
            taken.insert(fresh.clone());
            rename.insert(g.output.clone(), fresh);
        }
    }
    rename.insert(unit_out.clone(), cs1.to_string());
    let map = |n: &String| rename.get(n).cloned().unwrap_or_else(|| n.clone());
    let mut gates: Vec<Gate> = usc.gates().to_vec();
    // an input cs1 is already shared by both sides
    if !locked.is_input(cs1) {
        for g in unit.gates() {
            gates.push(Gate {
                output: map(&g.output),
                kind: g.kind,
                fanins: g.fanins.iter().map(map).collect(),
            });
        }
    }
    Ok(Circuit::new(
        format!("{}_recomposed", locked.name()),
        locked.inputs().to_vec(),
        locked.key_inputs().to_vec(),
        locked.outputs().to_vec(),
        gates,
    )?)
}

/// Follows NOT/BUF chains back to their source; returns the source and the
/// inversion parity.
fn strip(c: &Circuit, net: &str) -> (String, bool) {
    let mut n = net.to_string();
    let mut inv = false;
    while let Some(g) = c.gate_of(&n) {
        match g.kind {
            GateKind::Not => inv = !inv,
            GateKind::Buf => {}
            _ => break,
        }
        n = g.fanins[0].clone();
    }
    (n, inv)
}

/// Finds, for each protected input, the XOR/XNOR gates that combine it
/// (up to inversion) with a key input. Offsets are read structurally.
pub fn associate_ppi_keys(unit: &Circuit) -> Associations {
    let mut links: BTreeMap<String, Vec<KeyLink>> = BTreeMap::new();
    for &gi in unit.topo_order() {
        let g = &unit.gates()[gi];
        if !matches!(g.kind, GateKind::Xor | GateKind::Xnor) || g.fanins.len() != 2 {
            continue;
        }
        let (a, pa) = strip(unit, &g.fanins[0]);
        let (b, pb) = strip(unit, &g.fanins[1]);
        let (x, k) = match (unit.is_key_input(&a), unit.is_key_input(&b)) {
            (false, true) if unit.is_input(&a) => (a, b),
            (true, false) if unit.is_input(&b) => (b, a),
            _ => continue,
        };
        let offset = (pa ^ pb) ^ (g.kind == GateKind::Xor);
        let entry = links.entry(x).or_default();
        if !entry.iter().any(|l| l.key == k) {
            entry.push(KeyLink {
                key: k,
                offset,
                gate: g.output.clone(),
            });
        }
    }
    let mut used = HashSet::new();
    let pairs: Vec<Association> = unit
        .inputs()
        .iter()
        .filter(|i| !unit.is_key_input(i))
        .filter_map(|x| {
            links.remove(x).map(|keys| {
                used.extend(keys.iter().map(|l| l.key.clone()));
                Association {
                    ppi: x.clone(),
                    keys,
                }
            })
        })
        .collect();
    let unassociated_keys = unit
        .key_inputs()
        .iter()
        .filter(|k| !used.contains(*k))
        .cloned()
        .collect();
    Associations {
        pairs,
        unassociated_keys,
    }
}

/// Value the unit output takes on most of 1024 random vectors.
pub fn nonflip_value(unit: &Circuit) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e66);
    let mut ones = 0u32;
    for _ in 0..16 {
        let ins: Vec<u64> = unit.inputs().iter().map(|_| rng.gen()).collect();
        ones += unit.eval_words(&ins)[0].count_ones();
    }
    ones > 512
}

/// Solves `exists K forall PPI: cs1 = v` for v = 0, then 1.
pub fn qbf_key_recovery(
    unit: &Circuit,
    ppis: &[String],
    assoc: &Associations,
    timeout: Option<std::time::Duration>,
) -> Result<QbfOutcome> {
    let keys: Vec<String> = unit.key_inputs().to_vec();
    let mut out = QbfOutcome::default();
    for v in [false, true] {
        let mut q = build_unit_qbf(unit, ppis, &keys, v)?;
        for a in &assoc.pairs {
            for l in &a.keys {
                q.hints.push(PairHint {
                    forall_var: q.matrix.var_map[&a.ppi],
                    exists_var: q.matrix.var_map[&l.key],
                });
            }
        }
        let r = solve_2qbf(&q, timeout);
        out.attempts.push(QbfAttempt {
            cs1_value: v,
            status: r.status,
            iterations: r.iterations,
            elapsed_ms: r.elapsed.as_secs_f64() * 1e3,
            stats: r.stats,
        });
        match r.status {
            QbfStatus::True => {
                let km = r.key_model.expect("TRUE carries a model");
                out.key = Some(
                    keys.iter()
                        .map(|k| (k.clone(), km[&q.matrix.var_map[k]]))
                        .collect(),
                );
                return Ok(out);
            }
            QbfStatus::Timeout => out.timed_out = true,
            QbfStatus::False => {}
        }
    }
    Ok(out)
}

/// AND over pairs of `[x XOR k == offset]`, optionally complemented.
fn reference_comparator(
    unit: &Circuit,
    offsets: &[(String, String, bool)],
    negate: bool,
) -> Circuit {
    let mut gates = Vec::new();
    let mut bits = Vec::new();
    let mut taken: BTreeSet<String> = unit.inputs().iter().cloned().collect();
    let mut fresh = |stem: &str| {
        let n = (0..)
            .map(|i| format!("{stem}{i}"))
            .find(|n| !taken.contains(n))
            .unwrap();
        taken.insert(n.clone());
        n
    };
    for (x, k, off) in offsets {
        let o = fresh("ref_eq");
        let kind = if *off { GateKind::Xor } else { GateKind::Xnor };
        gates.push(Gate {
            output: o.clone(),
            kind,
            fanins: vec![x.clone(), k.clone()],
        });
        bits.push(o);
    }
    let out = fresh("ref_out");
    let kind = match (bits.len(), negate) {
        (1, false) => GateKind::Buf,
        (1, true) => GateKind::Not,
        (_, false) => GateKind::And,
        (_, true) => GateKind::Nand,
    };
    gates.push(Gate {
        output: out.clone(),
        kind,
        fanins: bits,
    });
    Circuit::new(
        "reference",
        unit.inputs().to_vec(),
        unit.key_inputs().to_vec(),
        vec![out],
        gates,
    )
    .expect("reference comparator is well formed")
}

fn equivalent(a: &Circuit, b: &Circuit, timeout: Option<std::time::Duration>) -> bool {
    match build_miter(a, b, &BTreeMap::new()) {
        Ok(f) => solve_sat(&f, timeout).status == SatStatus::Unsat,
        Err(_) => false,
    }
}

/// Offsets under which the unit is a comparator (or its complement) over
/// the associated pairs. Structural offsets are tried first; otherwise the
/// offsets are read from a SAT model of each unit output value.
pub fn comparator_offsets(
    unit: &Circuit,
    assoc: &Associations,
    timeout: Option<std::time::Duration>,
) -> Option<BTreeMap<String, bool>> {
    if !assoc.is_one_to_one() || assoc.pairs.is_empty() {
        return None;
    }
    let covered: BTreeSet<&String> = assoc
        .pairs
        .iter()
        .flat_map(|a| [&a.ppi, &a.keys[0].key])
        .collect();
    if unit.inputs().iter().any(|i| !covered.contains(i)) {
        return None;
    }
    let triples = |offs: &dyn Fn(&Association) -> bool| -> Vec<(String, String, bool)> {
        assoc
            .pairs
            .iter()
            .map(|a| (a.ppi.clone(), a.keys[0].key.clone(), offs(a)))
            .collect()
    };
    let matches = |t: &[(String, String, bool)]| {
        [false, true]
            .iter()
            .any(|&neg| equivalent(unit, &reference_comparator(unit, t, neg), timeout))
    };
    let to_map = |t: Vec<(String, String, bool)>| t.into_iter().map(|(x, _, o)| (x, o)).collect();

    let structural = triples(&|a| a.keys[0].offset);
    if matches(&structural) {
        return Some(to_map(structural));
    }
    let f = tseitin(unit);
    let out = f.var_map[&unit.outputs()[0]] as i32;
    for v in [true, false] {
        let mut g = f.clone();
        g.add_clause(vec![if v { out } else { -out }]);
        let r = solve_sat(&g, timeout);
        let Some(m) = r.model else { continue };
        let val = |n: &str| m[f.var_map[n] as usize];
        let t = triples(&|a| val(&a.ppi) ^ val(&a.keys[0].key));
        if matches(&t) {
            return Some(to_map(t));
        }
    }
    None
}

/// True iff the unit realizes a comparator over its associated pairs or
/// the complement of one.
pub fn comparator_check(unit: &Circuit, assoc: &Associations) -> bool {
    comparator_offsets(unit, assoc, None).is_some()
}

/// Fanin cones of the USC outputs reached by `cs1`, with cs1 tied to
/// `cs1_value`.
pub fn extract_locked_subcircuit(usc: &Circuit, cs1: &str, cs1_value: bool) -> Result<Circuit> {
    let reach = fanout_cone(usc, cs1)?;
    let outs: Vec<String> = usc
        .outputs()
        .iter()
        .filter(|o| reach.contains(*o))
        .cloned()
        .collect();
    if outs.is_empty() {
        return Err(AttackError::Malformed(cs1.to_string()));
    }
    let cone = usc.cone_circuit(&outs)?;
    let mut map = BTreeMap::new();
    map.insert(cs1.to_string(), Substitution::Const(cs1_value));
    Ok(crate::netlist::substitute(&cone, &map)?.with_name(format!("{}_sub", usc.name())))
}

/// Steps up to classification: critical signal, unit/USC split,
/// association, QBF pinning and the comparator check.
pub fn removal_phase(locked: &Circuit, cfg: &AttackConfig) -> Result<RemovalResult> {
    let cs1 = find_critical_signal(locked)?;
    let (unit, usc) = extract_unit(locked, &cs1.net)?;
    let mut associations = associate_ppi_keys(&unit);
    let ppis: Vec<String> = unit
        .inputs()
        .iter()
        .filter(|i| !unit.is_key_input(i))
        .cloned()
        .collect();
    let nonflip = nonflip_value(&unit);
    let qbf = qbf_key_recovery(&unit, &ppis, &associations, cfg.qbf_timeout)?;
    let classification = if qbf.key.is_some() {
        Classification::SfltKeyFound
    } else if let Some(offs) = comparator_offsets(&unit, &associations, cfg.sat_timeout) {
        for a in &mut associations.pairs {
            a.keys[0].offset = offs[&a.ppi];
        }
        Classification::RestoreUnit
    } else {
        Classification::Unknown
    };
    Ok(RemovalResult {
        cs1,
        unit,
        usc,
        ppis,
        keys: sorted_keys(locked),
        associations,
        nonflip,
        qbf,
        classification,
    })
}
