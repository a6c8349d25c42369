use std::collections::{BTreeMap, HashMap};

use super::{Circuit, Gate, GateKind, NetlistError, Result};

/// Replacement for an input net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Substitution {
    Const(bool),
    Net(String),
    /// Complement of another input.
    InvertedNet(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sig {
    Const(bool),
    Net(String),
}

/// Replaces inputs per `map`, propagates constants, simplifies and removes
/// dead gates. Replaced inputs disappear from the interface; replacement
/// nets must be inputs that are not themselves replaced.
pub fn substitute(c: &Circuit, map: &BTreeMap<String, Substitution>) -> Result<Circuit> {
    for (net, sub) in map {
        if !c.is_input(net) {
            return Err(NetlistError::NotAnInput(net.clone()));
        }
        if let Substitution::Net(t) | Substitution::InvertedNet(t) = sub {
            if !c.is_input(t) || map.contains_key(t) {
                return Err(NetlistError::NotAnInput(t.clone()));
            }
        }
    }
    let mut sig: HashMap<&str, Sig> = HashMap::new();
    let mut out_gates: Vec<Gate> = Vec::new();
    // emitted NOT gates: output -> fanin, for double-negation folding
    let mut inverters: HashMap<String, String> = HashMap::new();

    for n in c.inputs() {
        let s = match map.get(n) {
            None => Sig::Net(n.clone()),
            Some(Substitution::Const(b)) => Sig::Const(*b),
            Some(Substitution::Net(t)) => Sig::Net(t.clone()),
            Some(Substitution::InvertedNet(t)) => {
                out_gates.push(Gate {
                    output: n.clone(),
                    kind: GateKind::Not,
                    fanins: vec![t.clone()],
                });
                inverters.insert(n.clone(), t.clone());
                Sig::Net(n.clone())
            }
        };
        sig.insert(n.as_str(), s);
    }

    for &gi in c.topo_order() {
        let g = &c.gates()[gi];
        let fanins: Vec<Sig> = g.fanins.iter().map(|f| sig[f.as_str()].clone()).collect();
        let s = simplify_gate(g, fanins, &mut out_gates, &mut inverters);
        sig.insert(g.output.as_str(), s);
    }

    for o in c.outputs() {
        match &sig[o.as_str()] {
            Sig::Net(n) if n == o => {}
            Sig::Net(n) => out_gates.push(Gate {
                output: o.clone(),
                kind: GateKind::Buf,
                fanins: vec![n.clone()],
            }),
            Sig::Const(b) => out_gates.push(Gate {
                output: o.clone(),
                kind: if *b {
                    GateKind::Const1
                } else {
                    GateKind::Const0
                },
                fanins: vec![],
            }),
        }
    }

    let inputs: Vec<String> = c
        .inputs()
        .iter()
        .filter(|n| !map.contains_key(*n))
        .cloned()
        .collect();
    let keys: Vec<String> = c
        .key_inputs()
        .iter()
        .filter(|n| !map.contains_key(*n))
        .cloned()
        .collect();
    let out = Circuit::new(
        c.name().to_string(),
        inputs,
        keys,
        c.outputs().to_vec(),
        out_gates,
    )?;
    Ok(out.sweep())
}

/// Constant propagation and local simplification without substitution.
pub fn simplify(c: &Circuit) -> Circuit {
    substitute(c, &BTreeMap::new()).expect("empty substitution is always valid")
}

fn emit_not(
    out: &str,
    a: String,
    gates: &mut Vec<Gate>,
    inverters: &mut HashMap<String, String>,
) -> Sig {
    if let Some(src) = inverters.get(&a) {
        return Sig::Net(src.clone());
    }
    gates.push(Gate {
        output: out.to_string(),
        kind: GateKind::Not,
        fanins: vec![a.clone()],
    });
    inverters.insert(out.to_string(), a);
    Sig::Net(out.to_string())
}

fn simplify_gate(
    g: &Gate,
    fanins: Vec<Sig>,
    gates: &mut Vec<Gate>,
    inverters: &mut HashMap<String, String>,
) -> Sig {
    let inv = g.kind.is_inverting();
    match g.kind {
        GateKind::Const0 => Sig::Const(false),
        GateKind::Const1 => Sig::Const(true),
        GateKind::Buf => fanins.into_iter().next().unwrap(),
        GateKind::Not => match fanins.into_iter().next().unwrap() {
            Sig::Const(b) => Sig::Const(!b),
            Sig::Net(a) => emit_not(&g.output, a, gates, inverters),
        },
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            let ctrl = g.kind.controlling_value().unwrap();
            let mut nets: Vec<String> = Vec::with_capacity(fanins.len());
            for f in fanins {
                match f {
                    Sig::Const(b) if b == ctrl => return Sig::Const(ctrl ^ inv),
                    Sig::Const(_) => {}
                    Sig::Net(n) => {
                        if !nets.contains(&n) {
                            nets.push(n);
                        }
                    }
                }
            }
            // absorption: a | (a & b) == a, a & (a | b) == a
            let dual = if ctrl { GateKind::And } else { GateKind::Or };
            let absorbed: Vec<String> = nets
                .iter()
                .filter(|n| {
                    gates
                        .iter()
                        .rev()
                        .find(|g| &g.output == *n)
                        .is_some_and(|d| {
                            d.kind == dual && d.fanins.iter().any(|f| f != *n && nets.contains(f))
                        })
                })
                .cloned()
                .collect();
            nets.retain(|n| !absorbed.contains(n));
            // a & !a or a | !a
            for n in &nets {
                if let Some(src) = inverters.get(n) {
                    if nets.contains(src) {
                        return Sig::Const(ctrl ^ inv);
                    }
                }
            }
            match nets.len() {
                0 => Sig::Const(!ctrl ^ inv),
                1 => {
                    let a = nets.pop().unwrap();
                    if inv {
                        emit_not(&g.output, a, gates, inverters)
                    } else {
                        Sig::Net(a)
                    }
                }
                _ => {
                    gates.push(Gate {
                        output: g.output.clone(),
                        kind: g.kind,
                        fanins: nets,
                    });
                    Sig::Net(g.output.clone())
                }
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut parity = g.kind == GateKind::Xnor;
            let mut count: BTreeMap<String, usize> = BTreeMap::new();
            let mut order: Vec<String> = Vec::new();
            for f in fanins {
                match f {
                    Sig::Const(b) => parity ^= b,
                    Sig::Net(n) => {
                        let e = count.entry(n.clone()).or_insert(0);
                        if *e == 0 {
                            order.push(n);
                        }
                        *e += 1;
                    }
                }
            }
            let mut nets: Vec<String> = order.into_iter().filter(|n| count[n] % 2 == 1).collect();
            // a ^ !a == 1
            let mut i = 0;
            while i < nets.len() {
                let partner = inverters
                    .get(&nets[i])
                    .and_then(|src| nets.iter().position(|n| n == src));
                if let Some(j) = partner {
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    nets.remove(hi);
                    nets.remove(lo);
                    parity = !parity;
                    i = 0;
                } else {
                    i += 1;
                }
            }
            match nets.len() {
                0 => Sig::Const(parity),
                1 => {
                    let a = nets.pop().unwrap();
                    if parity {
                        emit_not(&g.output, a, gates, inverters)
                    } else {
                        Sig::Net(a)
                    }
                }
                _ => {
                    gates.push(Gate {
                        output: g.output.clone(),
                        kind: if parity {
                            GateKind::Xnor
                        } else {
                            GateKind::Xor
                        },
                        fanins: nets,
                    });
                    Sig::Net(g.output.clone())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::library;
    use crate::netlist::sim::{exhaustive_block, exhaustive_blocks};

    fn one(net: &str, s: Substitution) -> BTreeMap<String, Substitution> {
        BTreeMap::from([(net.to_string(), s)])
    }

    /// Exhaustively compares `sub` against `orig` with the substitution applied as inputs.
    fn check_cofactor(orig: &Circuit, sub: &Circuit, map: &BTreeMap<String, Substitution>) {
        let n = sub.inputs().len();
        let (blocks, mask) = exhaustive_blocks(n);
        for b in 0..blocks {
            let w = exhaustive_block(n, b);
            let val = |name: &str| w[sub.inputs().iter().position(|x| x == name).unwrap()];
            let ow: Vec<u64> = orig
                .inputs()
                .iter()
                .map(|i| match map.get(i) {
                    None => val(i),
                    Some(Substitution::Const(v)) => {
                        if *v {
                            !0
                        } else {
                            0
                        }
                    }
                    Some(Substitution::Net(t)) => val(t),
                    Some(Substitution::InvertedNet(t)) => !val(t),
                })
                .collect();
            let a = orig.eval_words(&ow);
            let s = sub.eval_words(&w);
            for (x, y) in a.iter().zip(&s) {
                assert_eq!(x & mask, y & mask);
            }
        }
    }

    #[test]
    fn majority_cofactors() {
        let c = library::majority();
        let hi = substitute(&c, &one("x1", Substitution::Const(true))).unwrap();
        assert_eq!(hi.gates().len(), 1);
        assert_eq!(hi.gates()[0].kind, GateKind::Or);
        let mut f = hi.gates()[0].fanins.clone();
        f.sort();
        assert_eq!(f, vec!["x2", "x3"]);
        let lo = substitute(&c, &one("x1", Substitution::Const(false))).unwrap();
        let logic: Vec<&Gate> = lo
            .gates()
            .iter()
            .filter(|g| g.kind != GateKind::Buf)
            .collect();
        assert_eq!(logic.len(), 1);
        assert_eq!(logic[0].kind, GateKind::And);
        check_cofactor(&c, &hi, &one("x1", Substitution::Const(true)));
        check_cofactor(&c, &lo, &one("x1", Substitution::Const(false)));
    }

    #[test]
    fn rejects_non_input() {
        let c = library::majority();
        assert!(matches!(
            substitute(&c, &one("maj", Substitution::Const(true))),
            Err(NetlistError::NotAnInput(_))
        ));
    }

    #[test]
    fn xor_with_constant_passes_through() {
        let c = crate::netlist::parse_bench("INPUT(k)\nINPUT(x)\nOUTPUT(o)\no = XOR(k, x)\n", "k")
            .unwrap();
        let s0 = substitute(&c, &one("k", Substitution::Const(false))).unwrap();
        assert_eq!(s0.gates()[0].kind, GateKind::Buf);
        let s1 = substitute(&c, &one("k", Substitution::Const(true))).unwrap();
        assert_eq!(s1.gates()[0].kind, GateKind::Not);
        let same = substitute(&c, &one("x", Substitution::Net("k".into()))).unwrap();
        assert_eq!(same.gates()[0].kind, GateKind::Const0);
        let opp = substitute(&c, &one("x", Substitution::InvertedNet("k".into()))).unwrap();
        assert_eq!(opp.gates().last().unwrap().kind, GateKind::Const1);
    }

    #[test]
    fn random_substitutions_preserve_cofactor() {
        for seed in 0..200u64 {
            let c = library::random_circuit(7, 3, 30, seed);
            let ins = c.inputs().to_vec();
            let mut map = BTreeMap::new();
            map.insert(
                ins[(seed % 7) as usize].clone(),
                Substitution::Const(seed % 2 == 0),
            );
            let a = ins[((seed + 3) % 7) as usize].clone();
            let b = ins[((seed + 5) % 7) as usize].clone();
            if seed % 3 == 0 {
                map.insert(a, Substitution::InvertedNet(b));
            } else {
                map.insert(a, Substitution::Net(b));
            }
            let s = substitute(&c, &map).unwrap();
            check_cofactor(&c, &s, &map);
            assert!(s.gates().len() <= c.gates().len() + 2);
        }
    }
}
