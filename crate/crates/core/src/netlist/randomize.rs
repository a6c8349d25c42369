use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Circuit, Gate, GateKind};

/// Function-preserving local rewrites driven by `seed`, with a rewrite
/// budget equal to the gate count.
pub fn randomize_structure(c: &Circuit, seed: u64) -> Circuit {
    randomize_structure_with_budget(c, seed, c.gates().len())
}

/// Applies at most `budget` rewrites: De Morgan flips, AND/OR tree splits,
/// XOR/XNOR polarity swaps, double inversions, and buffer insertion or
/// removal. Interface nets keep their names.
pub fn randomize_structure_with_budget(c: &Circuit, seed: u64, budget: usize) -> Circuit {
    if budget == 0 {
        return c.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names: HashSet<String> = c
        .inputs()
        .iter()
        .chain(c.gates().iter().map(|g| &g.output))
        .cloned()
        .collect();
    let outputs: HashSet<&str> = c.outputs().iter().map(|s| s.as_str()).collect();
    let mut counter = 0usize;
    let mut fresh = |stem: &str, names: &mut HashSet<String>| loop {
        counter += 1;
        let n = format!("{stem}_r{counter}");
        if names.insert(n.clone()) {
            return n;
        }
    };
    let mut alias: HashMap<String, String> = HashMap::new();
    let mut out: Vec<Gate> = Vec::with_capacity(c.gates().len() * 2);
    let mut left = budget;

    for &gi in c.topo_order() {
        let src = &c.gates()[gi];
        let mut g = Gate {
            output: src.output.clone(),
            kind: src.kind,
            fanins: src
                .fanins
                .iter()
                .map(|f| alias.get(f).cloned().unwrap_or_else(|| f.clone()))
                .collect(),
        };
        if left == 0 || !rng.gen_bool(0.5) {
            out.push(g);
            continue;
        }
        left -= 1;
        let o = g.output.clone();
        match (g.kind, rng.gen_range(0..4u8)) {
            (GateKind::Buf, _) if !outputs.contains(o.as_str()) => {
                // bypass
                alias.insert(o, g.fanins[0].clone());
            }
            (GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor, 0) => {
                let mut inv = Vec::with_capacity(g.fanins.len());
                for f in &g.fanins {
                    let n = fresh(&o, &mut names);
                    out.push(Gate {
                        output: n.clone(),
                        kind: GateKind::Not,
                        fanins: vec![f.clone()],
                    });
                    inv.push(n);
                }
                g.kind = match g.kind {
                    GateKind::And => GateKind::Nor,
                    GateKind::Nand => GateKind::Or,
                    GateKind::Or => GateKind::Nand,
                    _ => GateKind::And,
                };
                g.fanins = inv;
                out.push(g);
            }
            (GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor, 1)
                if g.fanins.len() >= 3 =>
            {
                let base = match g.kind {
                    GateKind::And | GateKind::Nand => GateKind::And,
                    _ => GateKind::Or,
                };
                let split = rng.gen_range(2..g.fanins.len());
                let t = fresh(&o, &mut names);
                let rest = g.fanins.split_off(split);
                out.push(Gate {
                    output: t.clone(),
                    kind: base,
                    fanins: std::mem::take(&mut g.fanins),
                });
                g.fanins = std::iter::once(t).chain(rest).collect();
                out.push(g);
            }
            (GateKind::Xor | GateKind::Xnor, 0 | 1) if g.fanins.len() == 2 => {
                let i = rng.gen_range(0..2);
                let n = fresh(&o, &mut names);
                out.push(Gate {
                    output: n.clone(),
                    kind: GateKind::Not,
                    fanins: vec![g.fanins[i].clone()],
                });
                g.fanins[i] = n;
                g.kind = if g.kind == GateKind::Xor {
                    GateKind::Xnor
                } else {
                    GateKind::Xor
                };
                out.push(g);
            }
            (
                GateKind::And
                | GateKind::Nand
                | GateKind::Or
                | GateKind::Nor
                | GateKind::Xor
                | GateKind::Xnor,
                2,
            ) => {
                let t = fresh(&o, &mut names);
                let flipped = match g.kind {
                    GateKind::And => GateKind::Nand,
                    GateKind::Nand => GateKind::And,
                    GateKind::Or => GateKind::Nor,
                    GateKind::Nor => GateKind::Or,
                    GateKind::Xor => GateKind::Xnor,
                    _ => GateKind::Xor,
                };
                out.push(Gate {
                    output: t.clone(),
                    kind: flipped,
                    fanins: std::mem::take(&mut g.fanins),
                });
                out.push(Gate {
                    output: o,
                    kind: GateKind::Not,
                    fanins: vec![t],
                });
            }
            _ if !g.fanins.is_empty() => {
                let i = rng.gen_range(0..g.fanins.len());
                let b = fresh(&o, &mut names);
                out.push(Gate {
                    output: b.clone(),
                    kind: GateKind::Buf,
                    fanins: vec![g.fanins[i].clone()],
                });
                g.fanins[i] = b;
                out.push(g);
            }
            _ => out.push(g),
        }
    }
    Circuit::new(
        c.name().to_string(),
        c.inputs().to_vec(),
        c.key_inputs().to_vec(),
        c.outputs().to_vec(),
        out,
    )
    .expect("local rewrites keep the circuit valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::library;

    fn equivalent_exhaustive(a: &Circuit, b: &Circuit) -> bool {
        let n = a.inputs().len();
        assert!(n <= 14);
        (0..1u64 << n).all(|x| {
            let ins: Vec<bool> = (0..n).map(|i| (x >> i) & 1 == 1).collect();
            a.eval_bool(&ins) == b.eval_bool(&ins)
        })
    }

    #[test]
    fn zero_budget_is_identity() {
        let c = library::c17();
        assert_eq!(randomize_structure_with_budget(&c, 9, 0), c);
    }

    #[test]
    fn deterministic_per_seed_and_equivalent() {
        let c = library::c17();
        for seed in 0..50 {
            let a = randomize_structure(&c, seed);
            assert_eq!(a, randomize_structure(&c, seed));
            assert!(equivalent_exhaustive(&c, &a), "seed {seed}");
            assert_eq!(a.outputs(), c.outputs());
        }
        for seed in 0..50 {
            let r = library::random_circuit(10, 4, 60, seed);
            let a = randomize_structure(&r, seed ^ 77);
            assert!(equivalent_exhaustive(&r, &a), "seed {seed}");
        }
    }
}
