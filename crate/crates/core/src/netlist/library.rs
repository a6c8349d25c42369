//! Built-in circuits: the 3-input majority function, ISCAS-85 c17, and a
//! seeded generator for random combinational circuits at ISCAS-like scale.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_bench, Circuit, Gate, GateKind, DEFAULT_KEY_PREFIX};

pub const MAJORITY_BENCH: &str = "\
# 3-input majority
INPUT(x1)
INPUT(x2)
INPUT(x3)
OUTPUT(maj)
a12 = AND(x1, x2)
a13 = AND(x1, x3)
a23 = AND(x2, x3)
maj = OR(a12, a13, a23)
";

pub const C17_BENCH: &str = "\
# c17
INPUT(G1)
INPUT(G2)
INPUT(G3)
INPUT(G6)
INPUT(G7)
OUTPUT(G22)
OUTPUT(G23)
G10 = NAND(G1, G3)
G11 = NAND(G3, G6)
G16 = NAND(G2, G11)
G19 = NAND(G11, G7)
G22 = NAND(G10, G16)
G23 = NAND(G16, G19)
";

pub fn majority() -> Circuit {
    parse_bench(MAJORITY_BENCH, DEFAULT_KEY_PREFIX)
        .unwrap()
        .with_name("majority")
}

pub fn c17() -> Circuit {
    parse_bench(C17_BENCH, DEFAULT_KEY_PREFIX)
        .unwrap()
        .with_name("c17")
}

/// Size profile for a synthetic circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Profile {
    pub name: &'static str,
    pub inputs: usize,
    pub outputs: usize,
    pub gates: usize,
}

/// Interface sizes of three ISCAS-85 benchmarks.
pub const C432_SCALE: Profile = Profile {
    name: "c432s",
    inputs: 36,
    outputs: 7,
    gates: 160,
};
pub const C880_SCALE: Profile = Profile {
    name: "c880s",
    inputs: 60,
    outputs: 26,
    gates: 383,
};
pub const C1355_SCALE: Profile = Profile {
    name: "c1355s",
    inputs: 41,
    outputs: 32,
    gates: 546,
};
/// Small enough for exhaustive verification.
pub const SMALL24: Profile = Profile {
    name: "s24",
    inputs: 24,
    outputs: 6,
    gates: 140,
};

pub fn synthetic(p: Profile, seed: u64) -> Circuit {
    random_circuit(p.inputs, p.outputs, p.gates, seed).with_name(format!("{}_{seed}", p.name))
}

/// Random circuit with `n_in` inputs `i0..`, exactly `n_out` outputs, and
/// roughly `n_gates` gates, every input used and every gate live.
pub fn random_circuit(n_in: usize, n_out: usize, n_gates: usize, seed: u64) -> Circuit {
    assert!(n_in >= 1 && n_out >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<String> = (0..n_in).map(|i| format!("i{i}")).collect();
    let mut nets: Vec<String> = inputs.clone();
    let mut gates: Vec<Gate> = Vec::new();
    let mut used = vec![0usize; n_in];
    let n_gates = n_gates.max(n_out);
    let pick_kind = |rng: &mut ChaCha8Rng| {
        let r = rng.gen_range(0..100);
        match r {
            0..=19 => GateKind::And,
            20..=39 => GateKind::Nand,
            40..=54 => GateKind::Or,
            55..=69 => GateKind::Nor,
            70..=79 => GateKind::Xor,
            80..=84 => GateKind::Xnor,
            _ => GateKind::Not,
        }
    };
    // first pass covers every input
    let mut pending: Vec<usize> = (0..n_in).collect();
    pending.shuffle(&mut rng);
    for i in 0..n_gates {
        let kind = pick_kind(&mut rng);
        let arity = match kind {
            GateKind::Not => 1,
            GateKind::Xor | GateKind::Xnor => 2,
            _ => rng.gen_range(2..=3),
        };
        let mut fanins: Vec<String> = Vec::with_capacity(arity);
        while fanins.len() < arity {
            let cand = if let Some(p) = pending.pop() {
                used[p] += 1;
                nets[p].clone()
            } else {
                // bias towards recent nets for depth
                let lo = nets.len().saturating_sub(n_in.max(24) + i / 4);
                let j = if rng.gen_bool(0.7) {
                    rng.gen_range(lo..nets.len())
                } else {
                    rng.gen_range(0..nets.len())
                };
                nets[j].clone()
            };
            if !fanins.contains(&cand) {
                fanins.push(cand);
            } else if nets.len() <= arity {
                break;
            }
        }
        let kind = if fanins.len() < 2 && kind != GateKind::Not {
            GateKind::Not
        } else {
            kind
        };
        let fanins = if kind == GateKind::Not {
            fanins.into_iter().take(1).collect()
        } else {
            fanins
        };
        let name = format!("n{}", gates.len());
        nets.push(name.clone());
        gates.push(Gate {
            output: name,
            kind,
            fanins,
        });
    }
    // outputs from sinks; merge extra sinks, pad with internal nets
    let mut has_fanout = std::collections::HashSet::new();
    for g in &gates {
        for f in &g.fanins {
            has_fanout.insert(f.clone());
        }
    }
    let mut sinks: Vec<String> = gates
        .iter()
        .filter(|g| !has_fanout.contains(&g.output))
        .map(|g| g.output.clone())
        .collect();
    while sinks.len() > n_out {
        let a = sinks.remove(rng.gen_range(0..sinks.len()));
        let bi = rng.gen_range(0..sinks.len());
        let name = format!("n{}", gates.len());
        let kind =
            [GateKind::And, GateKind::Or, GateKind::Xor, GateKind::Nand][rng.gen_range(0..4)];
        gates.push(Gate {
            output: name.clone(),
            kind,
            fanins: vec![a, sinks[bi].clone()],
        });
        sinks[bi] = name;
    }
    let mut k = gates.len();
    while sinks.len() < n_out && k > 0 {
        k -= 1;
        let n = gates[k].output.clone();
        if !sinks.contains(&n) {
            sinks.push(n);
        }
    }
    let order: std::collections::HashMap<&str, usize> = gates
        .iter()
        .enumerate()
        .map(|(i, g)| (g.output.as_str(), i))
        .collect();
    sinks.sort_by_key(|s| order[s.as_str()]);
    Circuit::new(format!("rand{seed}"), inputs, vec![], sinks, gates)
        .expect("generator builds valid circuits")
        .sweep()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_respects_interface() {
        for seed in 0..20 {
            let c = synthetic(C432_SCALE, seed);
            assert_eq!(c.inputs().len(), 36);
            assert_eq!(c.outputs().len(), 7);
            assert!(c.gates().len() >= 160 - 10);
            for i in c.inputs() {
                let used = c.gates().iter().any(|g| g.fanins.contains(i));
                assert!(used, "{i} unused");
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(synthetic(C880_SCALE, 3), synthetic(C880_SCALE, 3));
        assert_ne!(synthetic(C880_SCALE, 3), synthetic(C880_SCALE, 4));
    }
}
