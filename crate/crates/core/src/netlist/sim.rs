use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Circuit, GateKind, NetlistError, Result, Tri};

/// Partial assignment over a declared set of nets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriPattern {
    assignment: BTreeMap<String, Tri>,
}

impl TriPattern {
    /// All-X pattern over `domain`.
    pub fn unknown<S: AsRef<str>>(domain: &[S]) -> TriPattern {
        TriPattern {
            assignment: domain
                .iter()
                .map(|n| (n.as_ref().to_string(), Tri::X))
                .collect(),
        }
    }

    pub fn from_pairs<I, S>(pairs: I) -> TriPattern
    where
        I: IntoIterator<Item = (S, Tri)>,
        S: Into<String>,
    {
        TriPattern {
            assignment: pairs.into_iter().map(|(n, v)| (n.into(), v)).collect(),
        }
    }

    /// Pattern over `names` from booleans in the same order.
    pub fn from_bools<S: AsRef<str>>(names: &[S], values: &[bool]) -> TriPattern {
        Self::from_pairs(
            names
                .iter()
                .zip(values)
                .map(|(n, &v)| (n.as_ref().to_string(), Tri::from_bool(v))),
        )
    }

    pub fn get(&self, net: &str) -> Option<Tri> {
        self.assignment.get(net).copied()
    }

    /// Sets a net already in the domain. Returns false if `net` is not in the domain.
    pub fn set(&mut self, net: &str, v: Tri) -> bool {
        match self.assignment.get_mut(net) {
            Some(slot) => {
                *slot = v;
                true
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Tri)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn x_count(&self) -> usize {
        self.assignment.values().filter(|v| **v == Tri::X).count()
    }

    /// Checks that the domain is exactly `names`.
    pub fn check_domain<S: AsRef<str>>(&self, names: &[S]) -> Result<()> {
        for n in names {
            if !self.assignment.contains_key(n.as_ref()) {
                return Err(NetlistError::MissingInput(n.as_ref().to_string()));
            }
        }
        if self.assignment.len() != names.len() {
            let extra = self
                .assignment
                .keys()
                .find(|k| !names.iter().any(|n| n.as_ref() == k.as_str()))
                .cloned()
                .unwrap_or_default();
            return Err(NetlistError::ExtraAssignment(extra));
        }
        Ok(())
    }

    /// Values in the order of `names`; X for names outside the domain.
    pub fn values_in<S: AsRef<str>>(&self, names: &[S]) -> Vec<Tri> {
        names
            .iter()
            .map(|n| self.get(n.as_ref()).unwrap_or(Tri::X))
            .collect()
    }

    /// String over `names` in the given order, e.g. `10X`.
    pub fn to_string_in<S: AsRef<str>>(&self, names: &[S]) -> String {
        self.values_in(names)
            .into_iter()
            .map(Tri::to_char)
            .collect()
    }
}

impl fmt::Display for TriPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.assignment.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={}", v.to_char())?;
        }
        Ok(())
    }
}

fn eval_tri(kind: GateKind, vals: impl Iterator<Item = Tri>) -> Tri {
    match kind {
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            let ctrl = Tri::from_bool(kind.controlling_value().unwrap());
            let mut any_x = false;
            let mut forced = false;
            for v in vals {
                if v == ctrl {
                    forced = true;
                    break;
                }
                any_x |= v == Tri::X;
            }
            // AND: forced -> 0, else all 1 -> 1; OR: forced -> 1, else 0
            let base = if forced {
                ctrl
            } else if any_x {
                Tri::X
            } else {
                ctrl.not()
            };
            if kind.is_inverting() {
                base.not()
            } else {
                base
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut acc = kind == GateKind::Xnor;
            for v in vals {
                match v {
                    Tri::X => return Tri::X,
                    Tri::One => acc = !acc,
                    Tri::Zero => {}
                }
            }
            Tri::from_bool(acc)
        }
        GateKind::Not => vals.into_iter().next().map_or(Tri::X, Tri::not),
        GateKind::Buf => vals.into_iter().next().unwrap_or(Tri::X),
        GateKind::Const0 => Tri::Zero,
        GateKind::Const1 => Tri::One,
    }
}

fn eval_word(kind: GateKind, vals: impl Iterator<Item = u64>) -> u64 {
    match kind {
        GateKind::And => vals.fold(!0, |a, v| a & v),
        GateKind::Nand => !vals.fold(!0, |a, v| a & v),
        GateKind::Or => vals.fold(0, |a, v| a | v),
        GateKind::Nor => !vals.fold(0, |a, v| a | v),
        GateKind::Xor => vals.fold(0, |a, v| a ^ v),
        GateKind::Xnor => !vals.fold(0, |a, v| a ^ v),
        GateKind::Not => !vals.into_iter().next().unwrap_or(0),
        GateKind::Buf => vals.into_iter().next().unwrap_or(0),
        GateKind::Const0 => 0,
        GateKind::Const1 => !0,
    }
}

impl Circuit {
    /// Three-valued values of every net, indexed by net id. `inputs` is in
    /// input declaration order.
    pub fn eval_tri_nets(&self, inputs: &[Tri]) -> Vec<Tri> {
        assert_eq!(inputs.len(), self.inputs().len(), "input width");
        let mut v = Vec::with_capacity(self.num_nets());
        v.extend_from_slice(inputs);
        v.resize(self.num_nets(), Tri::X);
        let base = self.inputs().len();
        for &g in self.topo_order() {
            let kind = self.gates()[g].kind;
            v[base + g] = eval_tri(kind, self.fanin_ids(g).iter().map(|&f| v[f]));
        }
        v
    }

    /// Three-valued output values for inputs given in declaration order.
    pub fn eval_tri(&self, inputs: &[Tri]) -> Vec<Tri> {
        let v = self.eval_tri_nets(inputs);
        self.output_ids().iter().map(|&o| v[o]).collect()
    }

    /// Boolean evaluation; inputs in declaration order.
    pub fn eval_bool(&self, inputs: &[bool]) -> Vec<bool> {
        let words: Vec<u64> = inputs.iter().map(|&b| if b { !0 } else { 0 }).collect();
        self.eval_words(&words)
            .into_iter()
            .map(|w| w & 1 == 1)
            .collect()
    }

    /// 64-way bit-parallel evaluation of every net, indexed by net id.
    pub fn eval_word_nets(&self, inputs: &[u64]) -> Vec<u64> {
        assert_eq!(inputs.len(), self.inputs().len(), "input width");
        let mut v = Vec::with_capacity(self.num_nets());
        v.extend_from_slice(inputs);
        v.resize(self.num_nets(), 0);
        let base = self.inputs().len();
        for &g in self.topo_order() {
            let kind = self.gates()[g].kind;
            v[base + g] = eval_word(kind, self.fanin_ids(g).iter().map(|&f| v[f]));
        }
        v
    }

    /// 64-way bit-parallel output evaluation.
    pub fn eval_words(&self, inputs: &[u64]) -> Vec<u64> {
        let v = self.eval_word_nets(inputs);
        self.output_ids().iter().map(|&o| v[o]).collect()
    }
}

/// Simulates `c` on a pattern covering every input. X values propagate
/// unless a gate output is forced by a controlling fanin.
pub fn simulate(c: &Circuit, inputs: &TriPattern) -> Result<TriPattern> {
    for n in c.inputs() {
        if inputs.get(n).is_none() {
            return Err(NetlistError::MissingInput(n.clone()));
        }
    }
    let vals = inputs.values_in(c.inputs());
    let out = c.eval_tri(&vals);
    Ok(TriPattern::from_pairs(c.outputs().iter().cloned().zip(out)))
}

/// Words enumerating all assignments of `n` variables, 64 per block.
/// Block `b` holds assignments `64*b .. 64*b+63`; variable `i` is bit `i`
/// of the assignment index.
pub fn exhaustive_block(n: usize, block: u64) -> Vec<u64> {
    const LOW: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    (0..n)
        .map(|i| {
            if i < 6 {
                LOW[i]
            } else if (block >> (i - 6)) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect()
}

/// Number of 64-wide blocks needed to enumerate `n` variables, and the
/// valid-lane mask of each block.
pub fn exhaustive_blocks(n: usize) -> (u64, u64) {
    if n >= 6 {
        (1u64 << (n - 6), !0)
    } else {
        (1, (1u64 << (1u64 << n)) - 1)
    }
}
