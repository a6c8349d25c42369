use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::netlist::{Gate, GateKind};

/// Emits gates with fresh names, avoiding every name in `taken`.
pub(crate) struct Builder<'a> {
    taken: HashSet<String>,
    pub gates: Vec<Gate>,
    pub rng: &'a mut ChaCha8Rng,
    stem: String,
    counter: usize,
}

impl<'a> Builder<'a> {
    pub fn new(taken: HashSet<String>, stem: &str, rng: &'a mut ChaCha8Rng) -> Self {
        Builder {
            taken,
            gates: Vec::new(),
            rng,
            stem: stem.to_string(),
            counter: 0,
        }
    }

    pub fn fresh(&mut self) -> String {
        loop {
            self.counter += 1;
            let n = format!("{}{}", self.stem, self.counter);
            if self.taken.insert(n.clone()) {
                return n;
            }
        }
    }

    pub fn gate(&mut self, kind: GateKind, fanins: Vec<String>) -> String {
        let out = self.fresh();
        self.gate_named(out.clone(), kind, fanins);
        out
    }

    pub fn gate_named(&mut self, out: String, kind: GateKind, fanins: Vec<String>) {
        self.taken.insert(out.clone());
        self.gates.push(Gate {
            output: out,
            kind,
            fanins,
        });
    }

    pub fn not(&mut self, a: &str) -> String {
        self.gate(GateKind::Not, vec![a.to_string()])
    }

    /// Net equal to 1 iff `a == v`.
    pub fn literal(&mut self, a: &str, v: bool) -> String {
        if v {
            a.to_string()
        } else {
            self.not(a)
        }
    }

    /// Net equal to 1 iff `x XOR k == c`, in one of several randomly
    /// chosen gate forms.
    pub fn match_bit(&mut self, x: &str, k: &str, c: bool) -> String {
        let (x, k) = (x.to_string(), k.to_string());
        let (eq, ne) = (GateKind::Xnor, GateKind::Xor);
        let pick = |c: bool, a: GateKind, b: GateKind| if c { b } else { a };
        match self.rng.gen_range(0..4) {
            0 => self.gate(pick(c, eq, ne), vec![x, k]),
            1 => {
                let t = self.gate(pick(c, ne, eq), vec![x, k]);
                self.not(&t)
            }
            2 => {
                let nx = self.not(&x);
                self.gate(pick(c, ne, eq), vec![nx, k])
            }
            _ => {
                let nk = self.not(&k);
                self.gate(pick(c, ne, eq), vec![x, nk])
            }
        }
    }

    /// Balanced tree of 2-input `kind` gates; `top` replaces the root kind
    /// (e.g. NAND over an AND tree).
    pub fn tree(&mut self, kind: GateKind, top: GateKind, leaves: &[String]) -> String {
        assert!(!leaves.is_empty());
        if leaves.len() == 1 {
            return if top == kind {
                leaves[0].clone()
            } else {
                self.not(&leaves[0])
            };
        }
        let mut level: Vec<String> = leaves.to_vec();
        while level.len() > 2 {
            let mut next = Vec::with_capacity(level.len() / 2 + 1);
            for pair in level.chunks(2) {
                if pair.len() == 2 {
                    next.push(self.gate(kind, pair.to_vec()));
                } else {
                    next.push(pair[0].clone());
                }
            }
            level = next;
        }
        self.gate(top, level)
    }

    /// Left-leaning cascade: `t = op_i(t, leaf_{i+1})`.
    pub fn cascade(&mut self, ops: &[GateKind], leaves: &[String]) -> String {
        assert_eq!(ops.len() + 1, leaves.len());
        let mut t = leaves[0].clone();
        for (op, leaf) in ops.iter().zip(&leaves[1..]) {
            t = self.gate(*op, vec![t, leaf.clone()]);
        }
        t
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        v.shuffle(self.rng);
    }
}

/// Comparator over `(x_j, k_j)` pairs: 1 iff every `x_j == k_j`.
pub(crate) fn comparator(b: &mut Builder, pairs: &[(String, String)]) -> String {
    let mut bits: Vec<String> = pairs
        .iter()
        .map(|(x, k)| b.match_bit(x, k, false))
        .collect();
    b.shuffle(&mut bits);
    b.tree(GateKind::And, GateKind::And, &bits)
}

/// 1 iff the inputs equal `pattern`.
pub(crate) fn minterm(b: &mut Builder, inputs: &[String], pattern: &[bool]) -> String {
    let lits: Vec<String> = inputs
        .iter()
        .zip(pattern)
        .map(|(x, &v)| b.literal(x, v))
        .collect();
    b.tree(GateKind::And, GateKind::And, &lits)
}

/// Cascade operators for the two Anti-SAT-family blocks.
pub(crate) fn anti_sat_ops(
    scheme: super::Scheme,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<GateKind>, Vec<GateKind>) {
    use super::Scheme;
    let m = n.saturating_sub(1);
    match scheme {
        Scheme::Caslock => {
            // AND/OR mix, always ending in AND, at least one OR when possible
            let mut ops: Vec<GateKind> = (0..m)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        GateKind::Or
                    } else {
                        GateKind::And
                    }
                })
                .collect();
            if m >= 2 && !ops[..m - 1].contains(&GateKind::Or) {
                let i = rng.gen_range(0..m - 1);
                ops[i] = GateKind::Or;
            }
            if m >= 1 {
                ops[m - 1] = GateKind::And;
            }
            (ops.clone(), ops)
        }
        Scheme::GenAntisat => {
            // f implies h: h has one more OR than f, both end in AND
            let mut f = vec![GateKind::And; m];
            let mut free: Vec<usize> = (0..m.saturating_sub(1)).collect();
            free.shuffle(rng);
            if free.len() >= 2 {
                f[free[0]] = GateKind::Or;
            }
            let mut h = f.clone();
            match free.last() {
                Some(&i) => h[i] = GateKind::Or,
                None if m >= 1 => h[0] = GateKind::Or,
                None => {}
            }
            (f, h)
        }
        _ => (vec![GateKind::And; m], vec![GateKind::And; m]),
    }
}
