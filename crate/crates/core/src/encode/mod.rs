//! CNF and two-level QBF encodings of circuits and attack questions.

mod dimacs;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::netlist::{Circuit, GateKind};

pub use dimacs::{read_dimacs, read_qdimacs, write_dimacs, write_qdimacs, DimacsError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("input `{0}` is neither a protected input nor a key input")]
    UnclassifiedInput(String),
    #[error("circuits differ in {what}: {left} vs {right}")]
    ArityMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("binding refers to unknown input `{0}`")]
    UnknownBinding(String),
    #[error("unit must have exactly one output, found {0}")]
    NotSingleOutput(usize),
}

/// Signed DIMACS literal.
pub type Lit = i32;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfFormula {
    pub var_count: u32,
    pub clauses: Vec<Vec<Lit>>,
    /// Net name -> variable index (1-based).
    pub var_map: BTreeMap<String, u32>,
}

impl CnfFormula {
    pub fn new_var(&mut self) -> u32 {
        self.var_count += 1;
        self.var_count
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        debug_assert!(clause
            .iter()
            .all(|l| *l != 0 && l.unsigned_abs() <= self.var_count));
        self.clauses.push(clause);
    }

    pub fn var(&self, net: &str) -> Option<u32> {
        self.var_map.get(net).copied()
    }

    /// Checks that every literal is in range and no clause is empty.
    pub fn is_well_formed(&self) -> bool {
        self.clauses.iter().all(|c| {
            !c.is_empty()
                && c.iter()
                    .all(|l| *l != 0 && l.unsigned_abs() <= self.var_count)
        })
    }

    /// Evaluates the formula under a full assignment (index 0 unused).
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|&l| model[l.unsigned_abs() as usize] == (l > 0))
        })
    }
}

fn lit(v: u32, positive: bool) -> Lit {
    if positive {
        v as Lit
    } else {
        -(v as Lit)
    }
}

/// Adds Tseitin clauses for `kind(fanins)` with output variable `out`.
pub fn encode_gate(f: &mut CnfFormula, kind: GateKind, out: u32, fanins: &[u32]) {
    let o = out as Lit;
    match kind {
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            // AND form: o' <-> /\ a_i, with o' = o for AND, !o for NAND;
            // OR is the dual on complemented fanins.
            let (neg_in, neg_out) = match kind {
                GateKind::And => (false, false),
                GateKind::Nand => (false, true),
                GateKind::Or => (true, true),
                _ => (true, false),
            };
            let ol = if neg_out { -o } else { o };
            let ins: Vec<Lit> = fanins
                .iter()
                .map(|&a| if neg_in { -(a as Lit) } else { a as Lit })
                .collect();
            for &a in &ins {
                f.add_clause(vec![-ol, a]);
            }
            let mut big: Vec<Lit> = ins.iter().map(|a| -a).collect();
            big.push(ol);
            f.add_clause(big);
        }
        GateKind::Xor | GateKind::Xnor => {
            let k = fanins.len();
            assert!(k <= 16, "wide XOR gates are not supported");
            let invert = kind == GateKind::Xnor;
            // forbid every assignment with wrong parity
            for m in 0..(1u32 << k) {
                let parity = (m.count_ones() % 2 == 1) ^ invert;
                let mut clause: Vec<Lit> =
                    (0..k).map(|i| lit(fanins[i], (m >> i) & 1 == 0)).collect();
                clause.push(lit(out, parity));
                f.add_clause(clause);
            }
        }
        GateKind::Not | GateKind::Buf => {
            let a = fanins[0] as Lit;
            let a = if kind == GateKind::Not { -a } else { a };
            f.add_clause(vec![-o, a]);
            f.add_clause(vec![o, -a]);
        }
        GateKind::Const0 => f.add_clause(vec![-o]),
        GateKind::Const1 => f.add_clause(vec![o]),
    }
}

/// Tseitin encoding with `var_map` populated for every net. Inputs are
/// numbered first in `input_order` (defaults to declaration order), then
/// gates in topological order.
pub fn tseitin_ordered(c: &Circuit, input_order: &[String]) -> CnfFormula {
    let mut f = CnfFormula::default();
    for n in input_order {
        let v = f.new_var();
        f.var_map.insert(n.clone(), v);
    }
    for n in c.inputs() {
        if !f.var_map.contains_key(n) {
            let v = f.new_var();
            f.var_map.insert(n.clone(), v);
        }
    }
    for &g in c.topo_order() {
        let v = f.new_var();
        f.var_map.insert(c.gates()[g].output.clone(), v);
    }
    for &g in c.topo_order() {
        let gate = &c.gates()[g];
        let out = f.var_map[&gate.output];
        let ins: Vec<u32> = gate.fanins.iter().map(|n| f.var_map[n]).collect();
        encode_gate(&mut f, gate.kind, out, &ins);
    }
    f
}

pub fn tseitin(c: &Circuit) -> CnfFormula {
    tseitin_ordered(c, &[])
}

/// Number of clauses `tseitin` emits for a gate of `kind` with `k` fanins.
pub fn clause_count(kind: GateKind, k: usize) -> usize {
    match kind {
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => k + 1,
        GateKind::Xor | GateKind::Xnor => 1 << k,
        GateKind::Not | GateKind::Buf => 2,
        GateKind::Const0 | GateKind::Const1 => 1,
    }
}

/// A universal variable that can be tied to an existential one when
/// lifting counterexamples (e.g. a protected input and its associated key).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairHint {
    pub forall_var: u32,
    pub exists_var: u32,
}

/// `exists K . forall P . matrix /\ (pinned = value)`, with Tseitin
/// auxiliaries innermost-existential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QbfProblem {
    pub exists_vars: BTreeSet<u32>,
    pub forall_vars: BTreeSet<u32>,
    pub matrix: CnfFormula,
    pub pinned_net: String,
    pub pinned_var: u32,
    pub pinned_value: bool,
    pub hints: Vec<PairHint>,
}

impl QbfProblem {
    /// Variables in neither quantifier block.
    pub fn aux_vars(&self) -> Vec<u32> {
        (1..=self.matrix.var_count)
            .filter(|v| !self.exists_vars.contains(v) && !self.forall_vars.contains(v))
            .collect()
    }

    /// Checks block disjointness and that the pinned variable is in range.
    pub fn is_well_formed(&self) -> bool {
        self.exists_vars.is_disjoint(&self.forall_vars)
            && self.matrix.is_well_formed()
            && self.pinned_var >= 1
            && self.pinned_var <= self.matrix.var_count
    }
}

/// Builds `exists keys . forall ppis . unit_out = value`. Variables: PPI
/// block, key block, then gates in topological order.
pub fn build_unit_qbf(
    unit: &Circuit,
    ppis: &[String],
    keys: &[String],
    cs1_value: bool,
) -> Result<QbfProblem, EncodeError> {
    if unit.outputs().len() != 1 {
        return Err(EncodeError::NotSingleOutput(unit.outputs().len()));
    }
    for i in unit.inputs() {
        if !ppis.contains(i) && !keys.contains(i) {
            return Err(EncodeError::UnclassifiedInput(i.clone()));
        }
    }
    let ppis: Vec<String> = ppis.iter().filter(|p| unit.is_input(p)).cloned().collect();
    let keys: Vec<String> = keys.iter().filter(|k| unit.is_input(k)).cloned().collect();
    let order: Vec<String> = ppis.iter().chain(&keys).cloned().collect();
    let matrix = tseitin_ordered(unit, &order);
    let pinned_net = unit.outputs()[0].clone();
    let pinned_var = matrix.var_map[&pinned_net];
    Ok(QbfProblem {
        exists_vars: keys.iter().map(|k| matrix.var_map[k]).collect(),
        forall_vars: ppis.iter().map(|p| matrix.var_map[p]).collect(),
        pinned_net,
        pinned_var,
        pinned_value: cs1_value,
        matrix,
        hints: Vec::new(),
    })
}

/// Miter over two circuits. `bind` renames inputs of `b` to inputs of `a`;
/// unbound inputs are matched by name. Satisfiable iff some input makes
/// an output pair differ. The returned map holds `a`'s input names.
pub fn build_miter(
    a: &Circuit,
    b: &Circuit,
    bind: &BTreeMap<String, String>,
) -> Result<CnfFormula, EncodeError> {
    if a.outputs().len() != b.outputs().len() {
        return Err(EncodeError::ArityMismatch {
            what: "output count",
            left: a.outputs().len(),
            right: b.outputs().len(),
        });
    }
    for (bn, an) in bind {
        if !b.is_input(bn) {
            return Err(EncodeError::UnknownBinding(bn.clone()));
        }
        if !a.is_input(an) {
            return Err(EncodeError::UnknownBinding(an.clone()));
        }
    }
    let b_to_a = |n: &str| bind.get(n).cloned().unwrap_or_else(|| n.to_string());
    let b_inputs: BTreeSet<String> = b.inputs().iter().map(|n| b_to_a(n)).collect();
    let a_inputs: BTreeSet<String> = a.inputs().iter().cloned().collect();
    if a_inputs != b_inputs {
        return Err(EncodeError::ArityMismatch {
            what: "input set",
            left: a_inputs.len(),
            right: b_inputs.len(),
        });
    }
    let mut f = tseitin(a);
    let mut b_vars: BTreeMap<&str, u32> = BTreeMap::new();
    for n in b.inputs() {
        b_vars.insert(n.as_str(), f.var_map[&b_to_a(n)]);
    }
    for &g in b.topo_order() {
        let v = f.new_var();
        b_vars.insert(b.gates()[g].output.as_str(), v);
    }
    for &g in b.topo_order() {
        let gate = &b.gates()[g];
        let ins: Vec<u32> = gate.fanins.iter().map(|n| b_vars[n.as_str()]).collect();
        encode_gate(&mut f, gate.kind, b_vars[gate.output.as_str()], &ins);
    }
    let mut diffs = Vec::new();
    for (oa, ob) in a.outputs().iter().zip(b.outputs()) {
        let d = f.new_var();
        let pair = [f.var_map[oa], b_vars[ob.as_str()]];
        encode_gate(&mut f, GateKind::Xor, d, &pair);
        diffs.push(d as Lit);
    }
    if diffs.is_empty() {
        // no outputs: trivially equivalent
        let v = f.new_var();
        f.add_clause(vec![v as Lit]);
        f.add_clause(vec![-(v as Lit)]);
    } else {
        f.add_clause(diffs);
    }
    Ok(f)
}
