//! Combinational netlists: representation, bench I/O, simulation and
//! structural transforms.

mod bench;
mod cone;
pub mod library;
mod randomize;
mod sim;
mod transform;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{
    header_value, parse_bench, write_bench, write_bench_with_header, DEFAULT_KEY_PREFIX,
};
pub use cone::{fanin_cone, fanout_cone};
pub use randomize::{randomize_structure, randomize_structure_with_budget};
pub use sim::{exhaustive_block, exhaustive_blocks, simulate, TriPattern};
pub use transform::{simplify, substitute, Substitution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGate { line: usize, kind: String },
    #[error("gate `{net}`: {kind} expects {expected} fanin(s), got {got}")]
    Arity {
        net: String,
        kind: GateKind,
        expected: &'static str,
        got: usize,
    },
    #[error("net `{0}` is used but never driven")]
    Undriven(String),
    #[error("net `{0}` has multiple drivers")]
    MultipleDrivers(String),
    #[error("combinational cycle through net `{0}`")]
    Cycle(String),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("net `{0}` is not an input of the circuit")]
    NotAnInput(String),
    #[error("missing value for input `{0}`")]
    MissingInput(String),
    #[error("pattern assigns `{0}`, which is not a declared input")]
    ExtraAssignment(String),
}

pub type Result<T> = std::result::Result<T, NetlistError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    /// Constant driver. Only produced by simplification; written as `CONST0()`.
    Const0,
    Const1,
}

impl GateKind {
    pub const ALL: [GateKind; 10] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Const0,
        GateKind::Const1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    pub fn from_name(s: &str) -> Option<GateKind> {
        let k = match s.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "CONST0" => GateKind::Const0,
            "CONST1" => GateKind::Const1,
            _ => return None,
        };
        Some(k)
    }

    fn check_arity(self, n: usize) -> std::result::Result<(), &'static str> {
        let ok = match self {
            GateKind::Not | GateKind::Buf => n == 1,
            GateKind::Const0 | GateKind::Const1 => n == 0,
            _ => n >= 2,
        };
        if ok {
            return Ok(());
        }
        Err(match self {
            GateKind::Not | GateKind::Buf => "exactly 1",
            GateKind::Const0 | GateKind::Const1 => "0",
            _ => ">= 2",
        })
    }

    /// Output is the complement of the base function (NAND, NOR, XNOR, NOT).
    pub fn is_inverting(self) -> bool {
        matches!(
            self,
            GateKind::Nand | GateKind::Nor | GateKind::Xnor | GateKind::Not
        )
    }

    /// Fanin value that forces the output regardless of the other fanins.
    pub fn controlling_value(self) -> Option<bool> {
        match self {
            GateKind::And | GateKind::Nand => Some(false),
            GateKind::Or | GateKind::Nor => Some(true),
            _ => None,
        }
    }

    pub fn eval(self, fanins: impl IntoIterator<Item = bool>) -> bool {
        let mut it = fanins.into_iter();
        match self {
            GateKind::And => it.all(|v| v),
            GateKind::Nand => !it.all(|v| v),
            GateKind::Or => it.any(|v| v),
            GateKind::Nor => !it.any(|v| v),
            GateKind::Xor => it.fold(false, |a, v| a ^ v),
            GateKind::Xnor => !it.fold(false, |a, v| a ^ v),
            GateKind::Not => !it.next().unwrap_or(false),
            GateKind::Buf => it.next().unwrap_or(false),
            GateKind::Const0 => false,
            GateKind::Const1 => true,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gate {
    pub output: String,
    pub kind: GateKind,
    pub fanins: Vec<String>,
}

impl Gate {
    pub fn new(output: impl Into<String>, kind: GateKind, fanins: &[&str]) -> Gate {
        Gate {
            output: output.into(),
            kind,
            fanins: fanins.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Three-valued logic value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tri {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "X")]
    X,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::One
        } else {
            Tri::Zero
        }
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            Tri::Zero => Some(false),
            Tri::One => Some(true),
            Tri::X => None,
        }
    }

    pub fn from_char(c: char) -> Option<Tri> {
        match c {
            '0' => Some(Tri::Zero),
            '1' => Some(Tri::One),
            'x' | 'X' => Some(Tri::X),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Tri::Zero => '0',
            Tri::One => '1',
            Tri::X => 'X',
        }
    }

    pub fn not(self) -> Tri {
        match self {
            Tri::Zero => Tri::One,
            Tri::One => Tri::Zero,
            Tri::X => Tri::X,
        }
    }
}

impl From<bool> for Tri {
    fn from(b: bool) -> Tri {
        Tri::from_bool(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Driver {
    Input(usize),
    Gate(usize),
}

/// Immutable combinational circuit.
///
/// Nets are numbered densely: inputs first (declaration order), then gate
/// outputs in gate-list order. `topo` lists gate indices in a valid
/// evaluation order.
#[derive(Debug, Clone)]
pub struct Circuit {
    name: String,
    inputs: Vec<String>,
    key_inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<Gate>,
    index: HashMap<String, Driver>,
    fanin_ids: Vec<Vec<usize>>,
    output_ids: Vec<usize>,
    topo: Vec<usize>,
    is_key: Vec<bool>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs
            && self.key_inputs == other.key_inputs
            && self.outputs == other.outputs
            && self.gates == other.gates
    }
}

impl Circuit {
    /// Builds and validates a circuit. `key_inputs` must be a subset of `inputs`.
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<String>,
        key_inputs: Vec<String>,
        outputs: Vec<String>,
        gates: Vec<Gate>,
    ) -> Result<Circuit> {
        let mut index = HashMap::with_capacity(inputs.len() + gates.len());
        for (i, n) in inputs.iter().enumerate() {
            if index.insert(n.clone(), Driver::Input(i)).is_some() {
                return Err(NetlistError::MultipleDrivers(n.clone()));
            }
        }
        for (i, g) in gates.iter().enumerate() {
            if let Err(expected) = g.kind.check_arity(g.fanins.len()) {
                return Err(NetlistError::Arity {
                    net: g.output.clone(),
                    kind: g.kind,
                    expected,
                    got: g.fanins.len(),
                });
            }
            if index.insert(g.output.clone(), Driver::Gate(i)).is_some() {
                return Err(NetlistError::MultipleDrivers(g.output.clone()));
            }
        }
        let mut is_key = vec![false; inputs.len()];
        for k in &key_inputs {
            match index.get(k) {
                Some(Driver::Input(i)) => is_key[*i] = true,
                _ => return Err(NetlistError::NotAnInput(k.clone())),
            }
        }
        let id_of = |d: Driver| match d {
            Driver::Input(i) => i,
            Driver::Gate(g) => inputs.len() + g,
        };
        let mut fanin_ids = Vec::with_capacity(gates.len());
        for g in &gates {
            let mut ids = Vec::with_capacity(g.fanins.len());
            for f in &g.fanins {
                match index.get(f) {
                    Some(d) => ids.push(id_of(*d)),
                    None => return Err(NetlistError::Undriven(f.clone())),
                }
            }
            fanin_ids.push(ids);
        }
        let mut output_ids = Vec::with_capacity(outputs.len());
        for o in &outputs {
            match index.get(o) {
                Some(d) => output_ids.push(id_of(*d)),
                None => return Err(NetlistError::Undriven(o.clone())),
            }
        }
        let topo = topo_order(inputs.len(), &gates, &fanin_ids)?;
        Ok(Circuit {
            name: name.into(),
            inputs,
            key_inputs,
            outputs,
            gates,
            index,
            fanin_ids,
            output_ids,
            topo,
            is_key,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// All inputs, key inputs included, in declaration order.
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn key_inputs(&self) -> &[String] {
        &self.key_inputs
    }

    /// Inputs that are not key inputs.
    pub fn primary_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .zip(&self.is_key)
            .filter(|(_, k)| !**k)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn driver(&self, net: &str) -> Option<Driver> {
        self.index.get(net).copied()
    }

    pub fn contains(&self, net: &str) -> bool {
        self.index.contains_key(net)
    }

    pub fn is_input(&self, net: &str) -> bool {
        matches!(self.index.get(net), Some(Driver::Input(_)))
    }

    pub fn is_key_input(&self, net: &str) -> bool {
        matches!(self.index.get(net), Some(Driver::Input(i)) if self.is_key[*i])
    }

    pub fn gate_of(&self, net: &str) -> Option<&Gate> {
        match self.index.get(net) {
            Some(Driver::Gate(g)) => Some(&self.gates[*g]),
            _ => None,
        }
    }

    pub fn num_nets(&self) -> usize {
        self.inputs.len() + self.gates.len()
    }

    pub fn net_id(&self, net: &str) -> Option<usize> {
        self.index.get(net).map(|d| match d {
            Driver::Input(i) => *i,
            Driver::Gate(g) => self.inputs.len() + g,
        })
    }

    pub fn net_name(&self, id: usize) -> &str {
        if id < self.inputs.len() {
            &self.inputs[id]
        } else {
            &self.gates[id - self.inputs.len()].output
        }
    }

    pub(crate) fn fanin_ids(&self, gate: usize) -> &[usize] {
        &self.fanin_ids[gate]
    }

    pub(crate) fn output_ids(&self) -> &[usize] {
        &self.output_ids
    }

    /// Gate indices in evaluation order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Gate kind histogram, used to compare structural variants.
    pub fn kind_histogram(&self) -> BTreeMap<GateKind, usize> {
        let mut h = BTreeMap::new();
        for g in &self.gates {
            *h.entry(g.kind).or_insert(0) += 1;
        }
        h
    }

    /// Total number of gate fanin literals.
    pub fn literal_count(&self) -> usize {
        self.gates.iter().map(|g| g.fanins.len()).sum()
    }

    /// Longest-path depth of every net (inputs at level 0), indexed by net id.
    pub fn levels(&self) -> Vec<usize> {
        let mut lvl = vec![0usize; self.num_nets()];
        let base = self.inputs.len();
        for &g in &self.topo {
            lvl[base + g] = self.fanin_ids[g]
                .iter()
                .map(|&f| lvl[f] + 1)
                .max()
                .unwrap_or(0);
        }
        lvl
    }

    /// Fanout lists indexed by net id (gate indices reading each net).
    pub fn fanouts(&self) -> Vec<Vec<usize>> {
        let mut fo = vec![Vec::new(); self.num_nets()];
        for (g, ids) in self.fanin_ids.iter().enumerate() {
            for &f in ids {
                if !fo[f].contains(&g) {
                    fo[f].push(g);
                }
            }
        }
        fo
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Circuit {
        self.name = name.into();
        self
    }

    /// Reclassifies key inputs by name prefix.
    pub fn with_key_prefix(self, prefix: &str) -> Circuit {
        let keys = self
            .inputs
            .iter()
            .filter(|n| n.starts_with(prefix))
            .cloned()
            .collect();
        Circuit::new(self.name, self.inputs, keys, self.outputs, self.gates)
            .expect("reclassifying keys keeps the circuit valid")
    }

    /// Returns the parts for rebuilding a modified circuit.
    pub fn into_parts(self) -> (String, Vec<String>, Vec<String>, Vec<String>, Vec<Gate>) {
        (
            self.name,
            self.inputs,
            self.key_inputs,
            self.outputs,
            self.gates,
        )
    }

    /// Drops gates not in the transitive fanin of any output. Inputs are kept.
    pub fn sweep(&self) -> Circuit {
        let mut live = vec![false; self.num_nets()];
        for &o in &self.output_ids {
            live[o] = true;
        }
        let base = self.inputs.len();
        for &g in self.topo.iter().rev() {
            if live[base + g] {
                for &f in &self.fanin_ids[g] {
                    live[f] = true;
                }
            }
        }
        let gates = self
            .gates
            .iter()
            .enumerate()
            .filter(|(i, _)| live[base + i])
            .map(|(_, g)| g.clone())
            .collect();
        Circuit::new(
            self.name.clone(),
            self.inputs.clone(),
            self.key_inputs.clone(),
            self.outputs.clone(),
            gates,
        )
        .expect("sweeping dead gates keeps the circuit valid")
    }

    /// Returns a fresh net name starting with `stem` that is not used in the circuit.
    pub fn fresh_name(&self, stem: &str) -> String {
        if !self.contains(stem) {
            return stem.to_string();
        }
        (1..)
            .map(|i| format!("{stem}_{i}"))
            .find(|n| !self.contains(n))
            .unwrap()
    }
}

fn topo_order(n_inputs: usize, gates: &[Gate], fanin_ids: &[Vec<usize>]) -> Result<Vec<usize>> {
    // iterative DFS with colors: 0 = new, 1 = on stack, 2 = done
    let mut color = vec![0u8; gates.len()];
    let mut order = Vec::with_capacity(gates.len());
    for root in 0..gates.len() {
        if color[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = 1;
        while let Some(&mut (g, ref mut next)) = stack.last_mut() {
            if let Some(&f) = fanin_ids[g].get(*next) {
                *next += 1;
                if f >= n_inputs {
                    let fg = f - n_inputs;
                    match color[fg] {
                        0 => {
                            color[fg] = 1;
                            stack.push((fg, 0));
                        }
                        1 => return Err(NetlistError::Cycle(gates[fg].output.clone())),
                        _ => {}
                    }
                }
            } else {
                color[g] = 2;
                order.push(g);
                stack.pop();
            }
        }
    }
    Ok(order)
}
