//! Locking schemes with ground-truth keys: SARLock, Anti-SAT, CAS-Lock and
//! Gen-Anti-SAT flip one output through a single critical signal; TTLock
//! and CAC corrupt it at a protected pattern and restore it under the key.

mod schemes;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::{key_name, key_to_string};
use crate::netlist::{
    exhaustive_block, exhaustive_blocks, randomize_structure, Circuit, GateKind, NetlistError,
    DEFAULT_KEY_PREFIX,
};

use schemes::{anti_sat_ops, comparator, minterm, Builder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    Sarlock,
    Antisat,
    Caslock,
    GenAntisat,
    Ttlock,
    Cac,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Sarlock,
        Scheme::Antisat,
        Scheme::Caslock,
        Scheme::GenAntisat,
        Scheme::Ttlock,
        Scheme::Cac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Sarlock => "SARLOCK",
            Scheme::Antisat => "ANTISAT",
            Scheme::Caslock => "CASLOCK",
            Scheme::GenAntisat => "GEN_ANTISAT",
            Scheme::Ttlock => "TTLOCK",
            Scheme::Cac => "CAC",
        }
    }

    /// Double-flip schemes carry a perturb unit and a restore unit.
    pub fn is_dflt(self) -> bool {
        matches!(self, Scheme::Ttlock | Scheme::Cac)
    }

    /// Two key inputs per protected input.
    pub fn is_anti_sat_family(self) -> bool {
        matches!(self, Scheme::Antisat | Scheme::Caslock | Scheme::GenAntisat)
    }

    pub fn keys_per_input(self) -> usize {
        if self.is_anti_sat_family() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = LockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        Ok(match norm.as_str() {
            "SARLOCK" => Scheme::Sarlock,
            "ANTISAT" => Scheme::Antisat,
            "CASLOCK" => Scheme::Caslock,
            "GENANTISAT" => Scheme::GenAntisat,
            "TTLOCK" => Scheme::Ttlock,
            "CAC" => Scheme::Cac,
            _ => return Err(LockError::UnknownScheme(s.to_string())),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LockError {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("key width must be positive")]
    ZeroKeyWidth,
    #[error("{scheme} needs key width {expected} for {inputs} protected inputs, got {got}")]
    KeyWidth {
        scheme: Scheme,
        expected: usize,
        inputs: usize,
        got: usize,
    },
    #[error("secret key has {got} bits, expected {expected}")]
    SecretWidth { expected: usize, got: usize },
    #[error("`{0}` is not a primary input")]
    NotPrimaryInput(String),
    #[error("protected input `{0}` listed twice")]
    DuplicateInput(String),
    #[error("no output depends on all protected inputs")]
    NoTargetOutput,
    #[error("circuit already has key inputs")]
    AlreadyLocked,
    #[error("invalid pairing: {0}")]
    Pairing(String),
    #[error("circuit has only {available} primary inputs, {wanted} requested")]
    TooFewInputs { available: usize, wanted: usize },
    #[error("brute-force bound exceeded: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockSpec {
    pub scheme: Scheme,
    pub key_width: usize,
    /// Indexed from `k_1`.
    pub secret_key: Vec<bool>,
    pub protected_inputs: Vec<String>,
    pub rng_seed: u64,
    /// Key index (0-based) compared against each protected input. Length
    /// `|protected| * keys_per_input`; entry `j + n*s` serves input `j`
    /// in block `s`. Seeded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Vec<usize>>,
}

impl LockSpec {
    /// Spec with a seeded secret key of the scheme's natural width.
    pub fn random(scheme: Scheme, protected_inputs: Vec<String>, seed: u64) -> LockSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_4b65);
        let key_width = protected_inputs.len() * scheme.keys_per_input();
        LockSpec {
            scheme,
            key_width,
            secret_key: (0..key_width).map(|_| rng.gen_bool(0.5)).collect(),
            protected_inputs,
            rng_seed: seed,
            pairing: None,
        }
    }

    pub fn with_pairing(mut self, pairing: Vec<usize>) -> LockSpec {
        self.pairing = Some(pairing);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockedBundle {
    pub locked: Circuit,
    pub original: Circuit,
    pub spec: LockSpec,
    pub target_output: String,
    /// Key index per protected input (and per block for the Anti-SAT family).
    pub pairing: Vec<usize>,
    /// DFLTs only: the corrupted input pattern, ordered like `protected_inputs`.
    pub protected_pattern: Option<Vec<bool>>,
}

impl LockedBundle {
    pub fn key_names(&self) -> Vec<String> {
        (0..self.spec.key_width)
            .map(|i| key_name(DEFAULT_KEY_PREFIX, i))
            .collect()
    }

    /// Protected pattern as `x_n..x_1` over the protected input order.
    pub fn protected_pattern_string(&self) -> Option<String> {
        self.protected_pattern.as_deref().map(key_to_string)
    }

    /// Comment header for bench emission.
    pub fn header(&self) -> Vec<(&'static str, String)> {
        let mut h = vec![
            ("scheme", self.spec.scheme.to_string()),
            ("key", key_to_string(&self.spec.secret_key)),
            ("seed", self.spec.rng_seed.to_string()),
            ("protected", self.spec.protected_inputs.join(",")),
            ("target", self.target_output.clone()),
        ];
        if let Some(p) = self.protected_pattern_string() {
            h.push(("pattern", p));
        }
        h
    }

    /// Same bundle with the locked netlist structurally randomized.
    pub fn randomized(&self, seed: u64) -> LockedBundle {
        LockedBundle {
            locked: randomize_structure(&self.locked, seed),
            ..self.clone()
        }
    }
}

/// Output whose support covers `protected` and whose fanin cone is largest.
pub fn select_target_output(c: &Circuit, protected: &[String]) -> Option<String> {
    let mut best: Option<(usize, String)> = None;
    for o in c.outputs() {
        let id = c.net_id(o).expect("outputs are driven");
        let mask = c.fanin_mask(&[id]);
        let covers = protected
            .iter()
            .all(|p| c.net_id(p).is_some_and(|pid| mask[pid]));
        if !covers {
            continue;
        }
        let size = mask.iter().filter(|b| **b).count();
        if best.as_ref().is_none_or(|(s, _)| size > *s) {
            best = Some((size, o.clone()));
        }
    }
    best.map(|(_, o)| o)
}

/// Chooses `n` primary inputs in the support of one output, preferring
/// the output with the largest support.
pub fn choose_protected_inputs(c: &Circuit, n: usize, seed: u64) -> Result<Vec<String>, LockError> {
    let mut best: Option<Vec<String>> = None;
    for o in c.outputs() {
        let sup: Vec<String> = c
            .support(o)?
            .into_iter()
            .filter(|i| !c.is_key_input(i))
            .collect();
        if best.as_ref().is_none_or(|b| sup.len() > b.len()) {
            best = Some(sup);
        }
    }
    let mut sup = best.unwrap_or_default();
    if sup.len() < n {
        return Err(LockError::TooFewInputs {
            available: sup.len(),
            wanted: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7072_6f74);
    sup.shuffle(&mut rng);
    sup.truncate(n);
    // keep declaration order
    let order: HashMap<&String, usize> =
        c.inputs().iter().enumerate().map(|(i, n)| (n, i)).collect();
    sup.sort_by_key(|s| order[s]);
    Ok(sup)
}

fn check_spec(original: &Circuit, spec: &LockSpec) -> Result<(), LockError> {
    if spec.key_width == 0 {
        return Err(LockError::ZeroKeyWidth);
    }
    if !original.key_inputs().is_empty() {
        return Err(LockError::AlreadyLocked);
    }
    let n = spec.protected_inputs.len();
    let expected = n * spec.scheme.keys_per_input();
    if expected != spec.key_width {
        return Err(LockError::KeyWidth {
            scheme: spec.scheme,
            expected,
            inputs: n,
            got: spec.key_width,
        });
    }
    if spec.secret_key.len() != spec.key_width {
        return Err(LockError::SecretWidth {
            expected: spec.key_width,
            got: spec.secret_key.len(),
        });
    }
    let mut seen = HashSet::new();
    for p in &spec.protected_inputs {
        if !original.is_input(p) {
            return Err(LockError::NotPrimaryInput(p.clone()));
        }
        if !seen.insert(p) {
            return Err(LockError::DuplicateInput(p.clone()));
        }
    }
    Ok(())
}

fn resolve_pairing(spec: &LockSpec, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, LockError> {
    let w = spec.key_width;
    if let Some(p) = &spec.pairing {
        if p.len() != w {
            return Err(LockError::Pairing(format!(
                "length {} != key width {w}",
                p.len()
            )));
        }
        let set: BTreeSet<usize> = p.iter().copied().collect();
        if set.len() != w || set.iter().any(|&i| i >= w) {
            return Err(LockError::Pairing(
                "not a permutation of key indices".into(),
            ));
        }
        return Ok(p.clone());
    }
    if spec.scheme.is_anti_sat_family() {
        // input j meets k_j in the first block and k_{n+j} in the second
        Ok((0..w).collect())
    } else {
        let mut p: Vec<usize> = (0..w).collect();
        p.shuffle(rng);
        Ok(p)
    }
}

/// Locks `original` per `spec`. The target output keeps its name; its old
/// driver is renamed.
pub fn lock(original: &Circuit, spec: &LockSpec) -> Result<LockedBundle, LockError> {
    check_spec(original, spec)?;
    let target =
        select_target_output(original, &spec.protected_inputs).ok_or(LockError::NoTargetOutput)?;
    if original.is_input(&target) {
        return Err(LockError::NoTargetOutput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let pairing = resolve_pairing(spec, &mut rng)?;
    let n = spec.protected_inputs.len();
    let keys: Vec<String> = (0..spec.key_width)
        .map(|i| key_name(DEFAULT_KEY_PREFIX, i))
        .collect();
    for k in &keys {
        if original.contains(k) {
            return Err(LockError::AlreadyLocked);
        }
    }

    let (name, inputs, _, outputs, gates) = original.clone().into_parts();
    let mut taken: HashSet<String> = inputs.iter().cloned().collect();
    taken.extend(gates.iter().map(|g| g.output.clone()));
    taken.extend(keys.iter().cloned());
    let renamed = original.fresh_name(&format!("{target}_o"));
    taken.insert(renamed.clone());
    let gates: Vec<_> = gates
        .into_iter()
        .map(|mut g| {
            if g.output == target {
                g.output = renamed.clone();
            }
            for f in &mut g.fanins {
                if *f == target {
                    *f = renamed.clone();
                }
            }
            g
        })
        .collect();

    let mut b = Builder::new(taken, "lk", &mut rng);
    let x = &spec.protected_inputs;
    let s = &spec.secret_key;
    let key_of = |j: usize, block: usize| keys[pairing[j + n * block]].clone();
    let mut protected_pattern = None;

    let flip_source = match spec.scheme {
        Scheme::Sarlock => {
            let pairs: Vec<(String, String)> =
                (0..n).map(|j| (x[j].clone(), key_of(j, 0))).collect();
            let cmp_bits: Vec<String> = pairs
                .iter()
                .map(|(xj, kj)| b.match_bit(xj, kj, false))
                .collect();
            let ncmp = b.tree(GateKind::And, GateKind::Nand, &cmp_bits);
            let mut lits: Vec<String> = (0..spec.key_width)
                .map(|i| b.literal(&keys[i], s[i]))
                .collect();
            b.shuffle(&mut lits);
            let mask = b.tree(GateKind::And, GateKind::And, &lits);
            b.gate(GateKind::Nor, vec![ncmp, mask])
        }
        Scheme::Antisat | Scheme::Caslock | Scheme::GenAntisat => {
            let a: Vec<bool> = (0..n).map(|_| b.rng.gen_bool(0.5)).collect();
            let c: Vec<bool> = (0..n)
                .map(|j| a[j] ^ s[pairing[j]] ^ s[pairing[n + j]])
                .collect();
            let y: Vec<String> = (0..n)
                .map(|j| b.match_bit(&x[j], &key_of(j, 0), a[j]))
                .collect();
            let z: Vec<String> = (0..n)
                .map(|j| b.match_bit(&x[j], &key_of(j, 1), c[j]))
                .collect();
            let (g, gbar) = if spec.scheme == Scheme::Antisat {
                (
                    b.tree(GateKind::And, GateKind::And, &y),
                    b.tree(GateKind::And, GateKind::Nand, &z),
                )
            } else {
                let (fo, ho) = anti_sat_ops(spec.scheme, n, b.rng);
                let g = b.cascade(&fo, &y);
                let h = b.cascade(&ho, &z);
                (g, b.not(&h))
            };
            b.gate(GateKind::And, vec![g, gbar])
        }
        Scheme::Ttlock | Scheme::Cac => {
            let p: Vec<bool> = (0..n).map(|j| s[pairing[j]]).collect();
            let cs2 = minterm(&mut b, x, &p);
            let fsc = if spec.scheme == Scheme::Cac {
                b.gate(GateKind::Xor, vec![renamed.clone(), cs2])
            } else {
                let ncs2 = b.not(&cs2);
                let no = b.not(&renamed);
                let keep = b.gate(GateKind::And, vec![renamed.clone(), ncs2]);
                let flip = b.gate(GateKind::And, vec![no, cs2]);
                b.gate(GateKind::Or, vec![keep, flip])
            };
            protected_pattern = Some(p);
            let pairs: Vec<(String, String)> =
                (0..n).map(|j| (x[j].clone(), key_of(j, 0))).collect();
            let cs1 = comparator(&mut b, &pairs);
            b.gate_named(target.clone(), GateKind::Xor, vec![fsc, cs1]);
            String::new()
        }
    };
    if !spec.scheme.is_dflt() {
        b.gate_named(
            target.clone(),
            GateKind::Xor,
            vec![renamed.clone(), flip_source],
        );
    }

    let mut all_gates = gates;
    all_gates.extend(b.gates);
    let mut all_inputs = inputs;
    all_inputs.extend(keys.iter().cloned());
    let locked = Circuit::new(
        format!("{name}_{}", spec.scheme.name().to_ascii_lowercase()),
        all_inputs,
        keys,
        outputs,
        all_gates,
    )?;
    Ok(LockedBundle {
        locked,
        original: original.clone(),
        spec: spec.clone(),
        target_output: target,
        pairing,
        protected_pattern,
    })
}

/// Input assignment in `c.inputs()` order from primary-input bits and key
/// bits (key indexed from `k_1`, names `keyinput<i>`).
pub fn assemble_inputs(c: &Circuit, primary: &BTreeMap<&str, u64>, key: &[bool]) -> Vec<u64> {
    c.inputs()
        .iter()
        .map(|n| {
            if let Some(i) = n
                .strip_prefix(DEFAULT_KEY_PREFIX)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|_| c.is_key_input(n))
            {
                if key[i - 1] {
                    !0
                } else {
                    0
                }
            } else {
                primary[n.as_str()]
            }
        })
        .collect()
}

/// Primary-input patterns (bit `i` = `i`-th primary input) where `locked`
/// under `key` differs from `original`. Exhaustive; at most 20 inputs.
pub fn differing_patterns(
    locked: &Circuit,
    original: &Circuit,
    key: &[bool],
) -> Result<BTreeSet<u64>, LockError> {
    let pis = original.inputs();
    if pis.len() > 20 {
        return Err(LockError::TooLarge(format!("{} primary inputs", pis.len())));
    }
    let (blocks, mask) = exhaustive_blocks(pis.len());
    let mut out = BTreeSet::new();
    for blk in 0..blocks {
        let w = exhaustive_block(pis.len(), blk);
        let prim: BTreeMap<&str, u64> = pis
            .iter()
            .map(|s| s.as_str())
            .zip(w.iter().copied())
            .collect();
        let lw = locked.eval_words(&assemble_inputs(locked, &prim, key));
        let ow = original.eval_words(&w);
        let mut diff = 0u64;
        for (a, o) in lw.iter().zip(&ow) {
            diff |= a ^ o;
        }
        diff &= mask;
        while diff != 0 {
            let lane = diff.trailing_zeros() as u64;
            out.insert(blk * 64 + lane);
            diff &= diff - 1;
        }
    }
    Ok(out)
}

/// For every key value (as an integer with bit `i` = `k_{i+1}`), the
/// primary-input patterns where the locked circuit is wrong.
pub fn corruption_profile(b: &LockedBundle) -> Result<BTreeMap<u64, BTreeSet<u64>>, LockError> {
    let n_in = b.original.inputs().len();
    let w = b.spec.key_width;
    if n_in > 12 || w > 12 {
        return Err(LockError::TooLarge(format!("{n_in} inputs, {w} key bits")));
    }
    let mut out = BTreeMap::new();
    for kv in 0..1u64 << w {
        let key: Vec<bool> = (0..w).map(|i| (kv >> i) & 1 == 1).collect();
        out.insert(kv, differing_patterns(&b.locked, &b.original, &key)?);
    }
    Ok(out)
}

/// Key as the integer used by `corruption_profile`.
pub fn key_index(key: &[bool]) -> u64 {
    key.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
}
