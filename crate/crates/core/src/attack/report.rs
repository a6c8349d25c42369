use std::collections::BTreeMap;

use serde::Serialize;

use super::removal::{Associations, QbfOutcome, RemovalResult};
use super::Classification;
use crate::netlist::Tri;
use crate::solve::SolverStats;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Ol,
    Og,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s.to_ascii_lowercase().as_str() {
            "ol" => Ok(Mode::Ol),
            "og" => Ok(Mode::Og),
            _ => Err(format!("unknown mode `{s}` (expected ol or og)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Confidence {
    Proven,
    Guessed,
    /// Bit left at X.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CandidateCounts {
    pub generated: usize,
    pub tried: usize,
    pub deferred: usize,
    pub vectors: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub removal_ms: f64,
    pub qbf_ms: f64,
    pub ol_ms: f64,
    pub og_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub schema_version: u32,
    pub circuit: String,
    pub mode: Mode,
    /// `k_n..k_1`, X where undeciphered.
    pub key: String,
    pub key_bits: BTreeMap<String, Tri>,
    pub confidence: BTreeMap<String, Confidence>,
    pub deciphered: usize,
    pub cs1: String,
    pub cs1_ambiguous: Vec<String>,
    pub classification: Classification,
    pub protected_inputs: Vec<String>,
    pub associations: Associations,
    pub qbf: QbfOutcome,
    pub candidates: CandidateCounts,
    /// Protected-input pattern (`x_n..x_1`) at which the oracle matched.
    pub match_pattern: Option<String>,
    pub oracle_queries: u64,
    pub timings: PhaseTimings,
    pub solver: SolverStats,
    pub verified: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    key_order: Vec<String>,
}

impl AttackReport {
    /// Empty report for `keys` (ordered `k_1` first) after removal.
    pub(crate) fn new(circuit: &str, mode: Mode, removal: &RemovalResult) -> AttackReport {
        let mut solver = SolverStats::default();
        for a in &removal.qbf.attempts {
            solver.absorb(&a.stats);
        }
        let mut notes = Vec::new();
        if !removal.cs1.ambiguous.is_empty() {
            notes.push(format!(
                "critical signal tie at the same level: {}",
                removal.cs1.ambiguous.join(", ")
            ));
        }
        if !removal.associations.unassociated_keys.is_empty() {
            notes.push(format!(
                "unassociated keys: {}",
                removal.associations.unassociated_keys.join(", ")
            ));
        }
        let mut r = AttackReport {
            schema_version: SCHEMA_VERSION,
            circuit: circuit.to_string(),
            mode,
            key: String::new(),
            key_bits: super::all_x(&removal.keys),
            confidence: BTreeMap::new(),
            deciphered: 0,
            cs1: removal.cs1.net.clone(),
            cs1_ambiguous: removal.cs1.ambiguous.clone(),
            classification: removal.classification,
            protected_inputs: removal.ppis.clone(),
            associations: removal.associations.clone(),
            qbf: removal.qbf.clone(),
            candidates: CandidateCounts::default(),
            match_pattern: None,
            oracle_queries: 0,
            timings: PhaseTimings::default(),
            solver,
            verified: false,
            notes,
            key_order: removal.keys.clone(),
        };
        r.refresh();
        r
    }

    pub(crate) fn set_bit(&mut self, key: &str, v: Tri, c: Confidence) {
        self.key_bits.insert(key.to_string(), v);
        self.confidence.insert(
            key.to_string(),
            if v == Tri::X { Confidence::None } else { c },
        );
    }

    /// Recomputes the key string and the deciphered count.
    pub(crate) fn refresh(&mut self) {
        for k in self.key_bits.keys() {
            self.confidence.entry(k.clone()).or_insert(Confidence::None);
        }
        let ordered: Vec<Tri> = self.key_order.iter().map(|k| self.key_bits[k]).collect();
        self.key = crate::key::tri_key_to_string(&ordered);
        self.deciphered = ordered.iter().filter(|t| **t != Tri::X).count();
    }

    /// Key values `k_1` first, if every bit is deciphered.
    pub fn full_key(&self) -> Option<Vec<bool>> {
        self.key_order
            .iter()
            .map(|k| self.key_bits[k].to_bool())
            .collect()
    }

    pub fn key_order(&self) -> &[String] {
        &self.key_order
    }

    pub fn all_proven(&self) -> bool {
        !self.confidence.is_empty() && self.confidence.values().all(|c| *c == Confidence::Proven)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
