//! Key recovery: removal of the key-bearing unit, QBF pinning for single-flip
//! schemes, oracle-less guessing on modified circuits and oracle-guided
//! search for the protected pattern of double-flip schemes.

mod og;
mod ol;
mod removal;
mod report;
mod verify;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::encode::EncodeError;
use crate::netlist::{Circuit, NetlistError, Tri};
use crate::oracle::{OracleError, OracleHandle};

pub use og::{generate_candidates, og_attack, Candidate, CandidateSource};
pub use ol::{
    constant_propagation_guess, ol_attack, ppi_stripped_unit, ppi_substituted_subcircuit,
};
pub use removal::{
    associate_ppi_keys, comparator_check, comparator_offsets, extract_locked_subcircuit,
    extract_unit, find_critical_signal, nonflip_value, qbf_key_recovery, recompose, removal_phase,
    Association, Associations, CriticalSignal, KeyLink, QbfAttempt, QbfOutcome, RemovalResult,
};
pub use report::{AttackReport, CandidateCounts, Confidence, Mode, PhaseTimings, SCHEMA_VERSION};
pub use verify::{reconstruct_fsc_patch, score_guess, verify_key, Reference};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("circuit has no key inputs")]
    NoKeys,
    #[error("no critical signal: locking style is not single- or double-flip ({0})")]
    NotSfltOrDflt(String),
    #[error("critical signal `{0}` reaches no primary output")]
    Malformed(String),
    #[error("key is incomplete at `{0}`")]
    IncompleteKey(String),
    #[error("oracle-guided mode needs an oracle")]
    NoOracle,
    #[error("no patterns to patch")]
    EmptyPatterns,
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, AttackError>;

/// Outcome of the removal phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    SfltKeyFound,
    RestoreUnit,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub mode: Mode,
    pub qbf_timeout: Option<Duration>,
    pub sat_timeout: Option<Duration>,
    /// Value of non-protected primary inputs during oracle queries.
    pub pi_fill: bool,
    /// Bound on `2^X` when expanding a candidate.
    pub max_expansion_log2: u32,
    /// Random confirmation vectors after a match.
    pub confirmations: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            mode: Mode::Ol,
            qbf_timeout: Some(Duration::from_secs(60)),
            sat_timeout: None,
            pi_fill: false,
            max_expansion_log2: 20,
            confirmations: 64,
            seed: 0,
        }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs the whole flow on `locked`. OG mode requires `oracle`.
pub fn attack(
    locked: &Circuit,
    cfg: &AttackConfig,
    oracle: Option<&mut OracleHandle>,
) -> Result<AttackReport> {
    if cfg.mode == Mode::Og && oracle.is_none() {
        return Err(AttackError::NoOracle);
    }
    let start = Instant::now();
    let removal = removal_phase(locked, cfg)?;
    let removal_ms = ms(start.elapsed());
    let mut report = match cfg.mode {
        Mode::Ol => ol_attack(locked, &removal, cfg)?,
        Mode::Og => og_attack(&removal, locked, oracle.expect("checked above"), cfg)?,
    };
    report.timings.removal_ms = removal_ms;
    report.timings.qbf_ms = removal.qbf.attempts.iter().map(|a| a.elapsed_ms).sum();
    report.timings.total_ms = ms(start.elapsed());
    Ok(report)
}

/// Key inputs of `c` ordered `k_1..k_n` by numeric suffix.
pub(crate) fn sorted_keys(c: &Circuit) -> Vec<String> {
    crate::key::ordered_keys(c.key_inputs(), crate::netlist::DEFAULT_KEY_PREFIX)
}

pub(crate) fn all_x(keys: &[String]) -> BTreeMap<String, Tri> {
    keys.iter().map(|k| (k.clone(), Tri::X)).collect()
}
