use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::removal::{extract_locked_subcircuit, RemovalResult};
use super::{AttackConfig, AttackReport, Confidence, Mode, Result};
use crate::encode::tseitin;
use crate::key::key_to_string;
use crate::netlist::{Circuit, Tri, TriPattern};
use crate::oracle::OracleHandle;
use crate::solve::{SatStatus, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CandidateSource {
    Cone0,
    Cone1,
    SingleBit,
}

/// Partial assignment of the protected inputs to try against the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub pattern: TriPattern,
    pub source: CandidateSource,
    pub cone: Option<String>,
    /// Topological position of the cone; single-bit candidates sort last.
    #[serde(skip)]
    pub order: usize,
}

/// Candidates from every PPI-only cone of `sub` pinned to 0 and 1, plus the
/// single-bit patterns not already present, sorted by X count, cone order
/// and pattern value.
pub fn generate_candidates(
    sub: &Circuit,
    ppis: &[String],
    timeout: Option<Duration>,
) -> Vec<Candidate> {
    let ppi_set: BTreeSet<&String> = ppis.iter().collect();
    let f = tseitin(sub);
    let mut solver = Solver::from_formula(&f);
    let deadline = timeout.map(|t| Instant::now() + t);
    let mut out: Vec<Candidate> = Vec::new();
    let mut seen: HashSet<TriPattern> = HashSet::new();
    for (pos, &gi) in sub.topo_order().iter().enumerate() {
        let net = &sub.gates()[gi].output;
        let support = sub.support(net).expect("gate nets exist");
        if support.is_empty() || !support.iter().all(|s| ppi_set.contains(s)) {
            continue;
        }
        let v = f.var_map[net] as i32;
        for (val, source) in [
            (false, CandidateSource::Cone0),
            (true, CandidateSource::Cone1),
        ] {
            if solver.solve(&[if val { v } else { -v }], deadline) != SatStatus::Sat {
                continue;
            }
            let mut p = TriPattern::unknown(ppis);
            for s in &support {
                p.set(s, Tri::from_bool(solver.model()[f.var_map[s] as usize]));
            }
            if seen.insert(p.clone()) {
                out.push(Candidate {
                    pattern: p,
                    source,
                    cone: Some(net.clone()),
                    order: pos,
                });
            }
        }
    }
    for x in ppis {
        for v in [false, true] {
            let mut p = TriPattern::unknown(ppis);
            p.set(x, Tri::from_bool(v));
            if seen.insert(p.clone()) {
                out.push(Candidate {
                    pattern: p,
                    source: CandidateSource::SingleBit,
                    cone: None,
                    order: usize::MAX,
                });
            }
        }
    }
    out.sort_by_cached_key(|c| (c.pattern.x_count(), c.order, c.pattern.to_string_in(ppis)));
    out
}

/// Oracle front with an answer cache, so repeated vectors cost nothing.
struct Cached<'a> {
    oracle: &'a mut OracleHandle,
    cache: HashMap<Vec<bool>, Vec<bool>>,
}

impl Cached<'_> {
    fn answers(&mut self, vecs: &[Vec<bool>]) -> Result<Vec<Vec<bool>>> {
        let mut fresh: Vec<&Vec<bool>> = Vec::new();
        let mut pending = HashSet::new();
        for v in vecs {
            if !self.cache.contains_key(v) && pending.insert(v) {
                fresh.push(v);
            }
        }
        for chunk in fresh.chunks(64) {
            let n_in = chunk[0].len();
            let words: Vec<u64> = (0..n_in)
                .map(|i| {
                    chunk
                        .iter()
                        .enumerate()
                        .fold(0u64, |w, (lane, v)| w | ((v[i] as u64) << lane))
                })
                .collect();
            let outs = self.oracle.query_words(&words, chunk.len() as u32)?;
            for (lane, v) in chunk.iter().enumerate() {
                let o = outs.iter().map(|w| (w >> lane) & 1 == 1).collect();
                self.cache.insert((*v).clone(), o);
            }
        }
        Ok(vecs.iter().map(|v| self.cache[v].clone()).collect())
    }
}

/// Evaluates `locked` on each (primary inputs, key) pair.
fn eval_locked(
    locked: &Circuit,
    pis: &[String],
    rows: &[(Vec<bool>, BTreeMap<String, bool>)],
) -> Vec<Vec<bool>> {
    let pi_pos: HashMap<&str, usize> = pis
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(64) {
        let words: Vec<u64> = locked
            .inputs()
            .iter()
            .map(|n| {
                chunk.iter().enumerate().fold(0u64, |w, (lane, (x, key))| {
                    let b = match pi_pos.get(n.as_str()) {
                        Some(&i) => x[i],
                        None => key.get(n).copied().unwrap_or(false),
                    };
                    w | ((b as u64) << lane)
                })
            })
            .collect();
        let res = locked.eval_words(&words);
        for lane in 0..chunk.len() {
            out.push(res.iter().map(|w| (w >> lane) & 1 == 1).collect());
        }
    }
    out
}

/// Confirmation vectors: exhaustive when small, otherwise random.
fn confirmation_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<bool>> {
    if n < 64 && (1u64 << n) <= count as u64 {
        return (0..1u64 << n)
            .map(|m| (0..n).map(|i| (m >> i) & 1 == 1).collect())
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_6e66);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen()).collect())
        .collect()
}

fn confirm(
    locked: &Circuit,
    pis: &[String],
    key: &BTreeMap<String, bool>,
    oracle: &mut Cached,
    vecs: &[Vec<bool>],
) -> Result<bool> {
    let want = oracle.answers(vecs)?;
    let rows: Vec<_> = vecs.iter().map(|v| (v.clone(), key.clone())).collect();
    Ok(eval_locked(locked, pis, &rows) == want)
}

/// Oracle-guided recovery. A QBF key, when present, is only confirmed.
/// Otherwise candidates are expanded and queried with the key set from
/// the association; the first match that survives confirmation gives the
/// key.
pub fn og_attack(
    removal: &RemovalResult,
    locked: &Circuit,
    oracle: &mut OracleHandle,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    let start = Instant::now();
    let mut r = AttackReport::new(locked.name(), Mode::Og, removal);
    let pis = locked.primary_inputs();
    let before = oracle.query_count();
    let mut cached = Cached {
        oracle,
        cache: HashMap::new(),
    };
    let checks = confirmation_vectors(pis.len(), cfg.confirmations, cfg.seed);

    if let Some(qk) = &removal.qbf.key {
        let mut key: BTreeMap<String, bool> =
            removal.keys.iter().map(|k| (k.clone(), false)).collect();
        key.extend(qk.iter().map(|(k, v)| (k.clone(), *v)));
        let ok = confirm(locked, &pis, &key, &mut cached, &checks)?;
        for (k, v) in &key {
            let c = if qk.contains_key(k) {
                Confidence::Proven
            } else {
                Confidence::Guessed
            };
            r.set_bit(k, Tri::from_bool(*v), c);
        }
        r.verified = ok;
        if !ok {
            r.notes.push("QBF key disagrees with the oracle".into());
        }
    } else {
        search(removal, locked, &pis, &mut cached, &checks, cfg, &mut r)?;
    }
    r.refresh();
    r.oracle_queries = cached.oracle.query_count() - before;
    r.timings.og_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

fn search(
    removal: &RemovalResult,
    locked: &Circuit,
    pis: &[String],
    oracle: &mut Cached,
    checks: &[Vec<bool>],
    cfg: &AttackConfig,
    r: &mut AttackReport,
) -> Result<()> {
    let sub = extract_locked_subcircuit(&removal.usc, &removal.cs1.net, removal.nonflip)?;
    let ppis = &removal.ppis;
    let cands = generate_candidates(&sub, ppis, cfg.sat_timeout);
    r.candidates.generated = cands.len();
    let pi_index: HashMap<&str, usize> = pis
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let ppi_pos: Vec<usize> = ppis.iter().map(|p| pi_index[p.as_str()]).collect();
    let links: Vec<(usize, String, bool)> = removal
        .associations
        .pairs
        .iter()
        .flat_map(|a| {
            let j = ppis
                .iter()
                .position(|p| *p == a.ppi)
                .expect("associated PPIs are unit inputs");
            a.keys.iter().map(move |l| (j, l.key.clone(), l.offset))
        })
        .collect();
    let key_of = |x: &[bool]| -> BTreeMap<String, bool> {
        let mut k: BTreeMap<String, bool> =
            removal.keys.iter().map(|k| (k.clone(), false)).collect();
        for (j, name, off) in &links {
            k.insert(name.clone(), x[*j] ^ off);
        }
        k
    };
    let mut tested: HashSet<Vec<bool>> = HashSet::new();
    for c in &cands {
        let xs: Vec<usize> = (0..ppis.len())
            .filter(|&j| c.pattern.get(&ppis[j]) == Some(Tri::X))
            .collect();
        if xs.len() as u32 > cfg.max_expansion_log2 {
            r.candidates.deferred += 1;
            continue;
        }
        r.candidates.tried += 1;
        let base: Vec<bool> = ppis
            .iter()
            .map(|p| c.pattern.get(p) == Some(Tri::One))
            .collect();
        let total = 1u64 << xs.len();
        let mut m = 0u64;
        while m < total {
            let end = (m + 64).min(total);
            let mut batch: Vec<Vec<bool>> = Vec::new();
            for a in m..end {
                let mut x = base.clone();
                for (b, &j) in xs.iter().enumerate() {
                    x[j] = (a >> b) & 1 == 1;
                }
                if tested.insert(x.clone()) {
                    batch.push(x);
                }
            }
            m = end;
            if batch.is_empty() {
                continue;
            }
            r.candidates.vectors += batch.len() as u64;
            let vecs: Vec<Vec<bool>> = batch
                .iter()
                .map(|x| {
                    let mut v = vec![cfg.pi_fill; pis.len()];
                    for (j, &p) in ppi_pos.iter().enumerate() {
                        v[p] = x[j];
                    }
                    v
                })
                .collect();
            let want = oracle.answers(&vecs)?;
            let rows: Vec<_> = vecs
                .iter()
                .zip(&batch)
                .map(|(v, x)| (v.clone(), key_of(x)))
                .collect();
            let got = eval_locked(locked, pis, &rows);
            for (i, x) in batch.iter().enumerate() {
                if got[i] != want[i] {
                    continue;
                }
                let key = &rows[i].1;
                let mut vs = checks.to_vec();
                vs.push(vecs[i].clone());
                if confirm(locked, pis, key, oracle, &vs)? {
                    for (k, v) in key {
                        r.set_bit(k, Tri::from_bool(*v), Confidence::Proven);
                    }
                    r.match_pattern = Some(key_to_string(x));
                    r.verified = true;
                    return Ok(());
                }
            }
        }
    }
    r.notes
        .push("candidate budget exhausted without a confirmed match".into());
    Ok(())
}
