use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::encode::{Lit, QbfProblem};

use super::{deadline_after, SatStatus, Solver, SolverStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QbfStatus {
    True,
    False,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbfResult {
    pub status: QbfStatus,
    /// Values of the existential variables; present iff TRUE.
    pub key_model: Option<BTreeMap<u32, bool>>,
    pub iterations: usize,
    pub stats: SolverStats,
    pub elapsed: Duration,
}

/// Adds one copy of the matrix with the pinned literal asserted.
/// Existential variables are shared, universal ones are replaced by
/// `forall_lit`, auxiliaries get fresh variables.
fn instantiate(s: &mut Solver, q: &QbfProblem, forall_lit: &dyn Fn(u32) -> Lit) {
    let n = q.matrix.var_count as usize;
    let mut map: Vec<Lit> = vec![0; n + 1];
    for v in 1..=n as u32 {
        map[v as usize] = if q.exists_vars.contains(&v) {
            v as Lit
        } else if q.forall_vars.contains(&v) {
            forall_lit(v)
        } else {
            s.new_var() as Lit
        };
    }
    let tr = |l: Lit| {
        let m = map[l.unsigned_abs() as usize];
        if l > 0 {
            m
        } else {
            -m
        }
    };
    for c in &q.matrix.clauses {
        let mapped: Vec<Lit> = c.iter().map(|&l| tr(l)).collect();
        s.add_clause(&mapped);
    }
    let p = q.pinned_var as Lit;
    s.add_clause(&[tr(if q.pinned_value { p } else { -p })]);
}

fn key_lits(q: &QbfProblem, model: &[bool]) -> Vec<Lit> {
    q.exists_vars
        .iter()
        .map(|&v| {
            if model[v as usize] {
                v as Lit
            } else {
                -(v as Lit)
            }
        })
        .collect()
}

/// Checks that no universal assignment violates the pinned value under `key`.
fn verify_candidate(q: &QbfProblem, key: &[Lit], deadline: Option<Instant>) -> SatStatus {
    let mut v = Solver::from_formula(&q.matrix);
    let p = q.pinned_var as Lit;
    v.add_clause(&[if q.pinned_value { -p } else { p }]);
    v.solve(key, deadline)
}

/// CEGAR for `exists K . forall P . matrix /\ pinned`. Each universal
/// counterexample refines the abstraction with a constant copy of the
/// matrix; when the problem carries pairing hints, it also gets copies
/// where each hinted universal is the paired existential XOR the offset
/// observed at the counterexample. Both are sound instantiations.
pub fn solve_2qbf(q: &QbfProblem, timeout: Option<Duration>) -> QbfResult {
    let start = Instant::now();
    let deadline = deadline_after(timeout);
    let mut abs = Solver::new();
    abs.reserve_vars(q.matrix.var_count);
    let t = abs.new_var() as Lit;
    abs.add_clause(&[t]);

    let mut ver = Solver::from_formula(&q.matrix);
    let p = q.pinned_var as Lit;
    ver.add_clause(&[if q.pinned_value { -p } else { p }]);

    let mut slots: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for h in &q.hints {
        if q.forall_vars.contains(&h.forall_var) && q.exists_vars.contains(&h.exists_var) {
            slots.entry(h.forall_var).or_default().push(h.exists_var);
        }
    }
    let slot_count = slots.values().map(|v| v.len()).max().unwrap_or(0);

    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut iterations = 0usize;
    let finish = |status, key_model, iterations, abs: &Solver, ver: &Solver| {
        let mut stats = abs.stats();
        stats.absorb(&ver.stats());
        QbfResult {
            status,
            key_model,
            iterations,
            stats,
            elapsed: start.elapsed(),
        }
    };
    loop {
        match abs.solve(&[], deadline) {
            SatStatus::Timeout => return finish(QbfStatus::Timeout, None, iterations, &abs, &ver),
            SatStatus::Unsat => return finish(QbfStatus::False, None, iterations, &abs, &ver),
            SatStatus::Sat => {}
        }
        let kmodel = abs.model().to_vec();
        let key = key_lits(q, &kmodel);
        match ver.solve(&key, deadline) {
            SatStatus::Timeout => return finish(QbfStatus::Timeout, None, iterations, &abs, &ver),
            SatStatus::Unsat => {
                assert_eq!(
                    verify_candidate(q, &key, None),
                    SatStatus::Unsat,
                    "CEGAR candidate failed re-verification"
                );
                let km = q
                    .exists_vars
                    .iter()
                    .map(|&v| (v, kmodel[v as usize]))
                    .collect();
                return finish(QbfStatus::True, Some(km), iterations, &abs, &ver);
            }
            SatStatus::Sat => {}
        }
        let cex: BTreeMap<u32, bool> = q
            .forall_vars
            .iter()
            .map(|&v| (v, ver.model()[v as usize]))
            .collect();
        assert!(
            seen.insert(cex.values().copied().collect()),
            "CEGAR repeated a counterexample"
        );
        iterations += 1;
        instantiate(&mut abs, q, &|v| if cex[&v] { t } else { -t });
        for s in 0..slot_count {
            instantiate(
                &mut abs,
                q,
                &|v| match slots.get(&v).and_then(|ks| ks.get(s)) {
                    Some(&k) => {
                        if cex[&v] ^ kmodel[k as usize] {
                            -(k as Lit)
                        } else {
                            k as Lit
                        }
                    }
                    None => {
                        if cex[&v] {
                            t
                        } else {
                            -t
                        }
                    }
                },
            );
        }
    }
}

/// Universal expansion: one SAT call over all `2^|P|` matrix copies.
/// Returns None when there are more than `max_forall` universals.
pub fn expand_2qbf(q: &QbfProblem, max_forall: usize) -> Option<QbfResult> {
    if q.forall_vars.len() > max_forall {
        return None;
    }
    let start = Instant::now();
    let mut s = Solver::new();
    s.reserve_vars(q.matrix.var_count);
    let t = s.new_var() as Lit;
    s.add_clause(&[t]);
    let fv: Vec<u32> = q.forall_vars.iter().copied().collect();
    for m in 0..1u64 << fv.len() {
        let pos: BTreeMap<u32, bool> = fv
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, (m >> i) & 1 == 1))
            .collect();
        instantiate(&mut s, q, &|v| if pos[&v] { t } else { -t });
    }
    let status = s.solve(&[], None);
    let key_model = (status == SatStatus::Sat).then(|| {
        q.exists_vars
            .iter()
            .map(|&v| (v, s.model()[v as usize]))
            .collect()
    });
    Some(QbfResult {
        status: if key_model.is_some() {
            QbfStatus::True
        } else {
            QbfStatus::False
        },
        key_model,
        iterations: 1 << fv.len(),
        stats: s.stats(),
        elapsed: start.elapsed(),
    })
}
