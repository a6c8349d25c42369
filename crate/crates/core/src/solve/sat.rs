//! Conflict-driven clause learning: two watched literals, VSIDS with phase
//! saving, first-UIP learning with local minimization, Luby restarts and
//! LBD-based clause database reduction.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::Serialize;

use crate::encode::{CnfFormula, Lit};

use super::SatStatus;

const NONE: u32 = u32::MAX;
const UNDEF: u8 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub restarts: u64,
}

impl SolverStats {
    pub fn absorb(&mut self, o: &SolverStats) {
        self.decisions += o.decisions;
        self.conflicts += o.conflicts;
        self.propagations += o.propagations;
        self.restarts += o.restarts;
    }
}

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<u32>,
    learnt: bool,
    lbd: u32,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: u32,
}

#[inline]
fn to_internal(l: Lit) -> u32 {
    ((l.unsigned_abs() - 1) << 1) | (l < 0) as u32
}

#[cfg(test)]
fn to_external(l: u32) -> Lit {
    let v = ((l >> 1) + 1) as Lit;
    if l & 1 == 1 {
        -v
    } else {
        v
    }
}

#[inline]
fn lit_value(assigns: &[u8], l: u32) -> u8 {
    let a = assigns[(l >> 1) as usize];
    if a == UNDEF {
        UNDEF
    } else {
        a ^ (l & 1) as u8
    }
}

fn luby(mut x: u64) -> u64 {
    // finite subsequence containing index x, and its size
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1 << seq
}

#[derive(Debug, Clone)]
pub struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<u32>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: BinaryHeap<(u64, Reverse<u32>)>,
    polarity: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    model: Vec<bool>,
    stats: SolverStats,
    learnt_count: usize,
    max_learnts: usize,
    restarts_done: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            heap: BinaryHeap::new(),
            polarity: Vec::new(),
            seen: Vec::new(),
            ok: true,
            model: Vec::new(),
            stats: SolverStats::default(),
            learnt_count: 0,
            max_learnts: 4000,
            restarts_done: 0,
        }
    }

    pub fn from_formula(f: &CnfFormula) -> Self {
        let mut s = Self::new();
        s.reserve_vars(f.var_count);
        for c in &f.clauses {
            s.add_clause(c);
        }
        s.max_learnts = (f.clauses.len() / 3).max(4000);
        s
    }

    pub fn num_vars(&self) -> u32 {
        self.assigns.len() as u32
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.assigns.len() as u32;
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(NONE);
        self.activity.push(0.0);
        self.polarity.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.push((0, Reverse(v)));
        v + 1
    }

    pub fn reserve_vars(&mut self, n: u32) {
        while self.num_vars() < n {
            self.new_var();
        }
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Whether the clause set is already known to be unsatisfiable.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    /// Model from the last SAT answer, indexed by variable (index 0 unused).
    pub fn model(&self) -> &[bool] {
        &self.model
    }

    pub fn model_value(&self, l: Lit) -> bool {
        self.model[l.unsigned_abs() as usize] == (l > 0)
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a clause at decision level 0. Returns false once the formula
    /// is known unsatisfiable.
    pub fn add_clause(&mut self, clause: &[Lit]) -> bool {
        debug_assert_eq!(self.decision_level(), 0);
        if !self.ok {
            return false;
        }
        let max = clause.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        self.reserve_vars(max);
        let mut lits: Vec<u32> = clause.iter().map(|&l| to_internal(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        let mut out = Vec::with_capacity(lits.len());
        for (i, &l) in lits.iter().enumerate() {
            if i + 1 < lits.len() && lits[i + 1] == l ^ 1 {
                return true; // tautology
            }
            match lit_value(&self.assigns, l) {
                1 => return true,
                0 => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], NONE);
                if self.propagate() != NONE {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(out, false, 0);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<u32>, learnt: bool, lbd: u32) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lits[0] as usize].push(Watcher {
            cref,
            blocker: lits[1],
        });
        self.watches[lits[1] as usize].push(Watcher {
            cref,
            blocker: lits[0],
        });
        if learnt {
            self.learnt_count += 1;
        }
        self.clauses.push(Clause { lits, learnt, lbd });
        cref
    }

    fn enqueue(&mut self, l: u32, reason: u32) {
        let v = (l >> 1) as usize;
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = (l & 1 == 0) as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Returns the conflicting clause, or NONE.
    fn propagate(&mut self) -> u32 {
        let mut confl = NONE;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[false_lit as usize]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if lit_value(&self.assigns, w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let c = &mut self.clauses[w.cref as usize];
                if c.lits[0] == false_lit {
                    c.lits.swap(0, 1);
                }
                let first = c.lits[0];
                let nw = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && lit_value(&self.assigns, first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.lits.len() {
                    if lit_value(&self.assigns, c.lits[k]) != 0 {
                        c.lits.swap(1, k);
                        self.watches[c.lits[1] as usize].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if lit_value(&self.assigns, first) == 0 {
                    confl = w.cref;
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                    self.qhead = self.trail.len();
                } else {
                    let v = (first >> 1) as usize;
                    self.assigns[v] = (first & 1 == 0) as u8;
                    self.level[v] = self.trail_lim.len() as u32;
                    self.reason[v] = w.cref;
                    self.trail.push(first);
                }
            }
            ws.truncate(j);
            self.watches[false_lit as usize] = ws;
            if confl != NONE {
                break;
            }
        }
        confl
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
            // stale heap keys are refreshed lazily
            self.heap = (0..self.assigns.len() as u32)
                .filter(|&u| self.assigns[u as usize] == UNDEF)
                .map(|u| (self.activity[u as usize].to_bits(), Reverse(u)))
                .collect();
        }
        if self.assigns[v] == UNDEF {
            self.heap
                .push((self.activity[v].to_bits(), Reverse(v as u32)));
        }
    }

    fn analyze(&mut self, mut confl: u32) -> (Vec<u32>, usize, u32) {
        let mut learnt: Vec<u32> = vec![0];
        let mut path = 0usize;
        let mut p = NONE;
        let mut index = self.trail.len();
        let cur = self.decision_level() as u32;
        loop {
            let start = if p == NONE { 0 } else { 1 };
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = (q >> 1) as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= cur {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[(self.trail[index] >> 1) as usize] {
                    break;
                }
            }
            p = self.trail[index];
            let v = (p >> 1) as usize;
            confl = self.reason[v];
            self.seen[v] = false;
            path -= 1;
            if path == 0 {
                break;
            }
        }
        learnt[0] = p ^ 1;
        // local minimization
        let mut keep = vec![learnt[0]];
        for &q in &learnt[1..] {
            let r = self.reason[(q >> 1) as usize];
            let redundant = r != NONE
                && self.clauses[r as usize].lits[1..].iter().all(|&x| {
                    let u = (x >> 1) as usize;
                    self.seen[u] || self.level[u] == 0
                });
            if !redundant {
                keep.push(q);
            }
        }
        for &q in &learnt[1..] {
            self.seen[(q >> 1) as usize] = false;
        }
        let mut bt = 0usize;
        if keep.len() > 1 {
            let mut mi = 1;
            for k in 2..keep.len() {
                if self.level[(keep[k] >> 1) as usize] > self.level[(keep[mi] >> 1) as usize] {
                    mi = k;
                }
            }
            keep.swap(1, mi);
            bt = self.level[(keep[1] >> 1) as usize] as usize;
        }
        let mut levels: Vec<u32> = keep
            .iter()
            .map(|&q| self.level[(q >> 1) as usize])
            .collect();
        levels.sort_unstable();
        levels.dedup();
        (keep, bt, levels.len() as u32)
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl];
        for k in (start..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = (l >> 1) as usize;
            self.polarity[v] = l & 1 == 0;
            self.assigns[v] = UNDEF;
            self.reason[v] = NONE;
            self.heap
                .push((self.activity[v].to_bits(), Reverse(v as u32)));
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl);
        self.qhead = start;
    }

    fn pick_branch(&mut self) -> Option<u32> {
        while let Some((act, Reverse(v))) = self.heap.pop() {
            let vi = v as usize;
            if self.assigns[vi] != UNDEF || act != self.activity[vi].to_bits() {
                continue;
            }
            return Some((v << 1) | (!self.polarity[vi]) as u32);
        }
        None
    }

    /// Drops half of the learnt clauses with the worst LBD. Must run at level 0.
    fn reduce_db(&mut self) {
        let mut learnts: Vec<(u32, usize, usize)> = self
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.learnt && c.lbd > 2)
            .map(|(i, c)| (c.lbd, c.lits.len(), i))
            .collect();
        learnts.sort_unstable_by(|a, b| b.cmp(a));
        let drop: std::collections::HashSet<usize> = learnts
            .iter()
            .take(learnts.len() / 2)
            .map(|x| x.2)
            .collect();
        if drop.is_empty() {
            return;
        }
        let old = std::mem::take(&mut self.clauses);
        for r in &mut self.reason {
            *r = NONE;
        }
        for w in &mut self.watches {
            w.clear();
        }
        self.learnt_count = 0;
        for (i, c) in old.into_iter().enumerate() {
            if !drop.contains(&i) {
                self.attach(c.lits, c.learnt, c.lbd);
            }
        }
    }

    fn search(
        &mut self,
        budget: u64,
        assumptions: &[u32],
        deadline: Option<Instant>,
    ) -> Option<SatStatus> {
        let mut conflicts = 0u64;
        let mut ticks = 0u32;
        loop {
            let confl = self.propagate();
            if confl != NONE {
                self.stats.conflicts += 1;
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SatStatus::Unsat);
                }
                let (learnt, bt, lbd) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NONE);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true, lbd);
                    self.enqueue(first, cref);
                }
                self.var_inc /= 0.95;
                continue;
            }
            ticks = ticks.wrapping_add(1);
            if ticks.is_multiple_of(128) {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        self.cancel_until(0);
                        return Some(SatStatus::Timeout);
                    }
                }
            }
            if conflicts >= budget {
                self.cancel_until(0);
                return None;
            }
            let dl = self.decision_level();
            let next = if dl < assumptions.len() {
                let p = assumptions[dl];
                match lit_value(&self.assigns, p) {
                    1 => {
                        self.trail_lim.push(self.trail.len());
                        continue;
                    }
                    0 => {
                        self.cancel_until(0);
                        return Some(SatStatus::Unsat);
                    }
                    _ => p,
                }
            } else {
                match self.pick_branch() {
                    Some(l) => l,
                    None => {
                        self.model = std::iter::once(false)
                            .chain(self.assigns.iter().map(|&a| a == 1))
                            .collect();
                        self.cancel_until(0);
                        return Some(SatStatus::Sat);
                    }
                }
            };
            self.stats.decisions += 1;
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, NONE);
        }
    }

    /// Solves under `assumptions`; UNSAT may be relative to them. The
    /// solver returns to level 0 and stays usable for further clauses.
    pub fn solve(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> SatStatus {
        self.model.clear();
        if !self.ok {
            return SatStatus::Unsat;
        }
        if let Some(m) = assumptions.iter().map(|l| l.unsigned_abs()).max() {
            self.reserve_vars(m);
        }
        if self.propagate() != NONE {
            self.ok = false;
            return SatStatus::Unsat;
        }
        let assumptions: Vec<u32> = assumptions.iter().map(|&l| to_internal(l)).collect();
        loop {
            let budget = luby(self.restarts_done) * 100;
            if let Some(st) = self.search(budget, &assumptions, deadline) {
                return st;
            }
            self.restarts_done += 1;
            self.stats.restarts += 1;
            if self.learnt_count > self.max_learnts {
                self.reduce_db();
                self.max_learnts += self.max_learnts / 10;
            }
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return SatStatus::Timeout;
                }
            }
        }
    }

    /// Literals of the last model restricted to `vars`, as DIMACS literals.
    pub fn model_lits(&self, vars: impl IntoIterator<Item = u32>) -> Vec<Lit> {
        vars.into_iter()
            .map(|v| {
                let l = v as Lit;
                if self.model[v as usize] {
                    l
                } else {
                    -l
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luby_prefix() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn literal_coding_round_trips() {
        for l in [1, -1, 7, -7, 1000, -1000] {
            assert_eq!(to_external(to_internal(l)), l);
        }
    }

    #[test]
    fn contradiction_and_units() {
        let mut s = Solver::new();
        assert!(s.add_clause(&[1]));
        assert!(!s.add_clause(&[-1]));
        assert_eq!(s.solve(&[], None), SatStatus::Unsat);

        let mut s = Solver::new();
        s.add_clause(&[1, 2]);
        s.add_clause(&[-1, 2]);
        assert_eq!(s.solve(&[], None), SatStatus::Sat);
        assert!(s.model_value(2));
        assert_eq!(s.solve(&[-2], None), SatStatus::Unsat);
        assert!(s.is_ok());
        assert_eq!(s.solve(&[1], None), SatStatus::Sat);
    }

    #[test]
    fn pigeonhole_4_into_3_is_unsat() {
        let (p, h) = (4, 3);
        let var = |i: usize, j: usize| (i * h + j + 1) as Lit;
        let mut s = Solver::new();
        for i in 0..p {
            s.add_clause(&(0..h).map(|j| var(i, j)).collect::<Vec<_>>());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    s.add_clause(&[-var(a, j), -var(b, j)]);
                }
            }
        }
        assert_eq!(s.solve(&[], None), SatStatus::Unsat);
        assert!(s.stats().conflicts > 0);
    }
}
