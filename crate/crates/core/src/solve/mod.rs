//! SAT and two-level QBF decision procedures.

mod external;
mod qbf;
mod sat;

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::encode::CnfFormula;

pub use external::{run_external, ExternalError, ExternalKind, ExternalVerdict};
pub use qbf::{expand_2qbf, solve_2qbf, QbfResult, QbfStatus};
pub use sat::{Solver, SolverStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SatStatus {
    Sat,
    Unsat,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatResult {
    pub status: SatStatus,
    /// Indexed by variable; index 0 unused. Present iff SAT.
    pub model: Option<Vec<bool>>,
    pub stats: SolverStats,
    pub elapsed: Duration,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        self.status == SatStatus::Sat
    }
}

pub(crate) fn deadline_after(timeout: Option<Duration>) -> Option<Instant> {
    timeout.map(|t| Instant::now() + t)
}

/// Decides `f`. SAT models are checked against every clause.
pub fn solve_sat(f: &CnfFormula, timeout: Option<Duration>) -> SatResult {
    let start = Instant::now();
    let mut s = Solver::from_formula(f);
    let status = s.solve(&[], deadline_after(timeout));
    let model = if status == SatStatus::Sat {
        let mut m = s.model().to_vec();
        m.resize(f.var_count as usize + 1, false);
        assert!(f.satisfied_by(&m), "solver returned a non-model");
        Some(m)
    } else {
        None
    };
    SatResult {
        status,
        model,
        stats: s.stats(),
        elapsed: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::tseitin;
    use crate::netlist::library;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_sat(f: &CnfFormula) -> bool {
        let n = f.var_count as usize;
        (0..1u64 << n).any(|m| {
            let model: Vec<bool> = std::iter::once(false)
                .chain((0..n).map(|i| (m >> i) & 1 == 1))
                .collect();
            f.satisfied_by(&model)
        })
    }

    fn random_3cnf(vars: u32, clauses: usize, rng: &mut ChaCha8Rng) -> CnfFormula {
        let mut f = CnfFormula {
            var_count: vars,
            ..Default::default()
        };
        for _ in 0..clauses {
            let c: Vec<i32> = (0..3)
                .map(|_| {
                    let v = rng.gen_range(1..=vars) as i32;
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            f.add_clause(c);
        }
        f
    }

    #[test]
    fn contradiction_is_unsat() {
        let f = CnfFormula {
            var_count: 1,
            clauses: vec![vec![1], vec![-1]],
            ..Default::default()
        };
        let r = solve_sat(&f, None);
        assert_eq!(r.status, SatStatus::Unsat);
        assert!(r.model.is_none());
    }

    #[test]
    fn majority_pinned_high_gives_true_row() {
        let c = library::majority();
        let mut f = tseitin(&c);
        let o = f.var("maj").unwrap() as i32;
        f.add_clause(vec![o]);
        let r = solve_sat(&f, None);
        let m = r.model.unwrap();
        let ins: Vec<bool> = ["x1", "x2", "x3"]
            .iter()
            .map(|n| m[f.var(n).unwrap() as usize])
            .collect();
        assert!(ins.iter().filter(|b| **b).count() >= 2);
        assert_eq!(c.eval_bool(&ins), vec![true]);
    }

    #[test]
    fn random_3cnf_matches_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(3..=14);
            let m = (n as f64 * rng.gen_range(2.0..6.0)) as usize;
            let f = random_3cnf(n, m, &mut rng);
            let r = solve_sat(&f, None);
            assert_eq!(r.is_sat(), brute_force_sat(&f));
        }
    }

    #[test]
    fn random_3cnf_at_50_vars_ratio_3() {
        // ratio 3.0 is below the threshold: expect mostly SAT, models checked
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sat = 0;
        for _ in 0..100 {
            let f = random_3cnf(50, 150, &mut rng);
            let r = solve_sat(&f, Some(Duration::from_secs(10)));
            assert_ne!(r.status, SatStatus::Timeout);
            if let Some(m) = &r.model {
                assert!(f.satisfied_by(m));
                sat += 1;
            }
        }
        assert!(sat > 80);
    }

    #[test]
    fn timeout_is_a_status() {
        // pigeonhole 9 into 8 is hard enough to exceed a zero budget
        let (p, h) = (9usize, 8usize);
        let var = |i: usize, j: usize| (i * h + j + 1) as i32;
        let mut f = CnfFormula {
            var_count: (p * h) as u32,
            ..Default::default()
        };
        for i in 0..p {
            f.add_clause((0..h).map(|j| var(i, j)).collect());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    f.add_clause(vec![-var(a, j), -var(b, j)]);
                }
            }
        }
        let r = solve_sat(&f, Some(Duration::from_millis(0)));
        assert_eq!(r.status, SatStatus::Timeout);
    }
}
