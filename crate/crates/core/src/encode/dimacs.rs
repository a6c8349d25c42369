use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{CnfFormula, Lit, QbfProblem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing problem line")]
    MissingHeader,
    #[error("expected {expected} clauses, found {found}")]
    ClauseCount { expected: usize, found: usize },
}

pub fn write_dimacs(f: &CnfFormula) -> String {
    let mut s = String::new();
    for (name, v) in &f.var_map {
        let _ = writeln!(s, "c {v} {name}");
    }
    let _ = writeln!(s, "p cnf {} {}", f.var_count, f.clauses.len());
    push_clauses(&mut s, &f.clauses);
    s
}

fn push_clauses(s: &mut String, clauses: &[Vec<Lit>]) {
    for c in clauses {
        for l in c {
            let _ = write!(s, "{l} ");
        }
        s.push_str("0\n");
    }
}

/// The pinned output appears as a unit clause at the end of the matrix.
pub fn write_qdimacs(q: &QbfProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "c pinned {} = {}", q.pinned_net, q.pinned_value as u8);
    let _ = writeln!(
        s,
        "p cnf {} {}",
        q.matrix.var_count,
        q.matrix.clauses.len() + 1
    );
    let block = |s: &mut String, tag: char, vars: &mut dyn Iterator<Item = u32>| {
        let mut line = String::new();
        for v in vars {
            let _ = write!(line, "{v} ");
        }
        if !line.is_empty() {
            let _ = writeln!(s, "{tag} {line}0");
        }
    };
    block(&mut s, 'e', &mut q.exists_vars.iter().copied());
    block(&mut s, 'a', &mut q.forall_vars.iter().copied());
    block(&mut s, 'e', &mut q.aux_vars().into_iter());
    push_clauses(&mut s, &q.matrix.clauses);
    let p = q.pinned_var as Lit;
    let _ = writeln!(s, "{} 0", if q.pinned_value { p } else { -p });
    s
}

struct Parsed {
    vars: u32,
    clauses: Vec<Vec<Lit>>,
    prefix: Vec<(char, Vec<u32>)>,
}

fn parse(text: &str) -> Result<Parsed, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut prefix = Vec::new();
    let mut cur: Vec<Lit> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let ln = i + 1;
        let err = |msg: &str| DimacsError::Syntax {
            line: ln,
            msg: msg.to_string(),
        };
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() != 3 || t[0] != "cnf" {
                return Err(err("malformed problem line"));
            }
            let v = t[1].parse().map_err(|_| err("bad variable count"))?;
            let c = t[2].parse().map_err(|_| err("bad clause count"))?;
            header = Some((v, c));
            continue;
        }
        let (vars, _) = header.ok_or(DimacsError::MissingHeader)?;
        let mut toks = line.split_whitespace().peekable();
        if let Some(&q @ ("e" | "a")) = toks.peek() {
            toks.next();
            let mut vs = Vec::new();
            for t in toks {
                let v: u32 = t.parse().map_err(|_| err("bad quantified variable"))?;
                if v == 0 {
                    break;
                }
                if v > vars {
                    return Err(err("variable out of range"));
                }
                vs.push(v);
            }
            prefix.push((q.chars().next().unwrap(), vs));
            continue;
        }
        for t in toks {
            let l: Lit = t.parse().map_err(|_| err("bad literal"))?;
            if l == 0 {
                clauses.push(std::mem::take(&mut cur));
            } else {
                if l.unsigned_abs() > vars {
                    return Err(err("literal out of range"));
                }
                cur.push(l);
            }
        }
    }
    let (vars, count) = header.ok_or(DimacsError::MissingHeader)?;
    if !cur.is_empty() {
        clauses.push(cur);
    }
    if clauses.len() != count {
        return Err(DimacsError::ClauseCount {
            expected: count,
            found: clauses.len(),
        });
    }
    Ok(Parsed {
        vars,
        clauses,
        prefix,
    })
}

/// Reads plain DIMACS; `c <var> <name>` comments rebuild the name map.
pub fn read_dimacs(text: &str) -> Result<CnfFormula, DimacsError> {
    let p = parse(text)?;
    let mut f = CnfFormula {
        var_count: p.vars,
        clauses: p.clauses,
        ..Default::default()
    };
    for line in text.lines() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() == 3 && t[0] == "c" {
            if let Ok(v) = t[1].parse::<u32>() {
                f.var_map.insert(t[2].to_string(), v);
            }
        }
    }
    Ok(f)
}

/// Quantifier prefix as (kind, vars) blocks in order, plus the matrix.
pub fn read_qdimacs(text: &str) -> Result<(Vec<(char, Vec<u32>)>, CnfFormula), DimacsError> {
    let p = parse(text)?;
    let f = CnfFormula {
        var_count: p.vars,
        clauses: p.clauses,
        ..Default::default()
    };
    let mut seen = BTreeSet::new();
    for (_, vs) in &p.prefix {
        for v in vs {
            if !seen.insert(*v) {
                return Err(DimacsError::Syntax {
                    line: 0,
                    msg: format!("variable {v} quantified twice"),
                });
            }
        }
    }
    Ok((p.prefix, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{build_unit_qbf, tseitin};
    use crate::netlist::{library, parse_bench};

    #[test]
    fn cnf_round_trip() {
        let f = tseitin(&library::c17());
        let g = read_dimacs(&write_dimacs(&f)).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn qdimacs_layout() {
        let c = parse_bench(
            "INPUT(x1)\nINPUT(keyinput1)\nOUTPUT(o)\no = XNOR(x1, keyinput1)\n",
            "keyinput",
        )
        .unwrap();
        let q = build_unit_qbf(&c, &["x1".into()], &["keyinput1".into()], true).unwrap();
        let text = write_qdimacs(&q);
        assert!(text.contains("\ne 2 0\na 1 0\ne 3 0\n"));
        let (prefix, m) = read_qdimacs(&text).unwrap();
        assert_eq!(prefix, vec![('e', vec![2]), ('a', vec![1]), ('e', vec![3])]);
        assert_eq!(m.clauses.last().unwrap(), &vec![3]);
        assert_eq!(m.clauses.len(), q.matrix.clauses.len() + 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(read_dimacs("1 2 0\n"), Err(DimacsError::MissingHeader));
        assert!(matches!(
            read_dimacs("p cnf 2 1\n1 3 0\n"),
            Err(DimacsError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            read_dimacs("p cnf 2 2\n1 2 0\n"),
            Err(DimacsError::ClauseCount { .. })
        ));
    }
}
