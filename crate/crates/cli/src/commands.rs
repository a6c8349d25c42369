use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::Context;

use lockbreak::attack::{
    attack as run_attack, verify_key, AttackConfig, AttackError, AttackReport, Classification,
    Mode, Reference,
};
use lockbreak::encode::{read_dimacs, read_qdimacs, CnfFormula, QbfProblem};
use lockbreak::key::{ordered_keys, parse_key};
use lockbreak::locking::{choose_protected_inputs, lock as lock_circuit, LockSpec, Scheme};
use lockbreak::netlist::{parse_bench, write_bench_with_header, Circuit, Tri};
use lockbreak::oracle::{serve as serve_oracle, OracleHandle};
use lockbreak::solve::{run_external, solve_2qbf, solve_sat, ExternalKind, QbfStatus, SatStatus};

use crate::corpus::Manifest;
use crate::{AttackArgs, Failure, Format, LockArgs, Outcome, ServeArgs, SolveArgs, VerifyArgs};

pub(crate) fn usage(m: impl std::fmt::Display) -> Failure {
    Failure::Usage(m.to_string())
}

pub(crate) fn read_bench(path: &Path, prefix: &str) -> Result<Circuit, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_bench(&text, prefix)
        .map(|c| c.with_name(name))
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub(crate) fn seconds(s: f64) -> Option<Duration> {
    (s > 0.0).then(|| Duration::from_secs_f64(s))
}

pub(crate) fn parse_mode(s: &str) -> Result<Mode, Failure> {
    s.parse().map_err(usage)
}

/// Opens `bench:PATH`, a bare bench path, or `cmd:COMMAND` as an oracle
/// whose inputs are the primary inputs of `locked`.
pub(crate) fn open_oracle(
    src: &str,
    locked: &Circuit,
    prefix: &str,
) -> Result<OracleHandle, Failure> {
    let pis = locked.primary_inputs();
    if let Some(cmd) = src.strip_prefix("cmd:") {
        return OracleHandle::open_external(cmd, pis, locked.outputs().to_vec())
            .map_err(|e| usage(format!("oracle `{cmd}`: {e}")));
    }
    let path = src.strip_prefix("bench:").unwrap_or(src);
    let orig = read_bench(Path::new(path), prefix)?;
    if !orig.key_inputs().is_empty() {
        return Err(usage(format!("oracle netlist {path} has key inputs")));
    }
    if orig.inputs() != pis.as_slice() || orig.outputs() != locked.outputs() {
        return Err(usage(format!(
            "oracle netlist {path} does not match the locked interface"
        )));
    }
    Ok(OracleHandle::simulated(&orig))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).context("writing stdout")?;
        }
    }
    Ok(())
}

pub(crate) fn lock(a: LockArgs) -> Outcome {
    let scheme: Scheme = a
        .scheme
        .as_deref()
        .ok_or_else(|| usage("lock needs --scheme"))?
        .parse()
        .map_err(usage)?;
    let key = a.key.as_deref().map(parse_key).transpose().map_err(usage)?;
    let width = match (&key, a.key_bits) {
        (Some(k), Some(w)) if k.len() != w => return Err(usage("--key and --key-bits disagree")),
        (Some(k), _) => k.len(),
        (None, Some(w)) => w,
        (None, None) => return Err(usage("lock needs --key or --key-bits")),
    };
    let per = scheme.keys_per_input();
    if width == 0 || width % per != 0 {
        return Err(usage(format!(
            "{scheme} needs a key width divisible by {per}"
        )));
    }
    let original = read_bench(&a.input, &a.common.key_prefix)?;
    let protected = if a.protected.is_empty() {
        choose_protected_inputs(&original, width / per, a.seed).map_err(usage)?
    } else if a.protected.len() == width / per {
        a.protected.clone()
    } else {
        return Err(usage(format!(
            "{width} key bits need {} protected inputs",
            width / per
        )));
    };
    let mut spec = LockSpec::random(scheme, protected, a.seed);
    if let Some(k) = key {
        spec.secret_key = k;
    }
    if !a.pairing.is_empty() {
        spec = spec.with_pairing(a.pairing.clone());
    }
    let mut bundle = lock_circuit(&original, &spec).map_err(usage)?;
    if !a.no_randomize {
        bundle = bundle.randomized(a.seed);
    }
    let bench = write_bench_with_header(&bundle.locked, &bundle.header());
    match &a.out {
        Some(p) => {
            emit(Some(p), &bench)?;
            let file = p
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            let m = Manifest::new(&bundle, file, a.input.display().to_string());
            let json = serde_json::to_string_pretty(&m).context("manifest")?;
            emit(Some(&p.with_extension("json")), &(json + "\n"))?;
        }
        None => emit(None, &bench)?,
    }
    Ok(())
}

pub(crate) fn attack_config(
    mode: Mode,
    qbf: f64,
    sat: Option<f64>,
    pi_fill: u8,
    seed: u64,
) -> AttackConfig {
    AttackConfig {
        mode,
        qbf_timeout: seconds(qbf),
        sat_timeout: sat.and_then(seconds),
        pi_fill: pi_fill == 1,
        seed,
        ..AttackConfig::default()
    }
}

pub(crate) fn attack_error(e: AttackError) -> Failure {
    match e {
        AttackError::NoOracle => usage(e),
        AttackError::NoKeys | AttackError::NotSfltOrDflt(_) | AttackError::Malformed(_) => {
            Failure::Negative(format!("attack failed: {e}"))
        }
        e => Failure::Internal(e.into()),
    }
}

/// Whether a report counts as a success for exit-code purposes.
pub(crate) fn succeeded(r: &AttackReport) -> bool {
    r.classification != Classification::Unknown
        && r.deciphered > 0
        && (r.mode == Mode::Ol || r.verified)
}

fn text_report(r: &AttackReport) -> String {
    let mut s = String::new();
    s += &format!("circuit        {}\n", r.circuit);
    s += &format!("mode           {:?}\n", r.mode);
    s += &format!("classification {:?}\n", r.classification);
    s += &format!("cs1            {}\n", r.cs1);
    s += &format!("key            {}\n", r.key);
    s += &format!("deciphered     {}/{}\n", r.deciphered, r.key_bits.len());
    s += &format!("verified       {}\n", r.verified);
    if let Some(p) = &r.match_pattern {
        s += &format!("match pattern  {p}\n");
    }
    s += &format!("oracle queries {}\n", r.oracle_queries);
    s += &format!("total          {:.1} ms\n", r.timings.total_ms);
    for n in &r.notes {
        s += &format!("note: {n}\n");
    }
    s
}

pub(crate) fn attack(a: AttackArgs) -> Outcome {
    let mode = parse_mode(&a.mode)?;
    if mode == Mode::Og && a.oracle.is_none() {
        return Err(usage("--mode og needs --oracle"));
    }
    let locked = read_bench(&a.input, &a.common.key_prefix)?;
    let mut oracle = a
        .oracle
        .as_deref()
        .map(|s| open_oracle(s, &locked, &a.common.key_prefix))
        .transpose()?;
    let cfg = attack_config(mode, a.qbf_timeout, a.sat_timeout, a.pi_fill, a.seed);
    let oracle = if mode == Mode::Og {
        oracle.as_mut()
    } else {
        None
    };
    let r = run_attack(&locked, &cfg, oracle).map_err(attack_error)?;
    let text = match a.format {
        Format::Json => r.to_json() + "\n",
        Format::Text => text_report(&r),
    };
    emit(a.out.as_deref(), &text)?;
    if succeeded(&r) {
        Ok(())
    } else {
        Err(Failure::Negative(format!(
            "no key recovered for {}",
            r.circuit
        )))
    }
}

pub(crate) fn verify(a: VerifyArgs) -> Outcome {
    let key = parse_key(&a.key).map_err(usage)?;
    let locked = read_bench(&a.input, &a.common.key_prefix)?;
    let names = ordered_keys(locked.key_inputs(), &a.common.key_prefix);
    if names.len() != key.len() {
        return Err(usage(format!(
            "{} has {} key inputs, key has {} bits",
            locked.name(),
            names.len(),
            key.len()
        )));
    }
    let bits: BTreeMap<String, Tri> = names
        .into_iter()
        .zip(key.iter().map(|&b| Tri::from_bool(b)))
        .collect();
    let ok = match (&a.original, &a.oracle) {
        (Some(p), _) => {
            let orig = read_bench(p, &a.common.key_prefix)?;
            verify_key(&locked, &bits, Reference::Original(&orig))
        }
        (None, Some(src)) => {
            let mut o = open_oracle(src, &locked, &a.common.key_prefix)?;
            verify_key(&locked, &bits, Reference::Oracle(&mut o))
        }
        (None, None) => return Err(usage("verify needs --original or --oracle")),
    }
    .map_err(|e| Failure::Internal(e.into()))?;
    if ok {
        println!("key {} correct", a.key.trim());
        Ok(())
    } else {
        Err(Failure::Negative(format!("key {} incorrect", a.key.trim())))
    }
}

fn model_line(vars: impl Iterator<Item = (u32, bool)>) -> String {
    let mut s = String::from("v");
    for (v, b) in vars {
        s += &format!(" {}", if b { v as i64 } else { -(v as i64) });
    }
    s + " 0"
}

/// Rebuilds the pinned 2QBF from a file in this tool's QDIMACS layout:
/// `e K`, `a P`, optional `e aux`, pinned literal as the last unit clause.
fn qbf_from_qdimacs(
    prefix: Vec<(char, Vec<u32>)>,
    mut matrix: CnfFormula,
) -> Result<QbfProblem, Failure> {
    let bad = || {
        usage("expected an exists-forall prefix with the pinned literal as the last unit clause")
    };
    let kinds: Vec<char> = prefix.iter().map(|(k, _)| *k).collect();
    if !(kinds == ['e', 'a'] || kinds == ['e', 'a', 'e']) {
        return Err(bad());
    }
    let last = matrix.clauses.pop().ok_or_else(bad)?;
    if last.len() != 1 {
        return Err(bad());
    }
    let lit = last[0];
    Ok(QbfProblem {
        exists_vars: prefix[0].1.iter().copied().collect::<BTreeSet<u32>>(),
        forall_vars: prefix[1].1.iter().copied().collect(),
        pinned_net: format!("v{}", lit.unsigned_abs()),
        pinned_var: lit.unsigned_abs(),
        pinned_value: lit > 0,
        matrix,
        hints: Vec::new(),
    })
}

pub(crate) fn solve(a: SolveArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| usage(format!("{}: {e}", a.input.display())))?;
    let quantified = text
        .lines()
        .any(|l| l.starts_with("a ") || l.starts_with("e "));
    let timeout = a.timeout.and_then(seconds);
    if let Some(t) = &a.external {
        let kind = if quantified {
            ExternalKind::Qdimacs
        } else {
            ExternalKind::Dimacs
        };
        let v = run_external(t, kind, &text, timeout).map_err(|e| Failure::Internal(e.into()))?;
        let word = match (quantified, v.satisfiable) {
            (false, true) => "SATISFIABLE",
            (false, false) => "UNSATISFIABLE",
            (true, true) => "TRUE",
            (true, false) => "FALSE",
        };
        println!("s {word}");
        return Ok(());
    }
    if quantified {
        let (prefix, matrix) = read_qdimacs(&text).map_err(usage)?;
        let q = qbf_from_qdimacs(prefix, matrix)?;
        let r = solve_2qbf(&q, timeout);
        match r.status {
            QbfStatus::True => {
                println!("s TRUE");
                println!(
                    "{}",
                    model_line(r.key_model.unwrap_or_default().into_iter())
                );
            }
            QbfStatus::False => println!("s FALSE"),
            QbfStatus::Timeout => return Err(Failure::Negative("s UNKNOWN".into())),
        }
    } else {
        let f = read_dimacs(&text).map_err(usage)?;
        let r = solve_sat(&f, timeout);
        match r.status {
            SatStatus::Sat => {
                println!("s SATISFIABLE");
                let m = r.model.unwrap_or_default();
                println!(
                    "{}",
                    model_line((1..m.len() as u32).map(|v| (v, m[v as usize])))
                );
            }
            SatStatus::Unsat => println!("s UNSATISFIABLE"),
            SatStatus::Timeout => return Err(Failure::Negative("s UNKNOWN".into())),
        }
    }
    Ok(())
}

pub(crate) fn serve(a: ServeArgs) -> Outcome {
    let c = read_bench(&a.input, &a.common.key_prefix)?;
    if !c.key_inputs().is_empty() {
        return Err(usage("oracle netlist has key inputs"));
    }
    serve_oracle(&c, std::io::stdin().lock(), std::io::stdout().lock())
        .context("serving oracle")?;
    Ok(())
}
