use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("command template has no {{file}} placeholder")]
    NoPlaceholder,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver exited with {code:?} and no verdict")]
    ProcessFailed { code: Option<i32> },
    #[error("unparseable solver output: {0}")]
    Parse(String),
    #[error("solver timed out")]
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalKind {
    Dimacs,
    Qdimacs,
}

/// Verdict from an external solver. `model` holds the `v`/`V` literals
/// reported, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalVerdict {
    pub satisfiable: bool,
    pub model: Vec<i32>,
}

/// Writes `text` to a temporary file, runs `template` through `sh -c`
/// with `{file}` replaced by its path, and parses the answer.
pub fn run_external(
    template: &str,
    kind: ExternalKind,
    text: &str,
    timeout: Option<Duration>,
) -> Result<ExternalVerdict, ExternalError> {
    if !template.contains("{file}") {
        return Err(ExternalError::NoPlaceholder);
    }
    let suffix = match kind {
        ExternalKind::Dimacs => ".cnf",
        ExternalKind::Qdimacs => ".qdimacs",
    };
    let mut file = tempfile::Builder::new().suffix(suffix).tempfile()?;
    file.write_all(text.as_bytes())?;
    file.flush()?;
    let cmd = template.replace("{file}", &file.path().display().to_string());
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let deadline = timeout.map(|t| Instant::now() + t);
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ExternalError::Timeout);
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let out = reader.join().unwrap_or_default();
    parse_output(&out, status.code(), kind)
}

pub(crate) fn parse_output(
    out: &str,
    code: Option<i32>,
    kind: ExternalKind,
) -> Result<ExternalVerdict, ExternalError> {
    let mut verdict: Option<bool> = None;
    let mut model = Vec::new();
    for line in out.lines() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.first().copied() {
            Some("s") => {
                let v = match (kind, t.get(1).copied(), t.get(2).copied()) {
                    (_, Some("SATISFIABLE"), _) => true,
                    (_, Some("UNSATISFIABLE"), _) => false,
                    (ExternalKind::Qdimacs, Some("cnf"), Some("1")) => true,
                    (ExternalKind::Qdimacs, Some("cnf"), Some("0")) => false,
                    _ => return Err(ExternalError::Parse(line.to_string())),
                };
                verdict = Some(v);
            }
            Some("v") | Some("V") => {
                for tok in &t[1..] {
                    let l: i32 = tok
                        .parse()
                        .map_err(|_| ExternalError::Parse(line.to_string()))?;
                    if l != 0 {
                        model.push(l);
                    }
                }
            }
            _ => {}
        }
    }
    let from_code = match code {
        Some(10) => Some(true),
        Some(20) => Some(false),
        _ => None,
    };
    let satisfiable = match (verdict, from_code) {
        (Some(a), Some(b)) if a != b => {
            return Err(ExternalError::Parse(format!(
                "verdict line disagrees with exit code {code:?}"
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) if out.trim().is_empty() => return Err(ExternalError::ProcessFailed { code }),
        (None, None) => {
            return Err(ExternalError::Parse(
                out.lines().next().unwrap_or("").into(),
            ))
        }
    };
    Ok(ExternalVerdict { satisfiable, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sat_with_model() {
        let v = parse_output(
            "c hi\ns SATISFIABLE\nv 1 -2\nv 3 0\n",
            Some(10),
            ExternalKind::Dimacs,
        )
        .unwrap();
        assert!(v.satisfiable);
        assert_eq!(v.model, vec![1, -2, 3]);
    }

    #[test]
    fn parses_qdimacs_answer_and_exit_codes() {
        let v = parse_output("s cnf 0 3 4\n", None, ExternalKind::Qdimacs).unwrap();
        assert!(!v.satisfiable);
        let v = parse_output("", Some(20), ExternalKind::Dimacs).unwrap();
        assert!(!v.satisfiable);
    }

    #[test]
    fn malformed_output_is_an_error() {
        assert!(matches!(
            parse_output("s MAYBE\n", None, ExternalKind::Dimacs),
            Err(ExternalError::Parse(_))
        ));
        assert!(matches!(
            parse_output("garbage\n", Some(0), ExternalKind::Dimacs),
            Err(ExternalError::Parse(_))
        ));
        assert!(matches!(
            parse_output("s SATISFIABLE\n", Some(20), ExternalKind::Dimacs),
            Err(ExternalError::Parse(_))
        ));
    }

    #[test]
    fn runs_a_shell_solver() {
        let text = "p cnf 1 1\n1 0\n";
        let v = run_external(
            "grep -q 'p cnf' {file} && echo 's SATISFIABLE' && echo 'v 1 0'",
            ExternalKind::Dimacs,
            text,
            Some(Duration::from_secs(10)),
        )
        .unwrap();
        assert!(v.satisfiable);
        assert_eq!(v.model, vec![1]);
        assert!(matches!(
            run_external(
                "sleep 5; echo {file}",
                ExternalKind::Dimacs,
                text,
                Some(Duration::from_millis(100))
            ),
            Err(ExternalError::Timeout)
        ));
        assert!(matches!(
            run_external("true", ExternalKind::Dimacs, text, None),
            Err(ExternalError::NoPlaceholder)
        ));
    }
}
