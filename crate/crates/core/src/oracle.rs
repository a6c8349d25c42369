//! Black-box access to a working chip: simulated from a hidden circuit or
//! an external process speaking a line protocol:
//!
//! ```text
//! <- HELLO <n_in> <n_out>
//! -> Q <bits>
//! <- A <bits>
//! ```
//!
//! Bit `i` on the wire is input (or output) `i` in declaration order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::Serialize;
use thiserror::Error;

use crate::netlist::Circuit;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("expected {expected} input bits, got {got}")]
    Width { expected: usize, got: usize },
    #[error("invalid bit `{0}` in query")]
    BadBit(char),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("oracle i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OracleKind {
    Simulated,
    External,
}

enum Backend {
    Sim(Circuit),
    Ext {
        child: Child,
        stdin: ChildStdin,
        stdout: BufReader<ChildStdout>,
    },
}

pub struct OracleHandle {
    kind: OracleKind,
    input_names: Vec<String>,
    output_names: Vec<String>,
    query_count: u64,
    backend: Backend,
}

impl std::fmt::Debug for OracleHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleHandle")
            .field("kind", &self.kind)
            .field("inputs", &self.input_names.len())
            .field("outputs", &self.output_names.len())
            .field("query_count", &self.query_count)
            .finish()
    }
}

fn parse_bits(s: &str) -> Result<Vec<bool>, OracleError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(OracleError::BadBit(other)),
        })
        .collect()
}

fn bits_to_string(b: &[bool]) -> String {
    b.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

impl OracleHandle {
    /// In-process oracle over `original`, which must have no key inputs.
    pub fn simulated(original: &Circuit) -> OracleHandle {
        assert!(
            original.key_inputs().is_empty(),
            "oracle circuit must be unlocked"
        );
        OracleHandle {
            kind: OracleKind::Simulated,
            input_names: original.inputs().to_vec(),
            output_names: original.outputs().to_vec(),
            query_count: 0,
            backend: Backend::Sim(original.clone()),
        }
    }

    /// Spawns `cmd` through `sh -c` and checks its handshake widths.
    pub fn open_external(
        cmd: &str,
        input_names: Vec<String>,
        output_names: Vec<String>,
    ) -> Result<OracleHandle, OracleError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut line = String::new();
        let n = stdout.read_line(&mut line)?;
        if n == 0 {
            let _ = child.kill();
            let _ = child.wait();
            return Err(OracleError::Handshake("process closed before HELLO".into()));
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        let widths = match t.as_slice() {
            ["HELLO", a, b] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
            _ => None,
        };
        let fail = |child: &mut Child, msg: String| {
            let _ = child.kill();
            let _ = child.wait();
            Err(OracleError::Handshake(msg))
        };
        match widths {
            None => fail(&mut child, format!("bad greeting `{}`", line.trim())),
            Some((i, o)) if i != input_names.len() || o != output_names.len() => fail(
                &mut child,
                format!(
                    "oracle declares {i} inputs / {o} outputs, expected {} / {}",
                    input_names.len(),
                    output_names.len()
                ),
            ),
            Some(_) => Ok(OracleHandle {
                kind: OracleKind::External,
                input_names,
                output_names,
                query_count: 0,
                backend: Backend::Ext {
                    child,
                    stdin,
                    stdout,
                },
            }),
        }
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn query(&mut self, inputs: &[bool]) -> Result<Vec<bool>, OracleError> {
        if inputs.len() != self.input_names.len() {
            return Err(OracleError::Width {
                expected: self.input_names.len(),
                got: inputs.len(),
            });
        }
        let out = match &mut self.backend {
            Backend::Sim(c) => c.eval_bool(inputs),
            Backend::Ext { stdin, stdout, .. } => {
                writeln!(stdin, "Q {}", bits_to_string(inputs))?;
                stdin.flush()?;
                let mut line = String::new();
                if stdout.read_line(&mut line)? == 0 {
                    return Err(OracleError::Protocol("oracle closed its output".into()));
                }
                let bits = line.trim().strip_prefix("A ").ok_or_else(|| {
                    OracleError::Protocol(format!("unexpected reply `{}`", line.trim()))
                })?;
                let v = parse_bits(bits)?;
                if v.len() != self.output_names.len() {
                    return Err(OracleError::Protocol(format!(
                        "reply has {} bits, expected {}",
                        v.len(),
                        self.output_names.len()
                    )));
                }
                v
            }
        };
        self.query_count += 1;
        Ok(out)
    }

    /// Query from a `0`/`1` string; `X` is rejected.
    pub fn query_str(&mut self, s: &str) -> Result<String, OracleError> {
        let bits = parse_bits(s.trim())?;
        Ok(bits_to_string(&self.query(&bits)?))
    }

    /// Bit-parallel query of `lanes` vectors packed in words (one word per
    /// input). Counts one query per lane.
    pub fn query_words(&mut self, inputs: &[u64], lanes: u32) -> Result<Vec<u64>, OracleError> {
        assert!((1..=64).contains(&lanes));
        if inputs.len() != self.input_names.len() {
            return Err(OracleError::Width {
                expected: self.input_names.len(),
                got: inputs.len(),
            });
        }
        if let Backend::Sim(c) = &self.backend {
            self.query_count += lanes as u64;
            return Ok(c.eval_words(inputs));
        }
        let mut out = vec![0u64; self.output_names.len()];
        for lane in 0..lanes {
            let v: Vec<bool> = inputs.iter().map(|w| (w >> lane) & 1 == 1).collect();
            for (o, b) in out.iter_mut().zip(self.query(&v)?) {
                *o |= (b as u64) << lane;
            }
        }
        Ok(out)
    }
}

impl Drop for OracleHandle {
    fn drop(&mut self) {
        if let Backend::Ext { child, .. } = &mut self.backend {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Serves the protocol for `c` until end of input.
pub fn serve<R: BufRead, W: Write>(c: &Circuit, input: R, mut output: W) -> std::io::Result<()> {
    writeln!(output, "HELLO {} {}", c.inputs().len(), c.outputs().len())?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let reply = match line.strip_prefix("Q ").map(parse_bits) {
            Some(Ok(bits)) if bits.len() == c.inputs().len() => {
                format!("A {}", bits_to_string(&c.eval_bool(&bits)))
            }
            Some(Ok(bits)) => format!("E width {} != {}", bits.len(), c.inputs().len()),
            Some(Err(e)) => format!("E {e}"),
            None => "E expected `Q <bits>`".to_string(),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::library;

    #[test]
    fn simulated_majority() {
        let mut o = OracleHandle::simulated(&library::majority());
        // x1 x2 x3 on the wire
        assert_eq!(o.query_str("110").unwrap(), "1");
        assert_eq!(o.query_count(), 1);
        assert!(matches!(o.query_str("1X0"), Err(OracleError::BadBit('X'))));
        assert!(matches!(o.query(&[true]), Err(OracleError::Width { .. })));
        assert_eq!(o.query_count(), 1);
    }

    #[test]
    fn serve_answers_queries() {
        let c = library::majority();
        let mut out = Vec::new();
        serve(&c, "Q 011\nQ 1\nbogus\n".as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "HELLO 3 1");
        assert_eq!(lines[1], "A 1");
        assert!(lines[2].starts_with("E "));
        assert!(lines[3].starts_with("E "));
    }

    #[test]
    fn external_handshake_errors() {
        let ins = vec!["a".to_string()];
        let outs = vec!["o".to_string()];
        assert!(matches!(
            OracleHandle::open_external("true", ins.clone(), outs.clone()),
            Err(OracleError::Handshake(_))
        ));
        assert!(matches!(
            OracleHandle::open_external("echo HELLO 2 1; cat", ins.clone(), outs.clone()),
            Err(OracleError::Handshake(_))
        ));
        // an echo-style oracle: identity on one bit
        let mut o = OracleHandle::open_external(
            "echo HELLO 1 1; while read q b; do echo A $b; done",
            ins,
            outs,
        )
        .unwrap();
        assert_eq!(o.query(&[true]).unwrap(), vec![true]);
        assert_eq!(o.query(&[false]).unwrap(), vec![false]);
        assert_eq!(o.query_count(), 2);
    }
}
