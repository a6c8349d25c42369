use std::fmt::Write as _;

use super::{Circuit, Gate, GateKind, NetlistError, Result};

pub const DEFAULT_KEY_PREFIX: &str = "keyinput";

/// Parses ISCAS-style bench text. Inputs whose name starts with
/// `key_prefix` are classified as key inputs.
pub fn parse_bench(text: &str, key_prefix: &str) -> Result<Circuit> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: &str| NetlistError::Syntax {
            line: line_no,
            msg: msg.to_string(),
        };
        if let Some((lhs, rhs)) = line.split_once('=') {
            let out = lhs.trim();
            if out.is_empty() || !is_net_name(out) {
                return Err(syntax("bad gate output name"));
            }
            let (kind, args) =
                split_call(rhs.trim()).ok_or_else(|| syntax("expected KIND(args)"))?;
            let kind = GateKind::from_name(kind).ok_or_else(|| NetlistError::UnknownGate {
                line: line_no,
                kind: kind.to_string(),
            })?;
            let fanins: Vec<String> = if args.trim().is_empty() {
                Vec::new()
            } else {
                args.split(',').map(|a| a.trim().to_string()).collect()
            };
            if fanins.iter().any(|f| !is_net_name(f)) {
                return Err(syntax("bad fanin name"));
            }
            gates.push(Gate {
                output: out.to_string(),
                kind,
                fanins,
            });
        } else {
            let (decl, arg) = split_call(line).ok_or_else(|| syntax("expected declaration"))?;
            let arg = arg.trim();
            if !is_net_name(arg) {
                return Err(syntax("bad net name"));
            }
            match decl.to_ascii_uppercase().as_str() {
                "INPUT" => inputs.push(arg.to_string()),
                "OUTPUT" => outputs.push(arg.to_string()),
                _ => return Err(syntax("expected INPUT, OUTPUT or assignment")),
            }
        }
    }
    let keys = inputs
        .iter()
        .filter(|n| n.starts_with(key_prefix))
        .cloned()
        .collect();
    Circuit::new("bench", inputs, keys, outputs, gates)
}

fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    if !s.ends_with(')') {
        return None;
    }
    let head = s[..open].trim();
    if head.is_empty() {
        return None;
    }
    Some((head, &s[open + 1..s.len() - 1]))
}

fn is_net_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | '=' | '#'))
}

/// Serializes a circuit in bench format, gates in their stored order.
pub fn write_bench(c: &Circuit) -> String {
    write_bench_with_header(c, &[])
}

/// Like [`write_bench`], with leading `# name=value` comment lines.
pub fn write_bench_with_header(c: &Circuit, header: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in header {
        let _ = writeln!(s, "# {k}={v}");
    }
    for i in c.inputs() {
        let _ = writeln!(s, "INPUT({i})");
    }
    for o in c.outputs() {
        let _ = writeln!(s, "OUTPUT({o})");
    }
    for g in c.gates() {
        let _ = writeln!(s, "{} = {}({})", g.output, g.kind, g.fanins.join(", "));
    }
    s
}

/// Looks up a `# name=value` comment in bench text.
pub fn header_value<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        let rest = l.trim().strip_prefix('#')?.trim();
        let (k, v) = rest.split_once('=')?;
        (k.trim() == name).then(|| v.trim())
    })
}
