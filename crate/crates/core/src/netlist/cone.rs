use std::collections::BTreeSet;

use super::{Circuit, Gate, GateKind, NetlistError, Result};

impl Circuit {
    /// Membership vector (by net id) of the transitive fanin of `roots`, roots included.
    pub fn fanin_mask(&self, roots: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.num_nets()];
        let mut stack: Vec<usize> = roots.to_vec();
        let base = self.inputs().len();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut mark[n], true) {
                continue;
            }
            if n >= base {
                stack.extend(self.fanin_ids(n - base).iter().copied());
            }
        }
        mark
    }

    /// Membership vector (by net id) of the transitive fanout of `roots`, roots included.
    pub fn fanout_mask(&self, roots: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.num_nets()];
        for &r in roots {
            mark[r] = true;
        }
        let base = self.inputs().len();
        for &g in self.topo_order() {
            if self.fanin_ids(g).iter().any(|&f| mark[f]) {
                mark[base + g] = true;
            }
        }
        mark
    }

    /// Inputs in the transitive fanin of `net`, in declaration order.
    pub fn support(&self, net: &str) -> Result<Vec<String>> {
        let id = self
            .net_id(net)
            .ok_or_else(|| NetlistError::UnknownNet(net.to_string()))?;
        let mask = self.fanin_mask(&[id]);
        Ok(self
            .inputs()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[*i])
            .map(|(_, n)| n.clone())
            .collect())
    }

    /// Sub-circuit made of the fanin cones of `outputs`. Its inputs are the
    /// cone leaves (declaration order); key classification is inherited.
    pub fn cone_circuit(&self, outputs: &[String]) -> Result<Circuit> {
        let mut roots = Vec::with_capacity(outputs.len());
        for o in outputs {
            roots.push(
                self.net_id(o)
                    .ok_or_else(|| NetlistError::UnknownNet(o.clone()))?,
            );
        }
        let mask = self.fanin_mask(&roots);
        let base = self.inputs().len();
        let inputs: Vec<String> = self
            .inputs()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[*i])
            .map(|(_, n)| n.clone())
            .collect();
        let keys = inputs
            .iter()
            .filter(|n| self.is_key_input(n))
            .cloned()
            .collect();
        let gates = self
            .gates()
            .iter()
            .enumerate()
            .filter(|(g, _)| mask[base + g])
            .map(|(_, g)| g.clone())
            .collect();
        Circuit::new(
            format!("{}_cone", self.name()),
            inputs,
            keys,
            outputs.to_vec(),
            gates,
        )
    }
}

/// Transitive successors of `net`, the net itself included.
pub fn fanout_cone(c: &Circuit, net: &str) -> Result<BTreeSet<String>> {
    let id = c
        .net_id(net)
        .ok_or_else(|| NetlistError::UnknownNet(net.to_string()))?;
    let mask = c.fanout_mask(&[id]);
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(i, _)| c.net_name(i).to_string())
        .collect())
}

/// Self-contained circuit computing `net` from its cone leaves. For an
/// input net the result is a single buffer driving `<net>_cone`.
pub fn fanin_cone(c: &Circuit, net: &str) -> Result<Circuit> {
    if c.is_input(net) {
        let out = format!("{net}_cone");
        let keys = if c.is_key_input(net) {
            vec![net.to_string()]
        } else {
            vec![]
        };
        return Circuit::new(
            format!("{}_cone", c.name()),
            vec![net.to_string()],
            keys,
            vec![out.clone()],
            vec![Gate {
                output: out,
                kind: GateKind::Buf,
                fanins: vec![net.to_string()],
            }],
        );
    }
    c.cone_circuit(&[net.to_string()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::library;

    #[test]
    fn cone_of_input_is_a_buffer() {
        let c = library::majority();
        let cone = fanin_cone(&c, "x2").unwrap();
        assert_eq!(cone.inputs(), &["x2"]);
        assert_eq!(cone.gates().len(), 1);
        assert_eq!(cone.gates()[0].kind, GateKind::Buf);
    }

    #[test]
    fn fanout_of_output_net_is_itself() {
        let c = library::majority();
        let fo = fanout_cone(&c, "maj").unwrap();
        assert_eq!(fo.into_iter().collect::<Vec<_>>(), vec!["maj".to_string()]);
    }

    #[test]
    fn fanout_and_fanin_of_c17() {
        let c = library::c17();
        let fo = fanout_cone(&c, "G11").unwrap();
        for n in ["G11", "G16", "G19", "G22", "G23"] {
            assert!(fo.contains(n), "{n}");
        }
        assert!(!fo.contains("G10"));
        let cone = fanin_cone(&c, "G22").unwrap();
        assert_eq!(cone.inputs(), &["G1", "G2", "G3", "G6"]);
        assert_eq!(cone.outputs(), &["G22"]);
        assert!(matches!(
            fanin_cone(&c, "nope"),
            Err(NetlistError::UnknownNet(_))
        ));
    }
}
